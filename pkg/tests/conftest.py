import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def official_data_dir():
    """Directory holding the official train.json, or None (dataset-conditional checks skip)."""
    base = os.environ.get("AVSD_DATA_DIR")
    if base and (Path(base) / "train.json").exists():
        return Path(base)
    return None


# -- acceptance summary: one pass/fail line per criterion --------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    n = props["criterion"]
    outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
    prev = _CRITERIA.get(n)
    detail = props.get("detail", "")
    if prev is not None:
        # a criterion split over several tests passes only if every part passes
        rank = {"FAIL": 2, "SKIP": 1, "PASS": 0}
        outcome = max(prev[0], outcome, key=rank.get)
        detail = "; ".join(d for d in (prev[2], detail) if d)
    _CRITERIA[n] = (outcome, props.get("title", ""), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        outcome, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n} {outcome}: {title}" + (f" ({detail})" if detail else ""))
