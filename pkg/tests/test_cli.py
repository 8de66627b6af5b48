import json
import shutil

import pytest

from avsd.cli import load_experiment_matrix, main
from avsd.model import ConfigError

from conftest import FIXTURES


def test_analyze(capsys, tmp_path):
    assert main(["analyze", "--data", str(FIXTURES / "mini.json"), "--csv", str(tmp_path / "a.csv"),
                 "--figures", str(tmp_path / "fig")]) == 0
    out = capsys.readouterr().out
    assert "binary questions" in out and "dialogs" in out
    assert (tmp_path / "a.csv").read_text().startswith("statistic,value")
    assert (tmp_path / "fig" / "lengths.png").stat().st_size > 0


def test_data_dir_env(monkeypatch, tmp_path, capsys):
    shutil.copy(FIXTURES / "mini.json", tmp_path / "train.json")
    monkeypatch.setenv("AVSD_DATA_DIR", str(tmp_path))
    assert main(["analyze"]) == 0
    monkeypatch.delenv("AVSD_DATA_DIR")
    assert main(["analyze"]) == 1
    assert "AVSD_DATA_DIR" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["nonsense"]) == 2
    assert main(["analyze", "--bogus-flag"]) == 2
    assert "usage" in capsys.readouterr().err


def test_train_topic_mode_needs_models(capsys, tmp_path):
    rc = main(["train", "--train", str(FIXTURES / "mini_train.json"), "--valid", str(FIXTURES / "mini_valid.json"),
               "--topic-mode", "features_all", "--out", str(tmp_path)])
    err = capsys.readouterr().err.strip().splitlines()
    assert rc == 1 and len(err) == 1 and "--topic-models" in err[0]


def test_bad_enum_is_config_error(capsys, tmp_path):
    rc = main(["train", "--train", str(FIXTURES / "mini_train.json"), "--valid", str(FIXTURES / "mini_valid.json"),
               "--attention-mode", "sentAll", "--out", str(tmp_path)])
    assert rc == 1 and "sent_all" in capsys.readouterr().err


def _grid(tmp_path, entries):
    p = tmp_path / "grid.json"
    p.write_text(json.dumps(entries))
    return p


def _entry(name, **model):
    return {"name": name, "train_data": str(FIXTURES / "mini_train.json"),
            "valid_data": str(FIXTURES / "mini_valid.json"), "model": model, "train": {"max_epochs": 1}}


def test_load_experiment_matrix(tmp_path):
    specs = load_experiment_matrix(_grid(tmp_path, [_entry("a", attention_mode="sent_all")]))
    assert specs[0].model["attention_mode"] == "sent_all" and specs[0].min_frequency == 1
    with pytest.raises(ConfigError, match="attention_mode.*none, word_all, word_last, sent_all"):
        load_experiment_matrix(_grid(tmp_path, [_entry("a", attention_mode="sentAll")]))
    with pytest.raises(ConfigError, match="duplicate"):
        load_experiment_matrix(_grid(tmp_path, [_entry("a"), _entry("a")]))
    with pytest.raises(ConfigError, match="unknown fields"):
        load_experiment_matrix(_grid(tmp_path, [{**_entry("a"), "colour": 1}]))
    assert load_experiment_matrix(_grid(tmp_path, [])) == []


def test_relative_paths_resolve_against_spec(tmp_path):
    specs = load_experiment_matrix(FIXTURES / "grid.json")
    assert [s.name for s in specs] == ["baseline", "sent_all_aclnet", "guided_qa_caption"]
    assert specs[0].train_data == str(FIXTURES / "mini_train.json")


def test_empty_matrix_runs(tmp_path):
    assert main(["matrix", "--spec", str(_grid(tmp_path, [])), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "manifest.json").exists()


def test_matrix_writes_records_and_reports(tmp_path):
    assert main(["matrix", "--spec", str(FIXTURES / "grid.json"), "--out", str(tmp_path)]) == 0
    for name in ("baseline", "sent_all_aclnet", "guided_qa_caption"):
        d = tmp_path / name
        rec = json.loads((d / "run_record.json").read_text())
        assert rec["best_epoch"] >= 0
        assert (d / "eval.csv").exists() and (d / "eval.txt").exists()
        assert (d / "figures" / "eval_metrics.png").exists()
        manifest = json.loads((d / "manifest.json").read_text())
        assert manifest["seeds"]["model"] == 3 and "torch" in manifest["versions"]
    assert (tmp_path / "matrix.csv").read_text().startswith("experiment,metric,subset,score,n_examples")


def test_topics_train_and_infer(tmp_path, capsys):
    out = tmp_path / "tm"
    with pytest.warns(UserWarning, match="seed words not in"):
        assert main(["topics-train", "--data", str(FIXTURES / "mini_train.json"), "--category", "caption",
                     "--seeds", str(FIXTURES / "seeds_tiny.json"), "--iters", "20", "--out", str(out)]) == 0
    assert (out / "caption.json").exists() and (out / "manifest.json").exists()
    assert main(["topics-infer", "--model", str(out / "caption.json"), "--text", "he is cooking in the kitchen",
                 "--csv", str(tmp_path / "d.csv")]) == 0
    assert "Kitchen" in capsys.readouterr().out
    assert main(["topics-train", "--data", str(FIXTURES / "mini_train.json"), "--category", "caption",
                 "--unguided", "--k", "1", "--out", str(out)]) == 1


def test_train_generate_evaluate_deterministic(tmp_path):
    base = ["train", "--train", str(FIXTURES / "mini_train.json"), "--valid", str(FIXTURES / "mini_valid.json"),
            "--features", str(FIXTURES / "features"), "--audio-mode", "aclnet50", "--attention-mode",
            "sent_all_multimodal", "--embed-dim", "8", "--hidden-dim", "8", "--epochs", "2", "--min-frequency", "1",
            "--rng-seed", "4"]
    assert main(base + ["--out", str(tmp_path / "t")]) == 0
    ckpt = tmp_path / "t" / "checkpoints" / (tmp_path / "t" / "checkpoints" / "run.best").read_text().strip()
    results = []
    for k in range(2):
        gen = tmp_path / f"g{k}" / "gen.json"
        assert main(["generate", "--checkpoint", str(ckpt), "--data", str(FIXTURES / "mini_test.json"),
                     "--features", str(FIXTURES / "features"), "--strategy", "beam", "--beam-width", "2",
                     "--out", str(gen)]) == 0
        assert main(["evaluate", "--generated", str(gen), "--out", str(tmp_path / f"e{k}")]) == 0
        results.append(((tmp_path / f"g{k}" / "gen.json").read_text(), (tmp_path / f"e{k}" / "eval.csv").read_text()))
    assert results[0] == results[1]
    assert len(json.loads(results[0][0])) == 12
