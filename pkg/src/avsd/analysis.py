"""Dataset forensics: utterance lengths and keyword-based turn classifiers."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from .corpus import Dialog, Utterance, tokenize

_KEY_FIELDS = ("binary_question_starters", "binary_answer_markers", "pronouns", "audio_keywords")


@dataclass(frozen=True)
class KeywordSets:
    binary_question_starters: frozenset
    binary_answer_markers: frozenset
    pronouns: frozenset
    audio_keywords: frozenset
    affirmative_markers: frozenset = frozenset({"yes", "yeah", "yep", "yup", "yea"})

    def __post_init__(self):
        for name in _KEY_FIELDS + ("affirmative_markers",):
            for w in getattr(self, name):
                if not w or w != w.lower():
                    raise ValueError(f"{name}: keyword {w!r} must be nonempty lowercase")

    @classmethod
    def from_json(cls, obj: dict) -> "KeywordSets":
        missing = [k for k in _KEY_FIELDS if k not in obj]
        if missing:
            raise ValueError(f"keyword config missing arrays: {', '.join(missing)}")
        kw = {k: frozenset(obj[k]) for k in _KEY_FIELDS}
        if "affirmative_markers" in obj:
            kw["affirmative_markers"] = frozenset(obj["affirmative_markers"])
        return cls(**kw)

    @classmethod
    def load(cls, path=None) -> "KeywordSets":
        if path is None:
            text = resources.files("avsd").joinpath("data/keywords.json").read_text()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        return cls.from_json(json.loads(text))

    def to_json(self) -> dict:
        return {k: sorted(getattr(self, k)) for k in _KEY_FIELDS + ("affirmative_markers",)}


def default_keywords() -> KeywordSets:
    return KeywordSets.load()


def _tokens(u) -> Sequence[str]:
    if isinstance(u, Utterance):
        return u.tokens
    if isinstance(u, str):
        return tokenize(u)
    return u


@dataclass(frozen=True)
class LengthStats:
    mean: float
    std: float
    min: int
    max: int
    n: int


def length_stats(utterances: Iterable) -> LengthStats:
    """Population mean/std and range of token counts."""
    lengths = [len(_tokens(u)) for u in utterances]
    if not lengths:
        raise ValueError("length_stats needs at least one utterance")
    n = len(lengths)
    mean = sum(lengths) / n
    var = sum((x - mean) ** 2 for x in lengths) / n
    return LengthStats(mean, math.sqrt(var), min(lengths), max(lengths), n)


def is_binary_question(q, ks: KeywordSets) -> bool:
    toks = _tokens(q)
    return bool(toks) and toks[0] in ks.binary_question_starters


def is_binary_answer(a, ks: KeywordSets) -> tuple[bool, str | None]:
    """Return ``(is_binary, polarity)``; the first marker in the answer decides polarity."""
    for tok in _tokens(a):
        if tok in ks.binary_answer_markers:
            return True, "yes" if tok in ks.affirmative_markers else "no"
    return False, None


def has_coreference(u, ks: KeywordSets) -> bool:
    return any(tok in ks.pronouns for tok in _tokens(u))


def is_audio_related(u, ks: KeywordSets) -> bool:
    # stem match: a keyword matches any token it prefixes ("hear" -> "heard")
    return any(tok.startswith(kw) for tok in _tokens(u) for kw in ks.audio_keywords)


@dataclass(frozen=True)
class TurnFlags:
    dialog_index: int
    turn_index: int
    binary_question: bool
    binary_answer: bool
    answer_polarity_yes: bool | None
    has_coref_q: bool
    has_coref_a: bool
    audio_q: bool
    audio_a: bool


SUBSET_FLAGS = ("binary_question", "binary_answer", "has_coref_q", "has_coref_a", "audio_q", "audio_a")


class SubsetMask:
    """Per-turn flags in dialog order; ``mask(name)`` / ``mask('not_' + name)`` give boolean lists."""

    def __init__(self, flags: list[TurnFlags]):
        self.flags = flags
        for f in flags:
            if f.answer_polarity_yes is not None and not f.binary_answer:
                raise ValueError("polarity defined on a non-binary answer")

    def __len__(self):
        return len(self.flags)

    def mask(self, name: str) -> list[bool]:
        negate = name.startswith("not_")
        key = name[4:] if negate else name
        if key not in SUBSET_FLAGS:
            raise KeyError(f"unknown subset {name!r}; choose from {SUBSET_FLAGS} or their not_ forms")
        vals = [bool(getattr(f, key)) for f in self.flags]
        return [not v for v in vals] if negate else vals

    def polarities(self) -> list[str | None]:
        out = []
        for f in self.flags:
            if f.answer_polarity_yes is None:
                out.append(None)
            else:
                out.append("yes" if f.answer_polarity_yes else "no")
        return out


def classify_turn(question, answer, ks: KeywordSets, dialog_index: int = 0, turn_index: int = 0) -> TurnFlags:
    binary, pol = is_binary_answer(answer, ks)
    return TurnFlags(
        dialog_index, turn_index,
        binary_question=is_binary_question(question, ks),
        binary_answer=binary,
        answer_polarity_yes=None if pol is None else pol == "yes",
        has_coref_q=has_coreference(question, ks),
        has_coref_a=has_coreference(answer, ks),
        audio_q=is_audio_related(question, ks),
        audio_a=is_audio_related(answer, ks),
    )


def make_subsets(dialogs: Sequence[Dialog], ks: KeywordSets) -> SubsetMask:
    flags = []
    for di, d in enumerate(dialogs):
        for t in d.turns:
            flags.append(classify_turn(t.question, t.answer, ks, di, t.turn_index))
    return SubsetMask(flags)


@dataclass
class DatasetSummary:
    n_dialogs: int
    n_turns: int
    n_words: int
    questions: LengthStats
    answers: LengthStats
    pct: dict

    def rows(self) -> list[tuple[str, str]]:
        q, a = self.questions, self.answers
        rows = [
            ("dialogs", str(self.n_dialogs)),
            ("turns", str(self.n_turns)),
            ("words (q+a+caption)", str(self.n_words)),
            ("question length mean/std", f"{q.mean:.2f} / {q.std:.2f}"),
            ("question length range", f"[{q.min}, {q.max}]"),
            ("answer length mean/std", f"{a.mean:.2f} / {a.std:.2f}"),
            ("answer length range", f"[{a.min}, {a.max}]"),
        ]
        rows += [(k, f"{v:.2f}%") for k, v in self.pct.items()]
        return rows


def summarize(dialogs: Sequence[Dialog], ks: KeywordSets) -> DatasetSummary:
    qs = [t.question for d in dialogs for t in d.turns]
    ans = [t.answer for d in dialogs for t in d.turns]
    mask = make_subsets(dialogs, ks)
    n = len(mask)

    def pct(xs):
        return 100.0 * sum(xs) / len(xs) if xs else float("nan")

    pols = [p for p in mask.polarities() if p is not None]
    percentages = {
        "binary questions": pct(mask.mask("binary_question")),
        "binary answers": pct(mask.mask("binary_answer")),
        "yes among binary answers": pct([p == "yes" for p in pols]),
        "questions with pronouns": pct(mask.mask("has_coref_q")),
        "answers with pronouns": pct(mask.mask("has_coref_a")),
        "audio-related questions": pct(mask.mask("audio_q")),
        "audio-related answers": pct(mask.mask("audio_a")),
    }
    words = sum(len(u) for u in qs) + sum(len(u) for u in ans) + sum(len(d.caption) for d in dialogs)
    return DatasetSummary(len(dialogs), n, words, length_stats(qs), length_stats(ans), percentages)
