"""Dialog data, vocabulary, word vectors and precomputed modality features."""
from __future__ import annotations

import json
import os
import zlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED = ("<pad>", "<unk>", "<bos>", "<eos>")

_PUNCT = set(".,?!';:\"")

AUDIO_DIMS = {"vggish": 128, "aclnet": 50}


class DatasetError(ValueError):
    pass


class SchemaError(DatasetError):
    pass


class FeatureFormatError(ValueError):
    pass


class FeatureLookupError(LookupError):
    pass


class WordVectorFormatError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace and detach leading/trailing punctuation.

    Each detached punctuation character becomes its own token; punctuation
    inside a word (``didn't``, ``walk-in``) is kept.
    """
    tokens: list[str] = []
    for chunk in text.lower().split():
        head: list[str] = []
        tail: list[str] = []
        i, j = 0, len(chunk)
        while i < j and chunk[i] in _PUNCT:
            head.append(chunk[i])
            i += 1
        while j > i and chunk[j - 1] in _PUNCT:
            tail.append(chunk[j - 1])
            j -= 1
        tokens.extend(head)
        if i < j:
            tokens.append(chunk[i:j])
        tokens.extend(reversed(tail))
    return tokens


@dataclass(frozen=True)
class Utterance:
    raw_text: str
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, text: str) -> "Utterance":
        return cls(text, tuple(tokenize(text)))

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class DialogTurn:
    question: Utterance
    answer: Utterance
    turn_index: int


@dataclass(frozen=True)
class Dialog:
    video_id: str
    caption: Utterance
    turns: tuple[DialogTurn, ...]

    def __post_init__(self):
        if not self.video_id:
            raise SchemaError("dialog video_id must be nonempty")
        if not self.turns:
            raise SchemaError(f"dialog {self.video_id!r} has no turns")
        idx = [t.turn_index for t in self.turns]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise SchemaError(f"dialog {self.video_id!r}: turn indices not increasing")


def make_dialog(video_id: str, caption: str, qa: Sequence[tuple[str, str]]) -> Dialog:
    turns = tuple(
        DialogTurn(Utterance.from_text(q), Utterance.from_text(a), i) for i, (q, a) in enumerate(qa)
    )
    return Dialog(video_id, Utterance.from_text(caption), turns)


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"missing required field {key!r} in {where}")
    return obj[key]


def parse_dataset(payload: dict) -> list[Dialog]:
    entries = _require(payload, "dialogs", "top-level object")
    if not isinstance(entries, list):
        raise SchemaError("'dialogs' must be an array")
    dialogs = []
    for i, entry in enumerate(entries):
        where = f"dialogs[{i}]"
        vid = _require(entry, "image_id", where)
        caption = _require(entry, "caption", where)
        turns = _require(entry, "dialog", where)
        if not isinstance(turns, list):
            raise SchemaError(f"{where}.dialog must be an array")
        qa = []
        for j, turn in enumerate(turns):
            q = _require(turn, "question", f"{where}.dialog[{j}] (entry {i})")
            a = _require(turn, "answer", f"{where}.dialog[{j}] (entry {i})")
            qa.append((str(q), str(a)))
        try:
            dialogs.append(make_dialog(str(vid), str(caption), qa))
        except SchemaError as exc:
            raise SchemaError(f"{where} (entry {i}): {exc}") from None
    return dialogs


def load_dataset(path: str | os.PathLike) -> list[Dialog]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise DatasetError(
            f"{path}: malformed JSON at line {exc.lineno} col {exc.colno}: {exc.msg}: {line.strip()[:80]!r}"
        ) from None
    return parse_dataset(payload)


def dump_dataset(dialogs: Iterable[Dialog], path: str | os.PathLike) -> None:
    payload = {
        "dialogs": [
            {
                "image_id": d.video_id,
                "caption": d.caption.raw_text,
                "dialog": [{"question": t.question.raw_text, "answer": t.answer.raw_text} for t in d.turns],
            }
            for d in dialogs
        ]
    }
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def iter_utterances(dialogs: Iterable[Dialog]):
    for d in dialogs:
        yield d.caption
        for t in d.turns:
            yield t.question
            yield t.answer


@dataclass
class Vocabulary:
    itos: list[str]
    min_frequency: int = 2
    stoi: dict[str, int] = field(init=False)

    def __post_init__(self):
        if tuple(self.itos[:4]) != RESERVED:
            raise ValueError("reserved symbols must occupy ids 0..3")
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK)

    def to_json(self) -> dict:
        return {"itos": self.itos, "min_frequency": self.min_frequency}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        return cls(list(obj["itos"]), int(obj["min_frequency"]))


def build_vocabulary(dialogs: Iterable[Dialog], min_frequency: int = 2) -> Vocabulary:
    if min_frequency < 1:
        raise ValueError("min_frequency must be >= 1")
    counts = Counter(tok for u in iter_utterances(dialogs) for tok in u.tokens)
    kept = sorted((t for t, c in counts.items() if c >= min_frequency and t not in RESERVED),
                  key=lambda t: (-counts[t], t))
    return Vocabulary(list(RESERVED) + kept, min_frequency)


def encode(tokens: Sequence[str] | Utterance, vocab: Vocabulary, add_bos: bool = False,
           add_eos: bool = False) -> list[int]:
    if isinstance(tokens, Utterance):
        tokens = tokens.tokens
    ids = [vocab.id(t) for t in tokens]
    if add_bos:
        ids.insert(0, BOS)
    if add_eos:
        ids.append(EOS)
    return ids


def decode(ids: Iterable[int], vocab: Vocabulary, strip_special: bool = True) -> list[str]:
    out = []
    for i in ids:
        if strip_special and i in (PAD, BOS, EOS):
            continue
        out.append(vocab.itos[i])
    return out


@dataclass
class WordVectorTable:
    vectors: dict[str, np.ndarray]
    dim: int

    def __len__(self):
        return len(self.vectors)


def read_word_vectors(path: str | os.PathLike) -> WordVectorTable:
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            if not parts or not parts[0]:
                continue
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                raise WordVectorFormatError(f"{path}: line {lineno}: non-numeric vector entry") from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise WordVectorFormatError(
                    f"{path}: line {lineno}: expected {dim} values, found {len(vec)}")
            vectors[parts[0]] = vec
    if dim is None:
        raise WordVectorFormatError(f"{path}: no vectors")
    return WordVectorTable(vectors, dim)


def load_word_vectors(path, vocab: Vocabulary, rng_seed: int = 0, init_scale: float = 0.08):
    """Return ``(table, rows, covered)``.

    ``rows`` is a ``len(vocab) x dim`` matrix whose covered rows are copied
    from the file and the rest drawn uniform in ``[-init_scale, init_scale]``.
    """
    table = read_word_vectors(path)
    rng = np.random.default_rng(rng_seed)
    rows = rng.uniform(-init_scale, init_scale, size=(len(vocab), table.dim))
    covered = np.zeros(len(vocab), dtype=bool)
    for tok, i in vocab.stoi.items():
        if tok in table.vectors:
            rows[i] = table.vectors[tok]
            covered[i] = True
    return table, rows, covered


@dataclass
class FeatureBundle:
    video_id: str
    audio_frames: np.ndarray | None = None
    video_frames: np.ndarray | None = None
    audio_kind: str | None = None

    @property
    def d_a(self) -> int:
        return 0 if self.audio_frames is None else self.audio_frames.shape[1]

    @property
    def d_v(self) -> int:
        return 0 if self.video_frames is None else self.video_frames.shape[1]


def read_feature_file(path: str | os.PathLike) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FeatureFormatError(f"{path}: header must be '<n_frames> <dim>'")
        n, dim = int(header[0]), int(header[1])
        rows = []
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != dim:
                raise FeatureFormatError(f"{path}: line {lineno} has {len(vals)} values, header says {dim}")
            rows.append([float(v) for v in vals])
    if len(rows) != n or n < 1:
        raise FeatureFormatError(f"{path}: header says {n} frames, found {len(rows)}")
    return np.asarray(rows, dtype=np.float64)


def write_feature_file(path: str | os.PathLike, frames: np.ndarray) -> None:
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    lines = [f"{frames.shape[0]} {frames.shape[1]}"]
    lines += [" ".join(repr(float(x)) for x in row) for row in frames]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_features(directory, video_id: str, audio: str | None = "vggish",
                  video: str | None = "video") -> FeatureBundle:
    """Load ``<dir>/<video_id>.<modality>.txt`` files for one video."""

    def _load(modality):
        path = Path(directory) / f"{video_id}.{modality}.txt"
        if not path.exists():
            raise FeatureLookupError(f"no {modality} features for video {video_id!r} ({path})")
        return read_feature_file(path)

    audio_frames = _load(audio) if audio else None
    if audio in AUDIO_DIMS and audio_frames.shape[1] != AUDIO_DIMS[audio]:
        raise FeatureFormatError(
            f"{video_id}.{audio}: expected dim {AUDIO_DIMS[audio]}, got {audio_frames.shape[1]}")
    if audio == "aclnet":
        sums = audio_frames.sum(axis=1)
        if (audio_frames < 0).any() or np.abs(sums - 1).max() > 1e-5:
            raise FeatureFormatError(f"{video_id}.aclnet: frames are not softmax outputs")
    video_frames = _load(video) if video else None
    return FeatureBundle(video_id, audio_frames, video_frames, audio)


def _softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - x.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def synthesize_features(video_id: str, seed: int, d_a: int = 128, d_v: int = 64, n_frames: int = 4,
                        audio_kind: str | None = None) -> FeatureBundle:
    """Deterministic random features; 50-dim (or ``audio_kind='aclnet'``) audio is softmax-normalized."""
    if audio_kind is None:
        audio_kind = "aclnet" if d_a == 50 else "vggish"
    rng = np.random.default_rng([seed, zlib.crc32(video_id.encode())])
    audio = rng.normal(size=(n_frames, d_a)) if d_a else None
    if audio is not None and audio_kind == "aclnet":
        audio = _softmax(2.0 * audio)
    video = rng.normal(size=(n_frames, d_v)) if d_v else None
    return FeatureBundle(video_id, audio, video, audio_kind if d_a else None)
