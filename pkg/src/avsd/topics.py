"""Standard and seed-guided LDA trained by collapsed Gibbs sampling."""
from __future__ import annotations

import json
import warnings
import zlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .corpus import Dialog

FORMAT_VERSION = 1
CATEGORIES = ("question", "answer", "qa_pair", "caption", "history", "history_caption")


class TopicConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SeedLexicon:
    names: tuple[str, ...]
    seeds: tuple[frozenset, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("seed topic names must be unique")
        if any(not s for s in self.seeds):
            raise ValueError("every seed topic needs at least one seed word")

    def __len__(self):
        return len(self.names)

    def topics_of(self, word: str) -> list[int]:
        return [k for k, s in enumerate(self.seeds) if word in s]

    @classmethod
    def from_json(cls, obj) -> "SeedLexicon":
        topics = obj["topics"]
        return cls(tuple(t["name"] for t in topics),
                   tuple(frozenset(w.lower() for w in t["seeds"]) for t in topics))

    @classmethod
    def load(cls, path=None) -> "SeedLexicon":
        if path is None:
            text = resources.files("avsd").joinpath("data/seeds_9topics.json").read_text()
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_json(json.loads(text))

    def to_json(self):
        return {"topics": [{"name": n, "seeds": sorted(s)} for n, s in zip(self.names, self.seeds)]}


def default_stopwords() -> frozenset:
    text = resources.files("avsd").joinpath("data/stopwords.txt").read_text()
    return frozenset(w for w in text.split() if w)


# ---------------------------------------------------------------------------
# document views


@dataclass(frozen=True)
class DocumentView:
    category: str
    tokens: tuple[str, ...]
    dialog_id: str
    turn_index: int | None


def _qa(turn) -> tuple[str, ...]:
    return turn.question.tokens + turn.answer.tokens


def history_tokens(dialog: Dialog, t: int, with_caption: bool = False) -> tuple[str, ...]:
    out: tuple[str, ...] = dialog.caption.tokens if with_caption else ()
    for turn in dialog.turns[:t]:
        out += _qa(turn)
    return out


def category_doc(dialog: Dialog, t: int, category: str, history_with_caption: bool = False) -> tuple[str, ...]:
    """Document for ``category`` as visible when answering turn ``t``.

    Answer and QA-pair documents come from turn ``t - 1`` so the answer being
    generated never leaks into its own conditioning.
    """
    if category == "question":
        return dialog.turns[t].question.tokens
    if category == "answer":
        return dialog.turns[t - 1].answer.tokens if t > 0 else ()
    if category == "qa_pair":
        return _qa(dialog.turns[t - 1]) if t > 0 else ()
    if category == "caption":
        return dialog.caption.tokens
    if category == "history":
        return history_tokens(dialog, t, history_with_caption)
    if category == "history_caption":
        return history_tokens(dialog, t, True)
    raise TopicConfigError(f"unknown category {category!r}; choose from {CATEGORIES}")


def build_document_views(dialogs: Sequence[Dialog], category: str,
                         history_with_caption: bool = False) -> list[DocumentView]:
    """Training documents for one category.

    question/answer/qa_pair give one view per turn, caption one per dialog,
    history one per turn with nonempty history and history_caption one per turn.
    """
    views = []
    for d in dialogs:
        if category == "caption":
            views.append(DocumentView(category, d.caption.tokens, d.video_id, None))
            continue
        for i, turn in enumerate(d.turns):
            if category == "question":
                toks = turn.question.tokens
            elif category == "answer":
                toks = turn.answer.tokens
            elif category == "qa_pair":
                toks = _qa(turn)
            elif category == "history":
                if i == 0 and not history_with_caption:
                    continue
                toks = history_tokens(d, i, history_with_caption)
            elif category == "history_caption":
                toks = history_tokens(d, i, True)
            else:
                raise TopicConfigError(f"unknown category {category!r}; choose from {CATEGORIES}")
            views.append(DocumentView(category, toks, d.video_id, turn.turn_index))
    return views


# ---------------------------------------------------------------------------
# sampler kernels


@njit(cache=True)
def _gibbs_sweep(words, docs, z, ndk, nkw, nk, alpha, beta, vbeta, uniforms, p):
    K = nk.shape[0]
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for t in range(K):
            total += (ndk[d, t] + alpha[t]) * (nkw[t, w] + beta) / (nk[t] + vbeta)
            p[t] = total
        u = uniforms[i] * total
        k = K - 1
        for t in range(K):
            if u < p[t]:
                k = t
                break
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


@njit(cache=True)
def _fold_in_sweep(words, z, nd, nkw, nk, alpha, beta, vbeta, uniforms, p):
    K = nk.shape[0]
    for i in range(words.shape[0]):
        w = words[i]
        nd[z[i]] -= 1
        total = 0.0
        for t in range(K):
            total += (nd[t] + alpha[t]) * (nkw[t, w] + beta) / (nk[t] + vbeta)
            p[t] = total
        u = uniforms[i] * total
        k = K - 1
        for t in range(K):
            if u < p[t]:
                k = t
                break
        z[i] = k
        nd[k] += 1


# ---------------------------------------------------------------------------
# model state


@dataclass
class TopicModelState:
    K: int
    alpha: np.ndarray
    beta: float
    seed_confidence: float
    vocab: list[str]
    doc_topic_counts: np.ndarray
    topic_word_counts: np.ndarray
    topic_totals: np.ndarray
    assignments: np.ndarray  # flat, aligned with words / doc_offsets
    words: np.ndarray
    doc_offsets: np.ndarray
    rng_seed: int
    topic_names: list[str] = field(default_factory=list)
    category: str | None = None
    iterations: int = 0
    stopwords: frozenset = frozenset()
    word_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.word_index = {w: i for i, w in enumerate(self.vocab)}

    @property
    def V(self) -> int:
        return len(self.vocab)

    @property
    def D(self) -> int:
        return self.doc_topic_counts.shape[0]

    def doc_assignments(self, d: int) -> np.ndarray:
        return self.assignments[self.doc_offsets[d]:self.doc_offsets[d + 1]]

    def check_counts(self) -> None:
        """Raise AssertionError if the count matrices disagree with the assignments."""
        K, V = self.K, self.V
        ndk = np.zeros_like(self.doc_topic_counts)
        nkw = np.zeros_like(self.topic_word_counts)
        for d in range(self.D):
            lo, hi = self.doc_offsets[d], self.doc_offsets[d + 1]
            np.add.at(ndk[d], self.assignments[lo:hi], 1)
        np.add.at(nkw, (self.assignments, self.words), 1)
        assert ((self.assignments >= 0) & (self.assignments < K)).all()
        assert (ndk == self.doc_topic_counts).all()
        assert (nkw == self.topic_word_counts).all()
        assert (nkw.sum(axis=1) == self.topic_totals).all()
        assert nkw.shape == (K, V)

    def topic_word_distribution(self) -> np.ndarray:
        phi = self.topic_word_counts + self.beta
        return phi / phi.sum(axis=1, keepdims=True)

    def top_words(self, n: int = 10) -> list[list[str]]:
        phi = self.topic_word_distribution()
        return [[self.vocab[i] for i in np.argsort(-row, kind="stable")[:n]] for row in phi]

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "K": self.K,
            "alpha": [float(a) for a in self.alpha],
            "beta": float(self.beta),
            "seed_confidence": float(self.seed_confidence),
            "vocab": self.vocab,
            "doc_topic_counts": self.doc_topic_counts.tolist(),
            "topic_word_counts": self.topic_word_counts.tolist(),
            "topic_totals": self.topic_totals.tolist(),
            "assignments": self.assignments.tolist(),
            "words": self.words.tolist(),
            "doc_offsets": self.doc_offsets.tolist(),
            "rng_seed": self.rng_seed,
            "topic_names": self.topic_names,
            "category": self.category,
            "iterations": self.iterations,
            "stopwords": sorted(self.stopwords),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TopicModelState":
        if obj.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported topic model format {obj.get('format_version')!r}")
        K = int(obj["K"])
        V = len(obj["vocab"])
        state = cls(
            K=K,
            alpha=np.asarray(obj["alpha"], dtype=np.float64),
            beta=float(obj["beta"]),
            seed_confidence=float(obj["seed_confidence"]),
            vocab=list(obj["vocab"]),
            doc_topic_counts=np.asarray(obj["doc_topic_counts"], dtype=np.int64).reshape(-1, K),
            topic_word_counts=np.asarray(obj["topic_word_counts"], dtype=np.int64).reshape(K, V),
            topic_totals=np.asarray(obj["topic_totals"], dtype=np.int64),
            assignments=np.asarray(obj["assignments"], dtype=np.int64),
            words=np.asarray(obj["words"], dtype=np.int64),
            doc_offsets=np.asarray(obj["doc_offsets"], dtype=np.int64),
            rng_seed=int(obj["rng_seed"]),
            topic_names=list(obj.get("topic_names", [])),
            category=obj.get("category"),
            iterations=int(obj.get("iterations", 0)),
            stopwords=frozenset(obj.get("stopwords", [])),
        )
        return state

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TopicModelState":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _filter(tokens, stopwords, keep) -> list[str]:
    return [t for t in tokens if t in keep or t not in stopwords]


def train_lda(docs: Sequence[Sequence[str]], K: int | None = None, alpha: float | Sequence[float] = 0.1,
              beta: float = 0.01, iterations: int = 300, rng_seed: int = 0,
              seed_lexicon: SeedLexicon | None = None, seed_confidence: float = 0.15,
              stopwords: frozenset | None = None, category: str | None = None,
              callback=None) -> TopicModelState:
    """Fit LDA by collapsed Gibbs sampling.

    With a seed lexicon, each occurrence of a seed word starts in (one of) its
    seed topics with probability ``seed_confidence``; guidance acts only at
    initialization. ``callback(sweep, state)`` runs after every sweep.
    """
    if seed_lexicon is not None:
        if K is None:
            K = len(seed_lexicon)
        elif K != len(seed_lexicon):
            raise TopicConfigError(f"K={K} but the seed lexicon has {len(seed_lexicon)} topics")
    if K is None or K < 2:
        raise TopicConfigError("K must be >= 2")
    if iterations < 0:
        raise TopicConfigError("iterations must be >= 0")
    if not 0.0 <= seed_confidence <= 1.0:
        raise TopicConfigError("seed_confidence must lie in [0, 1]")
    alpha_vec = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (K,)).copy()
    if (alpha_vec <= 0).any() or beta <= 0:
        raise TopicConfigError("alpha and beta must be positive")

    stopwords = frozenset() if stopwords is None else frozenset(stopwords)
    keep = frozenset().union(*seed_lexicon.seeds) if seed_lexicon is not None else frozenset()
    filtered = [_filter(d, stopwords, keep) for d in docs]

    vocab: list[str] = []
    index: dict[str, int] = {}
    for d in filtered:
        for t in d:
            if t not in index:
                index[t] = len(vocab)
                vocab.append(t)
    V = max(len(vocab), 1)
    words = np.fromiter((index[t] for d in filtered for t in d), dtype=np.int64)
    lengths = np.array([len(d) for d in filtered], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    doc_of = np.repeat(np.arange(len(filtered), dtype=np.int64), lengths)
    N = words.shape[0]

    rng = np.random.default_rng(rng_seed)
    z = rng.integers(0, K, size=N).astype(np.int64)
    u_conf = rng.random(N)
    u_tie = rng.random(N)
    if seed_lexicon is not None:
        missing = sorted(w for w in set().union(*seed_lexicon.seeds) if w not in index)
        if missing:
            shown = ", ".join(missing[:8]) + (", ..." if len(missing) > 8 else "")
            warnings.warn(f"{len(missing)} seed words not in the topic-model vocabulary, ignored: {shown}",
                          stacklevel=2)
        seed_topics = {index[w]: seed_lexicon.topics_of(w) for w in vocab if seed_lexicon.topics_of(w)}
        for i in range(N):
            topics = seed_topics.get(int(words[i]))
            if topics and u_conf[i] < seed_confidence:
                z[i] = topics[int(u_tie[i] * len(topics))]

    ndk = np.zeros((len(filtered), K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (doc_of, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)

    state = TopicModelState(
        K=K, alpha=alpha_vec, beta=float(beta), seed_confidence=float(seed_confidence) if seed_lexicon else 0.0,
        vocab=vocab, doc_topic_counts=ndk, topic_word_counts=nkw, topic_totals=nk, assignments=z,
        words=words, doc_offsets=offsets, rng_seed=rng_seed,
        topic_names=list(seed_lexicon.names) if seed_lexicon else [f"topic_{k}" for k in range(K)],
        category=category, stopwords=stopwords,
    )
    p = np.empty(K)
    vbeta = V * float(beta)
    for sweep in range(iterations):
        _gibbs_sweep(words, doc_of, z, ndk, nkw, nk, alpha_vec, float(beta), vbeta, rng.random(N), p)
        state.iterations = sweep + 1
        if callback is not None:
            callback(sweep, state)
    return state


@dataclass(frozen=True)
class TopicDistribution:
    probs: np.ndarray

    def __post_init__(self):
        if (self.probs < 0).any() or abs(self.probs.sum() - 1.0) > 1e-8:
            raise ValueError("topic distribution must be nonnegative and sum to 1")

    def __len__(self):
        return len(self.probs)


def _doc_seed(rng_seed: int, tokens: Sequence[str]) -> list[int]:
    return [rng_seed, zlib.crc32("\x1f".join(tokens).encode())]


def infer_topics(state: TopicModelState, doc: Sequence[str], fold_in_iterations: int = 50,
                 rng_seed: int = 0) -> TopicDistribution:
    """Fold-in Gibbs with the trained topic-word counts frozen.

    Unknown words and stop words are dropped; an empty document yields the
    uniform distribution.
    """
    toks = [t for t in doc if t in state.word_index and t not in state.stopwords]
    K = state.K
    if not toks:
        return TopicDistribution(np.full(K, 1.0 / K))
    words = np.array([state.word_index[t] for t in toks], dtype=np.int64)
    rng = np.random.default_rng(_doc_seed(rng_seed, toks))
    z = rng.integers(0, K, size=len(words)).astype(np.int64)
    nd = np.bincount(z, minlength=K).astype(np.int64)
    p = np.empty(K)
    vbeta = state.V * state.beta
    nkw = np.ascontiguousarray(state.topic_word_counts)
    nk = np.ascontiguousarray(state.topic_totals)
    for _ in range(fold_in_iterations):
        _fold_in_sweep(words, z, nd, nkw, nk, state.alpha, state.beta, vbeta, rng.random(len(words)), p)
    theta = nd + state.alpha
    return TopicDistribution(theta / theta.sum())


def top_k_topics(dist, k: int) -> list[tuple[int, float]]:
    """Topics sorted by probability (descending), ties to the lower id."""
    probs = dist.probs if isinstance(dist, TopicDistribution) else np.asarray(dist, dtype=np.float64)
    if not 1 <= k <= len(probs):
        raise ValueError(f"k must lie in [1, {len(probs)}], got {k}")
    order = sorted(range(len(probs)), key=lambda i: (-probs[i], i))
    return [(i, float(probs[i])) for i in order[:k]]


# ---------------------------------------------------------------------------
# topic inputs for the answer generator


@dataclass
class TopicInputs:
    """Topic side-information for one (dialog, turn) example.

    ``history_turn_dists`` aligns with the history turns fed to the history
    encoder (caption pseudo-turn first when it is used).
    """
    question_dist: np.ndarray | None = None
    history_vector: np.ndarray | None = None
    question_top3: list[int] | None = None
    caption_top3: list[int] | None = None
    history_turn_dists: np.ndarray | None = None


class TopicFeaturizer:
    """Runs (cached, deterministic) fold-in inference for every needed category."""

    def __init__(self, models: Mapping[str, TopicModelState], fold_in_iterations: int = 50,
                 rng_seed: int = 0, history_with_caption: bool = False):
        self.models = dict(models)
        self.fold_in_iterations = fold_in_iterations
        self.rng_seed = rng_seed
        self.history_with_caption = history_with_caption
        self._cache: dict = {}
        Ks = {m.K for m in self.models.values()}
        if len(Ks) > 1:
            raise TopicConfigError(f"topic models disagree on K: {sorted(Ks)}")
        self.K = Ks.pop() if Ks else 0

    def model(self, category: str) -> TopicModelState:
        if category not in self.models:
            raise TopicConfigError(f"no topic model for category {category!r}")
        return self.models[category]

    def dist(self, category: str, tokens: Sequence[str]) -> np.ndarray:
        key = (category, tuple(tokens))
        if key not in self._cache:
            self._cache[key] = infer_topics(self.model(category), tokens, self.fold_in_iterations,
                                            self.rng_seed).probs
        return self._cache[key]

    def category_dist(self, dialog: Dialog, t: int, category: str) -> np.ndarray:
        return self.dist(category, category_doc(dialog, t, category, self.history_with_caption))


def topic_feature_vector(dialog: Dialog, t: int, featurizer: TopicFeaturizer, mode: str):
    """Return ``(question_dist, history_vector)`` for turn ``t``.

    ``qa_caption`` concatenates QA-pair and caption distributions (2K);
    ``all`` concatenates all six categories in ``CATEGORIES`` order (6K).
    """
    q = featurizer.category_dist(dialog, t, "question")
    if mode == "qa_caption":
        cats = ("qa_pair", "caption")
    elif mode == "all":
        cats = CATEGORIES
    else:
        raise TopicConfigError(f"unknown topic feature mode {mode!r}")
    return q, np.concatenate([featurizer.category_dist(dialog, t, c) for c in cats])


def build_topic_inputs(dialog: Dialog, t: int, featurizer: TopicFeaturizer | None, topic_mode: str,
                       caption_as_turn: bool = True) -> TopicInputs:
    if topic_mode == "none":
        return TopicInputs()
    if featurizer is None:
        raise TopicConfigError(f"topic_mode {topic_mode!r} needs trained topic models")
    if topic_mode in ("features_qa_caption", "features_all"):
        q, hist = topic_feature_vector(dialog, t, featurizer,
                                       "qa_caption" if topic_mode == "features_qa_caption" else "all")
        return TopicInputs(question_dist=q, history_vector=hist)
    if topic_mode == "embeddings_top3":
        q = featurizer.category_dist(dialog, t, "question")
        c = featurizer.category_dist(dialog, t, "caption")
        return TopicInputs(question_top3=[i for i, _ in top_k_topics(q, 3)],
                           caption_top3=[i for i, _ in top_k_topics(c, 3)])
    if topic_mode == "hlstm_topics":
        rows = []
        if caption_as_turn:
            rows.append(featurizer.dist("caption", dialog.caption.tokens))
        for turn in dialog.turns[:t]:
            rows.append(featurizer.dist("qa_pair", _qa(turn)))
        dists = np.array(rows) if rows else np.zeros((0, featurizer.K))
        return TopicInputs(history_turn_dists=dists)
    raise TopicConfigError(f"unknown topic_mode {topic_mode!r}")


TOPIC_MODE_CATEGORIES = {
    "none": (),
    "features_qa_caption": ("question", "qa_pair", "caption"),
    "features_all": CATEGORIES,
    "embeddings_top3": ("question", "caption"),
    "hlstm_topics": ("qa_pair", "caption"),
}
