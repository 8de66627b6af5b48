"""Multimodal encoder-decoder answer generator.

Question encoder, hierarchical (word -> sentence) history encoder, pooled
audio/video encoders, decoder attention over the history (four variants) and
topic conditioning of the decoder or history encoder.
"""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .corpus import BOS, EOS
from .topics import TopicInputs

ATTENTION_MODES = ("none", "word_all", "word_last", "sent_all", "sent_all_multimodal")
TOPIC_MODES = ("none", "features_qa_caption", "features_all", "embeddings_top3", "hlstm_topics")
AUDIO_MODES = {"none": 0, "vggish128": 128, "aclnet50": 50}
VIDEO_MODES = ("none", "fixed")
CHECKPOINT_VERSION = 1
INIT_SCALE = 0.08

DTYPE = torch.float64


class ConfigError(ValueError):
    pass


def _check_enum(name, value, allowed):
    if value not in allowed:
        raise ConfigError(f"{name}={value!r} is not one of {', '.join(allowed)}")


@dataclass
class ModelConfig:
    vocab_size: int
    embed_dim: int = 64
    hidden_dim: int = 128
    attention_mode: str = "none"
    topic_mode: str = "none"
    audio_mode: str = "none"
    video_mode: str = "none"
    video_dim: int = 0
    use_pretrained_word_vectors: bool = False
    topic_embed_dim: int = 16
    K: int = 9
    max_decode_len: int = 20
    rng_seed: int = 0
    caption_as_turn: bool = True
    decoder_init: str = "zero"
    attention_score: str = "additive"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        _check_enum("attention_mode", self.attention_mode, ATTENTION_MODES)
        _check_enum("topic_mode", self.topic_mode, TOPIC_MODES)
        _check_enum("audio_mode", self.audio_mode, tuple(AUDIO_MODES))
        _check_enum("video_mode", self.video_mode, VIDEO_MODES)
        _check_enum("decoder_init", self.decoder_init, ("zero", "question"))
        _check_enum("attention_score", self.attention_score, ("additive", "dot"))
        for name in ("vocab_size", "embed_dim", "hidden_dim", "max_decode_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.video_mode == "fixed" and self.video_dim < 1:
            raise ConfigError("video_mode 'fixed' needs video_dim >= 1")
        if self.topic_mode != "none" and self.K < 2:
            raise ConfigError("topic modes need K >= 2")
        if self.topic_mode == "embeddings_top3" and (self.K < 3 or self.topic_embed_dim < 1):
            raise ConfigError("embeddings_top3 needs K >= 3 and topic_embed_dim >= 1")

    @property
    def audio_dim(self) -> int:
        return AUDIO_MODES[self.audio_mode]

    @property
    def uses_sentence_encoder(self) -> bool:
        return self.attention_mode in ("none", "sent_all", "sent_all_multimodal") or self.topic_mode == "hlstm_topics"

    @property
    def uses_attention(self) -> bool:
        return self.attention_mode != "none"

    @property
    def topic_input_dim(self) -> int:
        if self.topic_mode == "features_qa_caption":
            return 3 * self.K
        if self.topic_mode == "features_all":
            return 7 * self.K
        if self.topic_mode == "embeddings_top3":
            return 2 * self.topic_embed_dim
        return 0

    @property
    def context_dim(self) -> int:
        H = self.hidden_dim
        return 2 * H + (H if self.audio_mode != "none" else 0) + (H if self.video_mode != "none" else 0)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown model config fields: {', '.join(sorted(unknown))}")
        return cls(**obj)


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Shape of every learnable array for ``config``."""
    V, E, H = config.vocab_size, config.embed_dim, config.hidden_dim

    def lstm(prefix, n_in):
        return {
            f"{prefix}.weight_ih_l0": (4 * H, n_in),
            f"{prefix}.weight_hh_l0": (4 * H, H),
            f"{prefix}.bias_ih_l0": (4 * H,),
            f"{prefix}.bias_hh_l0": (4 * H,),
        }

    shapes = {"embedding.weight": (V, E)}
    shapes.update(lstm("question_encoder", E))
    shapes.update(lstm("history_word_encoder", E))
    if config.uses_sentence_encoder:
        extra = config.K if config.topic_mode == "hlstm_topics" else 0
        shapes.update(lstm("history_sentence_encoder", H + extra))
    if config.audio_mode != "none":
        shapes["audio_proj.weight"] = (H, config.audio_dim)
        shapes["audio_proj.bias"] = (H,)
    if config.video_mode != "none":
        shapes["video_proj.weight"] = (H, config.video_dim)
        shapes["video_proj.bias"] = (H,)
    if config.uses_attention and config.attention_score == "additive":
        shapes["attention.query.weight"] = (H, H)
        shapes["attention.memory.weight"] = (H, H)
        shapes["attention.memory.bias"] = (H,)
        shapes["attention.v"] = (H,)
    if config.topic_mode == "embeddings_top3":
        shapes["topic_embedding.weight"] = (config.K, config.topic_embed_dim)
    shapes.update(lstm("decoder", E + config.context_dim + config.topic_input_dim))
    shapes["output.weight"] = (V, H)
    shapes["output.bias"] = (V,)
    return shapes


@dataclass
class Example:
    """One (dialog, turn) training/decoding instance, already id-encoded."""
    question: list[int]
    history: list[list[int]]
    answer: list[int]
    audio: np.ndarray | None = None
    video: np.ndarray | None = None
    topics: TopicInputs = field(default_factory=TopicInputs)
    video_id: str = ""
    turn_index: int = 0


@dataclass
class HistoryEncoding:
    word_outputs: list[torch.Tensor]
    word_finals: torch.Tensor  # n x H
    sentence_outputs: torch.Tensor | None  # n x H
    sentence_final: torch.Tensor | None  # H
    padded_word_outputs: torch.Tensor | None = None  # n x Tmax x H
    word_mask: torch.Tensor | None = None  # n x Tmax

    @property
    def n(self) -> int:
        return self.word_finals.shape[0]


@dataclass
class EncodedInput:
    question_outputs: torch.Tensor
    question_final: torch.Tensor
    history: HistoryEncoding
    audio_context: torch.Tensor
    video_context: torch.Tensor
    topic_vector: torch.Tensor
    memory: torch.Tensor | None = None
    memory_keys: torch.Tensor | None = None


class AdditiveAttention(nn.Module):
    def __init__(self, hidden_dim: int):
        super().__init__()
        self.query = nn.Linear(hidden_dim, hidden_dim, bias=False)
        self.memory = nn.Linear(hidden_dim, hidden_dim)
        self.v = nn.Parameter(torch.zeros(hidden_dim, dtype=DTYPE))

    def keys(self, memory: torch.Tensor) -> torch.Tensor:
        return self.memory(memory)

    def scores(self, query: torch.Tensor, keys: torch.Tensor) -> torch.Tensor:
        return torch.tanh(keys + self.query(query)) @ self.v


def masked_softmax(scores: torch.Tensor, mask: torch.Tensor | None) -> torch.Tensor:
    if mask is not None:
        scores = scores.masked_fill(~mask, float("-inf"))
    return torch.softmax(scores, dim=-1)


class AnswerGenerator(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        config.validate()
        self.config = config
        V, E, H = config.vocab_size, config.embed_dim, config.hidden_dim
        self.embedding = nn.Embedding(V, E)
        self.question_encoder = nn.LSTM(E, H, batch_first=True)
        self.history_word_encoder = nn.LSTM(E, H, batch_first=True)
        if config.uses_sentence_encoder:
            extra = config.K if config.topic_mode == "hlstm_topics" else 0
            self.history_sentence_encoder = nn.LSTM(H + extra, H, batch_first=True)
        if config.audio_mode != "none":
            self.audio_proj = nn.Linear(config.audio_dim, H)
        if config.video_mode != "none":
            self.video_proj = nn.Linear(config.video_dim, H)
        if config.uses_attention and config.attention_score == "additive":
            self.attention = AdditiveAttention(H)
        if config.topic_mode == "embeddings_top3":
            self.topic_embedding = nn.Embedding(config.K, config.topic_embed_dim)
        self.decoder = nn.LSTM(E + config.context_dim + config.topic_input_dim, H, batch_first=True)
        self.output = nn.Linear(H, V)
        self.to(DTYPE)

    # -- encoders ---------------------------------------------------------

    def _run_lstm(self, lstm: nn.LSTM, seqs: Sequence[Sequence[int]]):
        """Encode id sequences in one padded batch; returns (padded outputs, lengths, finals)."""
        lengths = torch.tensor([len(s) for s in seqs])
        ids = torch.zeros(len(seqs), int(lengths.max()), dtype=torch.long)
        for i, s in enumerate(seqs):
            ids[i, :len(s)] = torch.as_tensor(s, dtype=torch.long)
        packed = pack_padded_sequence(self.embedding(ids), lengths, batch_first=True, enforce_sorted=False)
        out, (h, _) = lstm(packed)
        out, _ = pad_packed_sequence(out, batch_first=True)
        return out, lengths, h[0]

    def encode_question(self, ids: Sequence[int]):
        if len(ids) == 0:
            raise ValueError("cannot encode an empty question")
        out, _, h = self._run_lstm(self.question_encoder, [ids])
        return out[0], h[0]

    def encode_history(self, turns: Sequence[Sequence[int]], turn_topics: np.ndarray | None = None) -> HistoryEncoding:
        cfg = self.config
        H = cfg.hidden_dim
        empty = torch.zeros(0, H, dtype=DTYPE)
        if len(turns) == 0:
            sent_final = torch.zeros(H, dtype=DTYPE) if cfg.uses_sentence_encoder else None
            return HistoryEncoding([], empty, empty if cfg.uses_sentence_encoder else None, sent_final)
        if any(len(t) == 0 for t in turns):
            raise ValueError("history turns must be nonempty")
        padded, lengths, finals = self._run_lstm(self.history_word_encoder, turns)
        word_outputs = [padded[i, :lengths[i]] for i in range(len(turns))]
        mask = torch.arange(padded.shape[1])[None, :] < lengths[:, None]
        sent_out = sent_final = None
        if cfg.uses_sentence_encoder:
            inp = finals
            if cfg.topic_mode == "hlstm_topics":
                if turn_topics is None or len(turn_topics) != len(turns):
                    raise ConfigError("hlstm_topics needs one topic distribution per history turn")
                inp = torch.cat([finals, torch.as_tensor(np.asarray(turn_topics), dtype=DTYPE)], dim=1)
            out, (h, _) = self.history_sentence_encoder(inp.unsqueeze(0))
            sent_out, sent_final = out[0], h[0, 0]
        return HistoryEncoding(word_outputs, finals, sent_out, sent_final, padded, mask)

    def encode_modalities(self, audio: np.ndarray | None, video: np.ndarray | None):
        """Mean-pool frames over time, project to hidden size and squash."""
        cfg = self.config
        H = cfg.hidden_dim

        def pooled(frames, expected, name):
            if frames is None:
                raise ConfigError(f"{name} features required but missing")
            frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
            if frames.shape[1] != expected:
                raise ConfigError(f"{name} feature dim mismatch: expected {expected}, got {frames.shape[1]}")
            return torch.as_tensor(frames.mean(axis=0), dtype=DTYPE)

        a = torch.zeros(H, dtype=DTYPE)
        v = torch.zeros(H, dtype=DTYPE)
        if cfg.audio_mode != "none":
            a = torch.tanh(self.audio_proj(pooled(audio, cfg.audio_dim, "audio")))
        if cfg.video_mode != "none":
            v = torch.tanh(self.video_proj(pooled(video, cfg.video_dim, "video")))
        return a, v

    def topic_vector(self, topics: TopicInputs) -> torch.Tensor:
        cfg = self.config
        mode = cfg.topic_mode
        if mode in ("none", "hlstm_topics"):
            return torch.zeros(0, dtype=DTYPE)
        if mode in ("features_qa_caption", "features_all"):
            if topics.question_dist is None or topics.history_vector is None:
                raise ConfigError(f"topic_mode {mode!r} needs question and history topic features")
            vec = np.concatenate([topics.question_dist, topics.history_vector])
            if len(vec) != cfg.topic_input_dim:
                raise ConfigError(f"topic feature length {len(vec)} != expected {cfg.topic_input_dim}")
            return torch.as_tensor(vec, dtype=DTYPE)
        if topics.question_top3 is None or topics.caption_top3 is None:
            raise ConfigError("embeddings_top3 needs top-3 topic ids for question and caption")
        emb = self.topic_embedding.weight
        q = emb[torch.as_tensor(topics.question_top3)].mean(dim=0)
        c = emb[torch.as_tensor(topics.caption_top3)].mean(dim=0)
        return torch.cat([q, c])

    def encode(self, ex: Example) -> EncodedInput:
        cfg = self.config
        q_out, q_final = self.encode_question(ex.question)
        hist = self.encode_history(ex.history, ex.topics.history_turn_dists)
        a, v = self.encode_modalities(ex.audio, ex.video)
        enc = EncodedInput(q_out, q_final, hist, a, v, self.topic_vector(ex.topics))
        if cfg.uses_attention and hist.n > 0:
            if cfg.attention_mode == "word_last":
                enc.memory = hist.word_finals
            elif cfg.attention_mode == "sent_all":
                enc.memory = hist.sentence_outputs
            elif cfg.attention_mode == "sent_all_multimodal":
                enc.memory = torch.cat([hist.sentence_outputs, a[None], v[None]], dim=0)
            else:
                enc.memory = hist.padded_word_outputs
            if cfg.attention_score == "additive":
                enc.memory_keys = self.attention.keys(enc.memory)
        return enc

    # -- attention and context -----------------------------------------------

    def attend(self, query: torch.Tensor, memory: torch.Tensor, keys: torch.Tensor | None = None,
               mask: torch.Tensor | None = None):
        """Weights over the last-but-one axis of ``memory`` and the weighted sum."""
        if self.config.attention_score == "additive":
            if keys is None:
                keys = self.attention.keys(memory)
            scores = self.attention.scores(query, keys)
        else:
            scores = memory @ query
        weights = masked_softmax(scores, mask)
        context = (weights.unsqueeze(-1) * memory).sum(dim=-2)
        return weights, context

    def history_context(self, query: torch.Tensor, enc: EncodedInput):
        """History block of the context vector; returns (context, attention weights or None)."""
        cfg = self.config
        hist = enc.history
        H = cfg.hidden_dim
        if cfg.attention_mode == "none":
            return hist.sentence_final, None
        if hist.n == 0:
            ctx, weights = torch.zeros(H, dtype=DTYPE), None
        elif cfg.attention_mode == "word_all":
            weights, per_turn = self.attend(query, enc.memory, enc.memory_keys, hist.word_mask)
            ctx = per_turn.sum(dim=0)
        else:
            weights, ctx = self.attend(query, enc.memory, enc.memory_keys)
        if cfg.topic_mode == "hlstm_topics" and cfg.attention_mode in ("word_all", "word_last"):
            ctx = ctx + hist.sentence_final
        return ctx, weights

    def context_vector(self, query: torch.Tensor, enc: EncodedInput) -> torch.Tensor:
        cfg = self.config
        hist_ctx, _ = self.history_context(query, enc)
        parts = [enc.question_final, hist_ctx]
        if cfg.audio_mode != "none":
            parts.append(enc.audio_context)
        if cfg.video_mode != "none":
            parts.append(enc.video_context)
        return torch.cat(parts)

    # -- decoder --------------------------------------------------------------

    def initial_state(self, enc: EncodedInput):
        H = self.config.hidden_dim
        h = enc.question_final.clone() if self.config.decoder_init == "question" else torch.zeros(H, dtype=DTYPE)
        return h.view(1, 1, H), torch.zeros(1, 1, H, dtype=DTYPE)

    def decoder_inputs(self, token_ids: torch.Tensor, context: torch.Tensor, enc: EncodedInput) -> torch.Tensor:
        emb = self.embedding(token_ids)
        T = emb.shape[0]
        extra = torch.cat([context, enc.topic_vector])
        return torch.cat([emb, extra.expand(T, -1)], dim=1)

    def decoder_step(self, prev_token: int, state, enc: EncodedInput):
        """One decoding step; returns (logits over the vocabulary, next state)."""
        h, c = state
        context = self.context_vector(h[0, 0], enc)
        x = self.decoder_inputs(torch.tensor([prev_token]), context, enc)
        out, state = self.decoder(x.unsqueeze(0), (h, c))
        return self.output(out[0, 0]), state

    def teacher_forced_logits(self, ex: Example, enc: EncodedInput | None = None) -> torch.Tensor:
        enc = enc if enc is not None else self.encode(ex)
        inputs = [BOS] + list(ex.answer)
        state = self.initial_state(enc)
        if not self.config.uses_attention:
            # context is step-invariant without attention: run the decoder over the whole sequence
            context = self.context_vector(state[0][0, 0], enc)
            x = self.decoder_inputs(torch.as_tensor(inputs), context, enc)
            out, _ = self.decoder(x.unsqueeze(0), state)
            return self.output(out[0])
        logits = []
        for tok in inputs:
            step_logits, state = self.decoder_step(tok, state, enc)
            logits.append(step_logits)
        return torch.stack(logits)

    def sequence_nll(self, ex: Example):
        """Teacher-forced NLL of ``answer + EOS``; returns (total, per-token) tensors."""
        if len(ex.answer) == 0:
            raise ValueError("target answer must be nonempty")
        logits = self.teacher_forced_logits(ex)
        targets = torch.as_tensor(list(ex.answer) + [EOS])
        per_token = F.cross_entropy(logits, targets, reduction="none")
        return per_token.sum(), per_token

    @torch.no_grad()
    def generate(self, ex: Example, strategy: str = "greedy", beam_width: int = 1) -> list[int]:
        enc = self.encode(ex)
        if strategy == "greedy":
            return self._greedy(enc)
        if strategy == "beam":
            return self._beam(enc, beam_width)
        raise ValueError(f"unknown decoding strategy {strategy!r}")

    def _greedy(self, enc: EncodedInput) -> list[int]:
        state = self.initial_state(enc)
        prev, out = BOS, []
        for _ in range(self.config.max_decode_len):
            logits, state = self.decoder_step(prev, state, enc)
            prev = int(torch.argmax(logits))
            if prev == EOS:
                break
            out.append(prev)
        return out

    def _beam(self, enc: EncodedInput, width: int) -> list[int]:
        if width < 1:
            raise ValueError("beam width must be >= 1")
        alive = [([], 0.0, self.initial_state(enc))]
        finished: list[tuple[list[int], float]] = []
        for step in range(self.config.max_decode_len):
            cands = []
            for toks, logp, state in alive:
                logits, nstate = self.decoder_step(toks[-1] if toks else BOS, state, enc)
                lp = torch.log_softmax(logits, dim=0).numpy()
                for tok in np.argsort(-lp, kind="stable")[:width]:
                    total = logp + float(lp[tok])
                    # length-normalized; the EOS step counts toward the length
                    cands.append((total / (len(toks) + 1), toks, int(tok), total, nstate))
            cands.sort(key=lambda c: -c[0])
            alive = []
            for score, toks, tok, total, nstate in cands[:width]:
                if tok == EOS:
                    finished.append((toks, score))
                elif step == self.config.max_decode_len - 1:
                    finished.append((toks + [tok], score))
                else:
                    alive.append((toks + [tok], total, nstate))
            if not alive:
                break
        best = max(finished, key=lambda f: f[1]) if finished else ([], 0.0)
        return best[0]


def init_parameters(config: ModelConfig, rng_seed: int | None = None,
                    word_vectors: np.ndarray | None = None,
                    covered: np.ndarray | None = None) -> AnswerGenerator:
    """Build a model with every array uniform in [-0.08, 0.08], seeded.

    ``word_vectors`` (vocab x embed_dim) rows flagged in ``covered`` are
    copied into the (still trainable) embedding matrix.
    """
    seed = config.rng_seed if rng_seed is None else rng_seed
    model = AnswerGenerator(config)
    gen = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for name, p in sorted(model.named_parameters()):
            p.copy_(torch.rand(p.shape, generator=gen, dtype=DTYPE) * (2 * INIT_SCALE) - INIT_SCALE)
        if word_vectors is not None:
            word_vectors = np.asarray(word_vectors, dtype=np.float64)
            if word_vectors.shape[1] != config.embed_dim:
                raise ConfigError(f"word vector dim {word_vectors.shape[1]} != embed_dim {config.embed_dim}")
            if word_vectors.shape[0] != config.vocab_size:
                raise ConfigError("word vector rows must match the vocabulary size")
            rows = np.arange(config.vocab_size) if covered is None else np.flatnonzero(covered)
            model.embedding.weight[torch.as_tensor(rows)] = torch.as_tensor(word_vectors[rows], dtype=DTYPE)
    return model


# -- checkpoints ----------------------------------------------------------------


def save_checkpoint(model: AnswerGenerator, path, rng_state: dict | None = None, extra: dict | None = None) -> None:
    """Write an ``.npz`` container: config + rng state metadata and little-endian float64 arrays.

    Zip entries carry a fixed timestamp so identical parameters give identical bytes.
    """
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.to_json(),
        "rng_state": rng_state,
        "extra": extra or {},
    }
    arrays = {"__meta__": np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)}
    for name, p in model.named_parameters():
        arrays[name] = p.detach().numpy().astype("<f8")
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())


def load_checkpoint(path) -> tuple[AnswerGenerator, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')!r}")
        model = AnswerGenerator(ModelConfig.from_json(meta["config"]))
        params = dict(model.named_parameters())
        if set(params) != set(data.files) - {"__meta__"}:
            raise ValueError("checkpoint arrays do not match the configured parameter set")
        with torch.no_grad():
            for name, p in params.items():
                p.copy_(torch.as_tensor(data[name].astype(np.float64)))
    return model, meta
