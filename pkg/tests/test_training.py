import csv
import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from avsd.corpus import build_vocabulary, load_dataset, synthesize_features
from avsd.model import ConfigError, ModelConfig, init_parameters
from avsd.training import (AdamState, TrainConfig, TrainingDivergence, adam_step, clip_grad_norm, grad_check,
                           load_best, make_examples, perplexity, random_example, train)

from conftest import FIXTURES
from oracles import scalar_adam


def test_adam_zero_gradient():
    p = {"w": torch.tensor([1.0, -2.0], dtype=torch.float64)}
    before = p["w"].clone()
    adam_step(p, {"w": torch.zeros(2, dtype=torch.float64)}, AdamState())
    assert torch.equal(p["w"], before)


def test_adam_first_step():
    p = {"w": torch.zeros(1, dtype=torch.float64)}
    adam_step(p, {"w": torch.ones(1, dtype=torch.float64)}, AdamState(), lr=0.1)
    assert abs(float(p["w"]) + 0.1 / (1 + 1e-8)) < 1e-15


def test_adam_matches_scalar_reference():
    rng = np.random.default_rng(0)
    grads = rng.normal(size=100) * np.exp(rng.normal(size=100))
    ref = scalar_adam(0.3, grads, lr=0.01)
    p = {"w": torch.tensor([0.3], dtype=torch.float64)}
    st_ = AdamState()
    for g, r in zip(grads, ref):
        adam_step(p, {"w": torch.tensor([g], dtype=torch.float64)}, st_, lr=0.01)
        assert abs(float(p["w"]) - r) <= 1e-12


def test_adam_rejects_nonfinite():
    p = {"w": torch.zeros(1, dtype=torch.float64)}
    with pytest.raises(TrainingDivergence, match="w"):
        adam_step(p, {"w": torch.tensor([math.nan], dtype=torch.float64)}, AdamState())


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(0.01, 10))
def test_clip_bounds_norm(values, max_norm):
    g = {"a": torch.tensor(values, dtype=torch.float64)}
    clip_grad_norm(g, max_norm)
    assert float(g["a"].norm()) <= max_norm * (1 + 1e-12)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ConfigError):
        TrainConfig(clip_norm=-1)
    with pytest.raises(ConfigError, match="unknown"):
        TrainConfig.from_json({"lr": 1})


def _data():
    dialogs = load_dataset(FIXTURES / "mini_train.json")[:4]
    vocab = build_vocabulary(dialogs, 1)
    return dialogs, vocab


def test_make_examples():
    dialogs, vocab = _data()
    cfg = ModelConfig(vocab_size=len(vocab), embed_dim=8, hidden_dim=8)
    ex = make_examples(dialogs, vocab, cfg)
    assert len(ex) == sum(len(d.turns) for d in dialogs)
    assert len(ex[0].history) == 1  # caption pseudo-turn only
    assert len(ex[2].history) == 3
    cfg_a = ModelConfig(vocab_size=len(vocab), audio_mode="vggish128")
    with pytest.raises(ConfigError):
        make_examples(dialogs, vocab, cfg_a)
    ex = make_examples(dialogs, vocab, cfg_a, lambda vid: synthesize_features(vid, 0))
    assert ex[0].audio.shape == (4, 128)


def _run(tmp_path, name, epochs=4):
    dialogs, vocab = _data()
    cfg = ModelConfig(vocab_size=len(vocab), embed_dim=8, hidden_dim=8, attention_mode="sent_all")
    ex = make_examples(dialogs, vocab, cfg)
    tc = TrainConfig(learning_rate=0.01, batch_size=3, max_epochs=epochs, checkpoint_dir=str(tmp_path / name),
                     run_id="r", rng_seed=2)
    return train(cfg, tc, ex[:10], ex[10:]), ex


def test_train_selection_and_determinism(tmp_path):
    rec, ex = _run(tmp_path, "a")
    rec2, _ = _run(tmp_path, "b")
    assert rec.train_loss == rec2.train_loss and rec.valid_ppl == rec2.valid_ppl
    assert rec.valid_ppl[rec.best_epoch] == min(rec.valid_ppl)
    m, meta = load_best(tmp_path / "a", "r")
    m2, _ = load_best(tmp_path / "b", "r")
    for (n, p), (_, q) in zip(m.named_parameters(), m2.named_parameters()):
        assert torch.equal(p, q), n
    assert abs(perplexity(m, ex[10:]) - rec.valid_ppl[rec.best_epoch]) <= 1e-9
    assert meta["extra"]["epoch"] == rec.best_epoch
    with open(tmp_path / "a" / "r.log.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "train_loss", "valid_ppl"] and len(rows) == 5
    assert float(rows[1 + rec.best_epoch][2]) == rec.valid_ppl[rec.best_epoch]


def test_divergence_names_batch(tmp_path):
    dialogs, vocab = _data()
    cfg = ModelConfig(vocab_size=len(vocab), embed_dim=8, hidden_dim=8, audio_mode="vggish128")
    bad = np.full((2, 128), np.nan)
    ex = make_examples(dialogs[:1], vocab, cfg, lambda vid: type("B", (), {"audio_frames": bad,
                                                                         "video_frames": None})())
    tc = TrainConfig(max_epochs=1, checkpoint_dir=str(tmp_path))
    with pytest.raises(TrainingDivergence, match="batch 0"):
        train(cfg, tc, ex, ex)


def test_grad_check_passes_and_covers_groups():
    cfg = ModelConfig(vocab_size=20, embed_dim=6, hidden_dim=8, attention_mode="word_all", topic_mode="hlstm_topics",
                      K=4)
    rep = grad_check(cfg)
    assert rep.passed, rep.max_rel_error
    assert set(rep.max_rel_error) == {n for n, _ in init_parameters(cfg, 0).named_parameters()}


def test_grad_check_flags_corrupted_group():
    cfg = ModelConfig(vocab_size=20, embed_dim=6, hidden_dim=8, attention_mode="sent_all")
    model = init_parameters(cfg, 0)
    with torch.no_grad():
        for p in model.parameters():
            p.mul_(10)
    model.attention.v.register_hook(lambda g: g * 1.05)
    rep = grad_check(cfg, model=model, example=random_example(cfg, np.random.default_rng(0)))
    assert rep.failures == ["attention.v"]
    with pytest.raises(AssertionError, match="attention.v"):
        rep.raise_on_failure()
