import json

import pytest
from hypothesis import given, strategies as st

from avsd.analysis import (KeywordSets, SubsetMask, classify_turn, default_keywords, has_coreference,
                           is_audio_related, is_binary_answer, is_binary_question, length_stats, make_subsets,
                           summarize)
from avsd.corpus import load_dataset, make_dialog

from conftest import FIXTURES, official_data_dir

KS = default_keywords()


def test_length_stats():
    s = length_stats(["a b", "a b c d"])
    assert (s.mean, s.std, s.min, s.max) == (3.0, 1.0, 2, 4)
    s = length_stats(["a b c"])
    assert s.std == 0 and s.min == s.max == 3
    with pytest.raises(ValueError):
        length_stats([])


def test_classifier_examples():
    assert is_binary_question("does he take something out of the fridge ?", KS)
    assert not is_binary_question("what is he doing ?", KS)
    assert is_binary_answer("yes he takes something out of the refrigerator", KS) == (True, "yes")
    assert is_binary_answer("he is in the kitchen", KS) == (False, None)
    assert has_coreference("does he take something out of the fridge ?", KS)
    assert not has_coreference("a person walks into the bathroom", KS)
    assert is_audio_related("is there sound to the video ?", KS)
    # recorded outcome under the shipped keyword set
    assert not is_audio_related("does she say anything ?", KS)


def test_polarity_first_marker_wins():
    assert is_binary_answer("no , not yes", KS) == (True, "no")
    assert is_binary_answer("yeah but no", KS) == (True, "yes")


def test_audio_prefix_not_substring():
    assert is_audio_related("the dog is barking loudly", KS)
    assert not is_audio_related("he is using a pan during dinner", KS)


def test_keywords_are_data(tmp_path):
    obj = KS.to_json()
    obj["audio_keywords"] = obj["audio_keywords"] + ["say"]
    p = tmp_path / "kw.json"
    p.write_text(json.dumps(obj))
    ks = KeywordSets.load(p)
    assert is_audio_related("does she say anything ?", ks)
    with pytest.raises(ValueError, match="missing"):
        KeywordSets.from_json({"pronouns": []})


def test_labeled_fixture():
    rows = json.loads((FIXTURES / "labeled_turns.json").read_text())
    assert len(rows) == 6
    for r in rows:
        f = classify_turn(r["question"], r["answer"], KS)
        pol = None if f.answer_polarity_yes is None else ("yes" if f.answer_polarity_yes else "no")
        assert (f.binary_question, f.binary_answer, pol, f.has_coref_q, f.has_coref_a, f.audio_q, f.audio_a) == \
            (r["binary_question"], r["binary_answer"], r["polarity"], r["has_coref_q"], r["has_coref_a"],
             r["audio_q"], r["audio_a"])


def test_subset_partition_and_polarity():
    dialogs = load_dataset(FIXTURES / "mini.json")
    mask = make_subsets(dialogs, KS)
    assert len(mask) == sum(len(d.turns) for d in dialogs)
    b, nb = mask.mask("binary_answer"), mask.mask("not_binary_answer")
    assert all(x != y for x, y in zip(b, nb))
    assert all((p is not None) == x for p, x in zip(mask.polarities(), b))
    assert make_subsets(dialogs, KS).flags == mask.flags
    with pytest.raises(KeyError):
        mask.mask("funny")


def test_polarity_only_on_binary():
    f = classify_turn("is it ?", "blue", KS)
    with pytest.raises(ValueError):
        SubsetMask([f.__class__(**{**f.__dict__, "answer_polarity_yes": True})])


@given(st.lists(st.sampled_from(["yes", "no", "he", "she", "sound", "is", "what", "the", "a", "hear", "."]),
                min_size=1, max_size=8),
       st.lists(st.sampled_from(["yes", "no", "he", "sound", "nope", "blue", "."]), min_size=1, max_size=8))
def test_classifiers_pure(q, a):
    f1 = classify_turn(q, a, KS)
    f2 = classify_turn(list(q), list(a), KS)
    assert f1 == f2
    assert (f1.answer_polarity_yes is not None) == f1.binary_answer


def test_summarize_mini():
    dialogs = load_dataset(FIXTURES / "mini.json")
    s = summarize(dialogs, KS)
    assert s.n_dialogs == 20 and s.n_turns == 80
    rows = dict(s.rows())
    assert rows["dialogs"] == "20"
    assert rows["binary questions"].endswith("%")


@pytest.mark.skipif(official_data_dir() is None, reason="official AVSD data not provided")
def test_official_rates():
    dialogs = load_dataset(official_data_dir() / "train.json")
    s = summarize(dialogs, KS)
    assert abs(s.pct["binary questions"] - 61.19) <= 2
    assert abs(s.pct["questions with pronouns"] - 62.08) <= 2
    assert abs(s.pct["answers with pronouns"] - 73.69) <= 2
    assert abs(s.pct["audio-related questions"] - 12.38) <= 2
    assert abs(s.pct["audio-related answers"] - 14.39) <= 2
    assert abs(s.pct["yes among binary answers"] - 41.69) <= 2
    assert abs(s.questions.mean - 8.46) <= 0.2 and abs(s.questions.std - 3.48) <= 0.2
