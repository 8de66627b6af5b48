import csv
import math

import pytest
from hypothesis import given, strategies as st

from avsd.analysis import SubsetMask, classify_turn, default_keywords
from avsd.metrics import (METRIC_COLUMNS, binary_prf, bleu_n, cider, evaluate, lcs_length, meteor_pair,
                          meteor_simplified, rouge_l, rouge_l_pair, score_corpus)

from oracles import brute_lcs, cider_script, confusion_tally

KS = default_keywords()


def S(text):
    return text.split()


BLEU_PAIRS = [(S("the man is cooking"), S("the man is cooking food")),
              (S("yes he is"), S("yes he is .")),
              (S("no"), S("no he does not")),
              (S("a dog barks loudly"), S("the dog barks")),
              (S("she opens the door"), S("she closes the door"))]


def test_bleu_hand_fixture():
    # hand count: unigram matches 4+3+1+2+3 = 13 of 16; bigram matches 3+2+0+1+1 = 7 of 11
    # hypothesis length 16, reference length 20
    bp = math.exp(1 - 20 / 16)
    assert bleu_n(BLEU_PAIRS, 1) == pytest.approx(bp * 13 / 16, abs=1e-12)
    assert bleu_n(BLEU_PAIRS, 2) == pytest.approx(bp * math.sqrt(13 / 16 * 7 / 11), abs=1e-12)
    # trigrams: the man is, man is cooking, yes he is = 3 of 2+1+0+2+2 = 7
    # 4-grams: the man is cooking = 1 of 3
    assert bleu_n(BLEU_PAIRS, 4) == pytest.approx(bp * (13 / 16 * 7 / 11 * 3 / 7 * 1 / 3) ** 0.25, abs=1e-12)


def test_bleu_identity_and_disjoint():
    pairs = [(S("a b c d e"), S("a b c d e")), (S("x y z w"), S("x y z w"))]
    for n in range(1, 5):
        assert bleu_n(pairs, n) == pytest.approx(1.0, abs=1e-12)
    assert bleu_n([(S("a b c"), S("d e f"))], 1) <= 1e-3
    with pytest.raises(ValueError):
        bleu_n(pairs, 5)


@given(st.lists(st.sampled_from("abcde"), min_size=1, max_size=8), st.lists(st.sampled_from("abcde"), min_size=1,
                                                                            max_size=8), st.randoms())
def test_bleu1_permutation_invariant(hyp, ref, rnd):
    perm = list(hyp)
    rnd.shuffle(perm)
    assert bleu_n([(perm, ref)], 1) == pytest.approx(bleu_n([(hyp, ref)], 1), rel=1e-12)


def test_rouge_examples():
    assert rouge_l_pair(S("a b c"), S("a b c")) == 1.0
    assert rouge_l_pair(S("a b"), S("b a")) == pytest.approx(0.5, abs=1e-12)
    # LCS("a b c d", "a c e") = 2: P = 1/2, R = 2/3, beta = 1.2
    p, r, b2 = 0.5, 2 / 3, 1.44
    assert rouge_l_pair(S("a b c d"), S("a c e")) == pytest.approx((1 + b2) * p * r / (r + b2 * p), abs=1e-12)
    assert rouge_l([(S("x"), S("y"))]) == 0.0


@given(st.lists(st.sampled_from("abcd"), max_size=8), st.lists(st.sampled_from("abcd"), max_size=8))
def test_lcs_matches_brute_force(a, b):
    assert lcs_length(a, b) == brute_lcs(a, b)


CIDER_PAIRS = [(S("a man is cooking in the kitchen"), S("a man cooks in the kitchen")),
               (S("yes he is"), S("yes he is")),
               (S("no there is no sound"), S("no , it is silent")),
               (S("the dog barks"), S("a dog is barking loudly")),
               (S("she opens the door"), S("she closes the door slowly")),
               (S("two people"), S("only one person"))]


def test_cider_matches_scripted_oracle():
    assert cider(CIDER_PAIRS) == pytest.approx(cider_script(CIDER_PAIRS), abs=1e-6)


def test_cider_identity_disjoint_and_corpus_requirement():
    pairs = [(S("a b c d"), S("a b c d")), (S("e f g h"), S("e f g h")), (S("i j k l"), S("i j k l"))]
    assert cider(pairs) == pytest.approx(10.0, abs=1e-12)
    assert cider([(S("a b"), S("c d")), (S("e f"), S("g h"))]) == 0.0
    with pytest.raises(ValueError, match="corpus"):
        cider([(S("a"), S("a"))])


def test_meteor_identity_three_tokens():
    assert meteor_pair(S("a b c"), S("a b c")) == pytest.approx(1 - 0.5 / 27, abs=1e-15)
    assert meteor_pair(S("a b"), S("c d")) == 0.0


METEOR_PAIRS = [(S("the man is cooking"), S("the man cooks")),
                (S("yes he is"), S("yes he is")),
                (S("no"), S("yes")),
                (S("he walked in"), S("in walks he")),
                (S("a a b"), S("a b"))]


def test_meteor_hand_alignment():
    # 1: the/the, man/man exact, cooking~cooks by stem; 2 chunks, P=3/4, R=1
    s1 = (7.5 / 7.75) * (1 - 0.5 * (2 / 3) ** 3)
    # 2: identity, one chunk
    s2 = 1 - 0.5 / 27
    # 3: no match
    s3 = 0.0
    # 4: all three aligned, each its own chunk: penalty 0.5
    s4 = 0.5
    # 5: a->a, b->b, second "a" unmatched; 2 chunks, P=2/3, R=1
    s5 = (20 / 21) * 0.5
    expected = [s1, s2, s3, s4, s5]
    for (h, r), e in zip(METEOR_PAIRS, expected):
        assert meteor_pair(h, r) == pytest.approx(e, abs=1e-12)
    assert meteor_simplified(METEOR_PAIRS) == pytest.approx(sum(expected) / 5, abs=1e-12)


@given(st.lists(st.tuples(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=7),
                          st.lists(st.sampled_from("abcdef"), min_size=1, max_size=7)), min_size=2, max_size=6))
def test_scores_in_range_and_pure(pairs):
    s = score_corpus(pairs)
    assert s == score_corpus(pairs)
    for k, v in s.items():
        hi = 10.0 if k == "CIDEr" else 1.0
        assert 0.0 <= v <= hi + 1e-9 and math.isfinite(v)


def test_binary_prf_examples():
    b = binary_prf(["yes", "no"], [S("yes"), S("yes")], KS)
    assert (b.precision, b.recall) == (0.5, 1.0) and b.f1 == pytest.approx(2 / 3, abs=1e-15)
    b = binary_prf(["yes", "no", "yes"], [S("yes ."), S("no"), S("yeah sure")], KS)
    assert (b.precision, b.recall, b.f1) == (1.0, 1.0, 1.0)
    assert binary_prf([], [], KS) is None
    with pytest.raises(ValueError):
        binary_prf(["maybe"], [S("yes")], KS)


GOLD20 = ["yes", "yes", "no", "no", "yes", "no", "yes", "yes", "no", "no",
          "yes", "no", "yes", "no", "yes", "yes", "no", "yes", "no", "no"]
HYP20 = ["yes it is", "no", "yes", "no he does not", "he is cooking", "nope", "yeah", "yes", "no", "yes",
         "no , not really", "i think so", "yep", "no", "yes .", "nah", "yes", "yup", "yes he does", "no"]


def _first_marker(text):
    for tok in text.split():
        if tok in ("yes", "yeah", "yep", "yup", "yea"):
            return "yes"
        if tok in ("no", "nope", "nah"):
            return "no"
    return None


def test_binary_prf_twenty_pair_tally():
    pred = [_first_marker(h) for h in HYP20]
    expect = confusion_tally(GOLD20, pred)
    # hand tally: tp at pairs 1,7,8,13,15,18; fp at 3,10,17,19; fn at 2,5,11,16
    assert expect[3:] == (6, 4, 4)
    b = binary_prf(GOLD20, [S(h) for h in HYP20], KS)
    assert (b.precision, b.recall, b.f1, b.tp, b.fp, b.fn) == expect


def _mask(questions, answers):
    return SubsetMask([classify_turn(q, a, KS, 0, i) for i, (q, a) in enumerate(zip(questions, answers))])


def test_evaluate_report(tmp_path):
    qs = [S("is it loud ?"), S("what is he doing ?"), S("does she talk ?"), S("where is it ?")]
    refs = [S("yes it is loud"), S("he is cooking"), S("no she does not"), S("in the kitchen")]
    hyps = [S("yes it is"), S("he cooks"), S("yes she does"), S("in a kitchen")]
    rep = evaluate(hyps, refs, _mask(qs, refs), KS)
    assert set(rep.scores["overall"]) == set(METRIC_COLUMNS) and len(METRIC_COLUMNS) == 7
    assert rep.counts["binary_answer"] + rep.counts["not_binary_answer"] == rep.counts["overall"]
    assert rep.binary["binary_answer"].n == 2
    rep.write_csv(tmp_path / "r.csv")
    with open(tmp_path / "r.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["metric", "subset", "score", "n_examples"]
    assert "Bleu1" in rep.table() and "METEOR is simplified" in rep.table()
    with pytest.raises(ValueError):
        evaluate(hyps[:2], refs, None)


def test_full_mask_subset_equals_overall():
    qs = [S("is it ?"), S("does he ?"), S("can you ?")]
    refs = [S("yes it is"), S("no he does not"), S("yes i can hear it")]
    hyps = [S("yes"), S("no he does"), S("yes i can")]
    rep = evaluate(hyps, refs, _mask(qs, refs), KS, subsets=["binary_answer", "binary_question"])
    assert rep.scores["binary_answer"] == rep.scores["overall"]
    assert rep.scores["binary_question"] == rep.scores["overall"]
