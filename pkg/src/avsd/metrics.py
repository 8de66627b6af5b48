"""Generation metrics (BLEU, ROUGE-L, CIDEr, simplified METEOR) and binary-answer scoring."""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .analysis import KeywordSets, SubsetMask, is_binary_answer

METRIC_COLUMNS = ("Bleu1", "Bleu2", "Bleu3", "Bleu4", "Meteor", "Rouge", "CIDEr")
BLEU_EPS = 1e-9
ROUGE_BETA = 1.2
CIDER_SIGMA = 6.0

Pair = tuple[Sequence[str], Sequence[str]]  # (hypothesis tokens, reference tokens)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


# -- BLEU ---------------------------------------------------------------------------


def bleu_n(pairs: Sequence[Pair], n: int) -> float:
    """Corpus BLEU with uniform weights over orders 1..n and a brevity penalty."""
    if not 1 <= n <= 4:
        raise ValueError("BLEU order must lie in 1..4")
    if not pairs:
        return 0.0
    matched = [0] * n
    total = [0] * n
    hyp_len = ref_len = 0
    for hyp, ref in pairs:
        hyp_len += len(hyp)
        ref_len += len(ref)
        for k in range(1, n + 1):
            h, r = ngrams(hyp, k), ngrams(ref, k)
            matched[k - 1] += sum(min(c, r[g]) for g, c in h.items())
            total[k - 1] += max(len(hyp) - k + 1, 0)
    log_p = 0.0
    for m, t in zip(matched, total):
        # zero counts get an epsilon so the log stays finite
        log_p += math.log(max(m, BLEU_EPS) / max(t, 1)) / n
    if hyp_len == 0:
        return 0.0
    bp = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)
    return bp * math.exp(log_p)


# -- ROUGE-L ------------------------------------------------------------------------


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_pair(hyp: Sequence[str], ref: Sequence[str], beta: float = ROUGE_BETA) -> float:
    lcs = lcs_length(hyp, ref)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(hyp), lcs / len(ref)
    return (1 + beta ** 2) * p * r / (r + beta ** 2 * p)


def rouge_l(pairs: Sequence[Pair]) -> float:
    if not pairs:
        return 0.0
    return sum(rouge_l_pair(h, r) for h, r in pairs) / len(pairs)


# -- CIDEr --------------------------------------------------------------------------


def cider(pairs: Sequence[Pair], n: int = 4, sigma: float = CIDER_SIGMA) -> float:
    """CIDEr-D style consensus score (x10), document frequencies from the references."""
    if len(pairs) < 2:
        raise ValueError("CIDEr needs a corpus of at least two pairs for document frequencies")
    df = Counter()
    for _, ref in pairs:
        for k in range(1, n + 1):
            df.update(ngrams(ref, k).keys())
    log_n = math.log(len(pairs))

    def tfidf(tokens, k):
        counts = ngrams(tokens, k)
        vec = {g: c * (log_n - math.log(max(1.0, df[g]))) for g, c in counts.items()}
        norm = math.sqrt(sum(v * v for v in vec.values()))
        return vec, norm

    scores = []
    for hyp, ref in pairs:
        delta = len(hyp) - len(ref)
        penalty = math.exp(-(delta ** 2) / (2 * sigma ** 2))
        per_n = []
        for k in range(1, n + 1):
            vh, nh = tfidf(hyp, k)
            vr, nr = tfidf(ref, k)
            dot = sum(min(v, vr[g]) * vr[g] for g, v in vh.items() if g in vr)
            per_n.append(dot / (nh * nr) * penalty if nh > 0 and nr > 0 else 0.0)
        scores.append(10.0 * sum(per_n) / n)
    return sum(scores) / len(scores)


# -- METEOR (simplified) ---------------------------------------------------------


_SUFFIXES = ("ing", "ed", "es", "s", "ly")


def stem(word: str) -> str:
    for suf in _SUFFIXES:
        if word.endswith(suf) and len(word) - len(suf) >= 3:
            return word[: -len(suf)]
    return word


def align(hyp: Sequence[str], ref: Sequence[str]) -> list[tuple[int, int]]:
    """Greedy one-to-one unigram alignment: exact matches first, then stem matches."""
    used_h, used_r = set(), set()
    pairs = []
    for key in (lambda w: w, stem):
        for i, h in enumerate(hyp):
            if i in used_h:
                continue
            for j, r in enumerate(ref):
                if j not in used_r and key(h) == key(r):
                    pairs.append((i, j))
                    used_h.add(i)
                    used_r.add(j)
                    break
    return sorted(pairs)


def count_chunks(alignment: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_pair(hyp: Sequence[str], ref: Sequence[str]) -> float:
    alignment = align(hyp, ref)
    m = len(alignment)
    if m == 0:
        return 0.0
    p, r = m / len(hyp), m / len(ref)
    f_mean = 10 * p * r / (r + 9 * p)
    penalty = 0.5 * (count_chunks(alignment) / m) ** 3
    return f_mean * (1 - penalty)


def meteor_simplified(pairs: Sequence[Pair]) -> float:
    if not pairs:
        return 0.0
    return sum(meteor_pair(h, r) for h, r in pairs) / len(pairs)


# -- binary answers --------------------------------------------------------------


@dataclass(frozen=True)
class BinaryScores:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    n: int


def binary_prf(gold_polarity: Sequence[str], hypotheses: Sequence[Sequence[str]], ks: KeywordSets,
               positive: str = "yes") -> BinaryScores | None:
    """Precision/recall/F1 for the ``positive`` class over binary ground-truth answers.

    A hypothesis without a yes/no marker is wrong for both classes: it can be a
    false negative but never a true or false positive. Returns ``None`` for an
    empty subset; a zero denominator yields 0.
    """
    if len(gold_polarity) != len(hypotheses):
        raise ValueError("gold and hypothesis lists must align")
    if not gold_polarity:
        return None
    tp = fp = fn = 0
    for gold, hyp in zip(gold_polarity, hypotheses):
        if gold not in ("yes", "no"):
            raise ValueError(f"gold polarity must be 'yes' or 'no', got {gold!r}")
        _, pred = is_binary_answer(hyp, ks)
        if pred == positive:
            if gold == positive:
                tp += 1
            else:
                fp += 1
        elif gold == positive:
            fn += 1
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return BinaryScores(p, r, f, tp, fp, fn, len(gold_polarity))


# -- reports -----------------------------------------------------------------------


def score_corpus(pairs: Sequence[Pair]) -> dict[str, float | None]:
    scores: dict[str, float | None] = {f"Bleu{n}": bleu_n(pairs, n) for n in range(1, 5)}
    scores["Meteor"] = meteor_simplified(pairs)
    scores["Rouge"] = rouge_l(pairs)
    scores["CIDEr"] = cider(pairs) if len(pairs) >= 2 else None
    return scores


DEFAULT_SUBSETS = ("binary_answer", "not_binary_answer", "binary_question", "not_binary_question",
                   "has_coref_q", "audio_q", "not_audio_q")


@dataclass
class EvalReport:
    scores: dict[str, dict[str, float | None]] = field(default_factory=dict)  # subset -> metric -> score
    counts: dict[str, int] = field(default_factory=dict)
    binary: dict[str, BinaryScores | None] = field(default_factory=dict)
    note: str = ("METEOR is simplified (exact + suffix-stripped stem matches, no synonyms); "
                 "CIDEr is CIDEr-D style with document frequencies from the evaluated references.")

    def rows(self) -> list[tuple[str, str, float | None, int]]:
        out = []
        for subset, metrics in self.scores.items():
            for metric in METRIC_COLUMNS:
                out.append((metric, subset, metrics.get(metric), self.counts[subset]))
        for subset, b in self.binary.items():
            if b is not None:
                for name in ("precision", "recall", "f1"):
                    out.append((f"binary_{name}", subset, getattr(b, name), b.n))
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "subset", "score", "n_examples"])
            for metric, subset, score, n in self.rows():
                w.writerow([metric, subset, "" if score is None else repr(score), n])

    def table(self) -> str:
        width = max([len("subset")] + [len(s) for s in self.scores]) + 2
        lines = [f"# {self.note}",
                 "subset".ljust(width) + "".join(c.rjust(8) for c in METRIC_COLUMNS) + "       n"]
        for subset, metrics in self.scores.items():
            cells = "".join(("     --" if metrics[c] is None else f"{metrics[c]:.3f}").rjust(8)
                            for c in METRIC_COLUMNS)
            lines.append(subset.ljust(width) + cells + str(self.counts[subset]).rjust(8))
        for subset, b in self.binary.items():
            if b is None:
                lines.append(f"binary yes-class P/R/F1 [{subset}]: absent (empty subset)")
            else:
                lines.append(f"binary yes-class P/R/F1 [{subset}]: {b.precision:.3f} / {b.recall:.3f} / "
                             f"{b.f1:.3f} (n={b.n})")
        return "\n".join(lines)


def evaluate(hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]],
             mask: SubsetMask | None = None, ks: KeywordSets | None = None,
             subsets: Iterable[str] = DEFAULT_SUBSETS) -> EvalReport:
    """Overall and per-subset scores; CIDEr document frequencies come from each evaluated subset."""
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses but {len(references)} references")
    if mask is not None and len(mask) != len(references):
        raise ValueError("subset mask does not align with the references")
    pairs = [(list(h), list(r)) for h, r in zip(hypotheses, references)]
    report = EvalReport()
    report.scores["overall"] = score_corpus(pairs)
    report.counts["overall"] = len(pairs)
    if mask is None:
        return report
    for name in subsets:
        sel = [p for p, keep in zip(pairs, mask.mask(name)) if keep]
        report.scores[name] = score_corpus(sel) if sel else {c: None for c in METRIC_COLUMNS}
        report.counts[name] = len(sel)
    if ks is not None:
        pol = mask.polarities()
        idx = [i for i, p in enumerate(pol) if p is not None]
        report.binary["binary_answer"] = binary_prf([pol[i] for i in idx], [pairs[i][0] for i in idx], ks)
        coref = mask.mask("has_coref_q")
        idx_c = [i for i in idx if coref[i]]
        report.binary["binary_answer&has_coref_q"] = binary_prf(
            [pol[i] for i in idx_c], [pairs[i][0] for i in idx_c], ks)
    return report
