"""Figures written next to the text/CSV reports."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 7,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # keeps repeated renders byte-identical
    "svg.hashsalt": "avsd",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def grouped_bars(ax, groups: Sequence[str], series: Mapping[str, Sequence[float | None]], ylabel: str = ""):
    names = list(series)
    width = 0.8 / max(len(names), 1)
    x = np.arange(len(groups))
    for i, name in enumerate(names):
        vals = [np.nan if v is None else v for v in series[name]]
        ax.bar(x + (i - (len(names) - 1) / 2) * width, vals, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(groups, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, ncol=min(len(names), 4))


def plot_eval_report(report, path):
    """Text metrics per subset; CIDEr gets its own axis (0-10 scale)."""
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3), gridspec_kw={"width_ratios": [3, 1]})
        text_metrics = ["Bleu1", "Bleu2", "Bleu3", "Bleu4", "Meteor", "Rouge"]
        subsets = list(report.scores)
        grouped_bars(ax1, text_metrics, {s: [report.scores[s][m] for m in text_metrics] for s in subsets}, "score")
        grouped_bars(ax2, ["CIDEr"], {s: [report.scores[s]["CIDEr"]] for s in subsets})
        ax2.get_legend().remove()
        return _save(fig, path)


def plot_binary_prf(named_scores: Mapping[str, object], path):
    """Precision/recall/F1 bars per model (yes class over binary ground truth)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        names = [n for n, b in named_scores.items() if b is not None]
        series = {k: [getattr(named_scores[n], k) for n in names] for k in ("precision", "recall", "f1")}
        grouped_bars(ax, names, series, "score")
        ax.set_ylim(0, 1.05)
        return _save(fig, path)


def plot_training_curves(train_loss: Sequence[float], valid_ppl: Sequence[float], best_epoch: int, path):
    with plt.rc_context(STYLE):
        fig, ax1 = plt.subplots(figsize=(4.5, 3))
        epochs = np.arange(len(train_loss))
        ax1.plot(epochs, train_loss, label="train NLL / token")
        ax1.set_xlabel("epoch")
        ax1.set_ylabel("train NLL / token")
        ax2 = ax1.twinx()
        ax2.plot(epochs, valid_ppl, color="C1", label="valid perplexity")
        ax2.set_ylabel("valid perplexity")
        ax2.spines["right"].set_visible(True)
        if best_epoch >= 0:
            ax2.axvline(best_epoch, color="0.5", ls=":", lw=1)
        return _save(fig, path)


def plot_length_histograms(q_lengths: Sequence[int], a_lengths: Sequence[int], path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        top = max(list(q_lengths) + list(a_lengths) + [1])
        bins = np.arange(0, top + 2) - 0.5
        ax.hist(q_lengths, bins=bins, alpha=0.6, label="questions")
        ax.hist(a_lengths, bins=bins, alpha=0.6, label="answers")
        ax.set_xlabel("tokens")
        ax.set_ylabel("utterances")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_matrix_comparison(reports: Mapping[str, object], path, subset: str = "overall"):
    """One group per metric, one bar per experiment."""
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3), gridspec_kw={"width_ratios": [3, 1]})
        text_metrics = ["Bleu1", "Bleu2", "Bleu3", "Bleu4", "Meteor", "Rouge"]
        grouped_bars(ax1, text_metrics,
                     {n: [r.scores[subset][m] for m in text_metrics] for n, r in reports.items()}, "score")
        grouped_bars(ax2, ["CIDEr"], {n: [r.scores[subset]["CIDEr"]] for n, r in reports.items()})
        ax2.get_legend().remove()
        return _save(fig, path)
