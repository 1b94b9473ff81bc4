"""Evaluation reports: plain text, JSON, and rendered figures.

The report path writes a delimited metrics table plus a machine-readable
JSON variant, and renders matplotlib figures (metric-vs-k curves and a
histogram of best gold ranks) as PNG files next to them.
"""

from __future__ import annotations

import json
import os
from typing import Callable, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from gramseek.metrics import (
    QrelEntry,
    RunRecord,
    accuracy_at_k,
    hits_at_k,
    r_precision,
)

DEFAULT_KS = (1, 5, 10, 20)


def compute_metrics(run: dict[str, list[RunRecord]], qrels: dict[str, QrelEntry],
                    ks: tuple[int, ...] = DEFAULT_KS,
                    passage_text: Optional[Callable[[str], str]] = None,
                    page_of: Optional[Callable[[str], str]] = None) -> dict:
    """Pure metric computation; identical inputs give identical reports."""
    out: dict = {"queries": len(run), "k": list(ks)}
    out["hits_at_k"] = {str(k): hits_at_k(run, qrels, k) for k in ks}
    have_answers = any(e.answers for e in qrels.values())
    if have_answers and passage_text is not None:
        out["accuracy_at_k"] = {str(k): accuracy_at_k(run, qrels, k, passage_text) for k in ks}
    out["r_precision_passage"] = r_precision(run, qrels)
    have_pages = any(e.gold_page_ids for e in qrels.values())
    if have_pages and page_of is not None:
        out["r_precision_page"] = r_precision(run, qrels, page_of=page_of)
    return out


def format_text_report(metrics: dict) -> str:
    lines = [f"queries\t{metrics['queries']}"]
    for fam in ("hits_at_k", "accuracy_at_k"):
        if fam in metrics:
            for k, v in metrics[fam].items():
                lines.append(f"{fam.replace('_at_k', '')}@{k}\t{v:.4f}")
    lines.append(f"r-precision(passage)\t{metrics['r_precision_passage']:.4f}")
    if "r_precision_page" in metrics:
        lines.append(f"r-precision(page)\t{metrics['r_precision_page']:.4f}")
    return "\n".join(lines) + "\n"


def best_gold_ranks(run: dict[str, list[RunRecord]], qrels: dict[str, QrelEntry]) -> list[int]:
    """Rank of the first gold document per query; 0 when none retrieved."""
    ranks = []
    for qid, recs in run.items():
        gold = set(qrels[qid].gold_doc_ids) if qid in qrels else set()
        rank = next((rec.rank for rec in recs if rec.doc_id in gold), 0)
        ranks.append(rank)
    return ranks


def render_figures(run: dict[str, list[RunRecord]], qrels: dict[str, QrelEntry],
                   metrics: dict, out_dir: str) -> list[str]:
    """Write metric-curve and gold-rank figures; returns the file paths."""
    paths = []
    ks = metrics["k"]

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for fam, label in (("hits_at_k", "hits@k"), ("accuracy_at_k", "accuracy@k")):
        if fam in metrics:
            ax.plot(ks, [metrics[fam][str(k)] for k in ks], marker="o", label=label)
    ax.set_xlabel("k")
    ax.set_ylabel("metric")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, "metrics_vs_k.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    ranks = best_gold_ranks(run, qrels)
    found = [r for r in ranks if r > 0]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if found:
        ax.hist(found, bins=range(1, max(found) + 2), color="#4878a8", edgecolor="white")
    ax.set_xlabel("rank of first gold document")
    ax.set_ylabel("queries")
    missed = len(ranks) - len(found)
    ax.set_title(f"{len(found)} found / {missed} missed")
    fig.tight_layout()
    path = os.path.join(out_dir, "gold_ranks.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)
    return paths


def write_report(run: dict[str, list[RunRecord]], qrels: dict[str, QrelEntry],
                 out_dir: str, ks: tuple[int, ...] = DEFAULT_KS,
                 passage_text: Optional[Callable[[str], str]] = None,
                 page_of: Optional[Callable[[str], str]] = None,
                 figures: bool = True) -> dict:
    """Compute metrics and write report.txt, report.json and the figures."""
    os.makedirs(out_dir, exist_ok=True)
    metrics = compute_metrics(run, qrels, ks, passage_text, page_of)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_text_report(metrics))
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if figures:
        metrics["figures"] = render_figures(run, qrels, metrics, out_dir)
    return metrics
