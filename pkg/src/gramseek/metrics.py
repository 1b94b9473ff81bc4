"""Retrieval evaluation: run files, qrels, and the three metric families.

Run file format: tab-separated UTF-8 lines (query_id, doc_id, rank, score,
mode), ranks contiguous from 1 per query, scores non-increasing with rank.
Qrels: line-delimited JSON records {query_id, gold_doc_ids,
gold_page_ids?, answers?}. Evaluation is a pure function of (run, qrels).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional


@dataclass(frozen=True)
class RunRecord:
    query_id: str
    doc_id: str
    rank: int
    score: float
    mode: str


@dataclass
class QrelEntry:
    query_id: str
    gold_doc_ids: list[str]
    gold_page_ids: list[str] = field(default_factory=list)
    answers: list[str] = field(default_factory=list)


def write_run(path: str, records: Iterable[RunRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(f"{r.query_id}\t{r.doc_id}\t{r.rank}\t{r.score:.12g}\t{r.mode}\n")


def read_run(path: str) -> dict[str, list[RunRecord]]:
    """Parse and validate a run file, grouped by query."""
    by_query: dict[str, list[RunRecord]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 tab-separated fields")
            rec = RunRecord(parts[0], parts[1], int(parts[2]), float(parts[3]), parts[4])
            by_query.setdefault(rec.query_id, []).append(rec)
    for qid, recs in by_query.items():
        validate_ranking(qid, recs)
    return by_query


def validate_ranking(query_id: str, recs: list[RunRecord]) -> None:
    for i, rec in enumerate(recs):
        if rec.rank != i + 1:
            raise ValueError(f"query {query_id!r}: ranks are not contiguous from 1")
        if i and rec.score > recs[i - 1].score:
            raise ValueError(f"query {query_id!r}: scores increase with rank")


def read_qrels(path: str) -> dict[str, QrelEntry]:
    out: dict[str, QrelEntry] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            entry = QrelEntry(
                query_id=str(rec["query_id"]),
                gold_doc_ids=[str(d) for d in rec.get("gold_doc_ids", [])],
                gold_page_ids=[str(p) for p in rec.get("gold_page_ids", [])],
                answers=[str(a) for a in rec.get("answers", [])],
            )
            out[entry.query_id] = entry
    return out


def write_qrels(path: str, entries: Iterable[QrelEntry]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            rec = {"query_id": e.query_id, "gold_doc_ids": e.gold_doc_ids}
            if e.gold_page_ids:
                rec["gold_page_ids"] = e.gold_page_ids
            if e.answers:
                rec["answers"] = e.answers
            fh.write(json.dumps(rec) + "\n")


def _normalize(text: str) -> str:
    return re.sub(r"\s+", " ", text.lower()).strip()


def _entry(qrels: dict[str, QrelEntry], query_id: str) -> QrelEntry:
    try:
        return qrels[query_id]
    except KeyError:
        raise KeyError(f"query {query_id!r} missing from qrels") from None


def accuracy_at_k(run: dict[str, list[RunRecord]], qrels: dict[str, QrelEntry], k: int,
                  passage_text: Callable[[str], str]) -> float:
    """Fraction of queries with an answer-containing passage in the top k.

    Containment is a case-insensitive, whitespace-collapsed substring test
    over the detokenized passage text supplied by passage_text.
    """
    if not run:
        return 0.0
    hits = 0
    for qid, recs in run.items():
        answers = [_normalize(a) for a in _entry(qrels, qid).answers]
        found = False
        for rec in recs[:k]:
            text = _normalize(passage_text(rec.doc_id))
            if any(ans and ans in text for ans in answers):
                found = True
                break
        hits += found
    return hits / len(run)


def hits_at_k(run: dict[str, list[RunRecord]], qrels: dict[str, QrelEntry], k: int) -> float:
    """Fraction of queries with a gold document among the top k."""
    if not run:
        return 0.0
    hits = 0
    for qid, recs in run.items():
        gold = set(_entry(qrels, qid).gold_doc_ids)
        hits += any(rec.doc_id in gold for rec in recs[:k])
    return hits / len(run)


def r_precision(run: dict[str, list[RunRecord]], qrels: dict[str, QrelEntry],
                page_of: Optional[Callable[[str], str]] = None) -> float:
    """Gold items among the top R, macro-averaged over queries.

    R is the per-query number of gold items. With page_of given, the
    ranking is first mapped to pages (deduplicated by first occurrence)
    and gold pages are used instead of gold documents.
    """
    if not run:
        return 0.0
    total = 0.0
    for qid, recs in run.items():
        entry = _entry(qrels, qid)
        if page_of is not None:
            gold = set(entry.gold_page_ids or entry.gold_doc_ids)
            ranked: list[str] = []
            for rec in recs:
                page = page_of(rec.doc_id)
                if page not in ranked:
                    ranked.append(page)
        else:
            gold = set(entry.gold_doc_ids)
            ranked = [rec.doc_id for rec in recs]
        if not gold:
            raise ValueError(f"query {qid!r} has no gold items (R = 0)")
        r = len(gold)
        total += sum(1 for d in ranked[:r] if d in gold) / r
    return total / len(run)
