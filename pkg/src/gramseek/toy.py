"""Deterministic synthetic benchmark corpus.

Generates a natural-language-like corpus of pages split into passages.
Bodies are Zipf-distributed common fillers; special words (per-page theme
words and shared entity, per-passage unique entity, and rare phrase words)
are laid into distinct gaps so no two specials are ever adjacent by
accident. Each passage plants one three-word "answer phrase" of rare
fillers several times: those plants are the only attested multi-token
sequences of query-relevant words, so ranking the gold passage above its
page siblings on a hard query requires actually decoding the phrase.
Easy queries name the passage's unique entity instead. Everything is a
pure function of the seed.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass

from gramseek.metrics import QrelEntry, write_qrels

_FILL_SYL = ["ba", "de", "ki", "lo", "mu", "na", "po", "ri", "su", "ta"]
_THEME_SYL = ["vex", "zor", "gal", "hem", "jun", "kel", "mor", "nid", "pax", "quo"]
_ENT_SYL = ["bru", "cla", "dri", "fen", "gli", "hok", "jar", "kru", "lin", "mab"]
_PAGE_SYL = ["tand", "wilk", "serm", "oxel", "yurn", "pleth", "quist", "varn", "zem", "holt"]

N_COMMON = 140  # ranks 0..139 fill bodies; ranks 140.. are phrase-only words


def _word(syllables: list[str], number: int, length: int) -> str:
    parts = []
    for _ in range(length):
        parts.append(syllables[number % len(syllables)])
        number //= len(syllables)
    return "".join(parts)


def _lay_into_gaps(base: list[str], groups: list[list[str]], rng: random.Random) -> list[str]:
    """Insert each group into its own gap of the base text.

    Distinct gaps guarantee at least one base word between any two groups,
    so special words never become adjacent by accident.
    """
    if len(groups) > len(base) + 1:
        raise ValueError("more special groups than gaps in the base text")
    by_gap = dict(zip(rng.sample(range(len(base) + 1), k=len(groups)), groups))
    out: list[str] = []
    for i, word in enumerate(base):
        out.extend(by_gap.get(i, ()))
        out.append(word)
    out.extend(by_gap.get(len(base), ()))
    return out


@dataclass
class ToyQuery:
    query_id: str
    text: str
    gold_doc_id: str
    gold_page_id: str
    answer: str


def generate(n_pages: int = 50, passages_per_page: int = 20, n_queries: int = 100,
             seed: int = 7, body_len: tuple[int, int] = (60, 100),
             n_filler: int = 200) -> tuple[list[dict], list[ToyQuery]]:
    """Return (corpus records, queries). Deterministic given the arguments."""
    rng = random.Random(seed)
    filler = [_word(_FILL_SYL, i, 2 + i % 2) for i in range(n_filler)]
    common = filler[:N_COMMON]
    common_weights = [1.0 / (i + 1) for i in range(N_COMMON)]
    phrase_words = filler[N_COMMON:]

    records: list[dict] = []
    meta: list[dict] = []
    for page in range(n_pages):
        page_id = f"page{page:04d}"
        theme = [_word(_THEME_SYL, page * 3 + j, 3) for j in range(3)]
        page_entity = _word(_PAGE_SYL, page, 3)
        for slot in range(passages_per_page):
            doc_num = page * passages_per_page + slot
            doc_id = f"p{page:04d}_{slot:02d}"
            entity = _word(_ENT_SYL, doc_num, 4)
            phrase = rng.sample(phrase_words, 3)
            base = rng.choices(common, weights=common_weights,
                               k=rng.randint(*body_len))
            groups: list[list[str]] = []
            groups += [[rng.choice(theme)] for _ in range(6)]
            groups += [[page_entity]] * 2
            groups += [[entity]] * 2
            groups += [list(phrase)] * 4
            # scattered rare fillers keep phrase words ambiguous as unigrams
            groups += [[rng.choice(phrase_words)] for _ in range(4)]
            body = _lay_into_gaps(base, groups, rng)
            records.append({
                "id": doc_id,
                "title": f"{entity} {theme[0]} record",
                "text": " ".join(body),
                "page_id": page_id,
            })
            meta.append({
                "doc_id": doc_id,
                "page_id": page_id,
                "entity": entity,
                "page_entity": page_entity,
                "theme": theme,
                "phrase": phrase,
            })

    queries: list[ToyQuery] = []
    chosen = rng.sample(range(len(records)), k=min(n_queries, len(records)))
    for qi, doc_pos in enumerate(chosen):
        m = meta[doc_pos]
        if rng.random() < 0.4:
            # easy: the unique entity pins the passage at any beam width
            parts = [m["entity"], rng.choice(m["theme"]), m["phrase"][0]]
        else:
            # hard: only page-level words plus the answer-phrase tokens
            parts = [m["page_entity"], rng.choice(m["theme"])] + list(m["phrase"])
        rng.shuffle(parts)
        queries.append(ToyQuery(
            query_id=f"q{qi:04d}",
            text=" ".join(parts),
            gold_doc_id=m["doc_id"],
            gold_page_id=m["page_id"],
            answer=" ".join(m["phrase"]),
        ))
    return records, queries


def write_toy(out_dir: str, n_pages: int = 50, passages_per_page: int = 20,
              n_queries: int = 100, seed: int = 7) -> dict[str, str]:
    """Write corpus.jsonl, queries.jsonl and qrels.jsonl; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    records, queries = generate(n_pages, passages_per_page, n_queries, seed)
    paths = {
        "corpus": os.path.join(out_dir, "corpus.jsonl"),
        "queries": os.path.join(out_dir, "queries.jsonl"),
        "qrels": os.path.join(out_dir, "qrels.jsonl"),
    }
    with open(paths["corpus"], "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    with open(paths["queries"], "w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(json.dumps({"query_id": q.query_id, "query": q.text}) + "\n")
    write_qrels(paths["qrels"], [
        QrelEntry(query_id=q.query_id, gold_doc_ids=[q.gold_doc_id],
                  gold_page_ids=[q.gold_page_id], answers=[q.answer])
        for q in queries
    ])
    return paths
