"""Corpus ingestion, document encoding and training-pair export.

Input corpora are line-delimited JSON records with string fields ``id``,
``title`` and ``text`` (optional ``page_id`` for page-level evaluation).
Documents are stored as token-id sequences; a document is encoded for
indexing as ``title ++ [separator] ++ body``.

Ingestion is single-writer; a built Corpus is immutable and can be shared
freely across concurrent readers.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from gramseek.vocab import (
    CTRL_SPAN_ID,
    CTRL_SUPERVISED_ID,
    CTRL_TITLE_ID,
    CTRL_UNSUPERVISED_ID,
    SEPARATOR_ID,
    RESERVED_IDS,
    Tokenizer,
    Vocabulary,
    default_tokenizer,
)

KIND_SUPERVISED_SPAN = "supervised-span"
KIND_SUPERVISED_TITLE = "supervised-title"
KIND_UNSUPERVISED_SPAN = "unsupervised-span"
KIND_UNSUPERVISED_TITLE = "unsupervised-title"

_KIND_PREFIX = {
    KIND_SUPERVISED_SPAN: (CTRL_SUPERVISED_ID, CTRL_SPAN_ID),
    KIND_SUPERVISED_TITLE: (CTRL_SUPERVISED_ID, CTRL_TITLE_ID),
    KIND_UNSUPERVISED_SPAN: (CTRL_UNSUPERVISED_ID, CTRL_SPAN_ID),
    KIND_UNSUPERVISED_TITLE: (CTRL_UNSUPERVISED_ID, CTRL_TITLE_ID),
}


@dataclass
class Document:
    """A document as token ids. body is non-empty; title may be empty."""

    doc_id: str
    title: list[int]
    body: list[int]
    page_id: str = ""

    def __post_init__(self) -> None:
        if not self.page_id:
            self.page_id = self.doc_id

    def validate(self) -> None:
        if not self.body:
            raise ValueError(f"document {self.doc_id!r} has an empty body")
        for tid in self.title:
            if tid in RESERVED_IDS:
                raise ValueError(f"reserved id {tid} inside title of {self.doc_id!r}")
        for tid in self.body:
            if tid in RESERVED_IDS:
                raise ValueError(f"reserved id {tid} inside body of {self.doc_id!r}")


@dataclass
class Corpus:
    documents: list[Document]
    vocabulary: Vocabulary
    _by_id: dict[str, Document] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self._by_id:
            self._by_id = {d.doc_id: d for d in self.documents}

    def __len__(self) -> int:
        return len(self.documents)

    def get(self, doc_id: str) -> Document:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise KeyError(f"unknown doc_id {doc_id!r}") from None

    @property
    def total_body_tokens(self) -> int:
        """Sum of body lengths; the denominator of unconditional ngram probability."""
        return sum(len(d.body) for d in self.documents)


@dataclass(frozen=True)
class TrainingPair:
    source: tuple[int, ...]
    target: tuple[int, ...]
    kind: str


def ingest_jsonl(path: str, tokenizer: Optional[Tokenizer] = None,
                 vocab: Optional[Vocabulary] = None) -> Corpus:
    """Read a line-delimited corpus file into a tokenized Corpus.

    Document order is preserved. The vocabulary is built while reading
    unless an existing one is passed in (which is then extended).
    """
    tokenizer = tokenizer or default_tokenizer
    vocab = vocab or Vocabulary()
    documents: list[Document] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed record: {exc}") from None
            for fld in ("id", "title", "text"):
                if fld not in rec:
                    raise ValueError(f"{path}:{lineno}: missing field {fld!r}")
            doc_id = str(rec["id"])
            if doc_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
            seen.add(doc_id)
            body = vocab.encode(tokenizer(rec["text"]), extend=True)
            if not body:
                raise ValueError(f"{path}:{lineno}: document {doc_id!r} has empty text")
            title = vocab.encode(tokenizer(rec["title"]), extend=True)
            documents.append(
                Document(doc_id=doc_id, title=title, body=body,
                         page_id=str(rec.get("page_id", "") or doc_id))
            )
    if not documents:
        raise ValueError(f"{path}: empty corpus")
    return Corpus(documents=documents, vocabulary=vocab)


def encode_document(doc: Document) -> list[int]:
    """title ++ [separator] ++ body, the form stored in the index."""
    doc.validate()
    return list(doc.title) + [SEPARATOR_ID] + list(doc.body)


def decode_document(encoded: Sequence[int]) -> tuple[list[int], list[int]]:
    """Split an encoded document back into (title, body) at the first separator."""
    sep = list(encoded).index(SEPARATOR_ID)
    return list(encoded[:sep]), list(encoded[sep + 1:])


# -- training-pair export ------------------------------------------------


def _char_trigrams(text: str) -> Counter:
    padded = f"  {text}  "
    return Counter(padded[i:i + 3] for i in range(len(padded) - 2))


def char_overlap_f1(a: str, b: str) -> float:
    """Character-3-gram F1 between two strings, in [0, 1]."""
    ta, tb = _char_trigrams(a), _char_trigrams(b)
    if not ta or not tb:
        return 0.0
    hit = sum((ta & tb).values())
    if hit == 0:
        return 0.0
    prec = hit / sum(ta.values())
    rec = hit / sum(tb.values())
    return 2 * prec * rec / (prec + rec)


def _span_candidates(body: Sequence[int], ngram_len: int) -> list[tuple[int, ...]]:
    # Documents shorter than ngram_len contribute their full body as the
    # single candidate, so short documents are never dropped.
    if len(body) <= ngram_len:
        return [tuple(body)]
    return [tuple(body[i:i + ngram_len]) for i in range(len(body) - ngram_len + 1)]


def _with_prefix(kind: str, ids: Sequence[int]) -> tuple[int, ...]:
    return _KIND_PREFIX[kind] + tuple(ids)


def export_training_pairs(
    corpus: Corpus,
    queries: Iterable[tuple[str, str]],
    n_samples: int = 10,
    ngram_len: int = 10,
    seed: int = 0,
    tokenizer: Optional[Tokenizer] = None,
) -> list[TrainingPair]:
    """Supervised pairs: per (query, gold doc), sampled spans plus the title.

    Spans of length ngram_len are sampled with replacement, with probability
    proportional to exp(F1) of character-3-gram overlap between the
    detokenized span and the query (a softmax at temperature 1). One title
    pair is always emitted per (query, doc). Deterministic given seed.
    """
    rng = random.Random(seed)
    tokenizer = tokenizer or default_tokenizer
    vocab = corpus.vocabulary
    pairs: list[TrainingPair] = []
    for query, doc_id in queries:
        doc = corpus.get(doc_id)
        query_ids = tuple(vocab.encode(tokenizer(query)))
        candidates = _span_candidates(doc.body, ngram_len)
        weights = [math.exp(char_overlap_f1(vocab.detokenize(c), query))
                   for c in candidates]
        for cand in rng.choices(candidates, weights=weights, k=n_samples):
            pairs.append(TrainingPair(
                source=_with_prefix(KIND_SUPERVISED_SPAN, query_ids),
                target=cand,
                kind=KIND_SUPERVISED_SPAN,
            ))
        pairs.append(TrainingPair(
            source=_with_prefix(KIND_SUPERVISED_TITLE, query_ids),
            target=tuple(doc.title),
            kind=KIND_SUPERVISED_TITLE,
        ))
    return pairs


def export_unsupervised_pairs(
    corpus: Corpus,
    pairs_per_doc: int,
    ngram_len: int = 10,
    seed: int = 0,
) -> list[TrainingPair]:
    """Unsupervised pairs: a uniform span predicts another span or the title."""
    if pairs_per_doc < 0:
        raise ValueError("pairs_per_doc must be >= 0")
    rng = random.Random(seed)
    pairs: list[TrainingPair] = []
    for doc in corpus.documents:
        candidates = _span_candidates(doc.body, ngram_len)
        for _ in range(pairs_per_doc):
            source = candidates[rng.randrange(len(candidates))]
            if rng.random() < 0.5:
                target = candidates[rng.randrange(len(candidates))]
                kind = KIND_UNSUPERVISED_SPAN
            else:
                target = tuple(doc.title)
                kind = KIND_UNSUPERVISED_TITLE
            pairs.append(TrainingPair(source=_with_prefix(kind, source),
                                      target=target, kind=kind))
    return pairs


def write_training_pairs(path: str, pairs: Iterable[TrainingPair]) -> None:
    """Line-delimited {source_ids, target_ids, kind}, consumable by an external trainer."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps({
                "source_ids": list(p.source),
                "target_ids": list(p.target),
                "kind": p.kind,
            }) + "\n")
