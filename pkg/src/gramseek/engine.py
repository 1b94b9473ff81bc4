"""End-to-end retrieval: decode, score, rank, and batch runs.

The Retriever owns a loaded index plus a language-model backend and turns
query text into ranked documents. Batch retrieval may fan queries out over
a thread pool (index and model are immutable); results are emitted in
query order either way, so runs are deterministic for a fixed
configuration.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from gramseek import score as score_mod
from gramseek.corpus import Document, decode_document
from gramseek.decode import constrained_beam_search
from gramseek.fm_index import FmIndex
from gramseek.lm import fit_builtin_from_streams
from gramseek.metrics import RunRecord
from gramseek.vocab import SEPARATOR_ID, default_tokenizer

MODES = ("lm", "lm_fm", "intersective")


@dataclass(frozen=True)
class RetrievalConfig:
    beam: int = 15
    steps: int = 10
    alpha: float = 2.0
    beta: float = 0.8
    mode: str = "intersective"
    constrained: bool = True
    title_share: float = 1 / 3
    max_unigrams: int = score_mod.DEFAULT_MAX_UNIGRAMS
    include_titles: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @classmethod
    def from_dict(cls, data: dict) -> "RetrievalConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        bad = set(data) - known
        if bad:
            raise ValueError(f"unknown config keys: {sorted(bad)}")
        return cls(**data)


class Retriever:
    def __init__(self, index: FmIndex, lm, config: Optional[RetrievalConfig] = None):
        if index.vocabulary is None:
            raise ValueError("retrieval needs an index built with a vocabulary")
        self.index = index
        self.lm = lm
        self.config = config or RetrievalConfig()
        self._locate_cache: dict = {}
        self._docs: Optional[list[Document]] = None
        self._doc_by_id: Optional[dict[str, Document]] = None

    # -- retrieval ---------------------------------------------------------

    def retrieve(self, query: str | Sequence[int], k: int = 10,
                 config: Optional[RetrievalConfig] = None) -> list[score_mod.DocScore]:
        """Full pipeline for one query: decode, score, rank, truncate to k."""
        cfg = config or self.config
        query_ids = self._query_ids(query)
        candidates = constrained_beam_search(
            query_ids, self.index, self.lm,
            beam=cfg.beam, steps=cfg.steps,
            constrained=cfg.constrained, title_share=cfg.title_share,
        )
        if not candidates.hypotheses:
            return []
        if cfg.mode == "lm":
            ranked = score_mod.rank_lm(candidates, self.index,
                                       include_titles=cfg.include_titles,
                                       cache=self._locate_cache)
        elif cfg.mode == "lm_fm":
            ranked = score_mod.rank_lm_fm(candidates, self.index,
                                          include_titles=cfg.include_titles,
                                          max_unigrams=cfg.max_unigrams,
                                          cache=self._locate_cache)
        else:
            ranked = score_mod.rank_intersective(candidates, self.index,
                                                 alpha=cfg.alpha, beta=cfg.beta,
                                                 include_titles=cfg.include_titles,
                                                 max_unigrams=cfg.max_unigrams,
                                                 cache=self._locate_cache)
        return ranked[:k]

    def run_batch(self, queries: Iterable[tuple[str, str]], k: int = 10,
                  config: Optional[RetrievalConfig] = None) -> list[RunRecord]:
        """Retrieve for (query_id, text) pairs, emitting run records in order."""
        cfg = config or self.config
        items = list(queries)

        def one(item: tuple[str, str]) -> list[RunRecord]:
            qid, text = item
            try:
                ranked = self.retrieve(text, k=k, config=cfg)
            except ValueError:
                return []  # e.g. no in-vocabulary tokens; query yields no results
            return [
                RunRecord(query_id=qid, doc_id=ds.doc_id, rank=i + 1,
                          score=ds.score, mode=cfg.mode)
                for i, ds in enumerate(ranked)
            ]

        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(one, items))
        else:
            results = [one(item) for item in items]
        return [rec for recs in results for rec in recs]

    # -- helpers -------------------------------------------------------------

    def _query_ids(self, query: str | Sequence[int]) -> list[int]:
        if isinstance(query, str):
            ids = self.index.vocabulary.encode(default_tokenizer(query))
        else:
            ids = [int(t) for t in query]
        if not ids:
            raise ValueError("query has no in-vocabulary tokens")
        return ids

    def documents(self) -> list[Document]:
        """Documents rebuilt from the self-index (no stored text needed)."""
        if self._docs is None:
            docs = []
            for doc_id, page_id, enc in self.index.documents():
                enc_list = [int(t) for t in enc]
                if SEPARATOR_ID in enc_list:
                    title, body = decode_document(enc_list)
                else:
                    title, body = [], enc_list
                docs.append(Document(doc_id=doc_id, title=title, body=body, page_id=page_id))
            self._docs = docs
        return self._docs

    def passage_text(self, doc_id: str) -> str:
        if self._doc_by_id is None:
            self._doc_by_id = {d.doc_id: d for d in self.documents()}
        doc = self._doc_by_id.get(doc_id)
        if doc is None:
            raise KeyError(f"unknown doc_id {doc_id!r}")
        return self.index.vocabulary.detokenize(doc.title + doc.body)

    def page_of(self, doc_id: str) -> str:
        try:
            idx = self.index.doc_ids.index(doc_id)
        except ValueError:
            raise KeyError(f"unknown doc_id {doc_id!r}") from None
        return self.index.page_ids[idx]


def builtin_retriever(index: FmIndex, config: Optional[RetrievalConfig] = None,
                      order: int = 2, query_boost: float = 2.0) -> Retriever:
    """Retriever backed by the builtin ngram model fit on the index's own text.

    The corpus token streams are reconstructed from the self-index, so a
    single index file is all the engine needs.
    """
    streams = []
    for _, _, enc in index.documents():
        enc_list = [int(t) for t in enc]
        if SEPARATOR_ID in enc_list:
            title, body = decode_document(enc_list)
            if title:
                streams.append(title)
            streams.append(body)
        else:
            streams.append(enc_list)
    lm = fit_builtin_from_streams(streams, vocab_size=index.alphabet_size,
                                  order=order, query_boost=query_boost)
    return Retriever(index, lm, config)
