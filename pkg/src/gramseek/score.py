"""Document ranking from a decoded candidate set.

Three formulations:

* lm: a document scores the conditional log-probability of its most
  probable full-length decoded ngram.
* lm_fm: the candidate pool grows to harvested partials and first-step
  unigrams; each ngram gets a clipped log-odds weight contrasting its
  conditional probability with its unconditional corpus probability
  (frequency normalized by total body tokens), and a document scores its
  best weight.
* intersective: per document, a non-overlapping subset of candidate
  occurrences is selected greedily by weight; the document scores the sum
  of admitted weights raised to alpha, each discounted by a coverage
  factor penalizing tokens already claimed by higher-weighted evidence.

All functions are pure over immutable inputs; per-query scoring
parallelizes freely. Ties are broken deterministically (score descending,
then doc_id ascending; within selection: weight, then ngram length, then
token order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from gramseek.decode import CandidateSet
from gramseek.fm_index import FmIndex
from gramseek.vocab import FIRST_CONTENT_ID

PROB_EPS = 1e-9  # probabilities are clamped to [PROB_EPS, 1 - PROB_EPS]
DEFAULT_ALPHA = 2.0
DEFAULT_BETA = 0.8
DEFAULT_MAX_UNIGRAMS = 1000


@dataclass(frozen=True)
class ScoredNgram:
    tokens: tuple[int, ...]
    logprob_cond: float  # log P(ngram | query)
    freq: int  # corpus occurrences
    prob_uncond: float  # freq / total body tokens
    weight: float  # clipped log-odds contrast, >= 0
    kind: str = "span"
    full: bool = False


@dataclass(frozen=True)
class DocScore:
    """A ranked document with the ngram evidence that produced its score.

    evidence holds (ngram, coverage weight) pairs; for the intersective
    formulation the score equals sum(weight**alpha * cover) over evidence.
    """

    doc_id: str
    score: float
    evidence: tuple[tuple[ScoredNgram, float], ...]


def unconditional_prob(freq: int, total: int) -> float:
    """Corpus ngram probability: occurrences normalized by total body tokens."""
    if total <= 0:
        raise ValueError("total body token count must be positive")
    if freq < 0 or freq > total:
        raise ValueError("freq must lie in [0, total]")
    return freq / total


def ngram_weight(p_cond: float, p_uncond: float) -> float:
    """max(0, log[p_cond (1 - p_uncond) / (p_uncond (1 - p_cond))]).

    Both probabilities are clamped away from {0, 1} so saturated models and
    whole-corpus ngrams cannot produce infinities.
    """
    p_cond = min(max(p_cond, PROB_EPS), 1.0 - PROB_EPS)
    p_uncond = min(max(p_uncond, PROB_EPS), 1.0 - PROB_EPS)
    return max(0.0, math.log(p_cond * (1.0 - p_uncond) / (p_uncond * (1.0 - p_cond))))


def coverage_weight(tokens: Sequence[int], covered: set[int], beta: float = DEFAULT_BETA) -> float:
    """1 - beta + beta * |set(n) \\ covered| / |set(n)|, in [1 - beta, 1]."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1]")
    distinct = set(tokens)
    if not distinct:
        raise ValueError("coverage of an empty ngram is undefined")
    fresh = len(distinct - covered) / len(distinct)
    return 1.0 - beta + beta * fresh


def score_ngram(ix: FmIndex, tokens: tuple[int, ...], logprob_cond: float,
                kind: str = "span", full: bool = False,
                freq: Optional[int] = None) -> ScoredNgram:
    if freq is None:
        freq = ix.count(tokens)
    p_unc = unconditional_prob(min(freq, ix.total_body_tokens), ix.total_body_tokens)
    return ScoredNgram(
        tokens=tokens,
        logprob_cond=logprob_cond,
        freq=freq,
        prob_uncond=p_unc,
        weight=ngram_weight(math.exp(logprob_cond), p_unc),
        kind=kind,
        full=full,
    )


def unigram_scores(first_step: np.ndarray, ix: FmIndex) -> list[ScoredNgram]:
    """Score every attested unigram from the saved first-step distribution.

    No extra model call is needed: the step-1 distribution already carries
    P(t | query) for every token. Unigrams absent from the corpus are
    excluded; reserved ids never appear (they are masked during decoding).
    """
    out = []
    for tok in range(FIRST_CONTENT_ID, ix.alphabet_size):
        lp = float(first_step[tok])
        if lp == -np.inf:
            continue
        freq = int(ix.symbol_counts[tok])
        if freq == 0:
            continue
        out.append(score_ngram(ix, (tok,), lp, kind="unigram", freq=freq))
    return out


def _assemble_pool(candidates: CandidateSet, ix: FmIndex,
                   max_unigrams: int = DEFAULT_MAX_UNIGRAMS) -> list[ScoredNgram]:
    """Hypotheses plus capped first-step unigrams, deduplicated by tokens.

    Zero-weight unigrams are dropped: they cannot change any document's
    score and locating every occurrence of a frequent token would cost a
    corpus scan. The cap keeps the best-weighted unigrams.
    """
    pool: dict[tuple[int, ...], ScoredNgram] = {}
    for hyp in candidates.hypotheses:
        sn = score_ngram(ix, hyp.tokens, hyp.logprob, kind=hyp.kind, full=hyp.full,
                         freq=hyp.range.width if hyp.range.depth == len(hyp.tokens) else None)
        prev = pool.get(sn.tokens)
        if prev is None or sn.weight > prev.weight:
            pool[sn.tokens] = sn
    if candidates.first_step is not None:
        unigrams = [u for u in unigram_scores(candidates.first_step, ix) if u.weight > 0.0]
        unigrams.sort(key=lambda u: (-u.weight, u.tokens))
        for uni in unigrams[:max_unigrams] if max_unigrams else unigrams:
            if uni.tokens not in pool:
                pool[uni.tokens] = uni
    return sorted(pool.values(), key=lambda s: (-s.weight, s.tokens))


def _occurrences(ix: FmIndex, pool: Sequence[ScoredNgram], include_titles: bool = True,
                 cache: Optional[dict] = None) -> dict[int, list[tuple[int, int]]]:
    """doc index -> [(pool index, start offset within the encoded doc), ...]."""
    lookup: dict[tuple[int, ...], tuple] = {}
    misses = []
    for sn in pool:
        hit = cache.get(sn.tokens) if cache is not None else None
        if hit is not None:
            lookup[sn.tokens] = hit
        elif sn.tokens not in lookup:
            misses.append(sn.tokens)
    if misses:
        # All missing candidates share one vectorized locate walk.
        batch = ix.locate_starts_batch([ix.range_of(t) for t in misses])
        for tokens, starts in zip(misses, batch):
            doc_idx, offsets, is_title = ix._map_positions(starts)
            order = np.lexsort((offsets, doc_idx))
            hit = (doc_idx[order], offsets[order], is_title[order])
            lookup[tokens] = hit
            if cache is not None:
                cache[tokens] = hit
    parts_d, parts_o, parts_p = [], [], []
    for pi, sn in enumerate(pool):
        doc_idx, offsets, is_title = lookup[sn.tokens]
        if not include_titles:
            body = ~is_title
            doc_idx, offsets = doc_idx[body], offsets[body]
        parts_d.append(doc_idx)
        parts_o.append(offsets)
        parts_p.append(np.full(len(doc_idx), pi, dtype=np.int64))
    if not parts_d:
        return {}
    all_d = np.concatenate(parts_d)
    all_o = np.concatenate(parts_o)
    all_p = np.concatenate(parts_p)
    order = np.lexsort((all_o, all_p, all_d))
    all_d, all_o, all_p = all_d[order], all_o[order], all_p[order]
    bounds = np.flatnonzero(np.diff(all_d)) + 1
    pairs = np.stack([all_p, all_o], axis=1)
    by_doc: dict[int, list] = {}
    for d, chunk in zip(all_d[np.r_[0, bounds]] if len(all_d) else [],
                        np.split(pairs, bounds)):
        by_doc[int(d)] = chunk.tolist()
    return by_doc


def rank_lm(candidates: CandidateSet, ix: FmIndex, include_titles: bool = True,
            cache: Optional[dict] = None) -> list[DocScore]:
    """Each document scores the log-probability of its best full decoded ngram."""
    pool = []
    seen = set()
    for hyp in candidates.hypotheses:
        if hyp.full and hyp.tokens not in seen:
            seen.add(hyp.tokens)
            pool.append(score_ngram(ix, hyp.tokens, hyp.logprob, kind=hyp.kind, full=True,
                                    freq=hyp.range.width if hyp.range.depth == len(hyp.tokens)
                                    else None))
    by_doc = _occurrences(ix, pool, include_titles, cache)
    scores = []
    for d, occs in by_doc.items():
        best_sn = max((pool[pi] for pi, _ in occs), key=lambda s: (s.logprob_cond, s.tokens))
        scores.append(DocScore(doc_id=ix.doc_ids[d], score=best_sn.logprob_cond,
                               evidence=((best_sn, 1.0),)))
    return _ranked(scores)


def rank_lm_fm(candidates: CandidateSet, ix: FmIndex, include_titles: bool = True,
               max_unigrams: int = DEFAULT_MAX_UNIGRAMS,
               cache: Optional[dict] = None) -> list[DocScore]:
    """Each document scores the best ngram weight over the expanded pool."""
    pool = _assemble_pool(candidates, ix, max_unigrams)
    by_doc = _occurrences(ix, pool, include_titles, cache)
    scores = []
    for d, occs in by_doc.items():
        best_sn = max((pool[pi] for pi, _ in occs), key=lambda s: (s.weight, s.tokens))
        scores.append(DocScore(doc_id=ix.doc_ids[d], score=best_sn.weight,
                               evidence=((best_sn, 1.0),)))
    return _ranked(scores)


def select_kd(doc_items: Sequence[tuple[ScoredNgram, Sequence[int]]],
              doc_len: Optional[int] = None) -> list[tuple[ScoredNgram, tuple[int, ...]]]:
    """Greedy non-overlap admission of a document's candidate occurrences.

    Candidates are processed by weight descending (ties: longer ngram
    first, then token order). A candidate is admitted if at least one of
    its occurrences overlaps no occurrence of an already-admitted,
    strictly higher-weighted candidate; the returned offsets are exactly
    those free occurrences. Equal-weight candidates never block each
    other.
    """
    order = sorted(doc_items, key=lambda it: (-it[0].weight, -len(it[0].tokens), it[0].tokens))
    admitted: list[tuple[ScoredNgram, tuple[int, ...]]] = []
    # Token positions claimed by strictly higher-weight admitted ngrams.
    end = doc_len if doc_len is not None else max(
        (int(off) + len(sn.tokens) for sn, offs in order for off in offs), default=0)
    taken = bytearray(end)
    zeros = bytes(end)
    ones = b"\x01" * end
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and order[j][0].weight == order[i][0].weight:
            j += 1
        group_spans: list[tuple[int, int]] = []
        for sn, offsets in order[i:j]:
            length = len(sn.tokens)
            free = tuple(int(off) for off in offsets
                         if taken[int(off): int(off) + length] == zeros[:length])
            if free:
                admitted.append((sn, free))
                group_spans.extend((int(off), int(off) + length) for off in offsets)
        for s, e in group_spans:
            taken[s:e] = ones[: e - s]
        i = j
    return admitted


def _intersective_doc_score(admitted: Sequence[tuple[ScoredNgram, tuple[int, ...]]],
                            alpha: float, beta: float
                            ) -> tuple[float, tuple[tuple[ScoredNgram, float], ...]]:
    total = 0.0
    evidence = []
    covered: set[int] = set()
    i = 0
    # Coverage counts tokens of strictly higher-weighted admitted ngrams,
    # so the covered set is extended only between weight groups.
    while i < len(admitted):
        j = i
        while j < len(admitted) and admitted[j][0].weight == admitted[i][0].weight:
            j += 1
        group_tokens: set[int] = set()
        for sn, _ in admitted[i:j]:
            cov = coverage_weight(sn.tokens, covered, beta)
            total += sn.weight ** alpha * cov
            evidence.append((sn, cov))
            group_tokens.update(sn.tokens)
        covered |= group_tokens
        i = j
    return total, tuple(evidence)


def rank_intersective(candidates: CandidateSet, ix: FmIndex, alpha: float = DEFAULT_ALPHA,
                      beta: float = DEFAULT_BETA, include_titles: bool = True,
                      max_unigrams: int = DEFAULT_MAX_UNIGRAMS,
                      cache: Optional[dict] = None) -> list[DocScore]:
    """Aggregate non-overlapping, coverage-discounted evidence per document."""
    pool = _assemble_pool(candidates, ix, max_unigrams)
    by_doc = _occurrences(ix, pool, include_titles, cache)
    scores = []
    for d, occs in by_doc.items():
        grouped: dict[int, list[int]] = {}
        for pi, off in occs:
            grouped.setdefault(pi, []).append(off)
        admitted = select_kd([(pool[pi], offs) for pi, offs in grouped.items()],
                             doc_len=int(ix.doc_enc_lens[d]))
        total, evidence = _intersective_doc_score(admitted, alpha, beta)
        scores.append(DocScore(doc_id=ix.doc_ids[d], score=total, evidence=evidence))
    return _ranked(scores)


def _ranked(scores: Iterable[DocScore]) -> list[DocScore]:
    return sorted(scores, key=lambda d: (-d.score, d.doc_id))
