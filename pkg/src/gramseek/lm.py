"""Language-model contract and the builtin corpus ngram model.

The contract consumed by decoding is exactly {start, next_logprobs,
advance}: a session is conditioned on a query, yields a normalized
log-distribution over the vocabulary for the next token, and advances
one token at a time. Any backend satisfying it is interchangeable; the
builtin model below is a query-boosted additive-smoothed ngram model
that makes the whole pipeline run deterministically with no external
dependencies.

Sessions are independent; a fitted model is immutable and shareable
across concurrent sessions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gramseek.corpus import Corpus


@dataclass(frozen=True)
class LmSession:
    """Immutable decoding state: (query, token history)."""

    lm: "NgramLm"
    query: tuple[int, ...]
    history: tuple[int, ...] = ()
    # Shared per-query memo of context -> logprob vector; sessions advanced
    # from the same start() reuse it. Purely a cache, never affects results.
    _memo: dict = field(default_factory=dict, repr=False, compare=False)


class NgramLm:
    """Additive-smoothed ngram model with query-token boosting.

    P(t | context) is proportional to count(context, t) + smoothing; at
    query time the logit of every token present in the query is raised by
    query_boost before renormalization. Deterministic given (query,
    history). Unseen contexts back off to the longest seen suffix.
    """

    def __init__(self, vocab_size: int, order: int = 2, smoothing: float = 0.1,
                 query_boost: float = 2.0):
        if order < 1:
            raise ValueError("order must be >= 1")
        if smoothing <= 0:
            raise ValueError("smoothing must be positive so every token keeps support")
        self.vocab_size = vocab_size
        self.order = order
        self.smoothing = smoothing
        self.query_boost = query_boost
        # counts[L] maps a length-L context tuple to {next_token: count}.
        self.counts: list[dict[tuple[int, ...], dict[int, int]]] = [
            {} for _ in range(order)
        ]
        self.counts[0][()] = {}

    def observe(self, stream: Sequence[int]) -> None:
        stream = [int(t) for t in stream]
        for i, tok in enumerate(stream):
            for ctx_len in range(min(i, self.order - 1) + 1):
                ctx = tuple(stream[i - ctx_len: i])
                bucket = self.counts[ctx_len].setdefault(ctx, {})
                bucket[tok] = bucket.get(tok, 0) + 1

    # -- contract ----------------------------------------------------------

    def start(self, query: Sequence[int]) -> LmSession:
        query = tuple(query)
        if not query:
            raise ValueError("query must be non-empty")
        return LmSession(lm=self, query=query)

    def advance(self, session: LmSession, token: int) -> LmSession:
        if token < 0 or token >= self.vocab_size:
            raise ValueError(f"token id {token} outside the vocabulary")
        return LmSession(lm=self, query=session.query,
                         history=session.history + (token,), _memo=session._memo)

    def next_logprobs(self, session: LmSession) -> np.ndarray:
        """Normalized log-distribution over the vocabulary for the next token."""
        ctx = self._context(session.history)
        cached = session._memo.get(ctx)
        if cached is not None:
            return cached
        dense = np.full(self.vocab_size, self.smoothing, dtype=np.float64)
        for tok, cnt in self.counts[len(ctx)][ctx].items():
            dense[tok] += cnt
        logits = np.log(dense)
        if self.query_boost:
            logits[list(set(session.query))] += self.query_boost
        logprobs = logits - _logsumexp(logits)
        logprobs.flags.writeable = False
        session._memo[ctx] = logprobs
        return logprobs

    def _context(self, history: tuple[int, ...]) -> tuple[int, ...]:
        for ctx_len in range(min(self.order - 1, len(history)), -1, -1):
            ctx = history[len(history) - ctx_len:]
            if ctx in self.counts[ctx_len]:
                return ctx
        return ()

    def sequence_logprob(self, session: LmSession, tokens: Sequence[int]) -> float:
        """Chain-rule log-probability of tokens continuing the session."""
        total = 0.0
        cur = session
        for tok in tokens:
            total += float(self.next_logprobs(cur)[tok])
            cur = self.advance(cur, tok)
        return total


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    if m == -np.inf:
        return -np.inf
    return m + float(np.log(np.sum(np.exp(x - m))))


def fit_builtin(corpus: Corpus, order: int = 2, query_boost: float = 2.0,
                smoothing: float = 0.1) -> NgramLm:
    """Fit the builtin model on the corpus title and body token streams."""
    if not corpus.documents:
        raise ValueError("cannot fit on an empty corpus")
    lm = NgramLm(vocab_size=len(corpus.vocabulary), order=order,
                 smoothing=smoothing, query_boost=query_boost)
    for doc in corpus.documents:
        if doc.title:
            lm.observe(doc.title)
        lm.observe(doc.body)
    return lm


def fit_builtin_from_streams(streams: Sequence[Sequence[int]], vocab_size: int,
                             order: int = 2, query_boost: float = 2.0,
                             smoothing: float = 0.1) -> NgramLm:
    """fit_builtin for callers that already hold raw token streams."""
    lm = NgramLm(vocab_size=vocab_size, order=order, smoothing=smoothing,
                 query_boost=query_boost)
    for stream in streams:
        if len(stream):
            lm.observe(stream)
    return lm
