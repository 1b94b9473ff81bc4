"""Constrained beam search over the language model and the self-index.

At every step, next-token log-probabilities are masked to -inf for tokens
that cannot extend the hypothesis inside the index, so hypotheses stay
corpus-attested by construction. Masking only gates candidate selection:
a hypothesis accumulates the model's own stepwise log-probabilities, so
its score is the model probability of the string and is strictly lower
than that of any of its prefixes. All partial hypotheses that were ever
part of a beam are harvested into the candidate set, so far more ngrams
get scored than the beam width. A configurable share of the beam decodes
anchored at document title starts.

A single decoding run is sequential; distinct queries decode concurrently
against the same immutable index and model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from gramseek.fm_index import FmIndex, RowRange
from gramseek.vocab import END_OF_STRING_ID, FIRST_CONTENT_ID

KIND_SPAN = "span"
KIND_TITLE = "title"


@dataclass(frozen=True)
class Hypothesis:
    """A corpus-attested ngram with its conditional log-probability.

    range is the index match of tokens, so range.width equals the corpus
    count. full marks terminal hypotheses (reached the step limit or could
    not be extended); the rest are harvested partials.
    """

    tokens: tuple[int, ...]
    logprob: float
    range: RowRange
    kind: str = KIND_SPAN
    full: bool = False


@dataclass
class CandidateSet:
    hypotheses: list[Hypothesis]
    first_step: Optional[np.ndarray]  # logprob distribution saved at step 1

    def __len__(self) -> int:
        return len(self.hypotheses)


@dataclass(frozen=True)
class _Beam:
    tokens: tuple[int, ...]
    logprob: float
    rng: RowRange  # unanchored match range (width == count)
    anchor: Optional[RowRange]  # title-start-anchored range, title side only
    session: object
    kind: str


def _content_tokens(succ: dict[int, int]) -> list[int]:
    # Ngrams never cross the title/body separator or a document boundary:
    # reserved ids are dropped from every successor set.
    return sorted(t for t in succ if t >= FIRST_CONTENT_ID)


def _dense_first_step(vec: np.ndarray, allowed: list[int]) -> np.ndarray:
    """The step-1 distribution with disallowed logits masked to -inf."""
    dense = np.full(len(vec), -np.inf)
    dense[allowed] = vec[allowed]
    return dense


def constrained_beam_search(
    query: Sequence[int],
    ix: FmIndex,
    lm,
    beam: int = 15,
    steps: int = 10,
    constrained: bool = True,
    title_share: float = 1 / 3,
) -> CandidateSet:
    """Decode corpus-attested ngrams conditioned on the query.

    With constrained=False generation is free and unattested outputs are
    discarded post hoc (title forcing is part of the index constraint
    machinery and is disabled in that mode).
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not 0.0 <= title_share <= 1.0:
        raise ValueError("title_share must be in [0, 1]")

    n_title = int(round(beam * title_share)) if constrained else 0
    n_span = beam - n_title

    session0 = lm.start(tuple(int(t) for t in query))
    vec0 = lm.next_logprobs(session0)
    full = ix.full_range()
    all_content = None
    if not constrained:
        all_content = list(range(FIRST_CONTENT_ID, ix.alphabet_size))

    trace: list[list[Hypothesis]] = []
    first_step: Optional[np.ndarray] = None

    # -- step 1 -------------------------------------------------------------
    span_beam: list[_Beam] = []
    title_beam: list[_Beam] = []
    terminal: list[Hypothesis] = []

    if n_span > 0:
        allowed = _content_tokens(ix.successors(full)) if constrained else all_content
        if allowed:
            first_step = _dense_first_step(vec0, allowed)
            span_beam = _seed(ix, lm, session0, allowed, vec0[allowed], n_span,
                              KIND_SPAN, full)
    if n_title > 0:
        anchor0 = ix.backward_extend(full, END_OF_STRING_ID)
        allowed = _content_tokens(ix.successors(anchor0))
        if allowed:
            if first_step is None:
                first_step = _dense_first_step(vec0, allowed)
            title_beam = _seed(ix, lm, session0, allowed, vec0[allowed], n_title,
                               KIND_TITLE, anchor0)

    if not span_beam and not title_beam:
        warnings.warn("all beams dead-ended at the first step; empty candidate set")
        return CandidateSet(hypotheses=[], first_step=first_step)

    trace.append([_snapshot(b, full=False) for b in span_beam + title_beam])

    # -- steps 2..steps -------------------------------------------------------
    for _ in range(1, steps):
        new_span, dead = _expand(ix, lm, span_beam, n_span, constrained, all_content)
        terminal.extend(dead)
        new_title, dead = _expand(ix, lm, title_beam, n_title, constrained, all_content)
        terminal.extend(dead)
        span_beam, title_beam = new_span, new_title
        if not span_beam and not title_beam:
            break
        trace.append([_snapshot(b, full=False) for b in span_beam + title_beam])

    terminal.extend(_snapshot(b, full=True) for b in span_beam + title_beam)
    trace.append(terminal)

    hypotheses = harvest_partials(trace)
    if not constrained:
        hypotheses = [h for h in hypotheses if h.range.width > 0]
    return CandidateSet(hypotheses=hypotheses, first_step=first_step)


def _seed(ix, lm, session0, allowed, scores, width, kind, constraint_range):
    ranked = sorted(zip(scores.tolist(), allowed), key=lambda sc: (-sc[0], sc[1]))[:width]
    out = []
    for lp, tok in ranked:
        rng = ix.backward_extend(ix.full_range(), tok)
        anchor = None
        if kind == KIND_TITLE:
            anchor = ix.backward_extend(constraint_range, tok)
        out.append(_Beam(tokens=(tok,), logprob=lp, rng=rng, anchor=anchor,
                         session=lm.advance(session0, tok), kind=kind))
    return out


def _expand(ix, lm, entries, width, constrained, all_content):
    """One step for one sub-beam; returns (next entries, dead-end hypotheses)."""
    if not entries:
        return [], []
    dead: list[Hypothesis] = []
    expansions: list[tuple[float, tuple[int, ...], _Beam, int]] = []
    for entry in entries:
        if constrained:
            allowed = _content_tokens(ix.successors(entry.anchor or entry.rng))
        else:
            allowed = all_content
        if not allowed:
            # Dead beam (a terminator or separator boundary everywhere):
            # keep its final form and let the next-best expansions of the
            # other entries fill the freed slot.
            dead.append(_snapshot(entry, full=True))
            continue
        vec = lm.next_logprobs(entry.session)
        for lp, tok in zip(vec[allowed].tolist(), allowed):
            expansions.append((entry.logprob + lp, entry.tokens + (tok,), entry, tok))
    expansions.sort(key=lambda x: (-x[0], x[1]))
    nxt = []
    for lp, tokens, entry, tok in expansions[:width]:
        anchor = ix.backward_extend(entry.anchor, tok) if entry.anchor is not None else None
        nxt.append(_Beam(tokens=tokens, logprob=lp,
                         rng=ix.backward_extend(entry.rng, tok), anchor=anchor,
                         session=lm.advance(entry.session, tok), kind=entry.kind))
    return nxt, dead


def _snapshot(entry: _Beam, full: bool) -> Hypothesis:
    return Hypothesis(tokens=entry.tokens, logprob=entry.logprob, range=entry.rng,
                      kind=entry.kind, full=full)


def harvest_partials(trace: list[list[Hypothesis]]) -> list[Hypothesis]:
    """Deduplicate every hypothesis that was ever part of a beam.

    Duplicate token sequences keep the maximum log-probability; a sequence
    is full if any of its instances was terminal. Output order is
    deterministic: log-probability descending, then tokens.
    """
    best: dict[tuple[int, ...], Hypothesis] = {}
    for step in trace:
        for hyp in step:
            prev = best.get(hyp.tokens)
            if prev is None:
                best[hyp.tokens] = hyp
            else:
                keep = hyp if hyp.logprob > prev.logprob else prev
                full = prev.full or hyp.full
                if keep.full != full:
                    keep = Hypothesis(tokens=keep.tokens, logprob=keep.logprob,
                                      range=keep.range, kind=keep.kind, full=full)
                best[hyp.tokens] = keep
    return sorted(best.values(), key=lambda h: (-h.logprob, h.tokens))
