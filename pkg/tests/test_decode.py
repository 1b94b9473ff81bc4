import random

import numpy as np
import pytest

from gramseek.corpus import Corpus, Document
from gramseek.decode import (
    KIND_TITLE,
    constrained_beam_search,
    harvest_partials,
)
from gramseek.fm_index import build_index
from gramseek.lm import fit_builtin
from gramseek.vocab import FIRST_CONTENT_ID, Vocabulary

from conftest import random_corpus


def _mini_corpus():
    v = Vocabulary()
    w = {name: v.add(name) for name in
         ["red", "fox", "jumps", "lazy", "dog", "sleeps", "title", "brown"]}
    docs = [
        Document("d0", [w["title"], w["fox"]], [w["red"], w["fox"], w["jumps"]] * 4),
        Document("d1", [w["title"], w["dog"]], [w["lazy"], w["dog"], w["sleeps"]] * 4),
        Document("d2", [], [w["brown"], w["fox"], w["sleeps"], w["red"], w["dog"]]),
    ]
    corpus = Corpus(documents=docs, vocabulary=v)
    return corpus, w


@pytest.fixture(scope="module")
def mini():
    corpus, w = _mini_corpus()
    ix = build_index(corpus, sa_rate=2)
    lm = fit_builtin(corpus)
    return corpus, w, ix, lm


class TestAttestation:
    def test_every_hypothesis_attested(self, mini):
        corpus, w, ix, lm = mini
        cs = constrained_beam_search([w["fox"], w["jumps"]], ix, lm, beam=5, steps=4)
        assert len(cs) > 0
        for h in cs.hypotheses:
            assert ix.count(h.tokens) >= 1
            assert h.range.width == ix.count(h.tokens)

    def test_attestation_on_random_corpora(self):
        rng = random.Random(5)
        for _ in range(10):
            corpus = random_corpus(rng, n_docs=4, max_len=25)
            ix = build_index(corpus, sa_rate=3)
            lm = fit_builtin(corpus)
            query = corpus.documents[0].body[:3]
            cs = constrained_beam_search(query, ix, lm, beam=4, steps=5)
            for h in cs.hypotheses:
                assert ix.count(h.tokens) >= 1

    def test_no_reserved_ids_generated(self, mini):
        corpus, w, ix, lm = mini
        cs = constrained_beam_search([w["dog"]], ix, lm, beam=6, steps=6)
        for h in cs.hypotheses:
            assert all(t >= FIRST_CONTENT_ID for t in h.tokens)


class TestBeamMechanics:
    def test_beam1_deterministic_path_with_prefixes(self):
        # 3-token corpus with a forced path: the argmax chain is attested,
        # so beam=1 yields exactly that path plus its prefixes.
        v = Vocabulary()
        a, b, c = v.add("a"), v.add("b"), v.add("c")
        corpus = Corpus(documents=[Document("d", [], [a, b, c])], vocabulary=v)
        ix = build_index(corpus)
        lm = fit_builtin(corpus, query_boost=0.0)
        cs = constrained_beam_search([a], ix, lm, beam=1, steps=3, title_share=0.0)
        assert sorted(h.tokens for h in cs.hypotheses) == [(a,), (a, b), (a, b, c)]
        full = [h for h in cs.hypotheses if h.full]
        assert len(full) == 1 and full[0].tokens == (a, b, c)

    def test_steps_bounds_length(self, mini):
        corpus, w, ix, lm = mini
        cs = constrained_beam_search([w["red"]], ix, lm, beam=10, steps=10)
        assert all(len(h.tokens) <= 10 for h in cs.hypotheses)
        assert any(len(h.tokens) == 10 for h in cs.hypotheses)

    def test_candidates_exceed_beam(self, mini):
        corpus, w, ix, lm = mini
        cs = constrained_beam_search([w["fox"], w["dog"]], ix, lm, beam=5, steps=6)
        assert len(cs) > 5

    def test_steps1_partials_equal_fulls(self, mini):
        corpus, w, ix, lm = mini
        cs = constrained_beam_search([w["fox"]], ix, lm, beam=4, steps=1)
        assert all(h.full for h in cs.hypotheses)

    def test_prefix_monotonic_logprob(self, mini):
        corpus, w, ix, lm = mini
        cs = constrained_beam_search([w["red"], w["fox"]], ix, lm, beam=6, steps=6)
        by_tokens = {h.tokens: h.logprob for h in cs.hypotheses}
        for tokens, lp in by_tokens.items():
            for cut in range(1, len(tokens)):
                prefix = tokens[:cut]
                if prefix in by_tokens:
                    assert lp <= by_tokens[prefix] + 1e-9

    def test_logprob_is_chain_rule_sum(self, mini):
        # masking gates selection only: a hypothesis's score is exactly the
        # model's own probability of its token sequence
        corpus, w, ix, lm = mini
        query = [w["red"], w["fox"]]
        cs = constrained_beam_search(query, ix, lm, beam=5, steps=4, title_share=0.0)
        for h in cs.hypotheses:
            expected = lm.sequence_logprob(lm.start(tuple(query)), h.tokens)
            assert h.logprob == pytest.approx(expected, rel=1e-12)

    def test_no_duplicate_sequences(self, mini):
        corpus, w, ix, lm = mini
        cs = constrained_beam_search([w["fox"]], ix, lm, beam=8, steps=5)
        tokens = [h.tokens for h in cs.hypotheses]
        assert len(tokens) == len(set(tokens))

    def test_deterministic_across_runs(self, mini):
        corpus, w, ix, lm = mini
        a = constrained_beam_search([w["sleeps"]], ix, lm, beam=5, steps=5)
        b = constrained_beam_search([w["sleeps"]], ix, lm, beam=5, steps=5)
        assert [(h.tokens, h.logprob) for h in a.hypotheses] == \
            [(h.tokens, h.logprob) for h in b.hypotheses]


class TestTitleForcing:
    def test_title_hypotheses_are_title_prefixes(self, mini):
        corpus, w, ix, lm = mini
        cs = constrained_beam_search([w["fox"], w["dog"]], ix, lm, beam=9,
                                     steps=4, title_share=0.5)
        titles = [list(d.title) for d in corpus.documents]
        title_hyps = [h for h in cs.hypotheses if h.kind == KIND_TITLE]
        assert title_hyps, "expected title-anchored hypotheses"
        for h in title_hyps:
            assert any(t[: len(h.tokens)] == list(h.tokens) for t in titles)

    def test_title_share_zero_disables(self, mini):
        corpus, w, ix, lm = mini
        cs = constrained_beam_search([w["fox"]], ix, lm, beam=5, steps=3,
                                     title_share=0.0)
        assert all(h.kind != KIND_TITLE for h in cs.hypotheses)


class TestUnconstrained:
    def test_outputs_post_filtered_to_attested(self, mini):
        corpus, w, ix, lm = mini
        cs = constrained_beam_search([w["fox"]], ix, lm, beam=6, steps=4,
                                     constrained=False)
        for h in cs.hypotheses:
            assert ix.count(h.tokens) >= 1
            assert h.range.width == ix.count(h.tokens)

    def test_free_generation_explores_unattested(self, mini):
        # the raw beam may propose unattested strings; after filtering the
        # candidate count can drop below the constrained run's
        corpus, w, ix, lm = mini
        free = constrained_beam_search([w["fox"]], ix, lm, beam=6, steps=6,
                                       constrained=False)
        forced = constrained_beam_search([w["fox"]], ix, lm, beam=6, steps=6)
        assert len(free) <= len(forced)


class TestEdges:
    def test_first_step_is_masked_model_distribution(self, mini):
        corpus, w, ix, lm = mini
        cs = constrained_beam_search([w["red"]], ix, lm, beam=4, steps=3)
        assert cs.first_step is not None
        finite = np.isfinite(cs.first_step)
        assert 0 < np.exp(cs.first_step[finite]).sum() <= 1.0 + 1e-9
        # finite entries carry the model's own step-1 log-probabilities
        raw = lm.next_logprobs(lm.start([w["red"]]))
        np.testing.assert_allclose(cs.first_step[finite], raw[finite])

    def test_bad_args(self, mini):
        corpus, w, ix, lm = mini
        with pytest.raises(ValueError):
            constrained_beam_search([w["red"]], ix, lm, beam=0)
        with pytest.raises(ValueError):
            constrained_beam_search([w["red"]], ix, lm, steps=0)
        with pytest.raises(ValueError):
            constrained_beam_search([w["red"]], ix, lm, title_share=1.5)

    def test_harvest_keeps_max_logprob(self):
        from gramseek.decode import Hypothesis
        from gramseek.fm_index import RowRange
        r = RowRange(0, 1, 1)
        trace = [
            [Hypothesis(tokens=(7,), logprob=-2.0, range=r)],
            [Hypothesis(tokens=(7,), logprob=-1.0, range=r, full=True)],
        ]
        merged = harvest_partials(trace)
        assert len(merged) == 1
        assert merged[0].logprob == -1.0
        assert merged[0].full


def test_dead_end_hypotheses_marked_full():
    # single short document: spans hit the terminator quickly
    v = Vocabulary()
    a, b = v.add("a"), v.add("b")
    corpus = Corpus(documents=[Document("d", [], [a, b])], vocabulary=v)
    ix = build_index(corpus)
    lm = fit_builtin(corpus, query_boost=0.0)
    cs = constrained_beam_search([a], ix, lm, beam=3, steps=8, title_share=0.0)
    ab = [h for h in cs.hypotheses if h.tokens == (a, b)]
    assert ab and ab[0].full  # cannot extend past the end of the body
