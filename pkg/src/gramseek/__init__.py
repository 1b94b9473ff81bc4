"""gramseek: generative retrieval over a compressed full-text self-index.

A corpus is tokenized, encoded (title, separator, body) and indexed in a
compressed self-index built on the Burrows-Wheeler transform. Retrieval
generates corpus-attested ngrams with constrained beam search over a
pluggable language model, then scores and aggregates the documents that
contain them.
"""

__version__ = "0.1.0"

from gramseek.vocab import Vocabulary
from gramseek.corpus import Corpus, Document, TrainingPair, ingest_jsonl
from gramseek.fm_index import FmIndex, RowRange, Occurrence, build_index
from gramseek.lm import NgramLm, fit_builtin
from gramseek.decode import CandidateSet, Hypothesis, constrained_beam_search
from gramseek.score import (
    DocScore,
    ScoredNgram,
    coverage_weight,
    ngram_weight,
    rank_intersective,
    rank_lm,
    rank_lm_fm,
    unconditional_prob,
)
from gramseek.engine import Retriever, RetrievalConfig

__all__ = [
    "Vocabulary",
    "Corpus",
    "Document",
    "TrainingPair",
    "ingest_jsonl",
    "FmIndex",
    "RowRange",
    "Occurrence",
    "build_index",
    "NgramLm",
    "fit_builtin",
    "CandidateSet",
    "Hypothesis",
    "constrained_beam_search",
    "DocScore",
    "ScoredNgram",
    "coverage_weight",
    "ngram_weight",
    "rank_intersective",
    "rank_lm",
    "rank_lm_fm",
    "unconditional_prob",
    "Retriever",
    "RetrievalConfig",
]
