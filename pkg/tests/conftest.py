import json
import random

import pytest

from gramseek.corpus import Corpus, Document, ingest_jsonl
from gramseek.engine import builtin_retriever
from gramseek.fm_index import build_index
from gramseek.toy import write_toy
from gramseek.vocab import Vocabulary


def make_vocab(*tokens: str) -> Vocabulary:
    v = Vocabulary()
    for t in tokens:
        v.add(t)
    return v


def letters_vocab() -> tuple[Vocabulary, dict[str, int]]:
    """a..z as content ids in alphabetical (and therefore id) order."""
    v = Vocabulary()
    ids = {ch: v.add(ch) for ch in "abcdefghijklmnopqrstuvwxyz"}
    return v, ids


def random_corpus(rng: random.Random, n_docs=None, alphabet=6, max_len=30) -> Corpus:
    """Random small corpus over a letter alphabet, titles sometimes empty."""
    v = Vocabulary()
    letters = [v.add(ch) for ch in "abcdefghijklmnopqrstuvwxyz"[:alphabet]]
    n_docs = n_docs or rng.randint(1, 5)
    docs = []
    for i in range(n_docs):
        body = [rng.choice(letters) for _ in range(rng.randint(1, max_len))]
        title = [rng.choice(letters) for _ in range(rng.randint(0, 3))]
        docs.append(Document(doc_id=f"d{i}", title=title, body=body))
    return Corpus(documents=docs, vocabulary=v)


def make_tie_corpus() -> tuple[Corpus, str]:
    """Two documents sharing their best ngram, the second holding extra
    disjoint evidence; distractors tune the weight landscape so the shared
    ngram is the strict per-document maximum. Returns (corpus, query).
    """
    v = Vocabulary()

    def doc(doc_id, title, body):
        return Document(doc_id, [v.add(w) for w in title.split()],
                        [v.add(w) for w in body.split()])

    rng = random.Random(3)
    fill = [f"pad{i}" for i in range(40)]
    docs = [
        doc("d0", "plain record", "unique shared phrase filler0 filler1 filler2 filler3"),
        doc("d1", "richer record", "filler4 unique shared phrase filler5 bonus hint filler6"),
    ]
    # scatter the shared words singly (never adjacent) so their unigram
    # weights stay baseline; plant the bonus-hint pair so d1's exclusive
    # evidence is positive but below the shared ngram
    scatter = ["unique", "shared", "phrase"] * 11
    rng.shuffle(scatter)
    for i in range(14):
        words = rng.choices(fill, k=22)
        gaps = sorted(rng.sample(range(len(words)), k=4), reverse=True)
        inserts = [scatter.pop() if scatter and j % 2 == 0 else None for j in range(4)]
        for g, ins in zip(gaps, inserts):
            if ins:
                words.insert(g, ins)
        if i < 12:
            words.insert(rng.randrange(6), "bonus hint")
        docs.append(doc(f"x{i:02d}", f"noise{i} record", " ".join(" ".join(words).split())))
    return Corpus(documents=docs, vocabulary=v), "unique shared phrase bonus hint"


@pytest.fixture(scope="session")
def toy_bundle(tmp_path_factory):
    """The bundled benchmark: 1k docs, 100 queries, plus a built retriever."""
    root = tmp_path_factory.mktemp("toy")
    paths = write_toy(str(root), n_pages=50, passages_per_page=20, n_queries=100, seed=7)
    corpus = ingest_jsonl(paths["corpus"])
    index = build_index(corpus)
    retriever = builtin_retriever(index)
    queries = [json.loads(line) for line in open(paths["queries"], encoding="utf-8")]
    qrels = {rec["query_id"]: rec for rec in
             (json.loads(line) for line in open(paths["qrels"], encoding="utf-8"))}
    return {
        "paths": paths,
        "corpus": corpus,
        "index": index,
        "retriever": retriever,
        "queries": queries,
        "qrels": qrels,
    }
