"""Command line interface.

Subcommands: build (corpus -> index), query (single or batch -> run file),
eval (run + qrels -> metric report with figures), export-train (training
pairs for an external trainer), make-toy (bundled synthetic benchmark).
Retrieval flags mirror the engine switches; defaults come from an optional
JSON config file (--config) and may be overridden per flag. The SEAL_INDEX
environment variable supplies the default index path.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from gramseek import __version__
from gramseek.bridge import BridgeLm
from gramseek.corpus import (
    export_training_pairs,
    export_unsupervised_pairs,
    ingest_jsonl,
    write_training_pairs,
)
from gramseek.engine import MODES, RetrievalConfig, Retriever, builtin_retriever
from gramseek.fm_index import FmIndex, build_index
from gramseek.metrics import read_qrels, read_run, write_run
from gramseek.report import write_report
from gramseek.toy import write_toy

INDEX_ENV = "SEAL_INDEX"


def _add_index_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--index", default=os.environ.get(INDEX_ENV),
                   help=f"index file (default: ${INDEX_ENV})")


def _add_retrieval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beam", type=int, help="beam width (default 15)")
    p.add_argument("--steps", type=int, help="decoding timesteps (default 10)")
    p.add_argument("--alpha", type=float, help="intersective weight exponent (default 2.0)")
    p.add_argument("--beta", type=float, help="coverage discount strength (default 0.8)")
    p.add_argument("--mode", choices=MODES, help="scoring formulation (default intersective)")
    p.add_argument("--constrained", choices=("on", "off"),
                   help="index-constrained decoding (default on)")
    p.add_argument("--title-share", type=float, dest="title_share",
                   help="fraction of the beam anchored at titles (default 1/3)")
    p.add_argument("--max-unigrams", type=int, dest="max_unigrams",
                   help="cap on first-step unigram candidates (0 = uncapped)")
    p.add_argument("--workers", type=int, help="concurrent queries for batch retrieval")
    p.add_argument("--lm", default="builtin",
                   help="LM backend: 'builtin' or 'bridge:<host:port|unix:path>'")
    p.add_argument("--query-boost", type=float, default=2.0, dest="query_boost",
                   help="builtin-LM logit boost for query tokens (default 2.0)")
    p.add_argument("--config", help="JSON config file with the same keys as the flags")


def _build_config(args: argparse.Namespace) -> RetrievalConfig:
    data: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            data.update(json.load(fh))
    for key in ("beam", "steps", "alpha", "beta", "mode", "title_share",
                "max_unigrams", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    if getattr(args, "constrained", None) is not None:
        data["constrained"] = args.constrained == "on"
    return RetrievalConfig.from_dict(data)


def _load_retriever(args: argparse.Namespace, config: RetrievalConfig) -> Retriever:
    if not args.index:
        raise SystemExit(f"no index given (use --index or ${INDEX_ENV})")
    index = FmIndex.load(args.index)
    if args.lm == "builtin":
        return builtin_retriever(index, config, query_boost=args.query_boost)
    if args.lm.startswith("bridge:"):
        lm = BridgeLm.connect(args.lm[len("bridge:"):], index.vocabulary)
        return Retriever(index, lm, config)
    raise SystemExit(f"unknown LM backend {args.lm!r} (want builtin or bridge:<address>)")


# -- subcommands ----------------------------------------------------------


def _cmd_build(args: argparse.Namespace) -> int:
    corpus = ingest_jsonl(args.corpus)
    index = build_index(corpus, sa_rate=args.sa_rate)
    index.save(args.out)
    if args.vocab_out:
        corpus.vocabulary.save(args.vocab_out)
    size = os.path.getsize(args.out)
    print(f"indexed {len(corpus)} documents, {index.n} tokens -> {args.out} ({size} bytes)")
    return 0


def _cmd_query(args: argparse.Namespace) -> int:
    config = _build_config(args)
    retriever = _load_retriever(args, config)
    if (args.query is None) == (args.queries is None):
        raise SystemExit("give exactly one of --query or --queries")
    if args.query is not None:
        ranked = retriever.retrieve(args.query, k=args.k)
        for i, ds in enumerate(ranked):
            print(f"{i + 1}\t{ds.doc_id}\t{ds.score:.6g}")
        return 0
    queries = []
    with open(args.queries, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                queries.append((str(rec["query_id"]), str(rec["query"])))
    t0 = time.monotonic()
    records = retriever.run_batch(queries, k=args.k)
    write_run(args.out, records)
    dt = time.monotonic() - t0
    print(f"ran {len(queries)} queries in {dt:.1f}s -> {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    run = read_run(args.run)
    qrels = read_qrels(args.qrels)
    passage_text = page_of = None
    if args.index:
        retriever = builtin_retriever(FmIndex.load(args.index))
        passage_text = retriever.passage_text
        page_of = retriever.page_of
    ks = tuple(int(k) for k in args.k.split(","))
    metrics = write_report(run, qrels, args.out, ks=ks,
                           passage_text=passage_text, page_of=page_of,
                           figures=not args.no_figures)
    print(open(os.path.join(args.out, "report.txt"), encoding="utf-8").read(), end="")
    if "figures" in metrics:
        for path in metrics["figures"]:
            print(f"figure: {path}")
    return 0


def _cmd_export_train(args: argparse.Namespace) -> int:
    corpus = ingest_jsonl(args.corpus)
    pairs = []
    if args.queries:
        supervised = []
        with open(args.queries, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rec = json.loads(line)
                    supervised.append((str(rec["query"]), str(rec["doc_id"])))
        pairs.extend(export_training_pairs(corpus, supervised, n_samples=args.n_samples,
                                           ngram_len=args.ngram_len, seed=args.seed))
    if args.unsupervised_per_doc:
        pairs.extend(export_unsupervised_pairs(corpus, args.unsupervised_per_doc,
                                               ngram_len=args.ngram_len, seed=args.seed))
    write_training_pairs(args.out, pairs)
    print(f"wrote {len(pairs)} training pairs -> {args.out}")
    return 0


def _cmd_make_toy(args: argparse.Namespace) -> int:
    paths = write_toy(args.out, n_pages=args.pages, passages_per_page=args.passages,
                      n_queries=args.n_queries, seed=args.seed)
    print("\n".join(f"{k}: {v}" for k, v in paths.items()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gramseek",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--json", action="store_true",
                        help="report failures as machine-readable JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="index a corpus file")
    p.add_argument("--corpus", required=True, help="line-delimited {id,title,text} records")
    p.add_argument("--out", required=True, help="index file to write")
    p.add_argument("--sa-rate", type=int, default=32, dest="sa_rate",
                   help="position sampling rate for locate (default 32)")
    p.add_argument("--vocab-out", dest="vocab_out", help="also write the vocabulary file")
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("query", help="retrieve for one query or a batch file")
    _add_index_arg(p)
    p.add_argument("--query", help="single query text")
    p.add_argument("--queries", help="batch file of {query_id, query} records")
    p.add_argument("--k", type=int, default=10, help="results per query (default 10)")
    p.add_argument("--out", default="run.tsv", help="run file for batch mode")
    _add_retrieval_flags(p)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("eval", help="score a run file against qrels")
    _add_index_arg(p)
    p.add_argument("--run", required=True, help="run file from `query`")
    p.add_argument("--qrels", required=True, help="line-delimited qrels records")
    p.add_argument("--out", default="report", help="report directory")
    p.add_argument("--k", default="1,5,10,20", help="comma-separated k values")
    p.add_argument("--no-figures", action="store_true", dest="no_figures")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("export-train", help="export LM training pairs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", help="{query, doc_id} records for supervised pairs")
    p.add_argument("--unsupervised-per-doc", type=int, default=0,
                   dest="unsupervised_per_doc")
    p.add_argument("--n-samples", type=int, default=10, dest="n_samples")
    p.add_argument("--ngram-len", type=int, default=10, dest="ngram_len")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_train)

    p = sub.add_parser("make-toy", help="generate the bundled synthetic benchmark")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--pages", type=int, default=200)
    p.add_argument("--passages", type=int, default=5)
    p.add_argument("--n-queries", type=int, default=100, dest="n_queries")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_make_toy)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SystemExit, KeyboardInterrupt):
        raise
    except Exception as exc:
        if args.json:
            print(json.dumps({"error": str(exc), "type": type(exc).__name__}),
                  file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
