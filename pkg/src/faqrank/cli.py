"""Command-line interface.

    faqrank index       build an index directory from a corpus
    faqrank query       one-shot, batch or REPL retrieval against an index
    faqrank eval        score a run file against qrels
    faqrank gridsearch  sweep the 11x11 (alpha, w) grid per mode
    faqrank stats       corpus statistics

Exit codes: 0 success, 2 usage errors (bad flags), 3 validation errors
(malformed files, out-of-range parameters, contract violations), 4 I/O errors
(missing or unreadable paths). The index directory may also come from the
FAQRANK_INDEX environment variable. A JSON config file (--config) supplies
retrieval parameter defaults; explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .corpus import compute_stats, load_corpus
from .dense import HashProvider, load_embeddings, matrix_from_provider
from .errors import ValidationError
from .evalkit import (
    DEFAULT_CUTOFFS,
    DEFAULT_GRID_MODES,
    format_grid_report,
    format_run_lines,
    grid_search,
    metric_names,
    metrics,
    parse_qrels,
    parse_run,
)
from .fusion import (
    DAMPING_MODES,
    FusionParams,
    RETRIEVAL_MODES,
    build_index,
    compute_legs,
    resolve_query_vec,
    retrieve_from_legs,
)
from .store import load_index, save_index

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4

ENV_INDEX = "FAQRANK_INDEX"

_PARAM_FLAGS = ("alpha", "w", "beta", "rrf_k", "top_n", "top_m", "damping_mode")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faqrank",
        description="Hybrid lexical/semantic FAQ retrieval and evaluation.")
    parser.add_argument("--version", action="version", version=f"faqrank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build an index directory")
    p_index.add_argument("--corpus", required=True, help="corpus file (JSON Lines)")
    group = p_index.add_mutually_exclusive_group(required=True)
    group.add_argument("--embeddings", help="embedding interchange file covering the corpus")
    group.add_argument("--hash-dim", type=int,
                       help="use the built-in hashing fallback provider at this dimension (>= 8)")
    p_index.add_argument("--out", required=True, help="index directory to create")
    p_index.add_argument("--k1", type=float, default=1.2, help="BM25 k1 (default 1.2)")
    p_index.add_argument("--b", type=float, default=0.75, help="BM25 b (default 0.75)")

    p_query = sub.add_parser("query", help="retrieve docs for queries")
    p_query.add_argument("--index", default=None,
                         help=f"index directory (default: ${ENV_INDEX})")
    what = p_query.add_mutually_exclusive_group()
    what.add_argument("--query", help="one-shot query text")
    what.add_argument("--queries-file",
                      help="one query per line, optionally 'id<TAB>text'; REPL if neither given")
    p_query.add_argument("--qid", default="q1", help="query id for --query output (default q1)")
    p_query.add_argument("--mode", default="rrf", choices=RETRIEVAL_MODES,
                         help="ranking pipeline (default rrf)")
    p_query.add_argument("--output", default="human", choices=("human", "run"),
                         help="human-readable or run-file lines (default human)")
    p_query.add_argument("--run-tag", default=None, help="tag column for run output (default: mode)")
    p_query.add_argument("--out", default=None, help="write output here instead of stdout")
    p_query.add_argument("--threads", type=int, default=1,
                         help="worker threads for batch queries (default 1)")
    p_query.add_argument("--query-embeddings", default=None,
                         help="interchange file with one vector per query id "
                              "(needed for dense scoring on externally embedded indexes)")
    _add_param_flags(p_query)

    p_eval = sub.add_parser("eval", help="score a run file against qrels")
    p_eval.add_argument("--run", required=True)
    p_eval.add_argument("--qrels", required=True)
    p_eval.add_argument("--cutoffs", default="5,10",
                        help="comma-separated cutoff list (default 5,10)")
    p_eval.add_argument("--per-query", action="store_true", help="also print per-query rows")
    p_eval.add_argument("--json", default=None, help="write the full report as JSON here")

    p_grid = sub.add_parser("gridsearch", help="sweep (alpha, w) over the 11x11 grid")
    p_grid.add_argument("--index", default=None, help=f"index directory (default: ${ENV_INDEX})")
    p_grid.add_argument("--queries-file", required=True,
                        help="one query per line, optionally 'id<TAB>text'")
    p_grid.add_argument("--qrels", required=True)
    p_grid.add_argument("--target-metric", default="ndcg@5")
    p_grid.add_argument("--modes", default=",".join(DEFAULT_GRID_MODES),
                        help=f"comma-separated modes (default {','.join(DEFAULT_GRID_MODES)})")
    p_grid.add_argument("--cutoffs", default="5,10")
    p_grid.add_argument("--out", default=None, help="write the report here (default stdout)")
    p_grid.add_argument("--query-embeddings", default=None)
    _add_param_flags(p_grid, with_alpha_w=False)

    p_stats = sub.add_parser("stats", help="corpus statistics")
    p_stats.add_argument("--corpus", required=True)

    return parser


def _add_param_flags(sub_parser, with_alpha_w: bool = True) -> None:
    if with_alpha_w:
        sub_parser.add_argument("--alpha", type=float, default=None,
                                help="dense/lexical mix, required for hybrid and rrf modes")
        sub_parser.add_argument("--w", type=float, default=None,
                                help="question/answer field weight, required for lexical modes")
    sub_parser.add_argument("--beta", type=float, default=None, help="damping beta (default 3)")
    sub_parser.add_argument("--rrf-k", type=float, default=None, help="RRF constant (default 60)")
    sub_parser.add_argument("--top-n", type=int, default=None, help="per-index candidates (default 200)")
    sub_parser.add_argument("--top-m", type=int, default=None, help="final results (default 50)")
    sub_parser.add_argument("--damping-mode", choices=DAMPING_MODES, default=None,
                            help="as_written (default) or prose_intent")
    sub_parser.add_argument("--config", default=None,
                            help="JSON file with parameter defaults (flags win)")


def _params_from_args(args) -> FusionParams:
    values = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{args.config}: malformed config ({exc.msg})") from exc
        if not isinstance(loaded, dict):
            raise ValidationError(f"{args.config}: config must be a JSON object")
        values.update(loaded)
    for name in _PARAM_FLAGS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    params = FusionParams.from_dict(values, where=args.config or "params")
    return params


def _index_dir(args) -> str:
    index_dir = args.index or os.environ.get(ENV_INDEX)
    if not index_dir:
        raise ValidationError(f"no index directory given (use --index or ${ENV_INDEX})")
    return index_dir


def _read_queries_file(path) -> list[tuple[str, str]]:
    queries = []
    auto = 0
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "\t" in line:
                query_id, text = line.split("\t", 1)
                query_id = query_id.strip()
                text = text.strip()
            else:
                auto += 1
                query_id, text = f"q{auto}", line.strip()
            if not query_id or not text:
                raise ValidationError(f"{path}:{lineno}: empty query id or text")
            if query_id in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate query id {query_id!r}")
            seen.add(query_id)
            queries.append((query_id, text))
    if not queries:
        raise ValidationError(f"{path}: no queries found")
    return queries


def _load_query_vecs(path, queries: list[tuple[str, str]]):
    """Load per-query vectors from an interchange file keyed by query id."""
    if path is None:
        return {}
    class _Stub:
        def __init__(self, query_id):
            self.id = query_id
    docs = [_Stub(query_id) for query_id, _ in queries]
    matrix = load_embeddings(path, docs)
    return {query_id: matrix.matrix[i] for i, query_id in enumerate(matrix.doc_ids)}


def _human_lines(index, result, params: FusionParams) -> list[str]:
    lines = [f"# query {result.query_id} mode={result.mode} "
             f"alpha={params.alpha} w={params.w} beta={params.beta:g} rrf_k={params.rrf_k:g}"]
    for i, entry in enumerate(result.entries, start=1):
        provenance = " ".join(f"{name}#{rank}" for name, rank in sorted(entry.provenance.items()))
        question = index.doc(entry.doc_id).question
        snippet = question if len(question) <= 64 else question[:61] + "..."
        lines.append(f"{i:3d}. {entry.doc_id:<12s} {entry.score:.6f}  [{provenance}]  {snippet}")
    return lines


def cmd_index(args) -> int:
    docs = load_corpus(args.corpus)
    if args.hash_dim is not None:
        embeddings = matrix_from_provider(HashProvider(args.hash_dim), docs)
    else:
        embeddings = load_embeddings(args.embeddings, docs)
    index = build_index(docs, embeddings, k1=args.k1, b=args.b)
    save_index(args.out, index)
    print(f"indexed {len(index)} docs (dim={embeddings.dim}, provider={embeddings.provider}) "
          f"into {args.out}")
    return EXIT_OK


def _run_one(index, query_id: str, text: str, params: FusionParams, mode: str, query_vecs):
    vec = query_vecs.get(query_id)
    if vec is None:
        vec = resolve_query_vec(index, text, None)
    legs = compute_legs(index, text, query_vec=vec)
    return retrieve_from_legs(index, legs, params, mode, query_id=query_id)


def cmd_query(args) -> int:
    params = _params_from_args(args)
    index = load_index(_index_dir(args))
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        if args.query is not None:
            queries = [(args.qid, args.query)]
        elif args.queries_file is not None:
            queries = _read_queries_file(args.queries_file)
        else:
            return _repl(index, params, args, out)

        query_vecs = _load_query_vecs(args.query_embeddings, queries)
        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                results = list(pool.map(
                    lambda pair: _run_one(index, pair[0], pair[1], params, args.mode, query_vecs),
                    queries))
        else:
            results = [_run_one(index, query_id, text, params, args.mode, query_vecs)
                       for query_id, text in queries]

        for result in results:
            if args.output == "run":
                for line in format_run_lines(result, args.run_tag):
                    print(line, file=out)
            else:
                for line in _human_lines(index, result, params):
                    print(line, file=out)
        return EXIT_OK
    finally:
        if out is not sys.stdout:
            out.close()


def _repl(index, params: FusionParams, args, out) -> int:
    interactive = sys.stdin.isatty()
    n = 0
    while True:
        if interactive:
            print("faq> ", end="", file=sys.stderr, flush=True)
        line = sys.stdin.readline()
        if not line:
            return EXIT_OK
        text = line.strip()
        if not text:
            continue
        n += 1
        try:
            result = _run_one(index, f"q{n}", text, params, args.mode, {})
        except ValidationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            continue
        if args.output == "run":
            for run_line in format_run_lines(result, args.run_tag):
                print(run_line, file=out)
        else:
            for human_line in _human_lines(index, result, params):
                print(human_line, file=out)
        if out is not sys.stdout:
            out.flush()


def _parse_cutoffs(text: str) -> tuple[int, ...]:
    try:
        cutoffs = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ValidationError(f"bad cutoff list {text!r}") from None
    if not cutoffs or any(k < 1 for k in cutoffs):
        raise ValidationError(f"cutoffs must be positive integers, got {text!r}")
    return cutoffs


def cmd_eval(args) -> int:
    cutoffs = _parse_cutoffs(args.cutoffs)
    run = parse_run(args.run)
    qrels = parse_qrels(args.qrels)
    report = metrics(run, qrels, cutoffs)
    names = metric_names(cutoffs)
    if args.per_query:
        for query_id in sorted(report.per_query):
            for name in names:
                print(f"{name:<12s} {query_id:<12s} {report.per_query[query_id][name]:.6f}")
    for name in names:
        print(f"{name:<12s} all          {report.mean[name]:.6f}")
    if args.json:
        payload = {"mean": report.mean, "per_query": report.per_query,
                   "cutoffs": list(report.cutoffs)}
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    params = _params_from_args(args)
    cutoffs = _parse_cutoffs(args.cutoffs)
    modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
    index = load_index(_index_dir(args))
    queries = _read_queries_file(args.queries_file)
    qrels = parse_qrels(args.qrels)
    query_vecs = _load_query_vecs(args.query_embeddings, queries)
    result = grid_search(index, queries, qrels, params,
                         target_metric=args.target_metric, modes=modes,
                         cutoffs=cutoffs, query_vecs=query_vecs)
    report = format_grid_report(result)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report)
    else:
        sys.stdout.write(report)
    best = result.best
    print(f"best: mode={best.mode} alpha={best.alpha:.1f} w={best.w:.1f} "
          f"{result.target_metric}={best.mean[result.target_metric]:.6f}", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = compute_stats(load_corpus(args.corpus))
    print(f"docs               {stats.n_docs}")
    print(f"avg question len   {stats.avg_question_len:.2f}")
    print(f"avg answer len     {stats.avg_answer_len:.2f}")
    print(f"category coverage  {stats.category_coverage:.2%}")
    return EXIT_OK


_COMMANDS = {
    "index": cmd_index,
    "query": cmd_query,
    "eval": cmd_eval,
    "gridsearch": cmd_gridsearch,
    "stats": cmd_stats,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
