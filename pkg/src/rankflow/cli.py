"""Command-line interface.

Subcommands: rerank, fuse, embed, index, query, eval. Every option can be
overridden by an environment variable named RANKFLOW_<OPTION> (uppercase,
dashes as underscores): for example RANKFLOW_K=60 changes the default of
--k, RANKFLOW_SELF_MODE=self-excluded the default of --self-mode. Explicit
flags always win over the environment.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import kernels
from .errors import RankflowError
from .ranking import RankedLists, build_ranked_lists, truncate
from .pipeline import (
    RfeConfig, RfeIndex, run_rfe, run_aggregation, query_unseen,
    extend_with_tail,
)
from .metrics import (
    RelevanceOracle, mean_average_precision, mean_precision_at,
    mean_recall_at, ns_score, cmc_r1, format_report,
)
from . import dataio

ENV_PREFIX = "RANKFLOW_"


def _env(name: str, fallback):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return fallback
    if isinstance(fallback, bool):
        return raw.lower() in ("1", "true", "yes")
    if fallback is None:
        return raw
    return type(fallback)(raw)


def _env_int(name: str):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    return None if raw is None else int(raw)


def _add_pipeline_flags(p: argparse.ArgumentParser):
    p.add_argument("--k", type=int, default=_env("k", 20),
                   help="neighborhood size (default 20)")
    p.add_argument("--L", "--depth", dest="depth", type=int,
                   default=_env_int("L"),
                   help="truncation depth (default min(n, max(20k, 200)))")
    p.add_argument("--alpha", type=float, default=_env("alpha", 0.1),
                   help="sigmoid steepness (default 0.1)")
    p.add_argument("--iterations", type=int, default=_env("iterations", 2),
                   help="hypergraph re-ranking rounds (default 2)")
    p.add_argument("--skip-cc", action="store_true",
                   default=_env("skip-cc", False),
                   help="stop after the Cartesian product stage")
    p.add_argument("--threads", type=int,
                   default=_env("threads", kernels.default_threads()),
                   help="threads for the compiled kernels")


def _add_input_flags(p: argparse.ArgumentParser):
    p.add_argument("--features", help="feature table (text or binary)")
    p.add_argument("--distances", help="precomputed distance matrix table")
    p.add_argument("--lists", help="ranked-list file")
    p.add_argument("--metric", choices=("euclidean", "cosine"),
                   default=_env("metric", "euclidean"),
                   help="distance kernel for --features")


def _add_eval_flags(p: argparse.ArgumentParser):
    p.add_argument("--labels", default=_env("labels", None),
                   help="label file for metric reporting")
    p.add_argument("--self-mode",
                   choices=("self-included", "self-excluded", "gallery"),
                   default=_env("self-mode", "self-included"),
                   help="query protocol (default self-included)")
    p.add_argument("--at", type=int, action="append", default=None,
                   help="cutoffs for precision/recall (repeatable)")


def _load_input(args, parser):
    """Returns (lists_full, ids). Lists are full-depth when distances exist."""
    given = [x for x in (args.features, args.distances, args.lists) if x]
    if len(given) != 1:
        parser.error("exactly one of --features/--distances/--lists is required")
    if args.lists:
        lists, ids = dataio.load_ranked_lists(args.lists)
        return lists, ids
    if args.features:
        table = dataio.load_features(args.features)
        dist = dataio.compute_distances(table, metric=args.metric)
        ids = table.row_ids()
    else:
        table = dataio.load_features(args.distances)
        dist = table.values
        if dist.shape[0] != dist.shape[1]:
            parser.error("--distances requires a square matrix")
        ids = table.row_ids()
    lists = build_ranked_lists(dist, depth=dist.shape[0])
    return lists, ids


def _config(args, emit_embeddings=False) -> RfeConfig:
    return RfeConfig(
        k=args.k, depth=args.depth, alpha=args.alpha,
        iterations=args.iterations, run_cc_stage=not args.skip_cc,
        emit_embeddings=emit_embeddings,
    )


def _oracle(args, ids) -> RelevanceOracle | None:
    if not args.labels:
        return None
    table = dataio.load_labels(args.labels)
    labels = dataio.labels_for(ids, table)
    return RelevanceOracle.from_labels(labels, mode=args.self_mode)


def _report(lists, oracle, at_cutoffs, prefix="") -> dict:
    values = {}
    values[prefix + "map"] = mean_average_precision(lists, oracle)
    for at in at_cutoffs:
        values[f"{prefix}precision@{at}"] = mean_precision_at(lists, oracle, at)
        values[f"{prefix}recall@{at}"] = mean_recall_at(lists, oracle, at)
    values[prefix + "ns_score"] = ns_score(lists, oracle)
    if oracle.mode == "gallery":
        values[prefix + "r1"] = cmc_r1(lists, oracle)
    return values


def _emit_report(values: dict, out_path=None):
    text = format_report(values)
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "wt", encoding="utf-8") as f:
            f.write(text)


def cmd_rerank(args, parser):
    lists_full, ids = _load_input(args, parser)
    config = _config(args)
    depth = min(config.resolve_depth(lists_full.n), lists_full.depth)
    final, _ = run_rfe(truncate(lists_full, depth), config,
                       threads=args.threads)
    full = extend_with_tail(final, lists_full)
    oracle = _oracle(args, ids)
    if oracle is not None:
        at = args.at or [10]
        values = _report(lists_full, oracle, at, prefix="baseline_")
        values.update(_report(full, oracle, at))
        _emit_report(values, args.report)
    if args.output:
        dataio.save_ranked_lists(full, args.output, ids=ids)
    return 0


def cmd_fuse(args, parser):
    if not args.lists or len(args.lists) < 1:
        parser.error("fuse requires at least one --lists file")
    loaded = [dataio.load_ranked_lists(p) for p in args.lists]
    ids0 = loaded[0][1]
    for path, (_, ids) in zip(args.lists, loaded):
        if ids != ids0:
            parser.error(f"{path}: object universe differs from the first input")
    config = _config(args)
    final, _ = run_aggregation([lists for lists, _ in loaded], config,
                               threads=args.threads)
    oracle = _oracle(args, ids0)
    if oracle is not None:
        _emit_report(_report(final, oracle, args.at or [10]), args.report)
    if args.output:
        dataio.save_ranked_lists(final, args.output, ids=ids0)
    return 0


def cmd_embed(args, parser):
    lists_full, ids = _load_input(args, parser)
    config = _config(args, emit_embeddings=True)
    depth = min(config.resolve_depth(lists_full.n), lists_full.depth)
    _, index = run_rfe(truncate(lists_full, depth), config,
                       threads=args.threads)
    dataio.save_embeddings(index.embeddings, args.output, ids=ids)
    return 0


def cmd_index(args, parser):
    lists_full, ids = _load_input(args, parser)
    config = _config(args, emit_embeddings=args.embeddings)
    depth = min(config.resolve_depth(lists_full.n), lists_full.depth)
    _, index = run_rfe(truncate(lists_full, depth), config,
                       threads=args.threads)
    index.save(args.output)
    return 0


def cmd_query(args, parser):
    index = RfeIndex.load(args.index)
    if args.distances:
        table = dataio.load_features(args.distances)
        dist = table.values
        owners = table.row_ids()
    elif args.features:
        if not args.collection_features:
            parser.error("--features also needs --collection-features")
        queries = dataio.load_features(args.features)
        collection = dataio.load_features(args.collection_features)
        if collection.n != index.n:
            parser.error(
                f"collection features cover {collection.n} objects, "
                f"index holds {index.n}"
            )
        dist = dataio.compute_distances(collection, metric=args.metric,
                                        queries=queries)
        owners = queries.row_ids()
    else:
        parser.error("query requires --distances or --features")
    if dist.shape[1] != index.n:
        parser.error(f"distance rows must have {index.n} columns")

    results_ids, results_scores = [], []
    for r in range(dist.shape[0]):
        neighbors = list(zip(range(index.n), dist[r]))
        result = query_unseen(index, neighbors, k=args.k)
        results_ids.append(result.ids)
        results_scores.append(result.scores)
    out = RankedLists(n=dist.shape[0], depth=index.n,
                      ids=results_ids, scores=results_scores)
    names = [str(i) for i in range(index.n)]
    dataio.save_ranked_lists(out, args.output, ids=names, owners=owners)
    return 0


def cmd_eval(args, parser):
    lists, ids = dataio.load_ranked_lists(args.lists)
    oracle = _oracle(args, ids)
    if oracle is None:
        parser.error("eval requires --labels")
    _emit_report(_report(lists, oracle, args.at or [10]), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankflow",
        description="Rank-flow re-ranking, aggregation, embeddings and "
                    "retrieval evaluation",
        epilog=f"Defaults can be overridden via {ENV_PREFIX}<FLAG> "
               "environment variables (see docs).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rerank", help="re-rank one ranker and report metrics")
    _add_input_flags(p)
    _add_pipeline_flags(p)
    _add_eval_flags(p)
    p.add_argument("--output", default=_env("output", None),
                   help="write re-ranked lists here")
    p.add_argument("--report", help="also write the metric report here")
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("fuse", help="aggregate several rankers, then re-rank")
    p.add_argument("--lists", action="append", required=True,
                   help="ranked-list file (repeat per ranker)")
    _add_pipeline_flags(p)
    _add_eval_flags(p)
    p.add_argument("--output", default=_env("output", None))
    p.add_argument("--report")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("embed", help="emit classification embeddings")
    _add_input_flags(p)
    _add_pipeline_flags(p)
    p.add_argument("--output", required=True,
                   help="embedding table destination")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("index", help="build and persist an offline index")
    _add_input_flags(p)
    _add_pipeline_flags(p)
    p.add_argument("--embeddings", action="store_true",
                   help="also store classification embeddings")
    p.add_argument("--output", required=True, help="index file destination")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="answer unseen queries from an index")
    p.add_argument("--index", required=True)
    p.add_argument("--distances",
                   help="query-vs-collection distance table")
    p.add_argument("--features", help="query feature table")
    p.add_argument("--collection-features",
                   help="collection feature table (with --features)")
    p.add_argument("--metric", choices=("euclidean", "cosine"),
                   default=_env("metric", "euclidean"))
    p.add_argument("--k", type=int, default=_env("k", None) and int(_env("k", None)),
                   help="neighborhood size (default: the index's k)")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="score an existing ranked-list file")
    p.add_argument("--lists", required=True)
    _add_eval_flags(p)
    p.add_argument("--output", help="also write the report here")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except RankflowError as exc:
        print(f"rankflow: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
