"""Command-line front end: index, rerank/fuse, eval, synth, bench.

Exit codes: 0 on success, 2 on usage errors, 3 on data errors. Data errors
print one machine-parsable line to stderr: ``error\t<Class>\t<message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .config import ChannelConfig, PipelineConfig, default_k, load_config, write_config
from .errors import FileAccessError, FormatError, TierankError
from .evaluation import load_ground_truth, ns_score, precision_at, recall_at, write_ground_truth
from .index import Metric, build_index, load_features, load_index, save_index, write_features_csv
from .pipeline import Channel, batch_rerank, rerank_vector_query, virtual_query_id
from .ranking import RankedList, read_rankings_tsv, write_rankings_tsv
from .scenarios import gen_outlier_scenario, gen_two_manifold_scenario


def _load_channel_features(cfg: ChannelConfig):
    try:
        return load_features(cfg.feature_path, fmt=cfg.fmt, channel_name=cfg.name)
    except FileAccessError as exc:
        raise FileAccessError(f"channel {cfg.name!r}: {exc}") from exc


def _index_path(index_dir: Path, name: str) -> Path:
    return index_dir / f"{name}.index"


def cmd_index(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for cfg in config.channels:
        features = _load_channel_features(cfg)
        k_cap = max(
            cfg.k1 if cfg.k1 is not None else default_k(features.n),
            cfg.k2 if cfg.k2 is not None else default_k(features.n),
        )
        index = build_index(features, k=k_cap, metric=cfg.metric)
        save_index(index, _index_path(out_dir, cfg.name))
        print(f"indexed channel {cfg.name}: n={index.n} k={index.k} metric={cfg.metric.value}")
    return 0


def _assemble_channels(config: PipelineConfig, index_dir: Path, need_features: bool) -> list[Channel]:
    channels = []
    for cfg in config.channels:
        index = load_index(_index_path(index_dir, cfg.name))
        features = _load_channel_features(cfg) if need_features else None
        k1 = cfg.k1 if cfg.k1 is not None else index.k
        k2 = cfg.k2 if cfg.k2 is not None else index.k
        if k1 > index.k or k2 > index.k:
            raise FormatError(
                f"channel {cfg.name!r}: k1/k2 exceed the stored index k={index.k}; re-run index"
            )
        channels.append(
            Channel(name=cfg.name, index=index, k1=k1, k2=k2, alpha=cfg.alpha, features=features)
        )
    return channels


def _parse_query_ids(args: argparse.Namespace) -> list[int]:
    ids: list[int] = []
    if args.query_ids:
        try:
            ids.extend(int(tok) for tok in args.query_ids.split(",") if tok.strip())
        except ValueError:
            raise FormatError(f"bad --query-ids value {args.query_ids!r}")
    if args.queries_file:
        try:
            text = Path(args.queries_file).read_text(encoding="utf-8")
        except OSError as exc:
            raise FileAccessError(f"cannot read {args.queries_file}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                ids.append(int(line.strip()))
            except ValueError:
                raise FormatError(f"{args.queries_file}:{lineno}: bad query id")
    return ids


def _parse_query_vectors(path: str) -> list[np.ndarray]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileAccessError(f"cannot read {path}: {exc}") from exc
    vectors = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        toks = line.replace(",", " ").split()
        try:
            vectors.append(np.asarray([float(t) for t in toks], dtype=np.float64))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: bad vector line")
    if not vectors:
        raise FormatError(f"{path}: no query vectors")
    return vectors


def cmd_rerank(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    tier3_mode = args.tier3_mode or config.tier3_mode
    variant = args.mfr_variant or config.variant
    k_final = args.k_final if args.k_final is not None else config.k_final
    index_dir = Path(args.index_dir)
    need_features = bool(args.query_vectors)
    channels = _assemble_channels(config, index_dir, need_features)

    rankings: list[RankedList] = []
    query_ids = _parse_query_ids(args)
    if query_ids:
        rankings.extend(
            batch_rerank(
                channels, query_ids, k_final=k_final, mode=tier3_mode,
                variant=variant, jobs=args.jobs,
            )
        )
    if args.query_vectors:
        base_vid = virtual_query_id(channels)
        for offset, vec in enumerate(_parse_query_vectors(args.query_vectors)):
            rankings.append(
                rerank_vector_query(
                    channels, vec, k_final=k_final, mode=tier3_mode,
                    variant=variant, vid=base_vid + offset,
                )
            )
    if not rankings:
        raise FormatError("no queries given; use --query-ids, --queries-file or --query-vectors")

    if args.out:
        write_rankings_tsv(rankings, args.out)
    else:
        for ranking in rankings:
            for line in ranking.tsv_lines():
                print(line)
    return 0


_METRIC_BUILDERS = {
    "ns": lambda rankings, truth, r, excl: ns_score(rankings, truth, exclude_query=excl),
    "precision": lambda rankings, truth, r, excl: precision_at(rankings, truth, r, exclude_query=excl),
    "recall": lambda rankings, truth, r, excl: recall_at(rankings, truth, r, exclude_query=excl),
}


def cmd_eval(args: argparse.Namespace) -> int:
    rankings = read_rankings_tsv(args.rankings)
    truth = load_ground_truth(args.truth)
    names = [m.strip() for m in args.metrics.split(",") if m.strip()]
    cutoffs = [int(r) for r in args.r.split(",")] if args.r else [4]
    unknown = [m for m in names if m not in _METRIC_BUILDERS]
    if unknown:
        raise FormatError(f"unknown metrics {unknown}; choose from {sorted(_METRIC_BUILDERS)}")

    reports = []
    for name in names:
        if name == "ns":
            reports.append(_METRIC_BUILDERS[name](rankings, truth, 4, args.exclude_query))
        else:
            for r in cutoffs:
                reports.append(_METRIC_BUILDERS[name](rankings, truth, r, args.exclude_query))

    if args.format == "tsv":
        print("metric\tr\tvalue\tn_queries")
        for rep in reports:
            print(f"{rep.metric_name}\t{rep.r}\t{rep.value!r}\t{rep.n_queries}")
    else:
        width = max(len(rep.metric_name) for rep in reports)
        for rep in reports:
            print(f"{rep.metric_name:<{width}}  @{rep.r:<4d} {rep.value:10.4f}   ({rep.n_queries} queries)")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.scenario == "outlier":
        scenario = gen_outlier_scenario(seed=args.seed)
        channel_files = {"plane": scenario.features}
    elif args.scenario == "two-manifold":
        scenario = gen_two_manifold_scenario(seed=args.seed)
        channel_files = {fm.channel_name: fm for fm in scenario.channels}
    else:
        raise FormatError(f"unknown scenario {args.scenario!r}")

    channel_configs = []
    for name, features in channel_files.items():
        write_features_csv(features, out_dir / f"{name}.csv")
        # paths stay relative to the config so the directory is relocatable
        channel_configs.append(
            ChannelConfig(
                name=name, feature_path=f"{name}.csv", fmt="csv", metric=Metric.L1,
                k1=scenario.k1, k2=scenario.k2,
            )
        )
    write_ground_truth(scenario.truth, out_dir / "truth.csv")
    (out_dir / "manifest.json").write_text(
        json.dumps(scenario.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    config = PipelineConfig(channels=tuple(channel_configs), seed=args.seed)
    write_config(config, out_dir / "pipeline.cfg")
    print(f"wrote {args.scenario} scenario to {out_dir} (query={scenario.query})")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    m = args.m
    if args.config:
        config = load_config(args.config)
        m = m if m is not None else len(config.channels)
    if m is None:
        m = 3
    n_values = [int(v) for v in args.n.split(",")]
    k_values = [int(v) for v in args.k.split(",")]
    print("label\tn\tm\tk\tmean_ms\tmedian_ms\tsamples")
    rng = np.random.default_rng(args.seed)
    for n in n_values:
        k_cap = max(k_values)
        channels = bench_mod.build_bench_channels(n=n, m=m, k=k_cap, dim=args.dim, seed=args.seed)
        queries = [int(q) for q in rng.choice(n, size=args.queries, replace=False)]
        for k in k_values:
            restricted = bench_mod.restricted_channels(channels, k=k, m=m)
            result = bench_mod.bench_rerank(
                restricted, queries, repetitions=args.reps, k_final=k,
                label=f"n{n}-k{k}-m{m}",
            )
            print(result.row())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tierank",
        description="Tiered neighborhood-graph re-ranking with multi-channel fusion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build and persist per-channel KNN indexes")
    p_index.add_argument("--config", required=True)
    p_index.add_argument("--out-dir", required=True)
    p_index.set_defaults(func=cmd_index)

    def add_rerank(name: str, help_text: str) -> None:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--index-dir", required=True)
        p.add_argument("--query-ids", help="comma-separated item ids")
        p.add_argument("--queries-file", help="file with one query id per line")
        p.add_argument("--query-vectors", help="file with one raw feature vector per line")
        p.add_argument("--out", help="output TSV path (default: stdout)")
        p.add_argument("--k-final", type=int, default=None)
        p.add_argument("--tier3-mode", choices=["query-anchored", "literal"], default=None)
        p.add_argument("--mfr-variant", choices=["sum", "product"], default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.set_defaults(func=cmd_rerank)

    add_rerank("rerank", "re-rank queries over the configured channels")
    add_rerank("fuse", "alias of rerank for multi-channel configs")

    p_eval = sub.add_parser("eval", help="score rankings against ground truth")
    p_eval.add_argument("--rankings", required=True)
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--metrics", default="precision")
    p_eval.add_argument("--r", default="4")
    p_eval.add_argument("--exclude-query", action="store_true")
    p_eval.add_argument("--format", choices=["table", "tsv"], default="table")
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="write a synthetic scenario to disk")
    p_synth.add_argument("--scenario", choices=["outlier", "two-manifold"], required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out-dir", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_bench = sub.add_parser("bench", help="time the per-query rerank path")
    p_bench.add_argument("--config", help="optional; channel count defaults to the config's")
    p_bench.add_argument("--n", default="2000")
    p_bench.add_argument("--k", default="25")
    p_bench.add_argument("--m", type=int, default=None)
    p_bench.add_argument("--dim", type=int, default=4)
    p_bench.add_argument("--queries", type=int, default=100)
    p_bench.add_argument("--reps", type=int, default=1)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TierankError as exc:
        print(f"error\t{type(exc).__name__}\t{exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
