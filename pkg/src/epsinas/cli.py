"""Command-line surface: experiment recipes over the library modules.

Every subcommand is seed-reproducible and writes a manifest
(`<out>.manifest.json`) beside its output recording the subcommand, flags,
seed, tool version and SHA-256 digests of all input files — re-running with
the same manifest regenerates byte-identical artifacts.

Exit codes: 0 success, 2 flag/usage problems, 1 runtime failures.  Worker
threads come from `--parallelism`, falling back to the EPSINAS_THREADS
environment variable, then 1.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .bench import load_bench_csv
from .data import (BATCH_KINDS, BatchSpec, load_batch, make_batch, make_rng,
                   save_batch)
from .metric import (STATUS_VALID, ScoreRow, ScoreTable, epsilon_from_normalized,
                     normalized_output, read_scores_csv, score_space,
                     write_scores_csv)
from .search import (SearchConfig, aging_evolution, final_best_stats,
                     n_sample_selection, random_search, scores_map,
                     write_trajectories_csv)
from .space import (NUM_GENOTYPES, SkeletonConfig, arch_index,
                    constant_forward, enumerate_space, format_genotype,
                    parse_genotype)
from .stats import compute_report, join_tables, kendall, spearman
from .weights import WeightPair


class UsageError(Exception):
    """Bad flag combination or value; reported with exit code 2."""


# ---------------------------------------------------------------------------
# Shared flag groups and resolution helpers.
# ---------------------------------------------------------------------------

def _add_cfg_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stem-channels", type=int, default=16)
    p.add_argument("--cells-per-stack", type=int, default=1)
    p.add_argument("--num-classes", type=int, default=10)
    p.add_argument("--input-shape", default="3,32,32",
                   help="C,H,W of network input (default 3,32,32)")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", default="synthetic:greyscale",
                   help="synthetic:{greyscale,random_normal,random_uniform,"
                        "random_uniform_pos} | real:PATH | batch:PATH")
    p.add_argument("--batch-size", type=int, default=256)


def _add_weight_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--w1", type=float, default=1e-7)
    p.add_argument("--w2", type=float, default=1.0)


def _add_common(p: argparse.ArgumentParser, out_required=True) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=out_required)
    p.add_argument("--parallelism", type=int, default=None,
                   help="worker threads (default: EPSINAS_THREADS or 1)")


def _ints(text: str, flag: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers, "
                         f"got {text!r}")


def _floats(text: str, flag: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated floats, "
                         f"got {text!r}")


def _resolve_cfg(args) -> SkeletonConfig:
    shape = _ints(args.input_shape, "--input-shape")
    try:
        return SkeletonConfig(stem_channels=args.stem_channels,
                              cells_per_stack=args.cells_per_stack,
                              num_classes=args.num_classes,
                              input_shape=shape)
    except ValueError as exc:
        raise UsageError(str(exc))


def _resolve_parallelism(args) -> int:
    if args.parallelism is not None:
        n = args.parallelism
    else:
        env = os.environ.get("EPSINAS_THREADS", "")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise UsageError(f"EPSINAS_THREADS={env!r} is not an integer")
    if n < 1:
        raise UsageError(f"parallelism must be positive, got {n}")
    return n


def _resolve_batch(args, seed: int, size: int | None = None,
                   inputs: list | None = None) -> np.ndarray:
    """Build the scoring batch from --data; records input files used."""
    size = args.batch_size if size is None else size
    spec_text = args.data
    scheme, _, rest = spec_text.partition(":")
    if scheme == "batch":
        if not rest:
            raise UsageError("batch: needs a file path")
        if inputs is not None:
            inputs.append(rest)
        batch = load_batch(rest)
        if batch.ndim != 4:
            raise UsageError(f"{rest}: batch file must be rank 4, "
                             f"got rank {batch.ndim}")
        return batch
    shape = tuple(_ints(args.input_shape, "--input-shape")) \
        if hasattr(args, "input_shape") else (3, 32, 32)
    if scheme == "synthetic":
        if rest not in BATCH_KINDS or rest == "real":
            raise UsageError(f"unknown synthetic kind {rest!r}")
        return make_batch(BatchSpec(rest, size, shape, seed))
    if scheme == "real":
        if not rest:
            raise UsageError("real: needs a file path")
        if inputs is not None:
            inputs.append(rest)
        return make_batch(BatchSpec("real", size, shape, seed,
                                    source_path=rest))
    raise UsageError(f"unknown --data scheme {spec_text!r}")


def _resolve_archs(args, rng, inputs: list | None = None):
    """--archs all | sample:N | file:PATH -> list of Genotype."""
    text = args.archs
    if text == "all":
        return enumerate_space()
    kind, _, rest = text.partition(":")
    if kind == "sample":
        try:
            n = int(rest)
        except ValueError:
            raise UsageError(f"sample: needs an integer, got {rest!r}")
        if not 1 <= n <= NUM_GENOTYPES:
            raise UsageError(f"sample size {n} outside [1, {NUM_GENOTYPES}]")
        space = enumerate_space()
        idx = rng.choice(NUM_GENOTYPES, size=n, replace=False)
        return [space[int(i)] for i in idx]
    if kind == "file":
        if not rest:
            raise UsageError("file: needs a path")
        if inputs is not None:
            inputs.append(rest)
        gs = []
        with open(rest) as fh:
            for ln, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    gs.append(parse_genotype(line))
                except ValueError as exc:
                    raise UsageError(f"{rest}:{ln}: {exc}")
        if not gs:
            raise UsageError(f"{rest}: no genotypes found")
        return gs
    raise UsageError(f"unknown --archs value {text!r}")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_path, subcommand, args, inputs) -> None:
    flags = {k: v for k, v in sorted(vars(args).items())
             if k not in ("func", "command") and not k.startswith("_")}
    doc = {
        "tool": "epsinas",
        "version": __version__,
        "subcommand": subcommand,
        "seed": getattr(args, "seed", None),
        "args": flags,
        "inputs": {str(p): _sha256(p) for p in sorted(set(inputs))},
    }
    with open(f"{out_path}.manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------

def cmd_score(args) -> None:
    inputs: list = []
    cfg = _resolve_cfg(args)
    rng = make_rng(args.seed)
    gs = _resolve_archs(args, rng, inputs)
    batch = _resolve_batch(args, args.seed, inputs=inputs)
    try:
        weights = WeightPair(args.w1, args.w2)
    except ValueError as exc:
        raise UsageError(str(exc))
    table = score_space(gs, cfg, batch, weights,
                        parallelism=_resolve_parallelism(args))
    write_scores_csv(table, args.out)
    _write_manifest(args.out, "score", args, inputs)
    print(f"wrote {len(table)} scores ({table.nan_count} NaN) to {args.out}")


def cmd_correlate(args) -> None:
    inputs = [args.scores, args.bench]
    scores = read_scores_csv(args.scores)
    bench = load_bench_csv(args.bench)
    joined = join_tables(scores, bench)
    report = compute_report(joined, top_frac=args.top_frac,
                            top_k=args.top_k, top_k_frac=args.top_k_frac)
    with open(args.out, "w") as fh:
        fh.write(report.to_json())
    _write_manifest(args.out, "correlate", args, inputs)
    print(f"wrote report for {report.n_valid}/{report.n_total} valid rows "
          f"to {args.out}")


SWEEP_W_HEADER = ["w1", "w2", "n_valid", "rho_global", "rho_top",
                  "tau_global", "tau_top", "top10pct", "top64"]


def cmd_sweep_weights(args) -> None:
    grid = _floats(args.grid, "--grid")
    if len(grid) < 2:
        raise UsageError("--grid needs at least two values")
    if len(set(grid)) != len(grid):
        raise UsageError(f"--grid contains duplicate values: {args.grid}")
    for w in grid:
        if not math.isfinite(w):
            raise UsageError(f"--grid values must be finite, got {w!r}")
    grid = sorted(grid)
    inputs = [args.bench]
    cfg = _resolve_cfg(args)
    rng = make_rng(args.seed)
    gs = _resolve_archs(args, rng, inputs)
    batch = _resolve_batch(args, args.seed, inputs=inputs)
    bench = load_bench_csv(args.bench)

    # One constant-init evaluation per (architecture, weight); pairs reuse
    # the cached normalised outputs, so the grid costs |grid| evaluations
    # per arch, not C(|grid|, 2).
    cache = []
    for g in gs:
        per_w = []
        for w in grid:
            per_w.append(normalized_output(constant_forward(g, cfg, batch, w)))
        cache.append(per_w)

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_W_HEADER)
        for i in range(len(grid)):
            for j in range(i + 1, len(grid)):
                rows = []
                for g, per_w in zip(gs, cache):
                    n1, s1 = per_w[i]
                    n2, s2 = per_w[j]
                    r = epsilon_from_normalized(n1, s1, n2, s2)
                    rows.append(ScoreRow(arch_index(g), format_genotype(g),
                                         r.epsilon, r.status))
                joined = join_tables(ScoreTable(rows), bench)
                rep = compute_report(joined, top_frac=args.top_frac,
                                     top_k=args.top_k,
                                     top_k_frac=args.top_k_frac)
                writer.writerow([_fmt(grid[i]), _fmt(grid[j]),
                                 rep.n_valid, _fmt(rep.spearman_global),
                                 _fmt(rep.spearman_top),
                                 _fmt(rep.kendall_global),
                                 _fmt(rep.kendall_top),
                                 _fmt(rep.top10_in_top10_pct),
                                 _fmt(rep.top64_in_top5)])
    _write_manifest(args.out, "sweep-weights", args, inputs)
    n_pairs = len(grid) * (len(grid) - 1) // 2
    print(f"wrote {n_pairs} weight pairs x {len(gs)} archs to {args.out}")


SWEEP_B_HEADER = ["batch_size", "rep", "n_valid", "rho", "tau",
                  "rho_median", "rho_q25", "rho_q75",
                  "tau_median", "tau_q25", "tau_q75"]


def _quartiles(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return (None, None, None)
    arr = np.asarray(vals, dtype=np.float64)
    return (float(np.percentile(arr, 50)), float(np.percentile(arr, 25)),
            float(np.percentile(arr, 75)))


def cmd_sweep_batch(args) -> None:
    sizes = _ints(args.sizes, "--sizes")
    if not sizes or min(sizes) < 1:
        raise UsageError(f"--sizes must be positive integers: {args.sizes}")
    if args.reps < 1:
        raise UsageError(f"--reps must be positive, got {args.reps}")
    if args.data.startswith("batch:"):
        raise UsageError("sweep-batch regenerates batches per size; "
                         "batch:PATH is fixed-size, use a synthetic or "
                         "real source")
    inputs = [args.bench]
    cfg = _resolve_cfg(args)
    rng = make_rng(args.seed)
    gs = _resolve_archs(args, rng, inputs)
    bench = load_bench_csv(args.bench)
    try:
        weights = WeightPair(args.w1, args.w2)
    except ValueError as exc:
        raise UsageError(str(exc))
    par = _resolve_parallelism(args)

    records = []
    for size in sizes:
        per_size = []
        for rep in range(args.reps):
            batch = _resolve_batch(args, args.seed + rep, size=size)
            table = score_space(gs, cfg, batch, weights, parallelism=par)
            joined = join_tables(table, bench)
            rho = spearman(joined.scores, joined.accs) \
                if len(joined) >= 2 else None
            tau = kendall(joined.scores, joined.accs) \
                if len(joined) >= 2 else None
            per_size.append((size, rep, len(joined), rho, tau))
        records.append(per_size)

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_B_HEADER)
        for per_size in records:
            rho_m, rho_lo, rho_hi = _quartiles([r[3] for r in per_size])
            tau_m, tau_lo, tau_hi = _quartiles([r[4] for r in per_size])
            for size, rep, n_valid, rho, tau in per_size:
                writer.writerow([size, rep, n_valid, _fmt(rho), _fmt(tau),
                                 _fmt(rho_m), _fmt(rho_lo), _fmt(rho_hi),
                                 _fmt(tau_m), _fmt(tau_lo), _fmt(tau_hi)])
    _write_manifest(args.out, "sweep-batch", args, inputs)
    print(f"wrote {len(sizes)} sizes x {args.reps} batches to {args.out}")


_ALGO_NAMES = {"rs": "random_search", "random_search": "random_search",
               "ae": "aging_evolution", "aging_evolution": "aging_evolution"}


def cmd_search(args) -> None:
    algo = _ALGO_NAMES.get(args.algo)
    if algo is None:
        raise UsageError(f"unknown --algo {args.algo!r}")
    if args.mode != "plain" and not args.scores:
        raise UsageError(f"mode {args.mode!r} requires --scores")
    inputs = [args.bench]
    scorer = None
    if args.scores:
        inputs.append(args.scores)
        scorer = scores_map(read_scores_csv(args.scores))
    bench = load_bench_csv(args.bench)
    try:
        cfg = SearchConfig(algo=algo, mode=args.mode,
                           warmup_pool_size=args.pool_size,
                           warmup_steps=args.warm_steps,
                           train_budget=args.budget, rounds=args.rounds,
                           population_size=args.population,
                           sample_size=args.sample, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    if algo == "random_search":
        trajectories = random_search(cfg, bench, scorer)
    else:
        trajectories = aging_evolution(cfg, bench, scorer)
    write_trajectories_csv(trajectories, args.out)
    mean, std = final_best_stats(trajectories)
    summary_path = args.summary or f"{args.out}.summary.json"
    with open(summary_path, "w") as fh:
        json.dump({"algo": algo, "mode": args.mode, "rounds": cfg.rounds,
                   "budget": cfg.train_budget,
                   "final_best_test_mean": mean,
                   "final_best_test_std": std}, fh, indent=2)
        fh.write("\n")
    _write_manifest(args.out, "search", args, inputs)
    print(f"final best test acc {mean:.4f} +/- {std:.4f} over "
          f"{cfg.rounds} rounds -> {args.out}")


def cmd_select(args) -> None:
    inputs = [args.scores, args.bench]
    scores = read_scores_csv(args.scores)
    bench = load_bench_csv(args.bench)
    n_valid = sum(1 for r in scores.rows
                  if math.isfinite(r.epsilon) and r.genotype in bench)
    if args.n > n_valid:
        raise UsageError(f"--n {args.n} exceeds the {n_valid} valid scored "
                         f"architectures in the bench universe")
    if args.n < 1 or args.runs < 1:
        raise UsageError("--n and --runs must be positive")
    summary = n_sample_selection(args.n, args.runs, bench, scores,
                                 make_rng(args.seed))
    with open(args.out, "w") as fh:
        json.dump({"n": summary.n, "runs": summary.runs,
                   "val_mean": summary.val_mean, "val_std": summary.val_std,
                   "test_mean": summary.test_mean,
                   "test_std": summary.test_std}, fh, indent=2)
        fh.write("\n")
    _write_manifest(args.out, "select", args, inputs)
    print(f"best-of-{summary.n} over {summary.runs} runs: test "
          f"{summary.test_mean:.4f} +/- {summary.test_std:.4f}")


def cmd_gen_data(args) -> None:
    inputs: list = []
    shape = _ints(args.shape, "--shape")
    if args.kind == "real":
        if not args.source:
            raise UsageError("--kind real requires --source")
        inputs.append(args.source)
    try:
        spec = BatchSpec(args.kind, args.batch_size, shape, args.seed,
                         source_path=args.source)
    except ValueError as exc:
        raise UsageError(str(exc))
    batch = make_batch(spec)
    save_batch(args.out, batch)
    _write_manifest(args.out, "gen-data", args, inputs)
    print(f"wrote {args.kind} batch {batch.shape} to {args.out}")


# ---------------------------------------------------------------------------
# Parser assembly and entry point.
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epsinas",
        description="Constant-init dispersion scoring for cell search "
                    "spaces, with rank statistics and search integrations.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score architectures to a CSV table")
    p.add_argument("--archs", default="sample:100",
                   help="all | sample:N | file:PATH")
    _add_cfg_flags(p)
    _add_data_flags(p)
    _add_weight_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("correlate",
                       help="rank-fidelity report of scores vs accuracies")
    p.add_argument("--scores", required=True)
    p.add_argument("--bench", required=True)
    p.add_argument("--top-frac", type=float, default=0.1)
    p.add_argument("--top-k", type=int, default=64)
    p.add_argument("--top-k-frac", type=float, default=0.05)
    _add_common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("sweep-weights",
                       help="rank fidelity over all pairs from a weight grid")
    p.add_argument("--grid", required=True,
                   help="comma-separated weight values (pairs are all "
                        "ordered combinations)")
    p.add_argument("--archs", default="sample:500")
    p.add_argument("--bench", required=True)
    p.add_argument("--top-frac", type=float, default=0.1)
    p.add_argument("--top-k", type=int, default=64)
    p.add_argument("--top-k-frac", type=float, default=0.05)
    _add_cfg_flags(p)
    _add_data_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep_weights)

    p = sub.add_parser("sweep-batch",
                       help="rank fidelity across batch sizes and batches")
    p.add_argument("--sizes", default="8,16,32,64,128,256,512,1024")
    p.add_argument("--reps", type=int, default=10,
                   help="random batches per size (seeds seed..seed+reps-1)")
    p.add_argument("--archs", default="sample:500")
    p.add_argument("--bench", required=True)
    _add_cfg_flags(p)
    _add_data_flags(p)
    _add_weight_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep_batch)

    p = sub.add_parser("search", help="run a search algorithm over a bench")
    p.add_argument("--algo", default="rs", help="rs | ae")
    p.add_argument("--mode", default="plain",
                   choices=["plain", "warmup", "move"])
    p.add_argument("--bench", required=True)
    p.add_argument("--scores", default=None,
                   help="scores CSV (required for warmup/move)")
    p.add_argument("--budget", type=int, default=300)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--pool-size", type=int, default=3000)
    p.add_argument("--warm-steps", type=int, default=64)
    p.add_argument("--population", type=int, default=64)
    p.add_argument("--sample", type=int, default=10)
    p.add_argument("--summary", default=None,
                   help="summary JSON path (default OUT.summary.json)")
    _add_common(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("select", help="best-of-n selection by score")
    p.add_argument("--scores", required=True)
    p.add_argument("--bench", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--runs", type=int, default=500)
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("gen-data", help="generate a batch file (EPSB)")
    p.add_argument("--kind", required=True,
                   choices=list(BATCH_KINDS))
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--shape", default="3,32,32")
    p.add_argument("--source", default=None,
                   help="CIFAR-10 binary path (kind=real)")
    _add_common(p)
    p.set_defaults(func=cmd_gen_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else (0 if code is None else 2)
    try:
        args.func(args)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # never a traceback to the user
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
