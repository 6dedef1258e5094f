"""Command-line front end.

Commands: ``gen`` (sample a benchmark graph), ``release`` (run one mechanism),
``stream`` (continual observation), ``eval`` (metrics between two graph
files), ``bench`` (CSV sweep), ``audit`` (exact and empirical chain checks).
Every command is deterministic under ``--seed``; without it the
``DPGRAPH_SEED`` environment variable applies, and failing that a fresh seed
is drawn and printed for replay.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import bench as bench_mod
from . import continual, evaluation, generate, mechanisms
from .graph import (
    GraphFormatError,
    PrivacyBudget,
    WeightedGraph,
    read_graph,
    write_graph,
)
from .randomness import NoiseSource, resolve_seed
from .sampler import (
    SparseExpDistribution,
    exact_pi,
    exact_transition_matrix,
    mixing_steps,
)

__all__ = ["main"]


def _atomic_write_graph(graph: WeightedGraph, path: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        write_graph(graph, tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="run seed (default: DPGRAPH_SEED or entropy)")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")


# -- gen -----------------------------------------------------------------

def _cmd_gen(args) -> int:
    seed, origin = resolve_seed(args.seed)
    rng = NoiseSource.from_seed(seed, (0,)).generator
    weight_high = generate.resolve_weight_scale(args.weight_scale, args.n)
    graph = generate.erdos_renyi_graph(
        args.n,
        rng,
        avg_degree=args.avg_degree,
        weight_high=weight_high,
        weight_dist=args.weight_dist,
    )
    _atomic_write_graph(graph, args.out)
    _say(args, f"wrote {graph.edge_count} edges to {args.out} (seed={seed} via {origin})")
    return 0


# -- release ---------------------------------------------------------------

def _cmd_release(args) -> int:
    seed, origin = resolve_seed(args.seed)
    t0 = time.perf_counter()
    graph = read_graph(args.input)
    init_ms = 1000.0 * (time.perf_counter() - t0)
    budget = PrivacyBudget(args.eps, args.delta if args.delta is not None else float(graph.n) ** -10.0)
    config = mechanisms.MechanismConfig(
        budget=budget,
        beta=args.beta,
        mixing_multiplier=args.mixing_mult,
        jl_dimension=args.jl_r,
        jl_eta=args.jl_eta,
    )
    source = NoiseSource.from_seed(seed, (1,))
    t1 = time.perf_counter()
    result = mechanisms.release(graph, args.mech, config, source)
    release_ms = 1000.0 * (time.perf_counter() - t1)

    metrics: dict[str, float] = {}
    want_spectral = args.spectral or (args.spectral is None and graph.n <= 2000)
    if result.dense is not None:
        metrics = evaluation.evaluate_dense(graph, result.dense, spectral=want_spectral)
    elif result.sketch is not None:
        metrics = evaluation.evaluate_sketch(graph, result.sketch.matrix)
    elif result.graph is not None:
        metrics = evaluation.evaluate_graphs(
            graph, result.graph, spectral=want_spectral, max_cut=args.max_cut
        )
    if result.graph is not None:
        _atomic_write_graph(result.graph, args.out)
        _say(args, f"wrote released graph ({result.graph.edge_count} edges) to {args.out}")
    report = evaluation.ErrorReport(
        mechanism=args.mech,
        eps=budget.eps,
        delta=budget.delta,
        seed=seed,
        metrics=metrics,
        timings={"init_ms": init_ms, "release_ms": release_ms},
        info={k: v for k, v in result.info.items() if k != "topology"},
    )
    if args.report:
        report.write(args.report)
        _say(args, f"wrote report to {args.report} (seed={seed} via {origin})")
    else:
        _say(args, report.to_json())
    return 0


# -- stream ----------------------------------------------------------------

def _cmd_stream(args) -> int:
    seed, origin = resolve_seed(args.seed)
    n, horizon, updates = continual.read_stream(args.input)
    eps0, delta0 = continual.continual_budget(args.eps, args.delta, horizon)
    budget0 = PrivacyBudget(eps0, delta0)
    if args.mech == "filter":
        static = lambda g, src: mechanisms.filter_release(g, budget0, src)
    elif args.mech == "walk":
        static = lambda g, src: mechanisms.exchange_release(g, budget0, src)
    else:
        static = lambda g, src: mechanisms.topology_known_release(g, budget0.eps, src)
    source = NoiseSource.from_seed(seed, (2,))
    tree = continual.PartialSumTree(n, horizon, static, source)
    os.makedirs(args.out_dir, exist_ok=True)
    t0 = time.perf_counter()
    emitted = 0
    for t, update in enumerate(updates, start=1):
        released = tree.step(update)
        if t % args.every == 0 or t == len(updates):
            _atomic_write_graph(released, os.path.join(args.out_dir, f"round_{t:06d}.tsv"))
            emitted += 1
    elapsed_ms = 1000.0 * (time.perf_counter() - t0)
    rounds = len(updates)
    log_t = max(1.0, math.log2(horizon))
    report = evaluation.ErrorReport(
        mechanism=f"binary/{args.mech}",
        eps=args.eps,
        delta=args.delta,
        seed=seed,
        metrics={},
        timings={"init_ms": 0.0, "release_ms": elapsed_ms},
        info={
            "horizon": horizon,
            "rounds": rounds,
            "eps_per_call": eps0,
            "delta_per_call": delta0,
            "edge_touches": tree.edge_touches,
            "touch_constant": tree.edge_touches / (rounds * log_t) if rounds else 0.0,
            "emitted": emitted,
        },
    )
    report.write(os.path.join(args.out_dir, "report.json"))
    _say(args, f"streamed {rounds} rounds, wrote {emitted} graphs (seed={seed} via {origin})")
    return 0


# -- eval --------------------------------------------------------------------

def _cmd_eval(args) -> int:
    t0 = time.perf_counter()
    original = read_graph(args.original)
    released = read_graph(args.released)
    init_ms = 1000.0 * (time.perf_counter() - t0)
    t1 = time.perf_counter()
    metrics = evaluation.evaluate_graphs(
        original, released, spectral=args.spectral, max_cut=args.max_cut
    )
    report = evaluation.ErrorReport(
        mechanism="eval",
        eps=0.0,
        delta=0.0,
        seed=0,
        metrics=metrics,
        timings={"init_ms": init_ms, "release_ms": 1000.0 * (time.perf_counter() - t1)},
    )
    if args.report:
        report.write(args.report)
        _say(args, f"wrote report to {args.report}")
    else:
        print(report.to_json())
    return 0


# -- bench ---------------------------------------------------------------

def _cmd_bench(args) -> int:
    seed, origin = resolve_seed(args.seed)
    spec = bench_mod.BenchSpec(
        sizes=tuple(int(s) for s in args.sizes.split(",")),
        mechanisms=tuple(args.mechs.split(",")),
        weight_scale=args.weight_scale,
        weight_dist=args.weight_dist,
        avg_degree=args.avg_degree,
        trials=args.trials,
        seed=seed,
        eps=args.eps,
        delta=args.delta,
        mixing_multiplier=args.mixing_mult,
        jl_dimension=args.jl_r,
        jl_eta=args.jl_eta,
        spectral=not args.no_spectral,
        max_cut=args.max_cut,
        jobs=args.jobs,
    )
    progress = None if args.quiet else (lambda cell: print(f"  done n={cell[0]} mech={cell[1]} trial={cell[2]}"))
    rows = bench_mod.run_bench(spec, progress=progress)
    bench_mod.write_csv(rows, args.out)
    _say(args, f"wrote {len(rows)} rows to {args.out} (seed={seed} via {origin})")
    return 0


# -- audit -----------------------------------------------------------------

def _audit_check(name: str, ok: bool, detail: str, failures: list[str]) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if not ok:
        failures.append(name)


def _cmd_audit(args) -> int:
    seed, origin = resolve_seed(args.seed)
    rng = NoiseSource.from_seed(seed, (3,)).generator
    support = args.support if args.support is not None else max(1, min(args.k, args.N // 2))
    idx = rng.choice(args.N, size=support, replace=False)
    weights = {int(e): float(w) for e, w in zip(idx, rng.uniform(0.0, 3.0, size=support))}
    dist = SparseExpDistribution(args.N, args.k, args.eps, weights)
    print(
        f"audit N={args.N} k={args.k} eps={args.eps} delta={args.delta} "
        f"support={support} trials={args.trials} (seed={seed} via {origin})"
    )
    failures: list[str] = []

    pi = exact_pi(dist)
    total = sum(pi.values())
    _audit_check("pi-normalization", abs(total - 1.0) < 1e-12, f"sum={total!r}", failures)

    states, matrix = exact_transition_matrix(dist)
    pvec = np.array([pi[s] for s in states])
    flow = pvec[:, None] * matrix
    db = float(np.abs(flow - flow.T).max())
    _audit_check("detailed-balance", db < 1e-10, f"max violation {db:.3e}", failures)

    evals, evecs = np.linalg.eig(matrix.T)
    lead = np.argmin(np.abs(evals - 1.0))
    stationary = np.real(evecs[:, lead])
    stationary /= stationary.sum()
    tv_exact = 0.5 * float(np.abs(stationary - pvec).sum())
    _audit_check("stationarity", tv_exact < 1e-10, f"TV {tv_exact:.3e}", failures)

    l1_gap = max(
        abs(dist.log_mass(s) - dist.log_mass_l1(s)) for s in list(pi)[: min(200, len(pi))]
    )
    _audit_check("mass-form-equivalence", l1_gap < 1e-9, f"max log-mass gap {l1_gap:.3e}", failures)

    steps = args.walk_steps if args.walk_steps is not None else mixing_steps(
        args.k, args.N, args.eps, args.delta
    )
    start = frozenset(sorted(weights, key=lambda e: -weights[e])[: args.k])
    if len(start) < args.k:
        extra = (e for e in range(args.N) if e not in start)
        start = frozenset(list(start) + [next(extra) for _ in range(args.k - len(start))])
    freq, slack = evaluation.empirical_topology_law(
        dist, start, steps, args.trials, NoiseSource.from_seed(seed, (4,))
    )
    tv_emp = evaluation.tv_distance(freq, pi)
    bound = args.delta / (math.exp(2 * args.eps) + 1) + slack
    _audit_check(
        "empirical-tv",
        tv_emp <= bound,
        f"TV {tv_emp:.4f} vs bound {bound:.4f} (T={steps}, slack {slack:.4f})",
        failures,
    )

    if failures:
        print(f"audit FAILED: {', '.join(failures)}")
        return 1
    print("audit passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpgraph",
        description="Differentially private release of sparse synthetic graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a weighted Erdos-Renyi benchmark graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--avg-degree", type=float, default=4.0)
    p.add_argument("--weight-scale", default="1", help="1 | sqrt_n | n | explicit W")
    p.add_argument("--weight-dist", choices=("uniform", "fixed"), default="uniform")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("release", help="run one mechanism on a graph file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mech", choices=mechanisms.MECHANISMS, required=True)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=None, help="default n^-10")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--mixing-mult", type=float, default=1.0)
    p.add_argument("--jl-r", type=int, default=None)
    p.add_argument("--jl-eta", type=float, default=0.1)
    p.add_argument("--out", default="released.tsv")
    p.add_argument("--report", default=None)
    p.add_argument("--spectral", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--max-cut", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_release)

    p = sub.add_parser("stream", help="continual release over a stream file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mech", choices=("filter", "walk", "topo-laplace"), default="filter")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--every", type=int, default=1, help="emit every i-th round")
    _add_common(p)
    p.set_defaults(func=_cmd_stream)

    p = sub.add_parser("eval", help="metrics between two graph files")
    p.add_argument("--original", required=True)
    p.add_argument("--released", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--spectral", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--max-cut", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="sweep sizes x mechanisms, write CSV")
    p.add_argument("--sizes", required=True, help="comma-separated vertex counts")
    p.add_argument("--mechs", required=True, help="comma-separated mechanism names")
    p.add_argument("--weight-scale", default="1")
    p.add_argument("--weight-dist", choices=("uniform", "fixed"), default="uniform")
    p.add_argument("--avg-degree", type=float, default=4.0)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=None, help="default n^-10")
    p.add_argument("--mixing-mult", type=float, default=1.0)
    p.add_argument("--jl-r", type=int, default=None)
    p.add_argument("--jl-eta", type=float, default=0.1)
    p.add_argument("--no-spectral", action="store_true")
    p.add_argument("--max-cut", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("audit", help="exact and empirical checks of the exchange chain")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=20_000)
    p.add_argument("--support", type=int, default=None)
    p.add_argument("--walk-steps", type=int, default=None, help="override the mixing formula")
    _add_common(p)
    p.set_defaults(func=_cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GraphFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
