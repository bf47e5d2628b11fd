"""Command line entry point: ``qrbnb {gen,solve,bench,gap}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments
from .bnb import BnBConfig, Branching, Search, Selection, solve
from .problem import (
    InfeasibleProblemError,
    load_coordinates,
    load_edge_list,
    load_problem,
    distance_matrix,
    maxcut_to_problem,
    save_edge_list,
    save_problem,
    tsp_to_problem,
)
from .relaxation import Backend

EXIT_OK, EXIT_INFEASIBLE, EXIT_CAPPED = 0, 2, 3


def _add_strategy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=["31", "21"], default="21")
    p.add_argument("--backend", choices=["exact", "vqe"], default="exact")
    p.add_argument("--layers", type=int, default=1, help="ansatz repetition layers for --backend vqe")
    p.add_argument("--search", choices=[s.value for s in Search], default="bfs")
    p.add_argument("--select", choices=[s.value for s in Selection], default="least")
    p.add_argument("--branch", choices=[b.value for b in Branching], default="binary")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-cap", type=int, default=2000, help="relaxation evaluation limit, 0 for none")


def _config(args: argparse.Namespace) -> BnBConfig:
    return BnBConfig(
        kind=args.kind,
        backend=Backend(args.backend, layers=args.layers, seed=args.seed),
        search=Search(args.search),
        selection=Selection(args.select),
        branching=Branching(args.branch),
        eval_cap=args.eval_cap or None,
        seed=args.seed,
    )


def load_any(path: str):
    """Problem JSON (object), TSP coordinates (JSON list) or whitespace edge list."""
    text = Path(path).read_text()
    if path.endswith(".json"):
        data = json.loads(text)
        if isinstance(data, dict):
            return load_problem(path)
        return tsp_to_problem(distance_matrix(load_coordinates(path)))
    return maxcut_to_problem(load_edge_list(path))


def cmd_gen(args: argparse.Namespace) -> int:
    out = Path(args.out)
    if args.family == "maxcut":
        edges = experiments.gen_regular_graph(args.size, 3, args.seed)
        if args.problem:
            save_problem(maxcut_to_problem(edges, args.size), out)
        else:
            save_edge_list(edges, out)
    else:
        coords, dist = experiments.gen_tsp(args.size, args.seed)
        if args.problem:
            save_problem(tsp_to_problem(dist), out)
        else:
            out.write_text(json.dumps(coords.tolist()))
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    problem = load_any(args.input)
    try:
        report = solve(problem, _config(args))
    except InfeasibleProblemError as exc:
        print(json.dumps({"error": "infeasible", "detail": str(exc)}))
        return EXIT_INFEASIBLE
    text = report.dumps()
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return EXIT_CAPPED if report.capped else EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    plan = experiments.ExperimentPlan.from_json(json.loads(Path(args.plan).read_text()))
    if args.full_scale:
        plan.sizes = list(range(16, 25, 2)) if plan.family == "maxcut-3regular" else [4]
        plan.samples = 100
    rows = experiments.run_plan(plan, args.out, record_runtime=args.timings)
    print(json.dumps(experiments.aggregate(rows), indent=1))
    return EXIT_OK


def cmd_gap(args: argparse.Namespace) -> int:
    family = "maxcut-3regular" if args.family == "maxcut" else "tsp-random"
    table = experiments.gap_table(family, args.sizes, args.samples, args.seed)
    text = json.dumps(table, indent=1)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrbnb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a random instance file")
    gen.add_argument("family", choices=["maxcut", "tsp"])
    gen.add_argument("--size", type=int, required=True, help="nodes (maxcut) or cities (tsp)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--problem", action="store_true", help="write the problem JSON instead of the raw instance")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    sol = sub.add_parser("solve", help="solve one instance, JSON report on stdout")
    sol.add_argument("input", help="problem .json, TSP coordinate .json list, or edge list")
    _add_strategy_flags(sol)
    sol.add_argument("--out")
    sol.set_defaults(func=cmd_solve)

    bench = sub.add_parser("bench", help="run an experiment plan")
    bench.add_argument("plan", help="JSON plan file")
    bench.add_argument("--out", help="CSV file for per-run rows (appended, resumable)")
    bench.add_argument("--timings", action="store_true", help="add a wall-clock runtime column")
    bench.add_argument("--full-scale", action="store_true", help="16-24 node MaxCut sizes and 100 samples per size")
    bench.set_defaults(func=cmd_bench)

    gap = sub.add_parser("gap", help="root quantumness gap table for both QRAC kinds")
    gap.add_argument("family", choices=["maxcut", "tsp"])
    gap.add_argument("--sizes", type=int, nargs="+", default=[8])
    gap.add_argument("--samples", type=int, default=5)
    gap.add_argument("--seed", type=int, default=0)
    gap.add_argument("--out")
    gap.set_defaults(func=cmd_gap)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
