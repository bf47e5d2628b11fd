"""Instance generators and benchmark sweeps (N_eval, P_opt, quantumness gap)."""

from __future__ import annotations

import csv
import json
import logging
import time
import zlib
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bnb import BnBConfig, Branching, Search, Selection, solve
from .problem import (
    ConstrainedQuadraticProblem,
    brute_force_solve,
    distance_matrix,
    maxcut_to_problem,
    tsp_to_problem,
)
from .relaxation import Backend, UndefinedGapError, quantumness_gap

log = logging.getLogger(__name__)

FAMILIES = ("maxcut-3regular", "tsp-random")
OPT_TOL = 1e-9


def gen_regular_graph(n_nodes: int, degree: int = 3, seed: int | None = None, max_tries: int = 10_000) -> list[tuple[int, int]]:
    """Uniform-ish simple connected ``degree``-regular graph from the pairing model with rejection."""
    if (n_nodes * degree) % 2:
        raise ValueError(f"n_nodes * degree must be even, got {n_nodes} * {degree}")
    if n_nodes <= degree:
        raise ValueError(f"need more than {degree} nodes for a {degree}-regular graph")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n_nodes), degree)
    for _ in range(max_tries):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        edges = {(int(min(u, v)), int(max(u, v))) for u, v in pairs}
        if len(edges) != len(pairs):
            continue
        if _connected(n_nodes, edges):
            return sorted(edges)
    raise RuntimeError(f"no simple connected graph after {max_tries} pairings")


def _connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == n


def gen_tsp(n_cities: int, seed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Uniform cities in the unit square; returns ``(coords, distances)``."""
    if n_cities < 2:
        raise ValueError("need at least two cities")
    coords = np.random.default_rng(seed).uniform(0.0, 1.0, size=(n_cities, 2))
    return coords, distance_matrix(coords)


def instance_seed(master_seed: int, family: str, index: int, size: int = 0) -> int:
    """Deterministic per-instance seed from the plan seed, family name, size and sample index."""
    seq = np.random.SeedSequence([master_seed, zlib.crc32(family.encode()), size, index])
    return int(seq.generate_state(1)[0])


def make_instance(family: str, size: int, seed: int) -> ConstrainedQuadraticProblem:
    if family == "maxcut-3regular":
        return maxcut_to_problem(gen_regular_graph(size, 3, seed), size)
    if family == "tsp-random":
        return tsp_to_problem(gen_tsp(size, seed)[1])
    raise ValueError(f"unknown family {family!r}")


def config_from_dict(data: dict) -> BnBConfig:
    backend = Backend(
        data.get("backend", "exact"),
        layers=int(data.get("layers", 1)),
        seed=int(data.get("vqe_seed", data.get("seed", 0))),
    )
    return BnBConfig(
        kind=str(data.get("kind", "21")),
        backend=backend,
        search=Search(data.get("search", "bfs")),
        selection=Selection(data.get("select", data.get("selection", "least"))),
        branching=Branching(data.get("branch", data.get("branching", "binary"))),
        eval_cap=None if data.get("eval_cap", 2000) is None else int(data.get("eval_cap", 2000)),
        seed=int(data.get("seed", 0)),
    )


@dataclass
class ExperimentPlan:
    family: str
    sizes: Sequence[int]
    samples: int
    configs: Sequence[BnBConfig]
    seed: int = 0
    with_gap: bool = True

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")

    def instances(self) -> Iterable[tuple[str, int, int, ConstrainedQuadraticProblem]]:
        for size in self.sizes:
            for index in range(self.samples):
                seed = instance_seed(self.seed, self.family, index, size)
                yield f"{self.family}-n{size}-s{index}", size, index, make_instance(self.family, size, seed)

    @classmethod
    def from_json(cls, data: dict) -> ExperimentPlan:
        family = data["family"]
        if "sizes" in data:
            sizes = data["sizes"]
        elif family == "tsp-random":
            sizes = [data.get("n_cities", 4)]
        else:
            sizes = data.get("n_nodes", [8])
        sizes = [sizes] if isinstance(sizes, int) else list(sizes)
        return cls(
            family=family,
            sizes=sizes,
            samples=int(data.get("samples", 1)),
            configs=[config_from_dict(c) for c in data.get("configs", [{}])],
            seed=int(data.get("seed", 0)),
            with_gap=bool(data.get("gap", True)),
        )


@dataclass
class MetricsRow:
    instance_id: str
    size: int
    config: str
    n_eval: int
    n_eval_quantum: int
    value: float | None
    optimum: float
    optimal_found: bool
    proven_optimal: bool
    capped: bool
    gap: float | None
    runtime: float = field(default=0.0, compare=False)
    error: str = ""


CSV_FIELDS = [
    "instance_id",
    "size",
    "config",
    "n_eval",
    "n_eval_quantum",
    "value",
    "optimum",
    "optimal_found",
    "proven_optimal",
    "capped",
    "gap",
    "error",
]


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _read_done(path: Path) -> set[tuple[str, str]]:
    if not path.exists():
        return set()
    with path.open(newline="") as fh:
        return {(r["instance_id"], r["config"]) for r in csv.DictReader(fh)}


def run_plan(
    plan: ExperimentPlan, out: str | Path | None = None, record_runtime: bool = False
) -> list[MetricsRow]:
    """Solve every instance with every config and compare to the brute-force optimum.

    Rows are appended to ``out`` (CSV) as they finish; (instance, config)
    pairs already present there are skipped, so an interrupted run resumes.
    Runtime is only written when ``record_runtime`` since it breaks
    byte-for-byte reproducibility of the file.
    """
    path = Path(out) if out is not None else None
    done = _read_done(path) if path is not None else set()
    fields = CSV_FIELDS + (["runtime"] if record_runtime else [])
    fh = writer = None
    if path is not None:
        new_file = not path.exists()
        fh = path.open("a", newline="")
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        if new_file:
            writer.writeheader()
    rows: list[MetricsRow] = []
    try:
        for instance_id, size, _, problem in plan.instances():
            pending = [c for c in plan.configs if (instance_id, c.describe()) not in done]
            if not pending:
                continue
            optimum, _ = brute_force_solve(problem)
            gaps: dict[str, float | None] = {}
            caches: dict[str, dict] = defaultdict(dict)
            for config in pending:
                if plan.with_gap and config.kind not in gaps:
                    try:
                        gaps[config.kind] = quantumness_gap(problem, config.kind, optimum)
                    except UndefinedGapError:
                        gaps[config.kind] = None
                start = time.perf_counter()
                try:
                    report = solve(problem, config, cache=caches[config.kind])
                    value = report.incumbent.value if report.incumbent else None
                    row = MetricsRow(
                        instance_id,
                        size,
                        config.describe(),
                        report.n_eval,
                        report.n_eval_quantum,
                        value,
                        optimum,
                        value is not None and abs(value - optimum) <= OPT_TOL,
                        report.proven_optimal,
                        report.capped,
                        gaps.get(config.kind),
                    )
                except Exception as exc:  # recorded, the sweep continues
                    log.exception("instance %s config %s failed", instance_id, config.describe())
                    row = MetricsRow(instance_id, size, config.describe(), 0, 0, None, optimum,
                                     False, False, False, gaps.get(config.kind), error=repr(exc))
                row.runtime = time.perf_counter() - start
                rows.append(row)
                if writer is not None:
                    record = {k: _format(v) for k, v in asdict(row).items() if k in fields}
                    writer.writerow(record)
                    fh.flush()
    finally:
        if fh is not None:
            fh.close()
    return rows


def aggregate(rows: Iterable[MetricsRow]) -> list[dict]:
    """Mean N_eval, P_opt and mean gap per (config, size)."""
    groups: dict[tuple[str, int], list[MetricsRow]] = defaultdict(list)
    for row in rows:
        groups[(row.config, row.size)].append(row)
    summary = []
    for (config, size), members in sorted(groups.items()):
        gaps = [r.gap for r in members if r.gap is not None]
        summary.append(
            {
                "config": config,
                "size": size,
                "samples": len(members),
                "mean_n_eval": float(np.mean([r.n_eval for r in members])),
                "p_opt": float(np.mean([r.optimal_found for r in members])),
                "mean_gap": float(np.mean(gaps)) if gaps else None,
            }
        )
    return summary


def desk_maxcut_plan(configs: Sequence[BnBConfig], samples: int = 20, seed: int = 0, full_scale: bool = False) -> ExperimentPlan:
    sizes = list(range(16, 25, 2)) if full_scale else [8, 10, 12, 14, 16]
    return ExperimentPlan("maxcut-3regular", sizes, 100 if full_scale else samples, configs, seed)


def desk_tsp_plan(configs: Sequence[BnBConfig], samples: int = 30, seed: int = 0, full_scale: bool = False) -> ExperimentPlan:
    return ExperimentPlan("tsp-random", [4], 100 if full_scale else samples, configs, seed)


def gap_table(family: str, sizes: Sequence[int], samples: int, seed: int = 0) -> list[dict]:
    """Root quantumness gap of both QRAC kinds per instance."""
    plan = ExperimentPlan(family, sizes, samples, [], seed)
    table = []
    for instance_id, size, _, problem in plan.instances():
        optimum, _ = brute_force_solve(problem)
        table.append(
            {
                "instance_id": instance_id,
                "size": size,
                "optimum": optimum,
                "gap_31": quantumness_gap(problem, "31", optimum),
                "gap_21": quantumness_gap(problem, "21", optimum),
            }
        )
    return table


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1))
