"""Binary quadratic problems, penalty folding, variable fixing and a brute-force oracle."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

FEASIBILITY_TOL = 1e-9
BRUTE_FORCE_LIMIT = 26


class InfeasibleProblemError(ValueError):
    """No assignment satisfies the constraints."""


class UnsupportedFoldError(ValueError):
    """Raised when asked to fold a constraint kind that has no penalty form."""


@dataclass(frozen=True)
class LinearConstraint:
    """``sum_i coeffs[i] * x_i (== | <=) rhs``.

    A tag starting with ``"onehot"`` marks the constraint as usable by the
    one-hot branching rule, which requires unit coefficients and ``rhs == 1``.
    """

    coeffs: Mapping[int, float]
    rhs: float
    kind: str = "equality"
    tag: str | None = None

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise ValueError("constraint needs at least one coefficient")
        if self.kind not in ("equality", "less-equal"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        object.__setattr__(self, "coeffs", {int(i): float(a) for i, a in self.coeffs.items()})
        if self.is_onehot:
            if self.kind != "equality" or self.rhs != 1 or any(a != 1.0 for a in self.coeffs.values()):
                raise ValueError(f"onehot tag {self.tag!r} on a constraint that is not sum(x) == 1")

    @property
    def is_onehot(self) -> bool:
        return self.tag is not None and self.tag.startswith("onehot")

    def activity(self, x: Sequence[int]) -> float:
        return sum(a * x[i] for i, a in self.coeffs.items())

    def satisfied(self, x: Sequence[int], tol: float = FEASIBILITY_TOL) -> bool:
        lhs = self.activity(x)
        if self.kind == "equality":
            return abs(lhs - self.rhs) <= tol
        return lhs <= self.rhs + tol


@dataclass(frozen=True)
class ConstrainedQuadraticProblem:
    """Minimize ``constant + sum_{i<=j} Q_ij x_i x_j`` over binary ``x`` subject to linear constraints.

    Diagonal entries ``Q_ii`` act as linear coefficients since ``x_i**2 == x_i``.
    Keys given with ``i > j`` are folded onto ``(j, i)``.
    """

    n_vars: int
    quadratic: Mapping[tuple[int, int], float] = field(default_factory=dict)
    constraints: tuple[LinearConstraint, ...] = ()
    constant: float = 0.0

    def __post_init__(self) -> None:
        if self.n_vars < 0:
            raise ValueError("n_vars must be non-negative")
        upper: dict[tuple[int, int], float] = {}
        for (i, j), c in self.quadratic.items():
            i, j = int(i), int(j)
            if not (0 <= i < self.n_vars and 0 <= j < self.n_vars):
                raise ValueError(f"quadratic key ({i}, {j}) out of range [0, {self.n_vars})")
            key = (i, j) if i <= j else (j, i)
            upper[key] = upper.get(key, 0.0) + float(c)
        object.__setattr__(self, "quadratic", upper)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for con in self.constraints:
            for i in con.coeffs:
                if not 0 <= i < self.n_vars:
                    raise ValueError(f"constraint index {i} out of range [0, {self.n_vars})")

    @property
    def onehot_constraints(self) -> list[LinearConstraint]:
        return [c for c in self.constraints if c.is_onehot]

    def matrix(self) -> np.ndarray:
        """Dense upper-triangular Q."""
        q = np.zeros((self.n_vars, self.n_vars))
        for (i, j), c in self.quadratic.items():
            q[i, j] += c
        return q

    def without_constraints(self) -> ConstrainedQuadraticProblem:
        return ConstrainedQuadraticProblem(self.n_vars, self.quadratic, (), self.constant)

    def to_json(self) -> dict:
        return {
            "n_vars": self.n_vars,
            "quadratic": [[i, j, c] for (i, j), c in sorted(self.quadratic.items())],
            "constant": self.constant,
            "constraints": [
                {
                    "coeffs": [[i, a] for i, a in sorted(con.coeffs.items())],
                    "rhs": con.rhs,
                    "kind": con.kind,
                    "tag": con.tag,
                }
                for con in self.constraints
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> ConstrainedQuadraticProblem:
        quad: dict[tuple[int, int], float] = {}
        for i, j, c in data.get("quadratic", []):
            key = (min(int(i), int(j)), max(int(i), int(j)))
            quad[key] = quad.get(key, 0.0) + float(c)
        constraints = tuple(
            LinearConstraint(
                coeffs={int(i): float(a) for i, a in con["coeffs"]},
                rhs=float(con["rhs"]),
                kind=con.get("kind", "equality"),
                tag=con.get("tag"),
            )
            for con in data.get("constraints", [])
        )
        return cls(int(data["n_vars"]), quad, constraints, float(data.get("constant", 0.0)))


@dataclass(frozen=True)
class IsingModel:
    """Energy ``offset + sum_{i<j} J_ij s_i s_j + sum_i h_i s_i`` over spins ``s_i = +-1``."""

    n_spins: int
    couplings: Mapping[tuple[int, int], float] = field(default_factory=dict)
    fields: Mapping[int, float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self) -> None:
        couplings: dict[tuple[int, int], float] = {}
        for (i, j), c in self.couplings.items():
            if i == j:
                raise ValueError("Ising couplings must join distinct spins")
            key = (i, j) if i < j else (j, i)
            couplings[key] = couplings.get(key, 0.0) + float(c)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "fields", {int(i): float(h) for i, h in self.fields.items()})

    def energy(self, spins: Sequence[int]) -> float:
        if len(spins) != self.n_spins:
            raise ValueError(f"expected {self.n_spins} spins, got {len(spins)}")
        e = self.offset
        for (i, j), c in self.couplings.items():
            e += c * spins[i] * spins[j]
        for i, h in self.fields.items():
            e += h * spins[i]
        return e


@dataclass(frozen=True)
class Assignment:
    """Variable values, either bits (``space="binary"``) or spins (``space="spin"``).

    Spins follow ``s_i = (-1)**x_i``: bit 0 is spin +1.
    """

    values: tuple[int, ...]
    space: str = "binary"

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        allowed = {0, 1} if self.space == "binary" else {-1, 1}
        if self.space not in ("binary", "spin"):
            raise ValueError(f"unknown space {self.space!r}")
        if not set(self.values) <= allowed:
            raise ValueError(f"values {self.values} not in {self.space} space")

    def __len__(self) -> int:
        return len(self.values)

    def to_spin(self) -> Assignment:
        if self.space == "spin":
            return self
        return Assignment(tuple(1 - 2 * v for v in self.values), "spin")

    def to_binary(self) -> Assignment:
        if self.space == "binary":
            return self
        return Assignment(tuple((1 - s) // 2 for s in self.values), "binary")


@dataclass(frozen=True)
class Subproblem:
    """The base problem with a partial assignment ``fixed`` (index -> bit)."""

    base: ConstrainedQuadraticProblem
    fixed: Mapping[int, int] = field(default_factory=dict)
    depth: int = 0

    def __post_init__(self) -> None:
        fixed = {int(i): int(v) for i, v in self.fixed.items()}
        for i, v in fixed.items():
            if not 0 <= i < self.base.n_vars:
                raise ValueError(f"fixed index {i} out of range")
            if v not in (0, 1):
                raise ValueError(f"fixed value for x{i} must be 0 or 1, got {v}")
        object.__setattr__(self, "fixed", fixed)

    @property
    def unfixed(self) -> list[int]:
        return [i for i in range(self.base.n_vars) if i not in self.fixed]

    @property
    def is_leaf(self) -> bool:
        return len(self.fixed) == self.base.n_vars

    def key(self) -> frozenset:
        return frozenset(self.fixed.items())

    def with_fixed(self, extra: Mapping[int, int]) -> Subproblem:
        for i in extra:
            if i in self.fixed:
                raise ValueError(f"x{i} is already fixed")
        return Subproblem(self.base, {**self.fixed, **extra}, self.depth + 1)


@dataclass(frozen=True)
class ReducedProblem:
    """Objective over the unfixed variables; ``index_map[r]`` is the original index of reduced var ``r``."""

    problem: ConstrainedQuadraticProblem
    index_map: tuple[int, ...]
    offset: float


def apply_penalty(
    problem: ConstrainedQuadraticProblem, weights: Mapping[str, float] | None = None
) -> ConstrainedQuadraticProblem:
    """Fold every equality constraint into the objective as ``w * (sum_i A_i x_i - b)**2``.

    ``weights`` maps constraint tags to penalty weights; untagged or unlisted
    constraints get weight 1. The returned problem carries no constraints.
    """
    weights = weights or {}
    quad = dict(problem.quadratic)
    constant = problem.constant
    for con in problem.constraints:
        if con.kind != "equality":
            raise UnsupportedFoldError(f"cannot fold {con.kind} constraint {con.tag!r}")
        w = weights.get(con.tag, 1.0) if con.tag is not None else 1.0
        items = sorted(con.coeffs.items())
        # (sum a_i x_i - b)^2 = sum a_i^2 x_i + 2 sum_{i<j} a_i a_j x_i x_j - 2b sum a_i x_i + b^2
        for pos, (i, a) in enumerate(items):
            quad[(i, i)] = quad.get((i, i), 0.0) + w * (a * a - 2.0 * con.rhs * a)
            for j, b in items[pos + 1:]:
                quad[(i, j)] = quad.get((i, j), 0.0) + 2.0 * w * a * b
        constant += w * con.rhs**2
    return ConstrainedQuadraticProblem(problem.n_vars, quad, (), constant)


def qubo_to_ising(problem: ConstrainedQuadraticProblem) -> IsingModel:
    """Substitute ``x_i = (1 - s_i) / 2``; exact for every assignment."""
    if problem.constraints:
        raise ValueError("fold constraints with apply_penalty before converting to Ising")
    couplings: dict[tuple[int, int], float] = {}
    fields: dict[int, float] = {}
    offset = problem.constant
    for (i, j), c in problem.quadratic.items():
        if c == 0.0:
            continue
        if i == j:
            fields[i] = fields.get(i, 0.0) - c / 2.0
            offset += c / 2.0
        else:
            couplings[(i, j)] = couplings.get((i, j), 0.0) + c / 4.0
            fields[i] = fields.get(i, 0.0) - c / 4.0
            fields[j] = fields.get(j, 0.0) - c / 4.0
            offset += c / 4.0
    couplings = {k: v for k, v in couplings.items() if v != 0.0}
    fields = {k: v for k, v in fields.items() if v != 0.0}
    return IsingModel(problem.n_vars, couplings, fields, offset)


def fix_variables(sub: Subproblem) -> ReducedProblem:
    """Substitute the fixed bits of ``sub`` into its objective.

    Quadratic terms with exactly one fixed endpoint become linear terms of the
    other variable. Constraints are dropped: the reduced problem is the
    relaxation target, feasibility is tracked on the original.
    """
    base = sub.base
    fixed = sub.fixed
    index_map = tuple(i for i in range(base.n_vars) if i not in fixed)
    reduced_index = {orig: r for r, orig in enumerate(index_map)}
    quad: dict[tuple[int, int], float] = {}
    offset = base.constant
    for (i, j), c in base.quadratic.items():
        fi, fj = i in fixed, j in fixed
        if fi and fj:
            offset += c * fixed[i] * fixed[j]
        elif fi or fj:
            value, free = (fixed[i], j) if fi else (fixed[j], i)
            if value:
                r = reduced_index[free]
                quad[(r, r)] = quad.get((r, r), 0.0) + c
        else:
            key = (reduced_index[i], reduced_index[j])
            quad[key] = quad.get(key, 0.0) + c
    return ReducedProblem(ConstrainedQuadraticProblem(len(index_map), quad), index_map, offset)


def _values(problem: ConstrainedQuadraticProblem, assignment: Assignment | Sequence[int]) -> tuple[int, ...]:
    if isinstance(assignment, Assignment):
        assignment = assignment.to_binary().values
    values = tuple(int(v) for v in assignment)
    if len(values) != problem.n_vars:
        raise ValueError(f"assignment has {len(values)} entries, problem has {problem.n_vars} variables")
    return values


def evaluate(problem: ConstrainedQuadraticProblem, assignment: Assignment | Sequence[int]) -> float:
    """Objective value; ``fsum`` makes it independent of term order, so equivalent assignments tie exactly."""
    x = _values(problem, assignment)
    return math.fsum([problem.constant] + [c for (i, j), c in problem.quadratic.items() if x[i] and x[j]])


def is_feasible(problem: ConstrainedQuadraticProblem, assignment: Assignment | Sequence[int]) -> bool:
    x = _values(problem, assignment)
    return all(con.satisfied(x) for con in problem.constraints)


def _bit_matrix(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Assignments ``start..stop-1`` as rows; row for code ``k`` is ``k`` in binary with x_0 most significant."""
    stop = 2**n if stop is None else stop
    codes = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(np.int8)


def enumerate_objective(
    problem: ConstrainedQuadraticProblem, start: int = 0, stop: int | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Objective and feasibility of assignments ``start..stop-1`` in lexicographic order.

    Returns ``(bits, values, feasible)``.
    """
    bits = _bit_matrix(problem.n_vars, start, stop)
    xf = bits.astype(float)
    values = np.full(len(bits), problem.constant)
    for (i, j), c in problem.quadratic.items():
        values += c * (xf[:, i] if i == j else xf[:, i] * xf[:, j])
    feasible = np.ones(len(bits), dtype=bool)
    for con in problem.constraints:
        lhs = np.zeros(len(bits))
        for i, a in con.coeffs.items():
            lhs += a * xf[:, i]
        if con.kind == "equality":
            feasible &= np.abs(lhs - con.rhs) <= FEASIBILITY_TOL
        else:
            feasible &= lhs <= con.rhs + FEASIBILITY_TOL
    return bits, values, feasible


def brute_force_solve(problem: ConstrainedQuadraticProblem, chunk: int = 1 << 16) -> tuple[float, Assignment]:
    """Exact optimum by enumeration; ties go to the assignment with the smallest integer value."""
    if problem.n_vars > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} variables, got {problem.n_vars}")
    best_value, best_bits = np.inf, None
    total = 2**problem.n_vars
    for start in range(0, total, chunk):
        bits, values, feasible = enumerate_objective(problem, start, min(start + chunk, total))
        if not feasible.any():
            continue
        masked = np.where(feasible, values, np.inf)
        k = int(np.argmin(masked))  # first minimum is the lexicographically smallest
        if masked[k] < best_value:
            best_value, best_bits = float(masked[k]), bits[k]
    if best_bits is None:
        raise InfeasibleProblemError("no feasible assignment")
    best = Assignment(tuple(int(b) for b in best_bits))
    return evaluate(problem, best), best


def maxcut_to_problem(edges: Iterable[tuple[int, int]], n_nodes: int | None = None) -> ConstrainedQuadraticProblem:
    """Sign-flipped MaxCut: minimize ``-(1/2) sum_E (1 - s_i s_j)``.

    Each edge contributes ``-x_i - x_j + 2 x_i x_j``, which is -1 when cut.
    """
    edges = [(int(u), int(v)) for u, v in edges]
    seen = set()
    for u, v in edges:
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)
    if n_nodes is None:
        n_nodes = 1 + max((max(e) for e in edges), default=-1)
    quad: dict[tuple[int, int], float] = {}
    for u, v in seen:
        quad[(u, u)] = quad.get((u, u), 0.0) - 1.0
        quad[(v, v)] = quad.get((v, v), 0.0) - 1.0
        quad[(u, v)] = quad.get((u, v), 0.0) + 2.0
    return ConstrainedQuadraticProblem(n_nodes, quad)


def tsp_var(city: int, time: int, n_cities: int) -> int:
    """Index of x_{city,time}."""
    return city * n_cities + time


def tsp_to_problem(distances: Sequence[Sequence[float]] | np.ndarray) -> ConstrainedQuadraticProblem:
    """Position-based TSP: ``x_{i,t} = 1`` when city ``i`` is visited at step ``t``.

    Objective ``sum_t sum_{i,j} d_ij x_{i,t} x_{j,t+1 mod N}`` with one-hot
    constraints per time step (tags ``onehot-time-t``) then per city
    (``onehot-city-i``).
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {d.shape}")
    n = d.shape[0]
    if n < 2:
        raise ValueError("need at least two cities")
    if not np.allclose(d, d.T) or (d < 0).any() or np.any(np.diag(d) != 0):
        raise ValueError("distance matrix must be symmetric, nonnegative, with zero diagonal")
    quad: dict[tuple[int, int], float] = {}
    for t in range(n):
        nxt = (t + 1) % n
        for i in range(n):
            for j in range(n):
                if i == j or d[i, j] == 0.0:
                    continue
                a, b = tsp_var(i, t, n), tsp_var(j, nxt, n)
                key = (min(a, b), max(a, b))
                quad[key] = quad.get(key, 0.0) + float(d[i, j])
    constraints = [
        LinearConstraint({tsp_var(i, t, n): 1.0 for i in range(n)}, 1.0, "equality", f"onehot-time-{t}")
        for t in range(n)
    ] + [
        LinearConstraint({tsp_var(i, t, n): 1.0 for t in range(n)}, 1.0, "equality", f"onehot-city-{i}")
        for i in range(n)
    ]
    return ConstrainedQuadraticProblem(n * n, quad, tuple(constraints))


def tour_from_assignment(assignment: Assignment | Sequence[int], n_cities: int) -> list[int]:
    """City visited at each step; raises if the assignment is not a permutation matrix."""
    x = assignment.to_binary().values if isinstance(assignment, Assignment) else tuple(assignment)
    tour = []
    for t in range(n_cities):
        cities = [i for i in range(n_cities) if x[tsp_var(i, t, n_cities)]]
        if len(cities) != 1:
            raise ValueError(f"step {t} visits {len(cities)} cities")
        tour.append(cities[0])
    if sorted(tour) != list(range(n_cities)):
        raise ValueError("assignment revisits a city")
    return tour


def load_problem(path: str | Path) -> ConstrainedQuadraticProblem:
    return ConstrainedQuadraticProblem.from_json(json.loads(Path(path).read_text()))


def save_problem(problem: ConstrainedQuadraticProblem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(problem.to_json(), indent=1))


def load_edge_list(path: str | Path) -> list[tuple[int, int]]:
    edges = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            u, v = line.split()[:2]
            edges.append((int(u), int(v)))
    return edges


def save_edge_list(edges: Iterable[tuple[int, int]], path: str | Path) -> None:
    Path(path).write_text("".join(f"{u} {v}\n" for u, v in edges))


def load_coordinates(path: str | Path) -> np.ndarray:
    coords = np.asarray(json.loads(Path(path).read_text()), dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError("TSP file must be a JSON list of [x, y] pairs")
    return coords


def distance_matrix(coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))
