"""Branch-and-bound over binary variables with quantum-relaxation bounds and Pauli rounding."""

from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import MutableMapping, Sequence

import numpy as np

from .problem import (
    Assignment,
    ConstrainedQuadraticProblem,
    InfeasibleProblemError,
    LinearConstraint,
    Subproblem,
    evaluate,
    is_feasible,
)
from .qrac import normalize_kind
from .relaxation import EXACT, Backend, RelaxationResult, relaxation_objective, solve_relaxation

BOUND_TOL = 1e-9
DEFAULT_EVAL_CAP = 2000


class Search(str, Enum):
    DFS = "dfs"
    BRFS = "brfs"
    BFS = "bfs"


class Selection(str, Enum):
    RANDOM = "random"
    LEAST = "least"
    MOST = "most"


class Branching(str, Enum):
    BINARY = "binary"
    ONEHOT = "onehot"


@dataclass(frozen=True)
class BnBConfig:
    kind: str = "21"
    backend: Backend = EXACT
    search: Search = Search.BFS
    selection: Selection = Selection.LEAST
    branching: Branching = Branching.BINARY
    eval_cap: int | None = DEFAULT_EVAL_CAP  # None: run until the queue empties
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        object.__setattr__(self, "search", Search(self.search))
        object.__setattr__(self, "selection", Selection(self.selection))
        object.__setattr__(self, "branching", Branching(self.branching))
        if self.eval_cap is not None and self.eval_cap < 1:
            raise ValueError("eval_cap must be at least 1")

    def describe(self) -> str:
        return (
            f"{self.kind}/{self.backend.describe()}/{self.search.value}/"
            f"{self.selection.value}/{self.branching.value}"
        )


@dataclass(frozen=True)
class BnBNode:
    sub: Subproblem
    priority_key: float
    insertion_seq: int


@dataclass(frozen=True)
class Incumbent:
    value: float
    assignment: Assignment
    found_at_eval: int


@dataclass(frozen=True)
class NodeRecord:
    eval_index: int
    depth: int
    bound: float
    outcome: str  # "branched", "pruned-bound", "leaf"
    selected: int | None = None


@dataclass
class SolveReport:
    incumbent: Incumbent | None
    n_eval: int
    n_eval_quantum: int
    proven_optimal: bool
    capped: bool
    node_trace: list[NodeRecord] = field(default_factory=list)
    incumbent_history: list[Incumbent] = field(default_factory=list)
    pruned_infeasible: int = 0

    def to_json(self) -> dict:
        inc = self.incumbent
        return {
            "value": None if inc is None else inc.value,
            "assignment": None if inc is None else list(inc.assignment.values),
            "found_at_eval": None if inc is None else inc.found_at_eval,
            "n_eval": self.n_eval,
            "n_eval_quantum": self.n_eval_quantum,
            "proven_optimal": self.proven_optimal,
            "capped": self.capped,
            "pruned_infeasible": self.pruned_infeasible,
            "trace": [
                {
                    "eval": r.eval_index,
                    "depth": r.depth,
                    "bound": None if math.isinf(r.bound) else r.bound,
                    "outcome": r.outcome,
                    "selected": r.selected,
                }
                for r in self.node_trace
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


class NodeQueue:
    """Open subproblems ordered by the tree-search strategy."""

    def __init__(self, search: Search):
        self.search = Search(search)
        self._items: deque[BnBNode] | list = deque() if self.search is not Search.BFS else []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, sub: Subproblem, priority_key: float) -> BnBNode:
        node = BnBNode(sub, priority_key, self._seq)
        self._seq += 1
        if self.search is Search.BFS:
            heapq.heappush(self._items, (priority_key, node.insertion_seq, node))
        else:
            self._items.append(node)
        return node

    def pop(self) -> BnBNode:
        if not self._items:
            raise IndexError("pop from an empty node queue")
        if self.search is Search.DFS:
            return self._items.pop()
        if self.search is Search.BRFS:
            return self._items.popleft()
        return heapq.heappop(self._items)[2]


def pop_node(queue: NodeQueue) -> BnBNode:
    return queue.pop()


def pauli_round(result: RelaxationResult, sub: Subproblem) -> Assignment:
    """Bit 0 where ``<P_i> >= 0``, bit 1 where negative; fixed bits are kept."""
    x = [0] * sub.base.n_vars
    for i, v in sub.fixed.items():
        x[i] = v
    for i in sub.unfixed:
        x[i] = 0 if result.expectations[i] >= 0 else 1
    return Assignment(tuple(x))


def _fractional_key(value: float) -> float:
    # rounding keeps ties between symmetric expectations independent of last-digit noise
    return round(abs(value), 9)


def select_variable(
    result: RelaxationResult,
    sub: Subproblem,
    selection: Selection,
    rng: np.random.Generator | None = None,
) -> int:
    """Pick the next variable to fix; ties go to the lowest index."""
    free = sub.unfixed
    if not free:
        raise ValueError("no unfixed variables to select")
    selection = Selection(selection)
    if selection is Selection.RANDOM:
        if rng is None:
            raise ValueError("random selection needs a generator")
        return free[int(rng.integers(len(free)))]
    keys = [_fractional_key(result.expectations[i]) for i in free]
    if selection is Selection.MOST:
        target = min(keys)
    else:
        target = max(keys)
    return free[keys.index(target)]


def _onehot_group(sub: Subproblem, index: int, problem: ConstrainedQuadraticProblem) -> list[int] | None:
    """Free members of the best one-hot constraint through ``index`` with no member fixed to 1."""
    best: list[int] | None = None
    for con in problem.constraints:
        if not con.is_onehot or index not in con.coeffs:
            continue
        if any(sub.fixed.get(i) == 1 for i in con.coeffs):
            continue
        free = sorted(i for i in con.coeffs if i not in sub.fixed)
        if best is None or len(free) > len(best):
            best = free
    return best


def branch(
    sub: Subproblem, index: int, branching: Branching, problem: ConstrainedQuadraticProblem
) -> list[Subproblem]:
    if index in sub.fixed:
        raise ValueError(f"x{index} is already fixed")
    if Branching(branching) is Branching.ONEHOT:
        group = _onehot_group(sub, index, problem)
        if group is not None:
            return [sub.with_fixed({i: int(i == k) for i in group}) for k in group]
    return [sub.with_fixed({index: 0}), sub.with_fixed({index: 1})]


class Feasibility(str, Enum):
    POSSIBLE = "feasible-possible"
    INFEASIBLE = "infeasible"
    SATISFIED = "all-satisfied"


@dataclass(frozen=True)
class FeasibilityReport:
    status: Feasibility
    per_constraint: tuple[Feasibility, ...]


def constraint_status(con: LinearConstraint, fixed: dict[int, int]) -> Feasibility:
    """Interval test of ``sum A_i x_i (=|<=) b`` over the free variables given the fixed ones."""
    residual = con.rhs
    sup = inf = 0.0
    for i, a in con.coeffs.items():
        if i in fixed:
            residual -= a * fixed[i]
        elif a > 0:
            sup += a
        else:
            inf += a
    tol = BOUND_TOL
    if con.kind == "equality":
        if residual < inf - tol or residual > sup + tol:
            return Feasibility.INFEASIBLE
        if sup - inf <= tol:
            return Feasibility.SATISFIED
        return Feasibility.POSSIBLE
    if residual < inf - tol:
        return Feasibility.INFEASIBLE
    if sup <= residual + tol:
        return Feasibility.SATISFIED
    return Feasibility.POSSIBLE


def feasibility_check(problem: ConstrainedQuadraticProblem, sub: Subproblem) -> FeasibilityReport:
    per = tuple(constraint_status(con, sub.fixed) for con in problem.constraints)
    if Feasibility.INFEASIBLE in per:
        status = Feasibility.INFEASIBLE
    elif all(p is Feasibility.SATISFIED for p in per):
        status = Feasibility.SATISFIED
    else:
        status = Feasibility.POSSIBLE
    return FeasibilityReport(status, per)


RelaxationCache = MutableMapping[frozenset, RelaxationResult]


def solve(
    problem: ConstrainedQuadraticProblem,
    config: BnBConfig = BnBConfig(),
    penalty_weights: dict[str, float] | None = None,
    cache: RelaxationCache | None = None,
) -> SolveReport:
    """Run branch-and-bound and return the best feasible assignment found.

    ``cache`` memoizes exact relaxations by fixed assignment; share one only
    between runs on the same problem, penalty weights and QRAC kind.
    """
    if config.branching is Branching.ONEHOT and not problem.onehot_constraints:
        raise ValueError("onehot branching needs at least one onehot-tagged constraint")
    objective = relaxation_objective(problem, penalty_weights)
    select_rng = np.random.default_rng(config.seed)
    vqe_rng = np.random.default_rng(config.backend.seed)
    use_cache = cache is not None and config.backend.is_exact

    queue = NodeQueue(config.search)
    root = Subproblem(objective)
    if feasibility_check(problem, root).status is not Feasibility.INFEASIBLE:
        queue.push(root, -math.inf)

    z_inc = math.inf
    incumbent: Incumbent | None = None
    history: list[Incumbent] = []
    trace: list[NodeRecord] = []
    n_eval = n_quantum = pruned_infeasible = 0

    def offer(x: Assignment) -> None:
        nonlocal z_inc, incumbent
        if not is_feasible(problem, x):
            return
        value = evaluate(problem, x)
        if value < z_inc - BOUND_TOL:
            z_inc = value
            incumbent = Incumbent(value, x, n_eval)
            history.append(incumbent)

    while queue:
        if config.eval_cap is not None and n_eval >= config.eval_cap:
            break
        node = queue.pop()
        sub = node.sub
        if sub.is_leaf:
            x = Assignment(tuple(sub.fixed[i] for i in range(problem.n_vars)))
            offer(x)
            trace.append(NodeRecord(n_eval, sub.depth, evaluate(objective, x), "leaf"))
            continue

        key = sub.key()
        result = cache.get(key) if use_cache else None
        if result is None:
            result = solve_relaxation(sub, config.kind, config.backend, feasibility=problem, rng=vqe_rng)
            if use_cache:
                cache[key] = result
        n_eval += 1
        if result.method_used != "brute-force":
            n_quantum += 1

        offer(pauli_round(result, sub))

        if z_inc <= result.bound + BOUND_TOL:
            trace.append(NodeRecord(n_eval, sub.depth, result.bound, "pruned-bound"))
            continue

        index = select_variable(result, sub, config.selection, select_rng)
        trace.append(NodeRecord(n_eval, sub.depth, result.bound, "branched", index))
        for child in branch(sub, index, config.branching, problem):
            if feasibility_check(problem, child).status is Feasibility.INFEASIBLE:
                pruned_infeasible += 1
                continue
            queue.push(child, result.bound)

    capped = len(queue) > 0
    if incumbent is None and not capped:
        raise InfeasibleProblemError("branch-and-bound exhausted the tree without a feasible assignment")
    return SolveReport(
        incumbent=incumbent,
        n_eval=n_eval,
        n_eval_quantum=n_quantum,
        proven_optimal=config.backend.is_exact and not capped and incumbent is not None,
        capped=capped,
        node_trace=trace,
        incumbent_history=history,
        pruned_infeasible=pruned_infeasible,
    )


def strategy_grid(
    kinds: Sequence[str] = ("31", "21"),
    branchings: Sequence[Branching] = (Branching.BINARY,),
    backend: Backend = EXACT,
    seed: int = 0,
    eval_cap: int | None = DEFAULT_EVAL_CAP,
) -> list[BnBConfig]:
    """Every search x selection x branching combination for each QRAC kind."""
    return [
        BnBConfig(kind, backend, search, selection, branching, eval_cap=eval_cap, seed=seed)
        for kind in kinds
        for search in Search
        for selection in Selection
        for branching in branchings
    ]
