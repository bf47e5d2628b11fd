"""Quantum-relaxation lower bounds for subproblems."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import qrac
from .problem import (
    ConstrainedQuadraticProblem,
    Subproblem,
    brute_force_solve,
    enumerate_objective,
    evaluate,
    fix_variables,
    qubo_to_ising,
    apply_penalty,
)
from .statevector import CompiledHamiltonian, exact_ground, single_qubit_expectations, vqe_ground

BRUTE_FORCE_BELOW = 3
ZERO_SNAP = 1e-9

_AXIS_COLUMN = {"X": 0, "Y": 1, "Z": 2}


@dataclass(frozen=True)
class Backend:
    """``name="exact"`` for diagonalization, ``"vqe"`` for NFT-optimized VQE with ``layers``."""

    name: str = "exact"
    layers: int = 1
    seed: int = 0
    max_sweeps: int = 50
    tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.name not in ("exact", "vqe"):
            raise ValueError(f"unknown backend {self.name!r}")
        if self.layers < 0:
            raise ValueError("layers must be non-negative")

    @property
    def is_exact(self) -> bool:
        return self.name == "exact"

    def describe(self) -> str:
        return "exact" if self.is_exact else f"vqe-k{self.layers}"


EXACT = Backend("exact")


@dataclass(frozen=True)
class RelaxationResult:
    bound: float
    expectations: Mapping[int, float]
    method_used: str
    n_qubits: int
    is_exact_bound: bool
    hamiltonian: qrac.PauliTermSum | None = field(default=None, repr=False, compare=False)


def _brute_force_completion(
    sub: Subproblem, feasibility: ConstrainedQuadraticProblem | None
) -> tuple[float, dict[int, float]]:
    """Best completion of ``sub`` (restricted to feasible ones when ``feasibility`` has constraints)."""
    free = sub.unfixed
    best_value, best_x = np.inf, None
    reduced = fix_variables(sub)
    bits, values, _ = enumerate_objective(reduced.problem)
    values = values + reduced.offset
    for row, value in zip(bits, values):
        if value >= best_value:
            continue
        if feasibility is not None and feasibility.constraints:
            x = [0] * sub.base.n_vars
            for i, v in sub.fixed.items():
                x[i] = v
            for i, v in zip(free, row):
                x[i] = int(v)
            if not all(con.satisfied(x) for con in feasibility.constraints):
                continue
        best_value, best_x = float(value), row
    if best_x is None:
        return np.inf, {i: 0.0 for i in free}
    return best_value, {i: 1.0 - 2.0 * int(v) for i, v in zip(free, best_x)}


def solve_relaxation(
    sub: Subproblem,
    kind: str = "21",
    backend: Backend = EXACT,
    feasibility: ConstrainedQuadraticProblem | None = None,
    rng: np.random.Generator | None = None,
    brute_force_below: int = BRUTE_FORCE_BELOW,
) -> RelaxationResult:
    """Lower-bound ``min`` of ``sub.base``'s objective over completions of ``sub.fixed``.

    ``sub.base`` must be unconstrained (penalties already folded). With fewer
    than three free variables the completions are enumerated instead; the
    enumeration is restricted to assignments feasible for ``feasibility`` when
    given; ``brute_force_below=0`` forces the quantum path. Expectations are ``Tr[P_i rho]`` per free original variable, with
    values within ``1e-9`` of zero snapped to 0.
    """
    kind = qrac.normalize_kind(kind)
    if sub.is_leaf:
        x = [sub.fixed[i] for i in range(sub.base.n_vars)]
        return RelaxationResult(evaluate(sub.base, x), {}, "brute-force", 0, True)
    if len(sub.unfixed) < brute_force_below:
        bound, expectations = _brute_force_completion(sub, feasibility)
        return RelaxationResult(bound, expectations, "brute-force", 0, True)

    reduced = fix_variables(sub)
    ising = qubo_to_ising(reduced.problem)
    encoding = qrac.encode(ising, kind)
    hamiltonian = qrac.build_relaxed_hamiltonian(ising, encoding)
    compiled = CompiledHamiltonian(hamiltonian)
    if backend.is_exact:
        ground = exact_ground(compiled)
        energy, state = ground.energy, ground.state
    else:
        result = vqe_ground(
            compiled,
            backend.layers,
            rng if rng is not None else backend.seed,
            max_sweeps=backend.max_sweeps,
            tol=backend.tol,
        )
        energy, state = result.energy, result.state
    local = single_qubit_expectations(state.amplitudes, encoding.n_qubits)
    expectations = {}
    for r, slot in enumerate(encoding.slots):
        value = float(local[slot.qubit, _AXIS_COLUMN[slot.axis]])
        expectations[reduced.index_map[r]] = 0.0 if abs(value) < ZERO_SNAP else value
    return RelaxationResult(
        energy + reduced.offset,
        expectations,
        backend.name,
        encoding.n_qubits,
        backend.is_exact,
        hamiltonian,
    )


class UndefinedGapError(ZeroDivisionError):
    pass


def root_relaxation(problem: ConstrainedQuadraticProblem, kind: str) -> RelaxationResult:
    """Exact relaxation of the whole problem, never short-circuited by enumeration."""
    return solve_relaxation(Subproblem(relaxation_objective(problem)), kind, EXACT, brute_force_below=0)


def quantumness_gap(problem: ConstrainedQuadraticProblem, kind: str, optimum: float | None = None) -> float:
    """``z_QR / z*``: exact root relaxation value over the true optimum (brute force unless given)."""
    if optimum is None:
        optimum, _ = brute_force_solve(problem)
    if optimum == 0:
        raise UndefinedGapError("quantumness gap undefined for a zero optimum")
    return root_relaxation(problem, kind).bound / optimum


def _equalities(problem: ConstrainedQuadraticProblem) -> ConstrainedQuadraticProblem:
    eqs = tuple(c for c in problem.constraints if c.kind == "equality")
    return ConstrainedQuadraticProblem(problem.n_vars, problem.quadratic, eqs, problem.constant)


def relaxation_objective(
    problem: ConstrainedQuadraticProblem, weights: Mapping[str, float] | None = None
) -> ConstrainedQuadraticProblem:
    """Objective handed to the relaxation: equalities folded as penalties, inequalities left to feasibility checks."""
    return apply_penalty(_equalities(problem), weights)
