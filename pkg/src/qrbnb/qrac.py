"""QRAC encodings of Ising models into relaxed Pauli Hamiltonians.

Bits are packed into qubits so that no two coupled spins share a qubit: the
interaction graph is colored greedily, then each color class is packed k
nodes per qubit (k = 3 for the (3,1) code, 2 for the (2,1) code), one Pauli
axis per node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .problem import Assignment, IsingModel

AXES = {"31": ("X", "Y", "Z"), "21": ("X", "Z")}


class InvalidEncodingError(ValueError):
    """Two coupled variables were placed on the same qubit, or a variable has no slot."""


def normalize_kind(kind: str | int | tuple[int, int]) -> str:
    """Accept ``"31"``, ``31``, ``"(3,1)"`` or ``(3, 1)`` and return ``"31"`` / ``"21"``."""
    if isinstance(kind, tuple):
        kind = f"{kind[0]}{kind[1]}"
    key = str(kind).replace("(", "").replace(")", "").replace(",", "").replace(" ", "")
    if key not in AXES:
        raise ValueError(f"unknown QRAC kind {kind!r}; use '31' or '21'")
    return key


def bits_per_qubit(kind: str) -> int:
    return len(AXES[normalize_kind(kind)])


@dataclass(frozen=True)
class InteractionGraph:
    n_nodes: int
    edges: frozenset[tuple[int, int]]

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj


@dataclass(frozen=True)
class Coloring:
    color: tuple[int, ...]
    n_colors: int

    def classes(self) -> list[list[int]]:
        groups: list[list[int]] = [[] for _ in range(self.n_colors)]
        for node, c in enumerate(self.color):
            groups[c].append(node)
        return groups


@dataclass(frozen=True)
class Slot:
    qubit: int
    axis: str


@dataclass(frozen=True)
class QracEncoding:
    kind: str
    slots: tuple[Slot, ...]
    n_qubits: int

    def qubit_members(self) -> list[list[int]]:
        members: list[list[int]] = [[] for _ in range(self.n_qubits)]
        for node, slot in enumerate(self.slots):
            members[slot.qubit].append(node)
        return members


@dataclass(frozen=True)
class PauliTermSum:
    """``constant + sum_t coeff_t * P_t`` with each ``P_t`` a map qubit -> axis."""

    n_qubits: int
    terms: tuple[tuple[float, Mapping[int, str]], ...] = ()
    constant: float = 0.0

    def __post_init__(self) -> None:
        terms = []
        for coeff, string in self.terms:
            string = dict(string)
            for q, axis in string.items():
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"qubit {q} out of range for {self.n_qubits} qubits")
                if axis not in ("X", "Y", "Z"):
                    raise ValueError(f"unknown Pauli axis {axis!r}")
            terms.append((float(coeff), string))
        object.__setattr__(self, "terms", tuple(terms))

    def dump(self) -> str:
        """One line per term: ``coeff axis@qubit [axis@qubit]``, then ``constant``."""
        lines = []
        for coeff, string in self.terms:
            ops = " ".join(f"{axis}@{q}" for q, axis in sorted(string.items()))
            lines.append(f"{coeff:.12g} {ops}")
        lines.append(f"{self.constant:.12g}")
        return "\n".join(lines)


def build_interaction_graph(ising: IsingModel) -> InteractionGraph:
    edges = frozenset((i, j) for (i, j), c in ising.couplings.items() if c != 0.0)
    return InteractionGraph(ising.n_spins, edges)


def greedy_color(graph: InteractionGraph) -> Coloring:
    """Visit nodes in ascending index and give each the smallest color unused by colored neighbours."""
    adj = graph.adjacency()
    color = [-1] * graph.n_nodes
    for node in range(graph.n_nodes):
        taken = {color[nb] for nb in adj[node] if color[nb] >= 0}
        c = 0
        while c in taken:
            c += 1
        color[node] = c
    n_colors = max(color) + 1 if color else 0
    return Coloring(tuple(color), n_colors)


def assign_slots(coloring: Coloring, kind: str) -> QracEncoding:
    """Pack each color class, ascending node order, ``k`` nodes per qubit with axes in fixed order."""
    kind = normalize_kind(kind)
    axes = AXES[kind]
    k = len(axes)
    slots: list[Slot | None] = [None] * len(coloring.color)
    qubit = 0
    for members in coloring.classes():
        for start in range(0, len(members), k):
            for axis, node in zip(axes, members[start:start + k]):
                slots[node] = Slot(qubit, axis)
            qubit += 1
    return QracEncoding(kind, tuple(slots), qubit)


def encode(ising: IsingModel, kind: str) -> QracEncoding:
    return assign_slots(greedy_color(build_interaction_graph(ising)), kind)


def build_relaxed_hamiltonian(ising: IsingModel, encoding: QracEncoding) -> PauliTermSum:
    """``sum k J_ij P_i P_j + sum sqrt(k) h_i P_i + offset``."""
    if len(encoding.slots) != ising.n_spins:
        raise InvalidEncodingError(f"encoding covers {len(encoding.slots)} nodes, model has {ising.n_spins}")
    k = bits_per_qubit(encoding.kind)
    slots = encoding.slots
    terms: list[tuple[float, dict[int, str]]] = []
    for (i, j), c in sorted(ising.couplings.items()):
        if c == 0.0:
            continue
        a, b = slots[i], slots[j]
        if a.qubit == b.qubit:
            raise InvalidEncodingError(f"coupled variables {i} and {j} share qubit {a.qubit}")
        terms.append((k * c, {a.qubit: a.axis, b.qubit: b.axis}))
    root_k = math.sqrt(k)
    for i, h in sorted(ising.fields.items()):
        if h != 0.0:
            terms.append((root_k * h, {slots[i].qubit: slots[i].axis}))
    return PauliTermSum(encoding.n_qubits, tuple(terms), ising.offset)


_AXIS_INDEX = {"X": 0, "Y": 1, "Z": 2}
_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class QracProductState:
    """Product of single-qubit states given by Bloch vectors (rows of ``bloch``, order X, Y, Z).

    Qubits carrying fewer than ``k`` bits are mixed (Bloch vector shorter than 1).
    """

    bloch: np.ndarray = field(repr=False)

    @property
    def n_qubits(self) -> int:
        return self.bloch.shape[0]

    def pauli_expectation(self, string: Mapping[int, str]) -> float:
        value = 1.0
        for q, axis in string.items():
            value *= self.bloch[q, _AXIS_INDEX[axis]]
        return float(value)

    def energy(self, hamiltonian: PauliTermSum) -> float:
        return hamiltonian.constant + sum(c * self.pauli_expectation(s) for c, s in hamiltonian.terms)

    def density_matrix(self) -> np.ndarray:
        """Full ``2**n x 2**n`` density operator; qubit ``q`` is bit ``q`` of the basis index."""
        rho = np.ones((1, 1), dtype=complex)
        for q in range(self.n_qubits):
            x, y, z = self.bloch[q]
            single = 0.5 * (_PAULI["I"] + x * _PAULI["X"] + y * _PAULI["Y"] + z * _PAULI["Z"])
            rho = np.kron(single, rho)
        return rho


def qrac_product_state(encoding: QracEncoding, assignment: Assignment | Sequence[int]) -> QracProductState:
    """Per qubit ``rho = (I + (1/sqrt k) sum_slots (-1)**x_slot P_slot) / 2``."""
    if isinstance(assignment, Assignment):
        assignment = assignment.to_binary().values
    if len(assignment) != len(encoding.slots):
        raise ValueError(f"assignment has {len(assignment)} bits, encoding has {len(encoding.slots)} slots")
    scale = 1.0 / math.sqrt(bits_per_qubit(encoding.kind))
    bloch = np.zeros((encoding.n_qubits, 3))
    for bit, slot in zip(assignment, encoding.slots):
        bloch[slot.qubit, _AXIS_INDEX[slot.axis]] = scale * (1 - 2 * int(bit))
    return QracProductState(bloch)


def pauli_matrix(string: Mapping[int, str], n_qubits: int) -> np.ndarray:
    """Dense matrix of a Pauli string via Kronecker products (reference path for tests)."""
    mat = np.ones((1, 1), dtype=complex)
    for q in range(n_qubits):
        mat = np.kron(_PAULI[string.get(q, "I")], mat)
    return mat


def hamiltonian_matrix_kron(hamiltonian: PauliTermSum) -> np.ndarray:
    dim = 2**hamiltonian.n_qubits
    mat = hamiltonian.constant * np.eye(dim, dtype=complex)
    for coeff, string in hamiltonian.terms:
        mat += coeff * pauli_matrix(string, hamiltonian.n_qubits)
    return mat
