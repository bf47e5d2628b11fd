import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrbnb import statevector
from qrbnb.experiments import gen_regular_graph
from qrbnb.problem import maxcut_to_problem, qubo_to_ising
from qrbnb.qrac import PauliTermSum, build_relaxed_hamiltonian, encode, hamiltonian_matrix_kron, pauli_matrix
from qrbnb.statevector import (
    AnsatzSpec,
    CompiledHamiltonian,
    QuantumState,
    ansatz_state,
    apply_pauli_string,
    exact_ground,
    expectation,
    nft_optimize,
    single_qubit_expectations,
    vqe_ground,
)

AXES = ("X", "Y", "Z")


def random_hamiltonian(n, seed, n_terms=8):
    rng = np.random.default_rng(seed)
    terms = []
    for _ in range(n_terms):
        width = int(rng.integers(1, min(2, n) + 1))
        qubits = rng.choice(n, width, replace=False)
        terms.append((float(rng.normal()), {int(q): AXES[int(rng.integers(3))] for q in qubits}))
    return PauliTermSum(n, tuple(terms), float(rng.normal()))


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return QuantumState(v / np.linalg.norm(v))


def test_pauli_action_basis():
    one = QuantumState.basis(1, 1)
    assert np.allclose(apply_pauli_string(QuantumState.zero(1), {0: "X"}).amplitudes, one.amplitudes)
    assert np.allclose(apply_pauli_string(one, {0: "Z"}).amplitudes, -one.amplitudes)
    assert np.allclose(apply_pauli_string(QuantumState.zero(1), {0: "Y"}).amplitudes, 1j * one.amplitudes)


@pytest.mark.parametrize("axis", AXES)
def test_pauli_involution(axis):
    psi = random_state(3, 1)
    twice = apply_pauli_string(apply_pauli_string(psi, {1: axis}), {1: axis})
    assert np.allclose(twice.amplitudes, psi.amplitudes)


def test_pauli_string_matches_kron():
    psi = random_state(3, 2)
    string = {0: "Y", 2: "X"}
    assert np.allclose(apply_pauli_string(psi, string).amplitudes, pauli_matrix(string, 3) @ psi.amplitudes)


def test_pauli_index_out_of_range():
    with pytest.raises(IndexError):
        apply_pauli_string(QuantumState.zero(2), {2: "X"})


def test_expectation_examples():
    assert expectation(PauliTermSum(1, ((1.0, {0: "Z"}),)), QuantumState.zero(1)) == 1.0
    plus = QuantumState(np.array([1, 1]) / math.sqrt(2))
    assert expectation(PauliTermSum(1, ((1.0, {0: "X"}),)), plus) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10**6))
def test_compiled_hamiltonian_matches_kron(n, seed):
    h = random_hamiltonian(n, seed)
    compiled = CompiledHamiltonian(h)
    assert np.allclose(compiled.dense(), hamiltonian_matrix_kron(h))
    psi = random_state(n, seed)
    ref = np.vdot(psi.amplitudes, hamiltonian_matrix_kron(h) @ psi.amplitudes).real
    assert expectation(h, psi) == pytest.approx(ref, abs=1e-10)


def test_single_qubit_expectations_match_strings():
    psi = random_state(3, 5)
    local = single_qubit_expectations(psi.amplitudes, 3)
    for q in range(3):
        for a, axis in enumerate(AXES):
            ref = np.vdot(psi.amplitudes, pauli_matrix({q: axis}, 3) @ psi.amplitudes).real
            assert local[q, a] == pytest.approx(ref, abs=1e-12)


def test_exact_ground_examples():
    assert exact_ground(PauliTermSum(2, ((2.0, {0: "X", 1: "X"}),))).energy == pytest.approx(-2.0)
    assert exact_ground(PauliTermSum(1, ((math.sqrt(3), {0: "X"}),))).energy == pytest.approx(-math.sqrt(3))


@pytest.mark.parametrize("seed", range(5))
def test_exact_ground_eigenpair(seed):
    h = random_hamiltonian(5, seed)
    ground = exact_ground(h)
    assert ground.energy == pytest.approx(np.linalg.eigvalsh(hamiltonian_matrix_kron(h))[0], abs=1e-10)
    assert expectation(h, ground.state) == pytest.approx(ground.energy, abs=1e-8)
    mat = hamiltonian_matrix_kron(h)
    assert np.linalg.norm(mat @ ground.state.amplitudes - ground.energy * ground.state.amplitudes) <= 1e-8


def test_dense_and_lanczos_paths_agree(monkeypatch):
    h = random_hamiltonian(8, 3, n_terms=20)
    dense = exact_ground(h).energy
    monkeypatch.setattr(statevector, "DENSE_QUBIT_LIMIT", 0)
    lanczos = exact_ground(h)
    assert lanczos.energy == pytest.approx(dense, abs=1e-9)
    assert expectation(h, lanczos.state) == pytest.approx(dense, abs=1e-8)


def test_lanczos_path_above_threshold():
    h = random_hamiltonian(11, 4, n_terms=40)
    assert h.n_qubits > statevector.DENSE_QUBIT_LIMIT
    ground = exact_ground(h)
    assert expectation(h, ground.state) == pytest.approx(ground.energy, abs=1e-8)
    assert ground.energy == pytest.approx(np.linalg.eigvalsh(CompiledHamiltonian(h).dense())[0], abs=1e-8)


def test_exact_ground_qubit_guard():
    with pytest.raises(ValueError):
        exact_ground(PauliTermSum(17, ((1.0, {0: "Z"}),)))


def test_k3_21_relaxation_energy_below_optimum():
    ising = qubo_to_ising(maxcut_to_problem([(0, 1), (1, 2), (0, 2)]))
    ground = exact_ground(build_relaxed_hamiltonian(ising, encode(ising, "21")))
    assert ground.energy <= -2.0
    assert ground.energy == pytest.approx(
        np.linalg.eigvalsh(hamiltonian_matrix_kron(build_relaxed_hamiltonian(ising, encode(ising, "21"))))[0]
    )


def _ry(t):
    return np.array([[math.cos(t / 2), -math.sin(t / 2)], [math.sin(t / 2), math.cos(t / 2)]])


def _rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def _embed(gate, q, n):
    mat = np.ones((1, 1))
    for k in range(n):
        mat = np.kron(gate if k == q else np.eye(2), mat)
    return mat


def _cnot(c, t, n):
    dim = 2**n
    mat = np.zeros((dim, dim))
    for b in range(dim):
        mat[b ^ (((b >> c) & 1) << t), b] = 1
    return mat


def reference_ansatz(n, k, params):
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    for layer in range(k + 1):
        if layer:
            for q in range(n - 1):
                psi = _cnot(q, q + 1, n) @ psi
        for q in range(n):
            psi = _embed(_ry(params[2 * layer * n + q]), q, n) @ psi
        for q in range(n):
            psi = _embed(_rz(params[(2 * layer + 1) * n + q]), q, n) @ psi
    return psi


def test_ansatz_examples():
    spec = AnsatzSpec(1, 0)
    assert np.allclose(ansatz_state(spec, [0, 0]).amplitudes, [1, 0])
    one = ansatz_state(spec, [math.pi, 0]).amplitudes
    assert abs(abs(one[1]) - 1) < 1e-12
    spec = AnsatzSpec(2, 1)
    assert spec.n_params == 8
    state = ansatz_state(spec, np.random.default_rng(0).uniform(0, 2 * math.pi, 8))
    assert np.linalg.norm(state.amplitudes) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        ansatz_state(spec, [0.0] * 7)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 3), st.integers(0, 10**6))
def test_ansatz_matches_reference_circuit(n, k, seed):
    spec = AnsatzSpec(n, k)
    params = np.random.default_rng(seed).uniform(0, 2 * math.pi, spec.n_params)
    psi = ansatz_state(spec, params).amplitudes
    assert np.allclose(psi, reference_ansatz(n, k, params), atol=1e-12)
    assert abs(np.linalg.norm(psi) - 1) <= 1e-10


def test_parameter_layout():
    spec = AnsatzSpec(3, 2)
    assert spec.n_params == 18
    assert spec.locate(0) == (0, 0, "RY")
    assert spec.locate(4) == (0, 1, "RZ")
    assert spec.locate(2 * 2 * 3 + 2) == (2, 2, "RY")


def test_nft_single_qubit_z():
    h = PauliTermSum(1, ((math.sqrt(2), {0: "Z"}),))
    result = nft_optimize(AnsatzSpec(1, 0), h, [0.3, 1.1], max_sweeps=2)
    assert result.sweeps <= 2
    assert result.energy == pytest.approx(-math.sqrt(2), abs=1e-9)


def test_nft_zero_hamiltonian_stops_immediately():
    result = nft_optimize(AnsatzSpec(2, 1), PauliTermSum(2), np.ones(8))
    assert result.energy == 0.0 and result.sweeps == 0 and result.eval_count == 1


@pytest.mark.parametrize("seed", range(4))
def test_nft_monotone_and_variational(seed):
    h = random_hamiltonian(3, seed)
    spec = AnsatzSpec(3, 2)
    init = np.random.default_rng(seed).uniform(0, 2 * math.pi, spec.n_params)
    result = nft_optimize(spec, h, init)
    assert np.all(np.diff(result.history) <= 1e-10)
    assert result.energy >= exact_ground(h).energy - 1e-9
    assert expectation(h, ansatz_state(spec, result.params)) == pytest.approx(result.energy, abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_energy_is_sinusoid_in_each_parameter(seed):
    rng = np.random.default_rng(seed)
    h = random_hamiltonian(3, seed)
    spec = AnsatzSpec(3, 1)
    params = rng.uniform(0, 2 * math.pi, spec.n_params)
    for d in range(spec.n_params):
        angles = rng.uniform(0, 2 * math.pi, 5)
        energies = []
        for a in angles:
            p = params.copy()
            p[d] = a
            energies.append(expectation(h, ansatz_state(spec, p)))
        design = np.column_stack([np.ones(5), np.cos(angles), np.sin(angles)])
        coef, *_ = np.linalg.lstsq(design, energies, rcond=None)
        assert np.max(np.abs(design @ coef - energies)) <= 1e-8


def test_vqe_single_qubit_x():
    h = PauliTermSum(1, ((math.sqrt(3), {0: "X"}),))
    result = vqe_ground(h, layers=1, seed=0)
    assert result.energy == pytest.approx(exact_ground(h).energy, abs=1e-6)


def test_vqe_deterministic_per_seed():
    h = random_hamiltonian(3, 9)
    a, b = vqe_ground(h, 2, seed=5), vqe_ground(h, 2, seed=5)
    assert a.energy == b.energy and np.array_equal(a.params, b.params)


def test_vqe_maxcut16_above_exact():
    ising = qubo_to_ising(maxcut_to_problem(gen_regular_graph(16, 3, seed=2), 16))
    h = build_relaxed_hamiltonian(ising, encode(ising, "21"))
    compiled = CompiledHamiltonian(h)
    assert vqe_ground(compiled, 2, seed=0).energy >= exact_ground(compiled).energy - 1e-9


def test_nft_trace_callback():
    seen = []
    nft_optimize(AnsatzSpec(1, 0), PauliTermSum(1, ((1.0, {0: "X"}),)), [0.1, 0.2], trace=lambda s, e: seen.append((s, e)))
    assert seen and seen[0][0] == 1
