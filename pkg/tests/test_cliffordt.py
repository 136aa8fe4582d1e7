import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsprep.circuit import CircuitBuilder, pswap
from qsprep.cliffordt import (
    ALPHABET,
    ErrorBudget,
    alphabet_violations,
    approx_single_qubit,
    compile_dense_cliffordT,
    inverse_word,
    lower_partial_swap,
    lower_phase_pair,
    make_word,
    measure_errors,
    phase_distance,
    ry_matrix,
    rz_matrix,
    word_fragment,
    word_unitary,
)
from qsprep.dense import DenseStateSpec
from qsprep.errors import BudgetUnreachable
from qsprep.reference import circuit_unitary

from conftest import random_dense

HM = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
TM = np.diag([1, np.exp(0.25j * math.pi)])


def fragment_unitary(frag, qubits=2):
    b = CircuitBuilder()
    for m in range(qubits):
        b.qubit(f"q{m}")
    b.extend(frag)
    return circuit_unitary(b.build())


def test_exact_targets():
    assert approx_single_qubit(HM, 0.05).symbols == "H"
    assert approx_single_qubit(TM, 0.05).symbols == "T"
    w = approx_single_qubit(np.exp(0.3j) * HM, 0.05)
    assert w.symbols == "H" and w.error < 1e-12


def test_ry_quarter_pi():
    w = approx_single_qubit(ry_matrix(math.pi / 4), 0.1)
    assert set(w.symbols) <= {"H", "T"}
    assert phase_distance(word_unitary(w.symbols), ry_matrix(math.pi / 4)) <= 0.1
    assert w.error == pytest.approx(phase_distance(w.unitary, ry_matrix(math.pi / 4)))


def test_search_is_deterministic():
    a = approx_single_qubit(ry_matrix(1.234), 0.05)
    b = approx_single_qubit(ry_matrix(1.234), 0.05)
    assert a.symbols == b.symbols


def test_unreachable_budget():
    with pytest.raises(BudgetUnreachable):
        approx_single_qubit(ry_matrix(1.0), 1e-4)


def test_phase_distance_ignores_global_phase():
    u = ry_matrix(0.7)
    assert phase_distance(u, np.exp(1.1j) * u) < 1e-12
    assert phase_distance(u, ry_matrix(0.8)) > 0


def test_inverse_word_examples():
    assert inverse_word("H").symbols == "H"
    assert inverse_word("T").symbols == "TTTTTTT"
    assert np.allclose(word_unitary("TTTTTTT") @ TM, np.eye(2))


@settings(max_examples=50, deadline=None)
@given(st.text(alphabet="HT", min_size=0, max_size=8))
def test_inverse_word_products(word):
    w = make_word(word)
    assert np.allclose(inverse_word(w).unitary @ w.unitary, np.eye(2), atol=1e-12)
    assert np.allclose(w.unitary, word_unitary(word), atol=1e-14)
    # fragments reduce T runs but act the same
    frag = word_fragment(word, 0)
    assert {g.kind for row in frag for g in row} <= {"H", "T", "TDG"}
    assert np.allclose(fragment_unitary(frag, 1), word_unitary(word), atol=1e-12)


def lowered_swap(theta, eps_prime):
    return fragment_unitary(lower_partial_swap(theta, 0, 1, eps_prime))


@pytest.mark.parametrize("theta", [0.0, 0.4, math.pi / 3, 1.2, math.pi / 2])
def test_partial_swap_structure(theta):
    u = lowered_swap(theta, 0.1)
    exact = fragment_unitary([[pswap(theta, 0, 1)]])
    # key bit 0 is the first operand: |00> is key 0, |10> is key 1
    assert np.allclose(u[:, 0], [1, 0, 0, 0], atol=1e-12)
    assert abs(u[0, 1]) < 1e-12 and abs(u[3, 1]) < 1e-12
    assert np.linalg.norm(u[:, 1] - exact[:, 1]) <= 0.1 + 1e-12


def test_partial_swap_exact_with_exact_rotation():
    exact = fragment_unitary([[pswap(math.pi / 4, 0, 1)]])
    s = c = 1 / math.sqrt(2)
    assert np.allclose(exact[:, 1], [0, c, s, 0])
    # with theta = pi/4 the rotation word is exact up to the search, so compare loosely
    u = lowered_swap(math.pi / 4, 0.02)
    assert np.linalg.norm(u[:, 1] - exact[:, 1]) <= 0.02


def phase_columns(phi, eps_half):
    u = fragment_unitary(lower_phase_pair(phi, 0, 1, eps_half))
    # ancilla (qubit 1) starts in |1>: leaf 0 -> key 2, leaf 1 -> key 3
    return u[:, 2], u[:, 3]


@pytest.mark.parametrize("phi", [0.3, math.pi / 2, 2.5, -1.0])
def test_phase_pair(phi):
    zero, one = phase_columns(phi, 0.1)
    assert np.allclose(zero, [0, 0, 1, 0], atol=1e-12)
    # the leaf stays |1>; any word error shows up on the ancilla only
    assert abs(one[0]) + abs(one[2]) < 1e-12
    assert np.linalg.norm(one - np.exp(1j * phi) * np.eye(4)[3]) <= 0.1


def test_phase_pair_trivial_angle():
    zero, one = phase_columns(0.0, 0.1)
    assert np.allclose(zero, [0, 0, 1, 0]) and np.allclose(one, [0, 0, 0, 1])


def test_rz_matches_phase_up_to_global():
    phi = 0.9
    assert phase_distance(rz_matrix(phi), np.diag([1, np.exp(1j * phi)])) < 1e-12


def test_budget_split():
    b = ErrorBudget(0.3, 3)
    assert b.per_rotation == pytest.approx(0.05)
    assert b.phase_stage == pytest.approx(0.15)
    assert b.per_rotation * b.n <= b.total / 2


def test_basis_spec_exact():
    spec = DenseStateSpec.from_amplitudes(np.eye(8)[5])
    circuit, _ = compile_dense_cliffordT(spec, 0.3)
    err = measure_errors(spec, circuit)
    assert err.final < 1e-10 and err.rotations < 1e-10


@pytest.mark.parametrize("n,eps", [(2, 0.3), (3, 0.5), (3, 0.2)])
def test_random_spec_within_budget(n, eps, rng):
    spec = random_dense(n, rng)
    circuit, logical = compile_dense_cliffordT(spec, eps)
    assert alphabet_violations(circuit) == []
    assert {g.kind for g in circuit.gates()} <= ALPHABET
    assert len(logical) == n
    err = measure_errors(spec, circuit)
    assert err.final <= eps
    assert err.rotations <= n * eps / (2 * n)
    assert err.fidelity >= (1 - eps**2 / 2) ** 2 - 1e-12


def test_unreachable_total_budget(rng):
    with pytest.raises(BudgetUnreachable):
        compile_dense_cliffordT(random_dense(3, rng), 1e-3)
