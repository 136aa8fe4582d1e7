import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsprep.circuit import CircuitBuilder, validate_connectivity
from qsprep.dense import (
    DenseStateSpec,
    compile_dense,
    compute_angle_tree,
    dense_depth,
    dense_qubit_count,
    one_hot,
    stage_one_reference,
    stage_two_reference,
)
from qsprep.errors import UnnormalizedInput
from qsprep.sim import SparseState, apply_circuit, extract_logical, fidelity, init, max_terms, simulate
from qsprep.trees import alloc_tree, fanout, pcnot, sweep_depth

from conftest import random_amplitudes, random_dense

S2 = 1 / math.sqrt(2)


def test_angle_tree_basis_state():
    a = compute_angle_tree(DenseStateSpec.from_amplitudes([1, 0, 0, 0]))
    assert a.theta == ((), (0.0,), (0.0, 0.0))
    assert a.phase == (0, 0, 0, 0)


def test_angle_tree_zero_branch_guard():
    a = compute_angle_tree(DenseStateSpec.from_amplitudes([0, 0, 1, 0]))
    assert a.theta[1][0] == pytest.approx(math.pi / 2)
    assert a.theta[2] == (0.0, 0.0)


def test_angle_tree_ghz():
    a = compute_angle_tree(DenseStateSpec.from_amplitudes([S2, 0, 0, S2]))
    assert a.theta[1][0] == pytest.approx(math.pi / 4)
    assert a.theta[2][0] == pytest.approx(0)
    assert a.theta[2][1] == pytest.approx(math.pi / 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_angle_tree_invariants(n, seed):
    amps = random_amplitudes(n, np.random.default_rng(seed))
    a = compute_angle_tree(DenseStateSpec.from_amplitudes(amps))
    assert a.b[0][0] == pytest.approx(1, abs=1e-12)
    for l in range(n):
        for j in range(1 << l):
            assert a.b[l][j] == pytest.approx(math.hypot(a.b[l + 1][2 * j], a.b[l + 1][2 * j + 1]))
    for l in range(1, n + 1):
        assert all(0 <= th <= math.pi / 2 for th in a.theta[l])
    assert np.allclose(a.phase, np.angle(amps))


def test_unnormalized_rejected():
    with pytest.raises(UnnormalizedInput):
        compute_angle_tree(DenseStateSpec.from_amplitudes([1, 1]))
    with pytest.raises(UnnormalizedInput):
        DenseStateSpec.from_amplitudes([1, 0, 0])


def test_one_hot_examples():
    assert one_hot(0b1010, 2, 4) == (0, 0, 1, 0)
    assert one_hot(0b1010, 1, 4) == (0, 1)
    assert one_hot(0, 3, 4) == (1, 0, 0, 0, 0, 0, 0, 0)


def tree(height):
    b = CircuitBuilder()
    tr = alloc_tree(b, height, lambda l, j: f"T[{l}][{j}]")
    return b, tr


@pytest.mark.parametrize("height", [1, 2, 3])
def test_pcnot_on_every_one_hot_leaf(height):
    b, tr = tree(height)
    b.extend(pcnot(tr))
    c = b.build()
    assert c.depth == sweep_depth(height)
    for leaf in tr.leaves:
        out = apply_circuit(SparseState.from_terms(c.num_qubits, {1 << leaf: 1}), c)
        assert out.terms == {(1 << leaf) | (1 << tr.root): 1}
    assert simulate(c).terms == {0: 1}


@pytest.mark.parametrize("height", [1, 2, 3])
def test_fanout_copies_root(height):
    b, tr = tree(height)
    b.extend(fanout(tr))
    c = b.build()
    out = apply_circuit(SparseState.from_terms(c.num_qubits, {1 << tr.root: 1}), c)
    assert out.terms == {sum(1 << q for q in tr.leaves) | (1 << tr.root): 1}
    assert simulate(c).terms == {0: 1}


def run_dense(spec, reset_root=True):
    circuit, layout, logical = compile_dense(spec, reset_root)
    out, peak = max_terms(circuit)
    reduced, clean = extract_logical(out, logical, circuit.expected_final_key())
    return circuit, layout, reduced, clean, peak


def test_n1_amplitudes():
    spec = DenseStateSpec.from_amplitudes([0.6, 0.8j])
    _, _, reduced, clean, _ = run_dense(spec)
    assert clean
    assert np.allclose(reduced.to_vector(), [0.6, 0.8j], atol=1e-10)


def test_n2_ghz_and_qubit_count():
    spec = DenseStateSpec.from_amplitudes([S2, 0, 0, S2])
    circuit, _, reduced, clean, _ = run_dense(spec)
    assert clean
    assert abs(np.vdot(spec.vector(), reduced.to_vector())) ** 2 >= 1 - 1e-10
    assert circuit.num_qubits == 17


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_stage_snapshots(n, rng):
    spec = random_dense(n, rng)
    circuit, layout, _ = compile_dense(spec)
    state = init(circuit.registry)
    _, stop1 = circuit.stage_span("amplitudes")
    s1 = apply_circuit(state, circuit.sliced(0, stop1))
    ref1 = SparseState.from_terms(circuit.num_qubits, stage_one_reference(spec, layout))
    assert fidelity(s1, ref1) == pytest.approx(1, abs=1e-12)
    assert np.allclose(sorted(s1.terms.items()), sorted(ref1.terms.items()), atol=1e-12)
    a, b = circuit.stage_span("digits")
    s2 = apply_circuit(s1, circuit.sliced(a, b))
    ref2 = SparseState.from_terms(circuit.num_qubits, stage_two_reference(spec, layout))
    assert np.allclose(sorted(s2.terms.items()), sorted(ref2.terms.items()), atol=1e-12)


@pytest.mark.parametrize("reset_root", [True, False])
def test_random_specs_clean_and_exact(reset_root, rng):
    for n in range(1, 8):
        spec = random_dense(n, rng)
        circuit, layout, reduced, clean, peak = run_dense(spec, reset_root)
        assert clean
        assert abs(np.vdot(spec.vector(), reduced.to_vector())) ** 2 >= 1 - 1e-9
        assert peak <= 1 << n
        root = layout.H.root
        assert dict(circuit.final_bits).get(root, 1) == (0 if reset_root else 1)
        assert circuit.depth == dense_depth(n, reset_root)


def test_layout_counts_and_connectivity():
    for n in range(1, 7):
        circuit, _, _ = compile_dense(DenseStateSpec.from_amplitudes(np.eye(1 << n)[0]))
        assert circuit.num_qubits == dense_qubit_count(n) == 6 * 2**n - n - 5
        assert validate_connectivity(circuit) == []
        assert circuit.coupling.max_degree() <= 4


def test_depth_affine():
    diffs = {dense_depth(n + 1) - dense_depth(n) for n in range(2, 10)}
    assert diffs == {19}
    spec = DenseStateSpec.from_amplitudes(np.eye(8)[5])
    assert compile_dense(spec)[0].depth == dense_depth(3)


def test_stage_sizes():
    circuit, _, _ = compile_dense(DenseStateSpec.from_amplitudes(np.eye(16)[3]))
    sizes = [stop - start for _, start, stop in circuit.stages]
    n = 4
    assert sizes == [3 * n + 1, 4 * n, 4 * n - 2, 4 * n, 4 * n - 2, 1]
