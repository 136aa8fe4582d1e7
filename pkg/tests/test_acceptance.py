"""End-to-end acceptance gate; each test prints one PASS/FAIL line in the summary."""

import itertools
import math
import time

import numpy as np
import pytest

from qsprep import reference
from qsprep.block import PAULI, ProductTermHamiltonian, assemble_block_encoding
from qsprep.circuit import Circuit, CircuitBuilder, Gate, QubitRegistry, append, cnot, cu
from qsprep.cliffordt import alphabet_violations, compile_dense_cliffordT, measure_errors
from qsprep.dense import DenseStateSpec, compile_dense
from qsprep.memory import (
    ProductUnitaryFunction,
    SparseBooleanFunction,
    compile_pum,
    compile_qram_binary,
    compile_qram_continuous,
    compile_route_in,
    compile_sbm,
    pum_select_matrix,
    sbm_select_matrix,
)
from qsprep.sim import (
    SparseState,
    apply_circuit,
    extract_logical,
    fidelity,
    from_logical,
    logical_action,
    max_terms,
    run_with_measurements,
    states_equal,
)
from qsprep.sparse import SparseStateSpec, compile_sparse, truncate_to_sparse
from qsprep.teleport import expand_teleported_cnot

from conftest import random_amplitudes, random_dense, random_sparse, random_su2


def rng_for(criterion):
    return np.random.default_rng([7321, criterion])


def run_prepared(circuit, logical):
    out, peak = max_terms(circuit)
    reduced, clean = extract_logical(out, logical, circuit.expected_final_key())
    return reduced, clean, peak


@pytest.mark.criterion(1, "dense prep exact on 200 random specs, n in 1..8")
def test_dense_exactness(record_property):
    rng = rng_for(1)
    t0 = time.perf_counter()
    worst, dirty = 1.0, 0
    for i in range(200):
        spec = random_dense(1 + i % 8, rng)
        circuit, _, logical = compile_dense(spec)
        reduced, clean, _ = run_prepared(circuit, logical)
        if not clean:
            dirty += 1
            continue
        worst = min(worst, fidelity(reduced, SparseState.from_vector(spec.vector())))
    elapsed = time.perf_counter() - t0
    record_property("min_fidelity", f"{worst:.15f}")
    record_property("dirty", dirty)
    record_property("seconds", f"{elapsed:.1f}")
    assert dirty == 0 and worst >= 1 - 1e-9 and elapsed < 120


@pytest.mark.criterion(2, "dense depth affine in n, qubit count 6*2^n-n-5")
def test_dense_depth_affine(record_property):
    depths, counts = {}, {}
    for n in range(1, 12):
        spec = DenseStateSpec.from_amplitudes(np.eye(1 << n)[0])
        circuit, _, _ = compile_dense(spec)
        depths[n] = circuit.depth
        counts[n] = len(circuit.registry.roles)
    diffs = {depths[n + 1] - depths[n] for n in range(2, 11)}
    record_property("depth_step", sorted(diffs))
    record_property("depth(n)", f"{depths[3] - 3 * min(diffs)}+{min(diffs)}n")
    assert len(diffs) == 1
    assert all(counts[n] == 6 * 2**n - n - 5 for n in range(1, 11))


@pytest.mark.criterion(3, "sparse prep exact on 100 random specs, n in 4..24, d in {2,4,8,16}")
def test_sparse_exactness(record_property):
    rng = rng_for(3)
    worst, dirty, over = 1.0, 0, 0
    for i in range(100):
        n = int(rng.integers(4, 25))
        d = [2, 4, 8, 16][i % 4]
        spec = random_sparse(n, d, rng)
        circuit, _, logical = compile_sparse(spec)
        reduced, clean, peak = run_prepared(circuit, logical)
        if peak > 2 * d:
            over += 1
        if not clean:
            dirty += 1
            continue
        worst = min(worst, fidelity(reduced, SparseState.from_terms(n, spec.terms())))
    record_property("min_fidelity", f"{worst:.15f}")
    record_property("dirty", dirty)
    record_property("peak_over_2d", over)
    assert dirty == 0 and over == 0 and worst >= 1 - 1e-9


SPARSE_STEP_BOUND = 64


@pytest.mark.criterion(4, "sparse depth grows by bounded steps under doubling")
def test_sparse_depth_log(record_property):
    def depth(n, d):
        entries = [(k, 1 / math.sqrt(d)) for k in range(d)]
        return compile_sparse(SparseStateSpec.build(n, entries))[0].depth

    by_d = [depth(16, d) for d in (2, 4, 8, 16)]
    by_n = [depth(n, 4) for n in (4, 8, 16, 32)]
    step_d = [b - a for a, b in zip(by_d, by_d[1:])]
    step_n = [b - a for a, b in zip(by_n, by_n[1:])]
    record_property("d_steps", step_d)
    record_property("n_steps", step_n)
    record_property("bound", SPARSE_STEP_BOUND)
    assert max(step_d) <= SPARSE_STEP_BOUND and max(step_n) <= SPARSE_STEP_BOUND


@pytest.mark.criterion(5, "PUM and SBM equal their select matrices")
def test_oracle_equivalence(record_property):
    rng = rng_for(5)
    worst = 0.0
    clean_all = True
    for bits in (1, 2, 3):
        for words in (1, 2, 3):
            table = [[random_su2(rng) for _ in range(words)] for _ in range(1 << bits)]
            u = ProductUnitaryFunction.build(bits, words, table)
            m, clean = logical_action(compile_pum(u).circuit)
            clean_all &= clean
            worst = max(worst, float(np.max(np.abs(m - pum_select_matrix(u)))))
    for n in range(1, 7):
        for s in (1, 2, 3, 4):
            for w in (1, 2, 3):
                keys = rng.choice(1 << n, size=min(s, 1 << n), replace=False)
                f = SparseBooleanFunction.from_pairs(n, w, [(int(k), int(rng.integers(1, 1 << w))) for k in keys])
                m, clean = logical_action(compile_sbm(f).circuit)
                clean_all &= clean
                worst = max(worst, float(np.max(np.abs(m - sbm_select_matrix(f)))))
    record_property("max_deviation", f"{worst:.2e}")
    assert clean_all and worst <= 1e-10


@pytest.mark.criterion(6, "sequential and pipelined route-in agree on every basis input")
def test_route_in_equivalence(record_property):
    checked = 0
    for bits in range(1, 5):
        seq, _ = compile_route_in(bits, "sequential")
        pipe, _ = compile_route_in(bits, "pipelined")
        for k in range(1 << (bits + 1)):
            key = seq.registry.initial_key()
            for m, q in enumerate(seq.logical):
                if (k >> m) & 1:
                    key |= 1 << q
            a = apply_circuit(SparseState.from_terms(seq.num_qubits, {key: 1}), seq)
            b = apply_circuit(SparseState.from_terms(pipe.num_qubits, {key: 1}), pipe)
            assert states_equal(a, b, tol=0)
            checked += 1
    record_property("inputs", checked)


@pytest.mark.criterion(7, "binary QRAM exact; continuous QRAM word fidelity 1")
def test_qram(record_property):
    rng = rng_for(7)
    for n in range(1, 7):
        for d in range(1, 5):
            w = int(rng.integers(1, 4))
            keys = rng.choice(1 << n, size=min(d, 1 << n), replace=False)
            data = {int(k): int(rng.integers(1, 1 << w)) for k in keys}
            m, clean = logical_action(compile_qram_binary(n, w, data).circuit)
            assert clean
            dim = 1 << (n + w)
            for k in range(1 << n):
                col = m[:, k]
                assert abs(col[k | (data.get(k, 0) << n)] - 1) < 1e-12
                assert np.sum(np.abs(col)) == pytest.approx(1, abs=1e-12)
    worst = 0.0
    for n in range(1, 4):
        states = []
        for _ in range(1 << n):
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            states.append(v / np.linalg.norm(v))
        oc = compile_qram_continuous(states)
        c = oc.circuit
        for k, dk in enumerate(states):
            vec = np.zeros(1 << (n + 1), dtype=complex)
            vec[k] = 1
            st = apply_circuit(from_logical(c.num_qubits, c.registry.initial_key(), list(c.logical), vec), c)
            reduced, clean = extract_logical(st, list(c.logical), c.expected_final_key())
            assert clean
            out = reduced.to_vector()
            word = out[[k, k + (1 << n)]]
            worst = max(worst, abs(1 - abs(np.vdot(dk, word)) ** 2))
    record_property("continuous_max_infidelity", f"{worst:.2e}")
    assert worst <= 1e-10


def random_hermitian(rng):
    n = int(rng.integers(1, 4))
    P = int(rng.integers(1, 5))
    if P >= 2 and rng.random() < 0.5:
        # U and U^dagger with equal weights, plus Pauli padding
        us = [random_su2(rng) for _ in range(n)]
        a = float(rng.uniform(0.2, 2))
        terms = [(a, us), (a, [u.conj().T for u in us])]
        for _ in range(P - 2):
            terms.append((float(rng.uniform(0.2, 2)), [PAULI["IXYZ"[int(rng.integers(4))]] for _ in range(n)]))
        return ProductTermHamiltonian.build(n, terms)
    strings = ["".join("IXYZ"[int(rng.integers(4))] for _ in range(n)) for _ in range(P)]
    return ProductTermHamiltonian.from_paulis(n, [(float(rng.uniform(0.2, 2)), s) for s in strings])


@pytest.mark.criterion(8, "block encoding equals H/alpha for 20 random Hermitian sums")
def test_block_encoding(record_property):
    rng = rng_for(8)
    worst = 0.0
    for _ in range(20):
        h = random_hermitian(rng)
        assert h.is_hermitian()
        art = assemble_block_encoding(h)
        worst = max(worst, float(np.max(np.abs(art.block - h.matrix() / h.alpha))))
    record_property("max_deviation", f"{worst:.2e}")
    assert worst <= 1e-9


@pytest.mark.criterion(9, "Clifford+T lowering within budget on 50 random specs")
def test_clifford_t(record_property):
    rng = rng_for(9)
    worst_final, worst_rot, bad = 0.0, 0.0, []
    for i in range(50):
        n = 2 + i % 4
        eps = (0.5, 0.3, 0.2)[(i // 4) % 3]
        spec = random_dense(n, rng)
        circuit, _ = compile_dense_cliffordT(spec, eps)
        if alphabet_violations(circuit):
            bad.append(i)
        err = measure_errors(spec, circuit)
        worst_final = max(worst_final, err.final / eps)
        worst_rot = max(worst_rot, err.rotations / (n * eps / (2 * n)))
    record_property("max_final_over_eps", f"{worst_final:.3f}")
    record_property("max_rotation_over_bound", f"{worst_rot:.3f}")
    assert not bad and worst_final <= 1 and worst_rot <= 1


@pytest.mark.criterion(10, "teleported CNOT exact on every measurement branch")
def test_teleported_cnot(record_property):
    b = CircuitBuilder()
    c, tq = b.qubit("c"), b.qubit("t")
    b.layer([cnot(c, tq)])
    e = expand_teleported_cnot(b.build((c, tq)), [(0, 0)])
    s2 = 1 / math.sqrt(2)
    inputs = [{0: 1}, {1: 1}, {2: 1}, {3: 1}, {0: s2, 1: s2}, {1: 0.6, 2: 0.8j}]
    branches = 0
    for terms in inputs:
        want = {}
        for k, a in terms.items():
            want[(k & 1) | ((((k >> 1) ^ k) & 1) << 1)] = a
        outs = run_with_measurements(SparseState.from_terms(e.num_qubits, terms), e)
        assert len(outs) == 4
        for o in outs:
            assert states_equal(o.state, SparseState.from_terms(e.num_qubits, want), tol=1e-12)
            branches += 1
    record_property("branches", branches)


@pytest.mark.criterion(11, "truncation fidelity equals 1-eps and eps is subset-optimal")
def test_sparse_approximation(record_property):
    rng = rng_for(11)
    worst = 0.0
    for i in range(50):
        n = 1 + i % 8
        amps = random_amplitudes(n, rng)
        d = int(rng.integers(2, (1 << n) + 1))
        sp, eps = truncate_to_sparse(DenseStateSpec.from_amplitudes(amps), d)
        circuit, _, logical = compile_sparse(sp)
        reduced, clean, _ = run_prepared(circuit, logical)
        assert clean
        f = abs(np.vdot(amps, reduced.to_vector())) ** 2
        worst = max(worst, abs(f - (1 - eps)))
    for n in range(1, 5):
        amps = random_amplitudes(n, rng)
        for d in range(1, (1 << n) + 1):
            _, eps = truncate_to_sparse(DenseStateSpec.from_amplitudes(amps), d)
            best = max(sum(abs(amps[k]) ** 2 for k in s) for s in itertools.combinations(range(1 << n), d))
            assert eps == pytest.approx(1 - best, abs=1e-12)
    record_property("max_fidelity_gap", f"{worst:.2e}")
    assert worst <= 1e-9


def random_circuit(rng):
    q = int(rng.integers(2, 11))
    kinds = ["X", "H", "T", "TDG", "RY", "PH", "CNOT", "SWAP", "PSWAP", "PSWAPDG", "CU", "CCNOT", "CSWAP"]
    if q < 3:
        kinds = kinds[:-2]
    gates = []
    for _ in range(int(rng.integers(5, 40))):
        k = kinds[int(rng.integers(len(kinds)))]
        arity = 3 if k in ("CCNOT", "CSWAP") else 2 if k in ("CNOT", "SWAP", "PSWAP", "PSWAPDG", "CU") else 1
        qs = tuple(int(v) for v in rng.choice(q, size=arity, replace=False))
        if k == "CU":
            gates.append(cu(random_su2(rng), *qs))
        elif k in ("RY", "PH", "PSWAP", "PSWAPDG"):
            gates.append(Gate(k, qs, theta=float(rng.uniform(-3, 3))))
        else:
            gates.append(Gate(k, qs))
    reg = QubitRegistry(tuple(f"q[{i}]" for i in range(q)), (0,) * q)
    return append(Circuit(reg, ()), gates, "greedy-pack")


@pytest.mark.criterion(12, "sparse and dense simulators agree on 30 random circuits")
def test_simulator_agreement(record_property):
    rng = rng_for(12)
    worst = 0.0
    for _ in range(30):
        c = random_circuit(rng)
        v = rng.normal(size=1 << c.num_qubits) + 1j * rng.normal(size=1 << c.num_qubits)
        v /= np.linalg.norm(v)
        got = apply_circuit(SparseState.from_vector(v), c).to_vector()
        worst = max(worst, float(np.max(np.abs(got - reference.simulate(c, v)))))
    record_property("max_deviation", f"{worst:.2e}")
    assert worst <= 1e-12
