import math

import pytest

from qsprep.circuit import CircuitBuilder, cnot, h, x
from qsprep.errors import NotACnot
from qsprep.sim import SparseState, run_with_measurements, states_equal
from qsprep.teleport import expand_teleported_cnot

S2 = 1 / math.sqrt(2)


def two_qubit():
    b = CircuitBuilder()
    c, tq = b.qubit("c"), b.qubit("t")
    b.layer([cnot(c, tq)])
    return b.build((c, tq))


def ideal_cnot(terms):
    out = {}
    for k, a in terms.items():
        c, tq = k & 1, (k >> 1) & 1
        out[c | ((tq ^ c) << 1)] = a
    return out


INPUTS = [{0: 1}, {1: 1}, {2: 1}, {3: 1}, {0: S2, 1: S2}, {0: 0.6, 1: 0.8j * S2, 3: -0.8 * S2}]


@pytest.mark.parametrize("terms", INPUTS)
def test_every_branch_is_exact_cnot(terms):
    e = expand_teleported_cnot(two_qubit(), [(0, 0)])
    assert e.num_qubits == 4
    outs = run_with_measurements(SparseState.from_terms(4, terms), e)
    assert len(outs) == 4
    assert sum(o.probability for o in outs) == pytest.approx(1, abs=1e-12)
    want = SparseState.from_terms(4, ideal_cnot(terms))
    for o in outs:
        assert states_equal(o.state, want, tol=1e-12)


def test_control_one_flips_target():
    e = expand_teleported_cnot(two_qubit(), [(0, 0)])
    for o in run_with_measurements(SparseState.from_terms(4, {1: 1}), e):
        assert o.state.terms == pytest.approx({3: 1})


def test_not_a_cnot():
    b = CircuitBuilder()
    q = b.qubit("a")
    b.layer([h(q)])
    with pytest.raises(NotACnot):
        expand_teleported_cnot(b.build(), [(0, 0)])
    with pytest.raises(NotACnot):
        expand_teleported_cnot(b.build(), [(3, 0)])


def test_expansion_inside_larger_circuit():
    b = CircuitBuilder()
    q = [b.qubit(f"q{i}") for i in range(3)]
    b.layer([x(q[0]), h(q[2])])
    b.layer([cnot(q[0], q[1]), x(q[2])])
    b.layer([cnot(q[1], q[2])])
    c = b.build(tuple(q))
    e = expand_teleported_cnot(c, [(1, 0), (2, 0)])
    assert e.num_qubits == 7
    outs = run_with_measurements(SparseState.from_terms(7, {0: 1}), e)
    assert len(outs) == 16
    want = {0b011: S2, 0b111: S2}
    # |x=1> -> CNOT copies to q1 -> q2 is |-> flipped by X then CNOT(q1;q2)
    from qsprep.sim import simulate

    ref = simulate(c).terms
    for o in outs:
        assert o.state.terms == pytest.approx(ref)
    assert set(ref) == set(want)
