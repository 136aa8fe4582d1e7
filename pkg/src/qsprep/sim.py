"""Exact sparse-amplitude simulator.

Only nonzero basis terms are stored: a boolean matrix ``bits`` (terms x qubits)
and a parallel complex vector ``amps``.  Permutation and diagonal gates are
vectorized per layer; gates that split terms (H, RY, partial swaps, CU) are
applied one at a time followed by a merge of duplicate keys.  Compiled circuits
keep the term count small (at most 2^n or 2d) even with thousands of ancillas,
so every operation is cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circuit import CLASSICAL, MEASUREMENTS, Circuit, Gate, QubitRegistry, dependency_order
from .errors import (
    DimensionMismatch,
    EmptyRegistry,
    ImpossibleOutcome,
    UnresolvedMeasurement,
)

PRUNE = 1e-14
_S2 = 1 / math.sqrt(2)
_T_PHASE = complex(math.cos(math.pi / 4), math.sin(math.pi / 4))


def _key_to_row(key: int, num_qubits: int) -> np.ndarray:
    nbytes = max(1, (num_qubits + 7) // 8)
    raw = np.frombuffer(key.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:num_qubits].astype(bool)


def _row_to_key(row: np.ndarray) -> int:
    return int.from_bytes(np.packbits(row, bitorder="little").tobytes(), "little")


@dataclass(frozen=True)
class SparseState:
    """Immutable sparse state; rows of ``bits`` are unique and sorted."""

    num_qubits: int
    bits: np.ndarray
    amps: np.ndarray

    @classmethod
    def from_terms(cls, num_qubits: int, terms: Mapping[int, complex]) -> "SparseState":
        if num_qubits <= 0:
            raise EmptyRegistry("state needs at least one qubit")
        keys = sorted(terms)
        bits = np.zeros((len(keys), num_qubits), dtype=bool)
        for i, k in enumerate(keys):
            if k < 0 or k >> num_qubits:
                raise ValueError(f"key {k} does not fit in {num_qubits} qubits")
            bits[i] = _key_to_row(k, num_qubits)
        amps = np.array([complex(terms[k]) for k in keys], dtype=complex)
        return _canonical(num_qubits, bits, amps)

    @classmethod
    def from_vector(cls, vector: Sequence[complex]) -> "SparseState":
        vec = np.asarray(vector, dtype=complex)
        q = int(round(math.log2(len(vec))))
        if 1 << q != len(vec):
            raise DimensionMismatch("vector length is not a power of two")
        return cls.from_terms(q, {k: a for k, a in enumerate(vec) if a != 0})

    @property
    def terms(self) -> dict[int, complex]:
        return {_row_to_key(r): complex(a) for r, a in zip(self.bits, self.amps)}

    def __len__(self) -> int:
        return len(self.amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def to_vector(self) -> np.ndarray:
        if self.num_qubits > 24:
            raise DimensionMismatch("refusing to densify more than 24 qubits")
        vec = np.zeros(1 << self.num_qubits, dtype=complex)
        for k, a in self.terms.items():
            vec[k] = a
        return vec

    def dump(self) -> str:
        """One ``<bitstring> <re> <im>`` line per term, sorted by bitstring."""
        lines = []
        for k, a in self.terms.items():
            lines.append((format(k, f"0{self.num_qubits}b"), a))
        lines.sort()
        return "".join(f"{b} {a.real:.16e} {a.imag:.16e}\n" for b, a in lines)


def _canonical(num_qubits: int, bits: np.ndarray, amps: np.ndarray) -> SparseState:
    keep = np.abs(amps) >= PRUNE
    bits, amps = bits[keep], amps[keep]
    if len(amps) == 0:
        return SparseState(num_qubits, np.zeros((0, num_qubits), dtype=bool), amps)
    packed = np.packbits(bits, axis=1, bitorder="little")
    uniq, first, inverse = np.unique(packed, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    if len(uniq) == len(amps):
        order = first
        return SparseState(num_qubits, bits[order], amps[order])
    merged = np.zeros(len(uniq), dtype=complex)
    np.add.at(merged, inverse, amps)
    rows = bits[first]
    keep = np.abs(merged) >= PRUNE
    return SparseState(num_qubits, rows[keep], merged[keep])


def init(registry: QubitRegistry) -> SparseState:
    """The registry's initial bit pattern with amplitude 1."""
    if len(registry) == 0:
        raise EmptyRegistry("registry has no qubits")
    return SparseState.from_terms(len(registry), {registry.initial_key(): 1.0})


def basis_state(num_qubits: int, key: int) -> SparseState:
    return SparseState.from_terms(num_qubits, {key: 1.0})


def local_matrix(g: Gate) -> np.ndarray:
    """Matrix of a splitting gate on its operands (first operand is the MSB)."""
    if g.kind == "H":
        return np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex)
    if g.kind == "RY":
        c, s = math.cos(g.theta / 2), math.sin(g.theta / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if g.kind in ("PSWAP", "PSWAPDG"):
        c, s = math.cos(g.theta), math.sin(g.theta)
        m = np.array(
            [[1, 0, 0, 0], [0, 0, s, c], [0, 0, c, -s], [0, 1, 0, 0]], dtype=complex
        )
        return m if g.kind == "PSWAP" else m.T.copy()
    if g.kind == "CU":
        u = np.array(g.matrix, dtype=complex).reshape(2, 2)
        m = np.eye(4, dtype=complex)
        m[2:, 2:] = u
        return m
    raise ValueError(f"{g.kind} is not a splitting gate")


def _apply_local(state: SparseState, qubits: Sequence[int], m: np.ndarray) -> SparseState:
    k = len(qubits)
    bits, amps = state.bits, state.amps
    cols = bits[:, qubits]
    weights = 1 << np.arange(k - 1, -1, -1)
    idx = cols.astype(np.int64) @ weights
    out_bits = []
    out_amps = []
    for j in range(1 << k):
        coeff = m[j, idx]
        nz = coeff != 0
        if not nz.any():
            continue
        nb = bits[nz].copy()
        nb[:, qubits] = ((j >> (k - 1 - np.arange(k))) & 1).astype(bool)
        out_bits.append(nb)
        out_amps.append(coeff[nz] * amps[nz])
    if not out_bits:
        return SparseState(state.num_qubits, bits[:0], amps[:0])
    return _canonical(state.num_qubits, np.concatenate(out_bits), np.concatenate(out_amps))


_PERMUTATION = ("X", "CNOT", "SWAP", "CCNOT", "CSWAP")
_DIAGONAL = ("T", "TDG", "PH")
_SPLITTING = ("H", "RY", "PSWAP", "PSWAPDG", "CU")


def _apply_unitary_layer(state: SparseState, gates: Sequence[Gate]) -> SparseState:
    by_kind: dict[str, list[Gate]] = {}
    for g in gates:
        if g.kind in CLASSICAL:
            raise UnresolvedMeasurement("use run_with_measurements for measurement circuits")
        by_kind.setdefault(g.kind, []).append(g)
    if any(k in by_kind for k in _PERMUTATION + _DIAGONAL):
        bits = state.bits.copy()
        amps = state.amps.copy()
        _permute(bits, by_kind)
        _phase(bits, amps, by_kind)
        state = _canonical(state.num_qubits, bits, amps)
    for kind in _SPLITTING:
        for g in by_kind.get(kind, ()):
            state = _apply_local(state, g.qubits, local_matrix(g))
    return state


def _operands(gates: Sequence[Gate]) -> np.ndarray:
    return np.array([g.qubits for g in gates], dtype=np.int64)


def _permute(bits: np.ndarray, by_kind: dict[str, list[Gate]]) -> None:
    if "X" in by_kind:
        q = _operands(by_kind["X"])[:, 0]
        bits[:, q] ^= True
    if "CNOT" in by_kind:
        ops = _operands(by_kind["CNOT"])
        bits[:, ops[:, 1]] ^= bits[:, ops[:, 0]]
    if "SWAP" in by_kind:
        ops = _operands(by_kind["SWAP"])
        a = bits[:, ops[:, 0]].copy()
        bits[:, ops[:, 0]] = bits[:, ops[:, 1]]
        bits[:, ops[:, 1]] = a
    if "CCNOT" in by_kind:
        ops = _operands(by_kind["CCNOT"])
        bits[:, ops[:, 2]] ^= bits[:, ops[:, 0]] & bits[:, ops[:, 1]]
    if "CSWAP" in by_kind:
        ops = _operands(by_kind["CSWAP"])
        c = bits[:, ops[:, 0]]
        a = bits[:, ops[:, 1]]
        b = bits[:, ops[:, 2]]
        bits[:, ops[:, 1]] = np.where(c, b, a)
        bits[:, ops[:, 2]] = np.where(c, a, b)


def _phase(bits: np.ndarray, amps: np.ndarray, by_kind: dict[str, list[Gate]]) -> None:
    angle = np.zeros(len(amps))
    if "T" in by_kind:
        angle += bits[:, _operands(by_kind["T"])[:, 0]].sum(axis=1) * (math.pi / 4)
    if "TDG" in by_kind:
        angle -= bits[:, _operands(by_kind["TDG"])[:, 0]].sum(axis=1) * (math.pi / 4)
    if "PH" in by_kind:
        gates = by_kind["PH"]
        thetas = np.array([g.theta for g in gates])
        angle += bits[:, _operands(gates)[:, 0]].astype(float) @ thetas
    if angle.any():
        amps *= np.exp(1j * angle)


def apply_gate(state: SparseState, gate: Gate) -> SparseState:
    _check_gate(state, gate)
    return _apply_unitary_layer(state, [gate])


def apply_layer(state: SparseState, gates: Sequence[Gate]) -> SparseState:
    for g in gates:
        _check_gate(state, g)
    return _apply_unitary_layer(state, gates)


def _check_gate(state: SparseState, g: Gate) -> None:
    if max(g.qubits) >= state.num_qubits:
        raise DimensionMismatch(f"gate {g.kind}{g.qubits} outside {state.num_qubits} qubits")


def apply_circuit(state: SparseState, circuit: Circuit, observe=None, order: str = "layers") -> SparseState:
    """Fold the circuit into ``state``.

    ``order="layers"`` applies layer by layer and calls ``observe(i, state)``
    after each one.  ``order="dependency"`` applies gates in dependency
    postorder, which gives the same final state with far fewer intermediate
    terms on circuits full of lowered Toffolis.
    """
    if state.num_qubits != circuit.num_qubits:
        raise DimensionMismatch("state and circuit registries differ in size")
    if circuit.has_measurements():
        raise UnresolvedMeasurement("circuit contains measurements; use run_with_measurements")
    if order == "dependency":
        batch: list[Gate] = []
        busy: set[int] = set()
        for g in dependency_order(circuit.layers):
            if g.kind in _SPLITTING:
                if batch:
                    state = _apply_unitary_layer(state, batch)
                    batch, busy = [], set()
                state = _apply_local(state, g.qubits, local_matrix(g))
                continue
            if busy.intersection(g.qubits):
                state = _apply_unitary_layer(state, batch)
                batch, busy = [], set()
            batch.append(g)
            busy.update(g.qubits)
        return _apply_unitary_layer(state, batch) if batch else state
    if order != "layers":
        raise ValueError(f"unknown order {order!r}")
    for i, layer in enumerate(circuit.layers):
        state = _apply_unitary_layer(state, layer)
        if observe is not None:
            observe(i, state)
    return state


def simulate(circuit: Circuit, observe=None, order: str = "layers") -> SparseState:
    return apply_circuit(init(circuit.registry), circuit, observe, order)


@dataclass(frozen=True)
class MeasurementOutcome:
    records: dict[int, int]
    state: SparseState
    probability: float


def _collapse(state: SparseState, q: int, bit: int) -> tuple[SparseState, float]:
    mask = state.bits[:, q] == bool(bit)
    amps = state.amps[mask]
    p = float(np.sum(np.abs(amps) ** 2))
    if p == 0:
        return SparseState(state.num_qubits, state.bits[mask], amps), 0.0
    return SparseState(state.num_qubits, state.bits[mask], amps / math.sqrt(p)), p


def run_with_measurements(
    state: SparseState,
    circuit: Circuit,
    outcome_policy: str | Mapping[int, int] = "enumerate-all",
) -> list[MeasurementOutcome]:
    """Simulate a circuit with mid-circuit measurements.

    ``outcome_policy`` is ``"enumerate-all"`` or a mapping ``record -> bit`` that
    forces outcomes.  Branches are returned in lexicographic outcome order.
    """
    if state.num_qubits != circuit.num_qubits:
        raise DimensionMismatch("state and circuit registries differ in size")
    forced = None if outcome_policy == "enumerate-all" else dict(outcome_policy)
    gates = [g for layer in circuit.layers for g in layer]
    branches = [({}, state, 1.0)]
    for g in gates:
        nxt = []
        for records, st, prob in branches:
            if g.kind in MEASUREMENTS:
                q = g.qubits[0]
                if g.kind == "MEASX":
                    st = _apply_local(st, (q,), local_matrix(Gate("H", (q,))))
                choices = (0, 1) if forced is None else (forced[g.record],)
                for bit in choices:
                    sub, p = _collapse(st, q, bit)
                    if p <= PRUNE**2:
                        if forced is not None:
                            raise ImpossibleOutcome(f"record {g.record}={bit} has probability 0")
                        continue
                    nxt.append(({**records, g.record: bit}, sub, prob * p))
            elif g.kind in ("CXIF", "CZIF"):
                if g.record not in records:
                    raise UnresolvedMeasurement(f"record {g.record} read before it is written")
                if records[g.record]:
                    kind = "X" if g.kind == "CXIF" else "PH"
                    theta = None if kind == "X" else math.pi
                    st = _apply_unitary_layer(st, [Gate(kind, g.qubits, theta=theta)])
                nxt.append((records, st, prob))
            else:
                nxt.append((records, _apply_unitary_layer(st, [g]), prob))
        branches = nxt
    return [MeasurementOutcome(r, s, p) for r, s, p in branches]


def extract_logical(
    state: SparseState, logical: Sequence[int], expect_ancilla: int
) -> tuple[SparseState | None, bool]:
    """Restrict ``state`` to ``logical`` qubits if all others match ``expect_ancilla``.

    Logical qubit ``logical[m]`` becomes bit ``m`` of the reduced key.  Returns
    ``(None, False)`` when some stored key disagrees on an ancilla bit.
    """
    logical = list(logical)
    if len(set(logical)) != len(logical):
        raise ValueError("logical qubits must be distinct")
    q = state.num_qubits
    mask = np.ones(q, dtype=bool)
    mask[logical] = False
    expected = _key_to_row(expect_ancilla, q)
    if len(state.amps) and not np.all(state.bits[:, mask] == expected[mask]):
        return None, False
    if not logical:
        return None, True
    reduced = state.bits[:, logical]
    return _canonical(len(logical), reduced, state.amps.copy()), True


def inner(a: SparseState, b: SparseState) -> complex:
    """<a|b>."""
    if a.num_qubits != b.num_qubits:
        raise DimensionMismatch("states have different qubit counts")
    ka = {r.tobytes(): amp for r, amp in zip(np.packbits(a.bits, axis=1), a.amps)}
    total = 0j
    for r, amp in zip(np.packbits(b.bits, axis=1), b.amps):
        other = ka.get(r.tobytes())
        if other is not None:
            total += np.conj(other) * amp
    return complex(total)


def fidelity(a: SparseState, b: SparseState) -> float:
    return min(1.0, abs(inner(a, b)) ** 2)


def distance(a: SparseState, b: SparseState) -> float:
    """Euclidean norm of ``a - b`` (no phase optimization)."""
    d2 = a.norm() ** 2 + b.norm() ** 2 - 2 * inner(a, b).real
    return math.sqrt(max(0.0, d2))


def max_terms(circuit: Circuit, state: SparseState | None = None) -> tuple[SparseState, int]:
    """Simulate and also report the largest term count seen after any layer."""
    peak = [0]

    def watch(_, st):
        peak[0] = max(peak[0], len(st))

    start = init(circuit.registry) if state is None else state
    out = apply_circuit(start, circuit, watch)
    return out, max(peak[0], len(start))


def states_equal(a: SparseState, b: SparseState, tol: float = 1e-12) -> bool:
    if a.num_qubits != b.num_qubits:
        return False
    ta, tb = a.terms, b.terms
    for k in set(ta) | set(tb):
        if abs(ta.get(k, 0) - tb.get(k, 0)) > tol:
            return False
    return True


def from_logical(num_qubits: int, base_key: int, logical: Sequence[int], amplitudes: Iterable[complex]) -> SparseState:
    """Embed a logical vector into a full register whose other bits are ``base_key``."""
    for m in logical:
        base_key &= ~(1 << m)
    terms = {}
    for k, a in enumerate(amplitudes):
        if a == 0:
            continue
        key = base_key
        for m, q in enumerate(logical):
            if (k >> m) & 1:
                key |= 1 << q
        terms[key] = a
    return SparseState.from_terms(num_qubits, terms)


def logical_action(circuit: Circuit, order: str = "layers") -> tuple[np.ndarray, bool]:
    """Matrix of the circuit on its logical qubits, every other qubit at its promised value.

    Column ``j`` is the reduced output for logical input ``j``.  The flag is
    false if any input leaves an ancilla off its expected final value.
    """
    logical = list(circuit.logical)
    dim = 1 << len(logical)
    out = np.zeros((dim, dim), dtype=complex)
    clean = True
    expect = circuit.expected_final_key()
    for j in range(dim):
        st = from_logical(circuit.num_qubits, circuit.registry.initial_key(), logical, np.eye(dim)[j])
        st = apply_circuit(st, circuit, order=order)
        reduced, ok = extract_logical(st, logical, expect)
        if not ok:
            clean = False
            continue
        for k, a in reduced.terms.items():
            out[k, j] = a
    return out, clean
