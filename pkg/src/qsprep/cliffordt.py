"""Clifford+T lowering of the dense preparation circuit.

Single-qubit rotations are approximated by words over {H, T}.  A breadth-first
table of distinct word unitaries (up to global phase, shortest and then
lexicographically first word kept) answers close targets directly; otherwise a
meet-in-the-middle step looks for ``U ~ A2 A1`` with ``A1`` among the first
table entries and ``A2`` the nearest table entry to ``U A1^dag``.

Words are written in time order: ``"HT"`` applies H first, so its unitary is
``T @ H``.  Distances are operator-norm distances minimized over global phase,
which for SU(2) representatives is ``min(|q - p|, |q + p|)`` on unit quaternions.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .circuit import (
    Circuit,
    CircuitBuilder,
    Fragment,
    Gate,
    ccnot_fragment,
    cnot,
    h,
    parallel,
    sequence,
    t,
    tdg,
)
from .dense import (
    DenseStateSpec,
    build_dense_layout,
    compute_angle_tree,
    dense_stages,
)
from .errors import BudgetUnreachable

TABLE_SIZE = 120_000
PREFIXES = 4096
ALPHABET = frozenset({"H", "T", "TDG", "CNOT", "X", "SWAP"})

_S2 = 1 / math.sqrt(2)
_HM = np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex)
_TM = np.array([[1, 0], [0, complex(math.cos(math.pi / 4), math.sin(math.pi / 4))]])
_LETTERS = {"H": _HM, "T": _TM}


def word_unitary(word: str) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for ch in word:
        u = _LETTERS[ch] @ u
    return u


def quaternion(u: np.ndarray) -> np.ndarray:
    """Unit quaternion(s) of the SU(2) representative of 2x2 unitaries (sign arbitrary)."""
    u = np.asarray(u, dtype=complex)
    det = u[..., 0, 0] * u[..., 1, 1] - u[..., 0, 1] * u[..., 1, 0]
    v = u / np.sqrt(det)[..., None, None]
    w = (v[..., 0, 0] + v[..., 1, 1]).real / 2
    x = -(v[..., 0, 1] + v[..., 1, 0]).imag / 2
    y = (v[..., 1, 0] - v[..., 0, 1]).real / 2
    z = (v[..., 1, 1] - v[..., 0, 0]).imag / 2
    return np.stack([w, x, y, z], axis=-1)


def _canonical_sign(q: np.ndarray) -> np.ndarray:
    out = q.copy()
    sign = np.zeros(len(q))
    for i in range(4):
        undecided = sign == 0
        comp = np.where(np.abs(q[:, i]) > 1e-12, np.sign(q[:, i]), 0)
        sign[undecided] = comp[undecided]
    sign[sign == 0] = 1
    return out * sign[:, None]


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """min over global phase of the operator-norm distance ||u - e^{ia} v||."""
    q, p = quaternion(u), quaternion(v)
    return float(min(np.linalg.norm(q - p), np.linalg.norm(q + p)))


class _WordTable:
    """Distinct {H, T} word unitaries in breadth-first (shortlex) order."""

    def __init__(self, size: int):
        mats = [np.eye(2, dtype=complex)[None]]
        parent = [np.array([-1])]
        letter = [np.array([0], dtype=np.int8)]
        quats = [_canonical_sign(quaternion(mats[0]))]
        seen = {tuple(np.round(quats[0][0], 9))}
        frontier, front_idx = mats[0], np.array([0])
        count = 1
        while count < size and len(frontier):
            cand = np.concatenate([np.einsum("ij,njk->nik", g, frontier) for g in (_HM, _TM)])
            par = np.concatenate([front_idx, front_idx])
            let = np.repeat(np.array([0, 1], dtype=np.int8), len(frontier))
            order = np.lexsort((let, par))  # shortlex: parent word first, then H < T
            cand, par, let = cand[order], par[order], let[order]
            cq = _canonical_sign(quaternion(cand))
            keys = np.round(cq, 9)
            keep = []
            for i in range(len(cand)):
                key = tuple(keys[i])
                if key not in seen:
                    seen.add(key)
                    keep.append(i)
            if not keep:
                break
            keep = np.array(keep)
            frontier = cand[keep]
            front_idx = np.arange(count, count + len(keep))
            mats.append(frontier)
            parent.append(par[keep])
            letter.append(let[keep])
            quats.append(cq[keep])
            count += len(keep)
        self.mats = np.concatenate(mats)
        self.parent = np.concatenate(parent)
        self.letter = np.concatenate(letter)
        self.quats = np.concatenate(quats)
        self.lengths = np.zeros(len(self.mats), dtype=np.int64)
        for i in range(1, len(self.mats)):
            self.lengths[i] = self.lengths[self.parent[i]] + 1
        n = len(self.quats)
        self.tree = cKDTree(np.concatenate([self.quats, -self.quats]))
        self.size = n

    def word(self, i: int) -> str:
        out = []
        while i > 0:
            out.append("HT"[self.letter[i]])
            i = int(self.parent[i])
        return "".join(reversed(out))


_table: _WordTable | None = None
_lock = threading.Lock()


def word_table() -> _WordTable:
    global _table
    with _lock:
        if _table is None:
            _table = _WordTable(TABLE_SIZE)
        return _table


@dataclass(frozen=True)
class CliffordTWord:
    symbols: str
    unitary: np.ndarray
    error: float

    def __len__(self) -> int:
        return len(self.symbols)


def make_word(symbols: str, target: np.ndarray | None = None) -> CliffordTWord:
    u = word_unitary(symbols)
    err = 0.0 if target is None else phase_distance(u, target)
    return CliffordTWord(symbols, u, err)


def _shortest(table: _WordTable, idx: np.ndarray) -> int:
    best = min(idx, key=lambda i: (table.lengths[i], table.word(i)))
    return int(best)


def _search(target: np.ndarray, eps: float) -> tuple[str, float]:
    table = word_table()
    n = table.size
    q = quaternion(target)
    hits = [i % n for i in table.tree.query_ball_point(q, eps)]
    if hits:
        i = _shortest(table, np.unique(hits))
        return table.word(i), phase_distance(table.mats[i], target)
    best = math.inf
    for start in range(0, n, PREFIXES):
        a1 = table.mats[start : start + PREFIXES]
        need = np.einsum("ij,nkj->nik", target, a1.conj())  # U A1^dag
        dist, j = table.tree.query(quaternion(need))
        j = j % n
        best = min(best, float(dist.min()))
        ok = np.nonzero(dist <= eps)[0]
        if len(ok):
            total = table.lengths[start + ok] + table.lengths[j[ok]]
            shortest = ok[total == total.min()]
            words = sorted(table.word(start + i) + table.word(int(j[i])) for i in shortest)
            w = words[0]
            return w, phase_distance(word_unitary(w), target)
    raise BudgetUnreachable(eps, best, int(table.lengths[-1]) * 2)


@lru_cache(maxsize=65536)
def _cached(key: tuple, eps: float) -> tuple[str, float]:
    target = np.array(key[:4], dtype=float) + 1j * np.array(key[4:], dtype=float)
    return _search(target.reshape(2, 2), eps)


def approx_single_qubit(target, eps_prime: float) -> CliffordTWord:
    """A {H, T} word within ``eps_prime`` of ``target`` up to global phase.

    Table words are the shortest (then lexicographically first) qualifying word
    of the table; product words are the shortest qualifying product found in the
    first prefix block that yields one.
    """
    u = np.asarray(target, dtype=complex)
    key = tuple(np.round(u.real, 15).ravel()) + tuple(np.round(u.imag, 15).ravel())
    symbols, err = _cached(key, float(eps_prime))
    return CliffordTWord(symbols, word_unitary(symbols), err)


def inverse_word(w: CliffordTWord | str) -> CliffordTWord:
    """Reverse the word and replace every T by T^7 (H is its own inverse)."""
    symbols = w.symbols if isinstance(w, CliffordTWord) else w
    inv = "".join("TTTTTTT" if ch == "T" else ch for ch in reversed(symbols))
    return CliffordTWord(inv, word_unitary(inv), 0.0)


def word_fragment(symbols: str, q: int) -> Fragment:
    """One gate per layer; runs of T are reduced mod 8 (T^7 becomes T-dagger)."""
    frag: Fragment = []
    i = 0
    while i < len(symbols):
        if symbols[i] == "H":
            frag.append([h(q)])
            i += 1
            continue
        j = i
        while j < len(symbols) and symbols[j] == "T":
            j += 1
        r = (j - i) % 8
        if r == 7:
            frag.append([tdg(q)])
        else:
            frag.extend([t(q)] for _ in range(r))
        i = j
    return frag


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(phi: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def lower_partial_swap(theta: float, a: int, b: int, eps_prime: float) -> Fragment:
    """Partial swap as W(b), CNOT(a;b), W^-1(b), CNOT(a;b), CNOT(b;a) with W ~ Ry(theta).

    The identity is exact with the standard half-angle Ry(theta); a word with
    error e gives an error of at most 2e on the promised inputs.
    """
    w = approx_single_qubit(ry_matrix(theta), eps_prime / 2)
    return sequence(
        word_fragment(w.symbols, b),
        [[cnot(a, b)]],
        word_fragment(inverse_word(w).symbols, b),
        [[cnot(a, b)]],
        [[cnot(b, a)]],
    )


def lower_phase_pair(phi: float, leaf: int, ancilla: int, eps_half: float) -> Fragment:
    """Phase e^{i phi} on leaf |1> via an ancilla held at |1>.

    W(anc), CNOT(leaf;anc), W^-1(anc), CNOT(leaf;anc) with W ~ Rz(phi) = Ph(phi)
    up to global phase: the leaf-|0> branch is exactly the identity and the
    leaf-|1> branch picks up X W^-1 X W |1> = e^{i phi}|1>.
    """
    w = approx_single_qubit(rz_matrix(phi), eps_half / 2)
    return sequence(
        word_fragment(w.symbols, ancilla),
        [[cnot(leaf, ancilla)]],
        word_fragment(inverse_word(w).symbols, ancilla),
        [[cnot(leaf, ancilla)]],
    )


@dataclass(frozen=True)
class ErrorBudget:
    total: float
    n: int

    @property
    def per_rotation(self) -> float:
        return self.total / (2 * self.n)

    @property
    def phase_stage(self) -> float:
        return self.total / 2


def lower_gate(g: Gate) -> Fragment | None:
    if g.kind == "CCNOT":
        return ccnot_fragment(*g.qubits)
    if g.kind in ("CNOT", "X", "SWAP", "H", "T", "TDG"):
        return None
    raise ValueError(f"{g.kind} needs an approximation budget")


def compile_dense_cliffordT(
    spec: DenseStateSpec, eps: float, reset_root: bool = True
) -> tuple[Circuit, tuple[int, ...]]:
    """Dense preparation over {H, T, T-dagger, CNOT, X, SWAP}.

    Stage spans ``rotations`` and ``phases`` separate the two approximated parts.
    Every phase leaf gets an ancilla ``A[j]`` initialized to |1>.
    """
    budget = ErrorBudget(eps, spec.n)
    angles = compute_angle_tree(spec)
    builder = CircuitBuilder()
    layout = build_dense_layout(builder, spec.n)
    leaves = layout.H.leaves
    anc = []
    for j, leaf in enumerate(leaves):
        a = builder.qubit(f"A[{spec.n}][{j}]", 1)
        builder.connect(leaf, a)
        anc.append(a)
    stages = dense_stages(layout, angles, reset_root)
    name, s1 = stages[0]
    rotations, phase_layer = s1[:-1], s1[-1]

    def lower_layer(layer, rewrite):
        frags = []
        for g in layer:
            frag = rewrite(g)
            frags.append([[g]] if frag is None else frag)
        return parallel(*frags)

    def rotation(g):
        if g.kind == "PSWAP":
            return lower_partial_swap(g.theta, g.qubits[0], g.qubits[1], budget.per_rotation)
        return lower_gate(g)

    with builder.stage("rotations"):
        for layer in rotations:
            builder.extend(lower_layer(layer, rotation))
    with builder.stage("phases"):
        frags = [
            lower_phase_pair(g.theta, g.qubits[0], anc[j], budget.phase_stage)
            for j, g in enumerate(phase_layer)
        ]
        builder.extend(parallel(*frags))
    for name, frag in stages[1:]:
        with builder.stage(name):
            for layer in frag:
                builder.extend(lower_layer(layer, lower_gate))
    if reset_root:
        builder.final_bits[layout.H.root] = 0
    return builder.build(layout.logical), layout.logical


def alphabet_violations(circuit: Circuit) -> list[str]:
    return sorted({g.kind for g in circuit.gates() if g.kind not in ALPHABET})


@dataclass(frozen=True)
class LoweringError:
    final: float
    rotations: float
    fidelity: float


def measure_errors(spec: DenseStateSpec, circuit: Circuit) -> LoweringError:
    """Vector-norm errors of a lowered circuit against the ideal states.

    ``rotations`` compares the state after the rotation stage with the ideal
    magnitude-only tree state; ``final`` compares the output with the target
    state on the logical qubits and every other qubit in its promised value.
    """
    from .sim import SparseState, apply_circuit, distance, fidelity, from_logical, init

    reg = circuit.registry
    n = spec.n
    state0 = init(reg)
    start, stop = circuit.stage_span("rotations")
    mid = apply_circuit(state0, circuit.sliced(start, stop), order="dependency")
    angles = compute_angle_tree(spec)
    base = reg.initial_key()
    ideal = {}
    for k, mag in enumerate(angles.b[n]):
        if mag == 0:
            continue
        key = base
        for l in range(1, n + 1):
            key |= 1 << reg.id_of(f"H[{l}][{k >> (n - l)}]")
        ideal[key] = mag
    rot = distance(mid, SparseState.from_terms(circuit.num_qubits, ideal))
    out = apply_circuit(mid, circuit.sliced(stop, circuit.depth), order="dependency")
    target = from_logical(circuit.num_qubits, circuit.expected_final_key(), circuit.logical, spec.amplitudes)
    return LoweringError(distance(out, target), rot, min(1.0, fidelity(out, target)))
