"""Layered circuit intermediate representation.

A :class:`Circuit` is an immutable sequence of layers; every layer is a tuple of
gates with pairwise-disjoint qubit support, so ``depth`` is simply the number of
layers.  Compilers build circuits through :class:`CircuitBuilder`, emitting one
layer per pseudo-code line, and compose sub-circuits as *fragments* (plain lists
of gate lists) that can be merged side by side with :func:`parallel`.

Bit ordering is little-endian throughout: qubit ``i`` owns bit ``i`` of a basis
key.  Multi-qubit matrices (``PSWAP``) use the operand order as written, with the
first operand as the most significant local bit.
"""

from __future__ import annotations

import cmath
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from itertools import zip_longest
from typing import Iterable, Iterator, Sequence

from .errors import MissingCoupling, OverlappingSupport, UnknownQubit

ARITY = {
    "X": 1, "H": 1, "T": 1, "TDG": 1, "RY": 1, "PH": 1,
    "CNOT": 2, "SWAP": 2, "PSWAP": 2, "PSWAPDG": 2, "CU": 2,
    "CCNOT": 3, "CSWAP": 3,
    "MEASZ": 1, "MEASX": 1, "CXIF": 1, "CZIF": 1,
}
PARAMETRIC = frozenset({"RY", "PH", "PSWAP", "PSWAPDG"})
CLASSICAL = frozenset({"MEASZ", "MEASX", "CXIF", "CZIF"})
MEASUREMENTS = frozenset({"MEASZ", "MEASX"})
SELF_INVERSE = frozenset({"X", "H", "CNOT", "SWAP", "CCNOT", "CSWAP"})

Matrix2 = tuple[complex, complex, complex, complex]


@dataclass(frozen=True, slots=True)
class Gate:
    """One gate application.

    ``matrix`` holds the row-major 2x2 target unitary of a ``CU`` gate (first
    operand is the control).  ``record`` is the classical bit written by a
    measurement or read by a classically controlled Pauli.
    """

    kind: str
    qubits: tuple[int, ...]
    theta: float | None = None
    matrix: Matrix2 | None = None
    record: int | None = None

    def __post_init__(self):
        arity = ARITY.get(self.kind)
        if arity is None:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind} takes {arity} operands, got {len(self.qubits)}")
        if len(set(self.qubits)) != arity:
            raise ValueError(f"{self.kind} operands must be distinct: {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError(f"negative qubit id in {self.qubits}")
        if (self.kind in PARAMETRIC) != (self.theta is not None):
            raise ValueError(f"{self.kind}: angle given/missing")
        if self.theta is not None and not math.isfinite(self.theta):
            raise ValueError(f"{self.kind}: non-finite angle {self.theta}")
        if (self.kind == "CU") != (self.matrix is not None):
            raise ValueError(f"{self.kind}: matrix given/missing")
        if (self.kind in CLASSICAL) != (self.record is not None):
            raise ValueError(f"{self.kind}: record id given/missing")


def x(q: int) -> Gate:
    return Gate("X", (q,))


def h(q: int) -> Gate:
    return Gate("H", (q,))


def t(q: int) -> Gate:
    return Gate("T", (q,))


def tdg(q: int) -> Gate:
    return Gate("TDG", (q,))


def ry(theta: float, q: int) -> Gate:
    return Gate("RY", (q,), theta=float(theta))


def ph(theta: float, q: int) -> Gate:
    """Phase gate diag(1, e^{i theta})."""
    return Gate("PH", (q,), theta=float(theta))


def cnot(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


def swap(a: int, b: int) -> Gate:
    return Gate("SWAP", (a, b))


def pswap(theta: float, a: int, b: int) -> Gate:
    """Partial swap S(theta): |10> -> sin|01> + cos|10>, |00> fixed."""
    return Gate("PSWAP", (a, b), theta=float(theta))


def ccnot(c1: int, c2: int, target: int) -> Gate:
    return Gate("CCNOT", (c1, c2, target))


def cswap(control: int, a: int, b: int) -> Gate:
    return Gate("CSWAP", (control, a, b))


def cu(u, control: int, target: int) -> Gate:
    """Controlled single-qubit unitary; ``u`` is any 2x2 array-like."""
    m = tuple(complex(v) for row in u for v in row)
    return Gate("CU", (control, target), matrix=m)


def measure_z(q: int, record: int) -> Gate:
    return Gate("MEASZ", (q,), record=record)


def measure_x(q: int, record: int) -> Gate:
    return Gate("MEASX", (q,), record=record)


def cx_if(record: int, q: int) -> Gate:
    return Gate("CXIF", (q,), record=record)


def cz_if(record: int, q: int) -> Gate:
    return Gate("CZIF", (q,), record=record)


def inverse_gate(g: Gate) -> Gate:
    if g.kind in SELF_INVERSE:
        return g
    if g.kind == "T":
        return Gate("TDG", g.qubits)
    if g.kind == "TDG":
        return Gate("T", g.qubits)
    if g.kind in ("RY", "PH"):
        return Gate(g.kind, g.qubits, theta=-g.theta)
    if g.kind == "PSWAP":
        return Gate("PSWAPDG", g.qubits, theta=g.theta)
    if g.kind == "PSWAPDG":
        return Gate("PSWAP", g.qubits, theta=g.theta)
    if g.kind == "CU":
        a, b, c, d = g.matrix
        return Gate("CU", g.qubits, matrix=(a.conjugate(), c.conjugate(), b.conjugate(), d.conjugate()))
    raise ValueError(f"{g.kind} has no unitary inverse")


@dataclass(frozen=True)
class QubitRegistry:
    """Role paths and initial bits; qubit ids are positions ``0..Q-1``."""

    roles: tuple[str, ...]
    init: tuple[int, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.roles) != len(self.init):
            raise ValueError("roles and init bits differ in length")
        index = {}
        for i, role in enumerate(self.roles):
            if role in index:
                raise ValueError(f"duplicate role {role!r}")
            if not role or any(c.isspace() for c in role):
                raise ValueError(f"bad role path {role!r}")
            index[role] = i
        if any(b not in (0, 1) for b in self.init):
            raise ValueError("initial bits must be 0 or 1")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.roles)

    def __contains__(self, role: str) -> bool:
        return role in self._index

    def id_of(self, role: str) -> int:
        try:
            return self._index[role]
        except KeyError:
            raise UnknownQubit(f"no qubit with role {role!r}") from None

    def role_of(self, qubit: int) -> str:
        return self.roles[qubit]

    def initial_key(self) -> int:
        return sum(1 << i for i, b in enumerate(self.init) if b)


@dataclass(frozen=True)
class CouplingGraph:
    edges: frozenset[tuple[int, int]]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> "CouplingGraph":
        return cls(frozenset((min(a, b), max(a, b)) for a, b in pairs if a != b))

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def degrees(self) -> dict[int, int]:
        deg: dict[int, int] = {}
        for a, b in self.edges:
            deg[a] = deg.get(a, 0) + 1
            deg[b] = deg.get(b, 0) + 1
        return deg

    def max_degree(self) -> int:
        return max(self.degrees().values(), default=0)


Layer = tuple[Gate, ...]
Fragment = list[list[Gate]]


def _check_layer(gates: Sequence[Gate], num_qubits: int | None = None) -> None:
    seen: set[int] = set()
    for g in gates:
        for q in g.qubits:
            if q in seen:
                raise OverlappingSupport(f"qubit {q} used twice in one layer ({g.kind})")
            if num_qubits is not None and q >= num_qubits:
                raise UnknownQubit(f"qubit {q} not in registry of {num_qubits}")
            seen.add(q)


@dataclass(frozen=True)
class Circuit:
    """Immutable layered circuit.

    ``stages`` maps stage names to half-open layer spans, ``logical`` lists the
    output qubits in bit order and ``final_bits`` records ancillas whose expected
    final value differs from their initial bit (e.g. a reset tree root).
    """

    registry: QubitRegistry
    layers: tuple[Layer, ...]
    coupling: CouplingGraph | None = None
    stages: tuple[tuple[str, int, int], ...] = ()
    logical: tuple[int, ...] = ()
    final_bits: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        q = len(self.registry)
        for layer in self.layers:
            _check_layer(layer, q)
        for qubit, _ in self.final_bits:
            if qubit >= q:
                raise UnknownQubit(f"final-bit override for unknown qubit {qubit}")
        if any(l >= q for l in self.logical):
            raise UnknownQubit("logical qubit outside registry")

    @property
    def num_qubits(self) -> int:
        return len(self.registry)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gates(self) -> Iterator[Gate]:
        for layer in self.layers:
            yield from layer

    def gate_count(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def stage_span(self, name: str) -> tuple[int, int]:
        for stage, start, stop in self.stages:
            if stage == name:
                return start, stop
        raise KeyError(name)

    def has_measurements(self) -> bool:
        return any(g.kind in CLASSICAL for g in self.gates())

    def expected_final_key(self) -> int:
        """Expected basis pattern of all non-logical qubits after the circuit."""
        bits = list(self.registry.init)
        for qubit, b in self.final_bits:
            bits[qubit] = b
        return sum(1 << i for i, b in enumerate(bits) if b)

    def sliced(self, start: int, stop: int) -> "Circuit":
        """Sub-circuit over layers ``[start, stop)`` on the same registry."""
        return Circuit(self.registry, self.layers[start:stop], self.coupling)


def depth(circuit: Circuit) -> int:
    return len(circuit.layers)


def parallel(*fragments: Fragment) -> Fragment:
    """Merge fragments layer by layer (they must act on disjoint qubits)."""
    merged: Fragment = []
    for layers in zip_longest(*fragments, fillvalue=()):
        row: list[Gate] = []
        for layer in layers:
            row.extend(layer)
        _check_layer(row)
        merged.append(row)
    return merged


def sequence(*fragments: Fragment) -> Fragment:
    out: Fragment = []
    for frag in fragments:
        out.extend(list(layer) for layer in frag)
    return out


def inverse_fragment(fragment: Sequence[Sequence[Gate]]) -> Fragment:
    return [[inverse_gate(g) for g in layer] for layer in reversed(fragment)]


def inverse(circuit: Circuit) -> Circuit:
    """Layer-reversed, gate-inverted circuit (stage spans are dropped)."""
    return Circuit(
        circuit.registry,
        tuple(tuple(layer) for layer in inverse_fragment(circuit.layers)),
        circuit.coupling,
    )


class CircuitBuilder:
    """Mutable accumulator used by the compilers; ``build`` freezes it."""

    def __init__(self):
        self._roles: list[str] = []
        self._init: list[int] = []
        self._index: dict[str, int] = {}
        self._layers: list[Layer] = []
        self._edges: set[tuple[int, int]] = set()
        self._stages: list[tuple[str, int, int]] = []
        self.final_bits: dict[int, int] = {}

    @property
    def num_qubits(self) -> int:
        return len(self._roles)

    @property
    def depth(self) -> int:
        return len(self._layers)

    @property
    def layers(self) -> list[Layer]:
        return self._layers

    def qubit(self, role: str, init: int = 0) -> int:
        if role in self._index:
            raise ValueError(f"duplicate role {role!r}")
        q = len(self._roles)
        self._roles.append(role)
        self._init.append(init)
        self._index[role] = q
        return q

    def id_of(self, role: str) -> int:
        return self._index[role]

    def connect(self, a: int, b: int) -> None:
        if a != b:
            self._edges.add((min(a, b), max(a, b)))

    def layer(self, gates: Iterable[Gate]) -> None:
        """Append ``gates`` as one new layer; empty lists add nothing."""
        gates = tuple(gates)
        if not gates:
            return
        _check_layer(gates, len(self._roles))
        self._layers.append(gates)

    def extend(self, fragment: Iterable[Iterable[Gate]]) -> None:
        for layer in fragment:
            self.layer(layer)

    @contextmanager
    def stage(self, name: str):
        start = len(self._layers)
        yield
        self._stages.append((name, start, len(self._layers)))

    def build(self, logical: Sequence[int] = (), coupling: bool = True) -> Circuit:
        registry = QubitRegistry(tuple(self._roles), tuple(self._init))
        return Circuit(
            registry,
            tuple(self._layers),
            CouplingGraph(frozenset(self._edges)) if coupling else None,
            tuple(self._stages),
            tuple(logical),
            tuple(sorted(self.final_bits.items())),
        )


def append(circuit: Circuit, gates: Sequence[Gate], policy: str = "new-layer") -> Circuit:
    """Return ``circuit`` extended by ``gates``.

    ``new-layer`` adds all gates as a single layer; ``greedy-pack`` drops each
    gate into the layer right after the last one touching any of its qubits.
    """
    q = circuit.num_qubits
    for g in gates:
        for qubit in g.qubits:
            if qubit >= q:
                raise UnknownQubit(f"qubit {qubit} not in registry of {q}")
    layers = [list(layer) for layer in circuit.layers]
    if policy == "new-layer":
        _check_layer(gates)
        if gates:
            layers.append(list(gates))
    elif policy == "greedy-pack":
        for g in gates:
            support = set(g.qubits)
            slot = len(layers)
            while slot > 0 and not any(support.intersection(o.qubits) for o in layers[slot - 1]):
                slot -= 1
            if slot == len(layers):
                layers.append([])
            layers[slot].append(g)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    return Circuit(
        circuit.registry,
        tuple(tuple(layer) for layer in layers),
        circuit.coupling,
        circuit.stages,
        circuit.logical,
        circuit.final_bits,
    )


def validate_connectivity(circuit: Circuit) -> list[tuple[int, Gate]]:
    """List ``(layer index, gate)`` for every gate not supported by the coupling graph.

    Two-qubit gates need an edge; three-qubit gates need their support to induce a
    connected subgraph (a path or triangle inside one router/tree cell).
    """
    if circuit.coupling is None:
        raise MissingCoupling("circuit has no coupling graph")
    graph = circuit.coupling
    violations = []
    for i, layer in enumerate(circuit.layers):
        for g in layer:
            qs = g.qubits
            if len(qs) == 2:
                ok = graph.has_edge(*qs)
            elif len(qs) == 3:
                links = [graph.has_edge(a, b) for a, b in ((qs[0], qs[1]), (qs[0], qs[2]), (qs[1], qs[2]))]
                ok = sum(links) >= 2
            else:
                ok = True
            if not ok:
                violations.append((i, g))
    return violations


def ccnot_fragment(a: int, b: int, c: int) -> Fragment:
    """Exact seven-T decomposition of CCNOT(a, b; c) into H/T/T†/CNOT."""
    return [
        [h(c)], [cnot(b, c)], [tdg(c)], [cnot(a, c)], [t(c)], [cnot(b, c)], [tdg(c)],
        [cnot(a, c)], [t(b), t(c)], [h(c), cnot(a, b)], [t(a), tdg(b)], [cnot(a, b)],
    ]


def cswap_fragment(c: int, a: int, b: int) -> Fragment:
    return sequence([[cnot(b, a)]], ccnot_fragment(c, a, b), [[cnot(b, a)]])


def lower_layers(circuit: Circuit, rewrite) -> tuple[list[Layer], list[int]]:
    """Apply ``rewrite(gate) -> Fragment | None`` to every gate, layer by layer.

    Returns the new layers and, for each old layer, the index of its first new
    layer (plus a final sentinel) so stage spans can be remapped.
    """
    out: list[Layer] = []
    starts = []
    for layer in circuit.layers:
        starts.append(len(out))
        frags = []
        for g in layer:
            frag = rewrite(g)
            frags.append([[g]] if frag is None else frag)
        for row in parallel(*frags):
            if row:
                out.append(tuple(row))
    starts.append(len(out))
    return out, starts


def remap_stages(stages, starts):
    return tuple((name, starts[a], starts[b]) for name, a, b in stages)


def decompose_three_qubit(circuit: Circuit) -> Circuit:
    """Lower every CCNOT and CSWAP into one- and two-qubit gates."""

    def rewrite(g: Gate):
        if g.kind == "CCNOT":
            return ccnot_fragment(*g.qubits)
        if g.kind == "CSWAP":
            return cswap_fragment(*g.qubits)
        return None

    layers, starts = lower_layers(circuit, rewrite)
    return Circuit(
        circuit.registry,
        tuple(layers),
        circuit.coupling,
        remap_stages(circuit.stages, starts),
        circuit.logical,
        circuit.final_bits,
    )


def lowered_depth(circuit: Circuit) -> int:
    return decompose_three_qubit(circuit).depth


def asap_depth(gates: Iterable[Gate]) -> int:
    """Critical-path depth of a flat gate sequence (per-qubit counters)."""
    level: dict[int, int] = {}
    best = 0
    for g in gates:
        d = 1 + max((level.get(q, 0) for q in g.qubits), default=0)
        for q in g.qubits:
            level[q] = d
        best = max(best, d)
    return best


def dependency_order(layers: Sequence[Sequence[Gate]]) -> list[Gate]:
    """Gates in depth-first postorder of the layer dependency graph.

    Any order respecting per-qubit precedence gives the same unitary; this one
    finishes a block of gates on a few qubits before touching unrelated ones,
    which keeps an intermediate sparse state small.
    """
    gates = [g for layer in layers for g in layer]
    last: dict[int, int] = {}
    preds: list[list[int]] = []
    for i, g in enumerate(gates):
        preds.append([last[q] for q in g.qubits if q in last])
        for q in g.qubits:
            last[q] = i
    done = [False] * len(gates)
    out: list[Gate] = []
    for root in sorted(set(last.values())):
        stack = [(root, 0)]
        while stack:
            i, k = stack.pop()
            if done[i]:
                continue
            if k < len(preds[i]):
                stack.append((i, k + 1))
                p = preds[i][k]
                if not done[p]:
                    stack.append((p, 0))
                continue
            done[i] = True
            out.append(gates[i])
    return out


def unitary_matrix2(g: Gate):
    """Row-major 2x2 matrix of a single-qubit unitary gate kind."""
    s = 1 / math.sqrt(2)
    if g.kind == "X":
        return (0, 1, 1, 0)
    if g.kind == "H":
        return (s, s, s, -s)
    if g.kind == "T":
        return (1, 0, 0, cmath.exp(1j * math.pi / 4))
    if g.kind == "TDG":
        return (1, 0, 0, cmath.exp(-1j * math.pi / 4))
    if g.kind == "RY":
        c, sn = math.cos(g.theta / 2), math.sin(g.theta / 2)
        return (c, -sn, sn, c)
    if g.kind == "PH":
        return (1, 0, 0, cmath.exp(1j * g.theta))
    raise ValueError(f"{g.kind} is not a single-qubit unitary")
