"""Data-access oracles: product unitary memory (PUM) and sparse Boolean memory (SBM).

PUM applies ``U(k) = U_{n-1}(k) x ... x U_0(k)`` to a word register selected by
an index register.  The index bits are routed one by one into a binary tree of
routers (a router swaps its incident qubit into the left or right output
depending on its routing qubit), then a pointer and the word travel to cell
``k``, where the cell applies ``U(k)`` controlled by the pointer.  Routing out is
the exact reverse.

SBM XORs a sparse Boolean function into the word: each stored index gets a
memory tree that computes ``[index == r_w]`` with a Toffoli reduction, and a
word tree collects the (at most one) hit.

Index bits are routed most significant first, so index ``|010>`` (``k = 2``)
takes the path left, right, left and lands in cell 2.  Registers are passed as
little-endian qubit lists.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .circuit import (
    Circuit,
    CircuitBuilder,
    Fragment,
    ccnot,
    cnot,
    cswap,
    cu,
    inverse_fragment,
    parallel,
    sequence,
    swap,
    x,
)
from .errors import DuplicateEntries, SpecError, UnnormalizedWord
from .trees import Tree, alloc_tree, ceil_log2, fanout, pcnot

UNITARY_TOL = 1e-12
_I2 = np.eye(2)
_X2 = np.array([[0, 1], [1, 0]])


@dataclass(frozen=True)
class ProductUnitaryFunction:
    """``table[k][l]`` is the 2x2 unitary applied to word bit ``l`` for index ``k``."""

    index_bits: int
    word_bits: int
    table: tuple[tuple[np.ndarray, ...], ...]

    @classmethod
    def build(cls, index_bits: int, word_bits: int, table) -> "ProductUnitaryFunction":
        d = 1 << index_bits
        if len(table) != d:
            raise SpecError(f"table needs {d} rows, got {len(table)}")
        rows = []
        for k, row in enumerate(table):
            if len(row) != word_bits:
                raise SpecError(f"row {k} needs {word_bits} matrices")
            mats = []
            for u in row:
                u = np.asarray(u, dtype=complex)
                if u.shape != (2, 2) or not np.allclose(u.conj().T @ u, _I2, atol=UNITARY_TOL, rtol=0):
                    raise SpecError(f"row {k} holds a non-unitary matrix")
                mats.append(u)
            rows.append(tuple(mats))
        return cls(index_bits, word_bits, tuple(rows))

    def unitary(self, k: int) -> np.ndarray:
        """Full word-register matrix for index ``k`` (word bit 0 least significant)."""
        out = np.eye(1, dtype=complex)
        for u in reversed(self.table[k]):
            out = np.kron(out, u)
        return out


@dataclass(frozen=True)
class SparseBooleanFunction:
    """``entries[k] = f(k)``: nonzero ``word_bits``-bit words on ``index_bits``-bit inputs."""

    index_bits: int
    word_bits: int
    entries: tuple[tuple[int, int], ...]

    @classmethod
    def from_pairs(cls, index_bits: int, word_bits: int, pairs) -> "SparseBooleanFunction":
        seen = {}
        for k, word in pairs:
            k, word = int(k), int(word)
            if k in seen:
                raise DuplicateEntries(f"index {k} listed twice")
            if not 0 <= k < 1 << index_bits or not 0 <= word < 1 << word_bits:
                raise SpecError(f"entry ({k}, {word}) out of range")
            seen[k] = word
        entries = tuple(sorted((k, w) for k, w in seen.items() if w))
        return cls(index_bits, word_bits, entries)

    def __call__(self, k: int) -> int:
        return dict(self.entries).get(k, 0)


def _is(u: np.ndarray, m: np.ndarray) -> bool:
    return bool(np.array_equal(u, m))


# --------------------------------------------------------------------------- routers


@dataclass(frozen=True)
class Router:
    incident: int
    route: int
    left: int
    right: int


@dataclass(frozen=True)
class RouterLayout:
    """Router tree for one word; ``routers[l]`` maps position ``j`` to a router.

    Layers are padded to a multiple of six; the padding sits above the real
    index bits, so only the leftmost subtree below the padded layers is ever
    reached and the rest is not allocated.
    """

    index_bits: int
    layers: int
    tokens: tuple[int, ...]  # token m (1-based) -> qubit; padding first
    pointer: int
    word: int
    routers: tuple[dict[int, Router], ...]
    phd: tuple[int, ...]
    whd: tuple[int, ...]

    @property
    def outputs(self) -> tuple[int, ...]:
        leaf = self.routers[-1]
        out = []
        for k in range(len(self.phd)):
            r = leaf[k // 2]
            out.append(r.left if k % 2 == 0 else r.right)
        return tuple(out)


def padded_layers(index_bits: int) -> int:
    return 6 * max(1, -(-index_bits // 6))


def alloc_router_layout(
    builder: CircuitBuilder,
    index: Sequence[int],
    word: int,
    prefix: str = "",
) -> RouterLayout:
    bits = len(index)
    layers = padded_layers(bits)
    pad = layers - bits
    pads = [builder.qubit(f"{prefix}pad[{m}]") for m in range(pad)]
    tokens = tuple(pads + [index[b] for b in range(bits - 1, -1, -1)])
    pointer = builder.qubit(f"{prefix}pointer", 1)
    routers: list[dict[int, Router]] = []
    for l in range(layers):
        reach = 1 << max(0, l - pad)
        row = {}
        for j in range(reach):
            if l == 0:
                inc = builder.qubit(f"{prefix}R[0][0].incident")
            else:
                parent = routers[l - 1][j // 2]
                inc = parent.left if j % 2 == 0 else parent.right
            route = builder.qubit(f"{prefix}R[{l}][{j}].route")
            left = builder.qubit(f"{prefix}R[{l}][{j}].left")
            right = builder.qubit(f"{prefix}R[{l}][{j}].right")
            for q in (inc, left, right):
                builder.connect(route, q)
            row[j] = Router(inc, route, left, right)
        routers.append(row)
    builder.connect(pointer, routers[0][0].incident)
    builder.connect(word, routers[0][0].incident)
    for t in tokens:
        builder.connect(t, routers[0][0].incident)
    phd, whd = [], []
    leaf = routers[-1]
    for k in range(1 << bits):
        p = builder.qubit(f"{prefix}cell[{k}].phd")
        w = builder.qubit(f"{prefix}cell[{k}].whd")
        o = leaf[k // 2].left if k % 2 == 0 else leaf[k // 2].right
        builder.connect(o, p)
        builder.connect(o, w)
        builder.connect(p, w)
        phd.append(p)
        whd.append(w)
    return RouterLayout(bits, layers, tokens, pointer, word, tuple(routers), tuple(phd), tuple(whd))


def _route(layout: RouterLayout, layer: int) -> Fragment:
    rs = list(layout.routers[layer - 1].values())
    return [
        [cswap(r.route, r.incident, r.right) for r in rs],
        [x(r.route) for r in rs],
        [cswap(r.route, r.incident, r.left) for r in rs],
        [x(r.route) for r in rs],
    ]


def _op(layout: RouterLayout, op: tuple) -> Fragment:
    kind, arg = op
    root = layout.routers[0][0].incident
    if kind == "route":
        return _route(layout, arg)
    if kind == "in":
        src = {"p": layout.pointer, "w": layout.word}.get(arg)
        if src is None:
            src = layout.tokens[arg - 1]
        return [[swap(src, root)]]
    if kind == "set":
        return [[swap(r.incident, r.route) for r in layout.routers[arg - 1].values()]]
    if kind == "out":
        holders = layout.phd if arg == "p" else layout.whd
        return [[swap(o, h) for o, h in zip(layout.outputs, holders)]]
    raise ValueError(op)


def pipelined_steps(layers: int) -> list[list[tuple]]:
    """Overlapped route-in schedule for ``layers`` (a multiple of 6) router layers.

    Layers are numbered from 1 at the root.  Every step is one line of the
    schedule: either even or odd router layers move tokens down by one level
    while a new token enters at the root two levels behind the previous one.
    """
    nt = layers
    assert nt % 6 == 0 and nt >= 6

    def R(ls):
        return [("route", l) for l in ls if 1 <= l <= nt]

    S: list[list[tuple]] = []
    for L in range(1, nt // 3 + 1):
        S.append([("in", 3 * L - 2)] + R(2 * l for l in range(1, L)))
        S.append(R(2 * l - 1 for l in range(1, L)) + [("set", 2 * L - 1)])
        S.append([("in", 3 * L - 1)] + R(2 * l for l in range(1, L)))
        S.append(R(2 * l - 1 for l in range(1, L + 1)))
        S.append([("in", 3 * L)] + R(2 * l for l in range(1, L)) + [("set", 2 * L)])
        S.append(R(2 * l - 1 for l in range(1, L + 1)))
    S.append([("in", "p")] + R(2 * l for l in range(1, nt // 3 + 1)))
    S.append(R(2 * l - 1 for l in range(1, nt // 3 + 1)) + [("set", 2 * nt // 3 + 1)])
    S.append([("in", "w")] + R(2 * l for l in range(1, nt // 3 + 1)))
    for L in range(nt // 3 + 1, nt // 2):
        S.append(R(2 * l - 1 for l in range(3 * L - nt - 2, L + 1)))
        S.append(R(2 * l for l in range(3 * L - nt - 2, L)) + [("set", 2 * L)])
        S.append(R(2 * l - 1 for l in range(3 * L - nt - 1, L + 1)))
        S.append(R(2 * l for l in range(3 * L - nt - 1, L + 1)))
        S.append(R(2 * l - 1 for l in range(3 * L - nt, L + 1)) + [("set", 2 * L + 1)])
        S.append(R(2 * l for l in range(3 * L - nt, L + 1)))
    S.append(R(2 * l - 1 for l in range(nt // 2 - 2, nt // 2 + 1)))
    S.append(R(2 * l for l in range(nt // 2 - 3, nt // 2)) + [("set", nt)])
    S.append(R(2 * l - 1 for l in range(nt // 2 - 1, nt // 2 + 1)))
    # drain: the pointer still has to cross the last router layer, the word two more
    S.append(R([nt, nt - 2]))
    S.append([("out", "p")] + R([nt - 1]))
    S.append(R([nt]))
    S.append([("out", "w")])
    return S


def sequential_steps(layers: int) -> list[list[tuple]]:
    S: list[list[tuple]] = []
    for m in range(1, layers + 1):
        S.append([("in", m)])
        S.extend([("route", l)] for l in range(1, m))
        S.append([("set", m)])
    for token in ("p", "w"):
        S.append([("in", token)])
        S.extend([("route", l)] for l in range(1, layers + 1))
        S.append([("out", token)])
    return S


def route_in(layout: RouterLayout, schedule: str = "pipelined") -> Fragment:
    if schedule == "pipelined":
        steps = pipelined_steps(layout.layers)
    elif schedule == "sequential":
        steps = sequential_steps(layout.layers)
    else:
        raise ValueError(f"unknown schedule {schedule!r}")
    frag: Fragment = []
    for step in steps:
        frag.extend(parallel(*(_op(layout, op) for op in step)))
    return frag


def cell_gates(layout: RouterLayout, unitaries: Sequence[np.ndarray]) -> list:
    gates = []
    for k, u in enumerate(unitaries):
        if _is(u, _I2):
            continue
        if _is(u, _X2):
            gates.append(cnot(layout.phd[k], layout.whd[k]))
        else:
            gates.append(cu(u, layout.phd[k], layout.whd[k]))
    return gates


def pum_single(layout: RouterLayout, unitaries: Sequence[np.ndarray], schedule: str = "pipelined") -> Fragment:
    rin = route_in(layout, schedule)
    return sequence(rin, [cell_gates(layout, unitaries)], inverse_fragment(rin))


def fanout_copies(
    builder: CircuitBuilder, register: Sequence[int], copies: int, prefix: str
) -> tuple[list[list[int]], Fragment]:
    """Fan each register qubit out into ``copies`` leaves; returns copies[c][b] and the fanout."""
    if copies <= 1:
        return [list(register)], []
    height = ceil_log2(copies)
    trees = []
    for b, q in enumerate(register):
        trees.append(
            alloc_tree(
                builder,
                height,
                lambda l, j, b=b: f"{prefix}copy[{b}][{l}][{j}]",
                shared=lambda l, j, q=q: q if l == 0 else None,
            )
        )
    regs = [[tree.leaves[c] for tree in trees] for c in range(copies)]
    return regs, parallel(*(fanout(tree) for tree in trees))


def emit_pum(
    builder: CircuitBuilder,
    index: Sequence[int],
    word: Sequence[int],
    u: ProductUnitaryFunction,
    schedule: str = "pipelined",
    prefix: str = "",
) -> Fragment:
    """Allocate and return the select(U) fragment on existing index/word registers."""
    n = len(word)
    copies, spread = fanout_copies(builder, index, n, prefix + "I.")
    bodies = []
    for l in range(n):
        layout = alloc_router_layout(builder, copies[l], word[l], f"{prefix}W{l}.")
        bodies.append(pum_single(layout, [u.table[k][l] for k in range(1 << u.index_bits)], schedule))
    return sequence(spread, parallel(*bodies), spread)


@dataclass(frozen=True)
class OracleCircuit:
    circuit: Circuit
    index: tuple[int, ...]
    word: tuple[int, ...]

    @property
    def logical(self) -> tuple[int, ...]:
        return self.index + self.word


def _registers(builder: CircuitBuilder, index_bits: int, word_bits: int):
    index = [builder.qubit(f"index[{b}]") for b in range(index_bits)]
    word = [builder.qubit(f"word[{b}]") for b in range(word_bits)]
    return index, word


def compile_pum(u: ProductUnitaryFunction, schedule: str = "pipelined") -> OracleCircuit:
    builder = CircuitBuilder()
    index, word = _registers(builder, u.index_bits, u.word_bits)
    with builder.stage("select"):
        builder.extend(emit_pum(builder, index, word, u, schedule))
    return OracleCircuit(builder.build(index + word), tuple(index), tuple(word))


def compile_pum_single(u: ProductUnitaryFunction, schedule: str = "pipelined") -> OracleCircuit:
    if u.word_bits != 1:
        raise SpecError("single-word PUM needs word_bits = 1")
    return compile_pum(u, schedule)


compile_pum_multi = compile_pum


def compile_route_in(index_bits: int, schedule: str = "pipelined") -> tuple[Circuit, RouterLayout]:
    builder = CircuitBuilder()
    index, word = _registers(builder, index_bits, 1)
    layout = alloc_router_layout(builder, index, word[0])
    builder.extend(route_in(layout, schedule))
    return builder.build(index + word), layout


def route_in_depth(index_bits: int, schedule: str = "pipelined") -> int:
    layers = padded_layers(index_bits)
    steps = pipelined_steps(layers) if schedule == "pipelined" else sequential_steps(layers)
    return sum(4 if any(op[0] == "route" for op in st) else 1 for st in steps)


# --------------------------------------------------------------------------- SBM


@dataclass(frozen=True)
class SBMLayout:
    index_trees: tuple[Tree, ...]  # by string position (0 = most significant, padding first)
    memory_trees: tuple[Tree, ...]  # cells, including padding cells
    word_tree: Tree
    cells: int  # real cells


def _pow2_at_least(x: int, floor: int) -> int:
    return max(floor, 1 << ceil_log2(x))


def alloc_sbm_layout(
    builder: CircuitBuilder, index: Sequence[int], word: int, cells: int, prefix: str = ""
) -> SBMLayout:
    width = _pow2_at_least(len(index), 4)
    slots = _pow2_at_least(cells, 2)
    Ln, Ls = ceil_log2(width), ceil_log2(slots)
    pad = width - len(index)
    roots = [builder.qubit(f"{prefix}pad[{m}]") for m in range(pad)]
    roots += [index[b] for b in range(len(index) - 1, -1, -1)]
    idx_trees = tuple(
        alloc_tree(
            builder,
            Ls,
            lambda l, w, j=j: f"{prefix}idx[{j}][{l}][{w}]",
            shared=lambda l, w, q=q: q if l == 0 else None,
        )
        for j, q in enumerate(roots)
    )
    mem_trees = tuple(
        alloc_tree(
            builder,
            Ln,
            lambda m, j, w=w: f"{prefix}mem[{w}][{m}][{j}]",
            shared=lambda m, j, w=w: idx_trees[j].leaves[w] if m == Ln else None,
        )
        for w in range(slots)
    )
    wrd = alloc_tree(
        builder,
        Ls,
        lambda m, w: f"{prefix}wrd[{m}][{w}]",
        shared=lambda m, w: word if m == 0 else (mem_trees[w].root if m == Ls else None),
    )
    return SBMLayout(idx_trees, mem_trees, wrd, cells)


def toffoli_match(tree: Tree, pattern: Sequence[int]) -> Fragment:
    """Toggle the root iff the leaves equal ``pattern`` (leaf j against pattern[j]).

    The reduction runs bottom-up; interior layers are then cleared top-down while
    the layers below still hold their partial products.
    """
    t = tree.nodes
    L = tree.height
    if L < 2:
        raise ValueError("Toffoli match needs at least four leaves")
    nots = [x(t[L][j]) for j, bit in enumerate(pattern) if not bit]

    def reduce(m):
        return [ccnot(t[m][2 * j], t[m][2 * j + 1], t[m - 1][j]) for j in range(1 << (m - 1))]

    frag: Fragment = [list(nots), reduce(L), list(nots)]
    for m in range(L - 1, 0, -1):
        frag.append(reduce(m))
    for m in range(2, L):
        frag.append(reduce(m))
    frag += [list(nots), reduce(L), list(nots)]
    return frag


def sbm_single(layout: SBMLayout, patterns: Sequence[Sequence[int]]) -> Fragment:
    spread = parallel(*(fanout(t) for t in layout.index_trees))
    match = parallel(*(toffoli_match(layout.memory_trees[w], p) for w, p in enumerate(patterns)))
    return sequence(spread, match, pcnot(layout.word_tree), match, spread)


def _pattern(k: int, width: int) -> list[int]:
    return [(k >> (width - 1 - j)) & 1 for j in range(width)]


def emit_sbm(
    builder: CircuitBuilder,
    index: Sequence[int],
    word: Sequence[int],
    f: SparseBooleanFunction,
    prefix: str = "",
) -> Fragment:
    supports = []
    for l in range(len(word)):
        keys = [k for k, w in f.entries if (w >> l) & 1]
        if keys:
            supports.append((l, keys))
    if not supports:
        return []
    copies, spread = fanout_copies(builder, index, len(supports), prefix + "I.")
    bodies = []
    for c, (l, keys) in enumerate(supports):
        layout = alloc_sbm_layout(builder, copies[c], word[l], len(keys), f"{prefix}W{l}.")
        width = len(layout.index_trees)
        bodies.append(sbm_single(layout, [_pattern(k, width) for k in keys]))
    return sequence(spread, parallel(*bodies), spread)


def compile_sbm(f: SparseBooleanFunction) -> OracleCircuit:
    builder = CircuitBuilder()
    index, word = _registers(builder, f.index_bits, f.word_bits)
    with builder.stage("select"):
        builder.extend(emit_sbm(builder, index, word, f))
    return OracleCircuit(builder.build(index + word), tuple(index), tuple(word))


def compile_toffoli_match(pattern: Sequence[int]) -> tuple[Circuit, Tree]:
    """Stand-alone match tree over ``len(pattern)`` (a power of two, >= 4) leaves."""
    builder = CircuitBuilder()
    height = ceil_log2(len(pattern))
    if 1 << height != len(pattern):
        raise ValueError("pattern length must be a power of two")
    tree = alloc_tree(builder, height, lambda m, j: f"mem[{m}][{j}]")
    builder.extend(toffoli_match(tree, pattern))
    return builder.build(), tree


# --------------------------------------------------------------------------- QRAM


def compile_qram_binary(address_bits: int, word_bits: int, data: Mapping[int, int]) -> OracleCircuit:
    """|k>|z> -> |k>|z xor D_k> for a sparse dataset ``data[k] = D_k``."""
    return compile_sbm(SparseBooleanFunction.from_pairs(address_bits, word_bits, data.items()))


def orthogonal_completion(state: Sequence[complex]) -> np.ndarray:
    """Unit vector orthogonal to ``state`` whose first nonzero entry is real positive."""
    a, b = complex(state[0]), complex(state[1])
    perp = np.array([-b.conjugate(), a.conjugate()])
    lead = perp[0] if abs(perp[0]) > 0 else perp[1]
    return perp * (abs(lead) / lead)


def continuous_word_unitary(state: Sequence[complex]) -> np.ndarray:
    d = np.asarray(state, dtype=complex)
    if abs(np.vdot(d, d).real - 1) > UNITARY_TOL:
        raise UnnormalizedWord(f"word state has squared norm {np.vdot(d, d).real!r}")
    return np.column_stack([d, orthogonal_completion(d)])


def compile_qram_continuous(states: Sequence[Sequence[complex]], schedule: str = "pipelined") -> OracleCircuit:
    """|k>|0> -> |k>|D_k> for one single-qubit state per address."""
    bits = ceil_log2(len(states))
    if 1 << bits != len(states) or bits < 1:
        raise SpecError("need one word state for each of 2^n addresses, n >= 1")
    table = [[continuous_word_unitary(s)] for s in states]
    return compile_pum(ProductUnitaryFunction.build(bits, 1, table), schedule)


def pum_select_matrix(u: ProductUnitaryFunction) -> np.ndarray:
    """Directly built select(U) with index bits low and word bits high in the key."""
    d = 1 << u.index_bits
    out = np.zeros((d << u.word_bits,) * 2, dtype=complex)
    for k in range(d):
        uk = u.unitary(k)
        out[k::d, k::d] = uk
    return out


def sbm_select_matrix(f: SparseBooleanFunction) -> np.ndarray:
    d = 1 << f.index_bits
    dim = d << f.word_bits
    out = np.zeros((dim, dim), dtype=complex)
    for key in range(dim):
        k, w = key % d, key // d
        out[k + (w ^ f(k)) * d, key] = 1
    return out
