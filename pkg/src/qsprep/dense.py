"""Linear-depth preparation of arbitrary n-qubit states.

The compiler works on one binary tree ``H`` (n + 1 layers) and n trees ``V_l``
(l + 1 layers).  Layer ``H_l`` ends up holding the top ``l`` bits of ``k`` in
one-hot form with amplitude ``a_k``; each ``V_l`` then converts that one-hot
pattern into the binary digit ``k_{n-l+1}`` on its root, after which the H trees
are uncomputed.  Output bit ``b`` (little-endian) lives on ``V[n-b][0][0]``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import (
    Circuit,
    CircuitBuilder,
    Fragment,
    ccnot,
    cnot,
    parallel,
    ph,
    pswap,
    swap,
    x,
)
from .errors import UnnormalizedInput
from .trees import Tree, alloc_tree, fanout, pcnot

NORM_TOL = 1e-12


@dataclass(frozen=True)
class DenseStateSpec:
    n: int
    amplitudes: tuple[complex, ...]

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex]) -> "DenseStateSpec":
        amps = tuple(complex(a) for a in amplitudes)
        n = len(amps).bit_length() - 1
        if n < 1 or 1 << n != len(amps):
            raise UnnormalizedInput(f"need 2^n amplitudes with n >= 1, got {len(amps)}")
        return cls(n, amps)

    def validate(self) -> None:
        if self.n < 1 or len(self.amplitudes) != 1 << self.n:
            raise UnnormalizedInput(f"need 2^{self.n} amplitudes, got {len(self.amplitudes)}")
        total = sum(abs(a) ** 2 for a in self.amplitudes)
        if not math.isfinite(total) or abs(total - 1) > NORM_TOL:
            raise UnnormalizedInput(f"squared norm is {total!r}, expected 1")

    def vector(self) -> np.ndarray:
        return np.array(self.amplitudes, dtype=complex)


@dataclass(frozen=True)
class AngleTree:
    """``theta[l][j]`` for 1 <= l <= n (``theta[0]`` is empty), leaf phases, magnitudes."""

    n: int
    theta: tuple[tuple[float, ...], ...]
    phase: tuple[float, ...]
    b: tuple[tuple[float, ...], ...]


def compute_angle_tree(spec: DenseStateSpec) -> AngleTree:
    spec.validate()
    n = spec.n
    b: list[list[float]] = [[] for _ in range(n + 1)]
    b[n] = [abs(a) for a in spec.amplitudes]
    for l in range(n - 1, -1, -1):
        child = b[l + 1]
        b[l] = [math.hypot(child[2 * j], child[2 * j + 1]) for j in range(1 << l)]
    theta: list[tuple[float, ...]] = [()]
    for l in range(1, n + 1):
        row = []
        for j in range(1 << (l - 1)):
            parent = b[l - 1][j]
            if parent == 0:
                row.append(0.0)
            else:
                row.append(math.acos(min(1.0, max(0.0, b[l][2 * j] / parent))))
        theta.append(tuple(row))
    phase = tuple(0.0 if a == 0 else cmath.phase(a) for a in spec.amplitudes)
    return AngleTree(n, tuple(theta), phase, tuple(tuple(r) for r in b))


def one_hot(k: int, l: int, n: int) -> tuple[int, ...]:
    """Layer-``l`` activation pattern for basis index ``k`` of an n-qubit state."""
    if not (0 <= k < 1 << n and 1 <= l <= n):
        raise ValueError("need 0 <= k < 2^n and 1 <= l <= n")
    pos = k >> (n - l)
    return tuple(int(j == pos) for j in range(1 << l))


@dataclass(frozen=True)
class DenseLayout:
    n: int
    H: Tree
    V: tuple[Tree, ...]  # V[l - 1] has l + 1 layers

    @property
    def logical(self) -> tuple[int, ...]:
        return tuple(self.V[self.n - b - 1].root for b in range(self.n))

    def v(self, l: int) -> Tree:
        return self.V[l - 1]

    def qubits(self) -> list[int]:
        out = self.H.all_qubits()
        for tree in self.V:
            out.extend(tree.all_qubits())
        return out


def dense_qubit_count(n: int) -> int:
    return 6 * (1 << n) - n - 5


def dense_depth(n: int, reset_root: bool = True) -> int:
    """Layer count of :func:`compile_dense` (stage sizes 3n+1, 4n, 4n-2, 4n, 4n-2)."""
    return 19 * n - 3 + int(reset_root)


def build_dense_layout(builder: CircuitBuilder, n: int, prefix: str = "") -> DenseLayout:
    H = alloc_tree(builder, n, lambda l, j: f"{prefix}H[{l}][{j}]", root_init=1)
    V = []
    for l in range(1, n + 1):
        tree = alloc_tree(builder, l, lambda m, j, l=l: f"{prefix}V[{l}][{m}][{j}]")
        for j, leaf in enumerate(tree.leaves):
            builder.connect(H.nodes[l][j], leaf)
        V.append(tree)
    return DenseLayout(n, H, tuple(V))


def dense_stages(layout: DenseLayout, angles: AngleTree, reset_root: bool = True) -> list[tuple[str, Fragment]]:
    """The compiler's layer lists, grouped by stage."""
    n = layout.n
    h = layout.H.nodes
    stages: list[tuple[str, Fragment]] = []

    s1: Fragment = []
    for l in range(1, n + 1):
        half = range(1 << (l - 1))
        s1.append([cnot(h[l - 1][j], h[l][2 * j]) for j in half])
        s1.append([pswap(angles.theta[l][j], h[l - 1][j], h[l][2 * j + 1]) for j in half])
        s1.append([swap(h[l][2 * j], h[l - 1][j]) for j in half])
    s1.append([ph(angles.phase[j], h[n][j]) for j in range(1 << n)])
    stages.append(("amplitudes", s1))

    links = [
        cnot(h[l][j], layout.v(l).leaves[j])
        for l in range(1, n + 1)
        for j in range(1, 1 << l, 2)
    ]
    s2: Fragment = [links]
    s2.extend(parallel(*(pcnot(layout.v(l)) for l in range(1, n + 1))))
    s2.append(list(links))
    stages.append(("digits", s2))

    stages.append(("spread", parallel(*(fanout(tree) for tree in layout.V))))

    s4: Fragment = []
    for l in range(n, 0, -1):
        leaves = layout.v(l).leaves
        half = range(1 << (l - 1))
        s4.append([x(leaves[2 * j]) for j in half])
        s4.append([ccnot(leaves[2 * j], h[l - 1][j], h[l][2 * j]) for j in half])
        s4.append([x(leaves[2 * j]) for j in half])
        s4.append([ccnot(leaves[2 * j + 1], h[l - 1][j], h[l][2 * j + 1]) for j in half])
    stages.append(("uncompute", s4))

    stages.append(("collect", parallel(*(fanout(tree) for tree in layout.V))))
    if reset_root:
        stages.append(("reset", [[x(h[0][0])]]))
    return stages


def emit_dense(
    builder: CircuitBuilder,
    layout: DenseLayout,
    angles: AngleTree,
    reset_root: bool = True,
    stage_prefix: str = "",
) -> None:
    for name, frag in dense_stages(layout, angles, reset_root):
        with builder.stage(stage_prefix + name):
            builder.extend(frag)
    if reset_root:
        builder.final_bits[layout.H.root] = 0


def compile_dense(spec: DenseStateSpec, reset_root: bool = True) -> tuple[Circuit, DenseLayout, tuple[int, ...]]:
    angles = compute_angle_tree(spec)
    builder = CircuitBuilder()
    layout = build_dense_layout(builder, spec.n)
    emit_dense(builder, layout, angles, reset_root)
    logical = layout.logical
    return builder.build(logical), layout, logical


def stage_one_reference(spec: DenseStateSpec, layout: DenseLayout) -> dict[int, complex]:
    """Expected terms after the amplitude stage, built directly from the spec."""
    n = spec.n
    terms = {}
    for k, a in enumerate(spec.amplitudes):
        if a == 0:
            continue
        key = 1 << layout.H.root
        for l in range(1, n + 1):
            key |= 1 << layout.H.nodes[l][k >> (n - l)]
        terms[key] = a
    return terms


def stage_two_reference(spec: DenseStateSpec, layout: DenseLayout) -> dict[int, complex]:
    """Expected terms after the digit stage: stage-one pattern plus digit bits on V roots."""
    terms = {}
    base = stage_one_reference(spec, layout)
    n = spec.n
    for key, a in base.items():
        k = _index_of(key, layout)
        for l in range(1, n + 1):
            if (k >> (n - l)) & 1:
                key |= 1 << layout.v(l).root
        terms[key] = a
    return terms


def _index_of(key: int, layout: DenseLayout) -> int:
    leaves = layout.H.leaves
    for k, q in enumerate(leaves):
        if (key >> q) & 1:
            return k
    raise ValueError("no active leaf")
