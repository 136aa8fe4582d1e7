"""Log-depth preparation of d-sparse states.

Three steps on registers A (ñ = log2 d qubits) and B (n qubits):

1. prepare ``sum_k psi_k |k>_A`` with the dense compiler;
2. write ``q_k`` into B with a multi-word PUM whose cell ``k`` holds X on the
   set bits of ``q_k``;
3. erase A with an SBM storing ``f(q_k) = k``.

Entry ``k = 0`` never appears in the SBM table (its word is zero), which is
correct because A already reads ``|0>`` on that branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, CircuitBuilder, x
from .dense import DenseLayout, DenseStateSpec, build_dense_layout, compute_angle_tree, emit_dense
from .errors import DuplicateIndices, UnnormalizedInput, ZeroAmplitudeOnlyEntries
from .memory import ProductUnitaryFunction, SparseBooleanFunction, emit_pum, emit_sbm
from .trees import ceil_log2

NORM_TOL = 1e-12
_I2 = np.eye(2, dtype=complex)
_X2 = np.array([[0, 1], [1, 0]], dtype=complex)


@dataclass(frozen=True)
class SparseStateSpec:
    n: int
    entries: tuple[tuple[int, complex], ...]

    @classmethod
    def build(cls, n: int, entries) -> "SparseStateSpec":
        spec = cls(int(n), tuple((int(q), complex(a)) for q, a in entries))
        spec.validate()
        return spec

    def validate(self) -> None:
        if self.n < 1:
            raise UnnormalizedInput("need n >= 1")
        qs = [q for q, _ in self.entries]
        if len(set(qs)) != len(qs):
            raise DuplicateIndices("basis indices must be distinct")
        if any(not 0 <= q < 1 << self.n for q in qs):
            raise UnnormalizedInput(f"index outside 0..2^{self.n}-1")
        total = sum(abs(a) ** 2 for _, a in self.entries)
        if not math.isfinite(total) or abs(total - 1) > NORM_TOL:
            raise UnnormalizedInput(f"squared norm is {total!r}, expected 1")

    @property
    def d(self) -> int:
        return len(self.entries)

    def vector(self) -> np.ndarray:
        v = np.zeros(1 << self.n, dtype=complex)
        for q, a in self.entries:
            v[q] = a
        return v

    def terms(self) -> dict[int, complex]:
        return {q: a for q, a in self.entries if a != 0}


@dataclass(frozen=True)
class SparsePrepPlan:
    register_a: tuple[int, ...]
    register_b: tuple[int, ...]
    dense: DenseLayout | None
    padded_entries: tuple[tuple[int, complex], ...]
    index_bits: int


def pad_entries(n: int, entries: Sequence[tuple[int, complex]]) -> tuple[list[tuple[int, complex]], int]:
    """Pad to a power-of-two count (>= 2) with the smallest unused indices at amplitude 0."""
    d = len(entries)
    bits = max(1, ceil_log2(d))
    used = {q for q, _ in entries}
    out = list(entries)
    q = 0
    while len(out) < 1 << bits:
        while q in used:
            q += 1
        out.append((q, 0j))
        used.add(q)
    return out, bits


def compile_sparse(
    spec: SparseStateSpec, reset_root: bool = True, schedule: str = "pipelined"
) -> tuple[Circuit, SparsePrepPlan, tuple[int, ...]]:
    spec.validate()
    live = [(q, a) for q, a in spec.entries if a != 0]
    if not live:
        raise ZeroAmplitudeOnlyEntries("all amplitudes are zero")
    builder = CircuitBuilder()
    if len(live) == 1:
        B = [builder.qubit(f"B[{b}]") for b in range(spec.n)]
        q = live[0][0]
        with builder.stage("basis"):
            builder.layer(x(B[b]) for b in range(spec.n) if (q >> b) & 1)
        plan = SparsePrepPlan((), tuple(B), None, tuple(live), 0)
        return builder.build(B), plan, tuple(B)

    entries, bits = pad_entries(spec.n, live)
    dense = DenseStateSpec(bits, tuple(a for _, a in entries))
    layout = build_dense_layout(builder, bits, prefix="A.")
    A = list(layout.logical)
    B = [builder.qubit(f"B[{b}]") for b in range(spec.n)]

    emit_dense(builder, layout, compute_angle_tree(dense), reset_root, stage_prefix="A.")

    table = []
    for k, (q, a) in enumerate(entries):
        if a == 0:
            table.append([_I2] * spec.n)
        else:
            table.append([_X2 if (q >> b) & 1 else _I2 for b in range(spec.n)])
    write = ProductUnitaryFunction(bits, spec.n, tuple(tuple(r) for r in table))
    with builder.stage("write"):
        builder.extend(emit_pum(builder, A, B, write, schedule, prefix="pum."))

    erase = SparseBooleanFunction.from_pairs(
        spec.n, bits, [(q, k) for k, (q, a) in enumerate(entries) if a != 0]
    )
    with builder.stage("erase"):
        builder.extend(emit_sbm(builder, B, A, erase, prefix="sbm."))

    plan = SparsePrepPlan(tuple(A), tuple(B), layout, tuple(entries), bits)
    return builder.build(B), plan, tuple(B)


def truncate_to_sparse(spec: DenseStateSpec, d: int) -> tuple[SparseStateSpec, float]:
    """Keep the ``d`` largest magnitudes (ties to the lower index), renormalized.

    Returns the sparse spec and ``eps = 1 - kept mass``.  A request for ``d = 1``
    is padded with one zero-amplitude entry so the result still has two entries.
    """
    spec.validate()
    if not 1 <= d <= 1 << spec.n:
        raise ValueError(f"need 1 <= d <= 2^{spec.n}")
    amps = spec.amplitudes
    order = sorted(range(len(amps)), key=lambda k: (-abs(amps[k]), k))
    kept = sorted(order[:d])
    mass = sum(abs(amps[k]) ** 2 for k in kept)
    eps = max(0.0, 1.0 - mass)
    scale = 1 / math.sqrt(mass)
    entries = [(k, amps[k] * scale) for k in kept]
    if d == 1:
        entries.append((1 if kept[0] == 0 else 0, 0j))
        entries.sort()
    return SparseStateSpec.build(spec.n, entries), eps
