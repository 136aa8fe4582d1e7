"""Replace chosen CNOTs by measurement-based CNOTs over a shared Bell pair.

For a CNOT (c; t) the expansion uses two fresh ancillas ``a1, a2`` holding
``(|01> + |10>)/sqrt(2)``::

    CNOT(c; a1)  CNOT(a2; t)
    MEASZ(a1) -> m1   MEASX(a2) -> m2
    X(t) X^m1(t)  Z^m2(c)            logical correction
    X(a1) Z^m2(a1)                   removes the branch phase (-1)^(m2 (m1+1))
    X(a1) X^m1(a1)  X^m2(a2)         ancillas back to |0>

Every branch then carries exactly CNOT(c; t) applied to the input, with both
ancillas reset.
"""

from __future__ import annotations

from typing import Iterable

from .circuit import (
    Circuit,
    CouplingGraph,
    Gate,
    QubitRegistry,
    cnot,
    cx_if,
    cz_if,
    h,
    measure_x,
    measure_z,
    parallel,
    remap_stages,
    x,
)
from .errors import NotACnot


def teleported_cnot(c: int, tq: int, a1: int, a2: int, r1: int, r2: int) -> list[list[Gate]]:
    return [
        [h(a1)],
        [cnot(a1, a2)],
        [x(a2)],
        [cnot(c, a1), cnot(a2, tq)],
        [measure_z(a1, r1), measure_x(a2, r2)],
        [x(tq), x(a1)],
        [cx_if(r1, tq), cz_if(r2, c), cz_if(r2, a1)],
        [x(a1), cx_if(r2, a2)],
        [cx_if(r1, a1)],
    ]


def expand_teleported_cnot(circuit: Circuit, cnot_sites: Iterable[tuple[int, int]]) -> Circuit:
    """Expand the CNOTs at ``(layer index, position in layer)`` sites.

    Other gates of an expanded layer stay in its first new layer.  Raises
    NotACnot when a site addresses anything but a CNOT.
    """
    sites = sorted(set(cnot_sites))
    by_layer: dict[int, set[int]] = {}
    for li, gi in sites:
        if not 0 <= li < circuit.depth or not 0 <= gi < len(circuit.layers[li]):
            raise NotACnot(f"no gate at site ({li}, {gi})")
        if circuit.layers[li][gi].kind != "CNOT":
            raise NotACnot(f"site ({li}, {gi}) holds {circuit.layers[li][gi].kind}")
        by_layer.setdefault(li, set()).add(gi)

    roles = list(circuit.registry.roles)
    init = list(circuit.registry.init)
    edges = set(circuit.coupling.edges) if circuit.coupling is not None else None
    record = 1 + max((g.record for g in circuit.gates() if g.record is not None), default=-1)

    out: list[tuple[Gate, ...]] = []
    starts = []
    for li, layer in enumerate(circuit.layers):
        starts.append(len(out))
        chosen = by_layer.get(li)
        if not chosen:
            out.append(layer)
            continue
        keep = [g for gi, g in enumerate(layer) if gi not in chosen]
        frags = [[keep]] if keep else []
        for gi in sorted(chosen):
            c, tq = layer[gi].qubits
            a1, a2 = len(roles), len(roles) + 1
            roles += [f"bell[{li}.{gi}].a", f"bell[{li}.{gi}].b"]
            init += [0, 0]
            if edges is not None:
                edges |= {(min(c, a1), max(c, a1)), (a1, a2), (min(a2, tq), max(a2, tq))}
            frags.append(teleported_cnot(c, tq, a1, a2, record, record + 1))
            record += 2
        out.extend(tuple(row) for row in parallel(*frags) if row)
    starts.append(len(out))
    return Circuit(
        QubitRegistry(tuple(roles), tuple(init)),
        tuple(out),
        None if edges is None else CouplingGraph(frozenset(edges)),
        remap_stages(circuit.stages, starts),
        circuit.logical,
        circuit.final_bits,
    )
