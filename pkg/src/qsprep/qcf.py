"""QCF v1 text circuit format.

Layout::

    qcf 1 qubits=3
    # stage prep 0 2
    # logical 2 1
    # final 0=0
    role H[0][0] = 0 init=1
    ...
    coupling 2
    edge 0 1
    edge 1 2
    layer
      CNOT 0 1
      RY 2 theta=7.8539816339744828e-01

Floats carry 17 significant digits, so emission followed by parsing is exact and
re-emission is byte-identical.
"""

from __future__ import annotations

import re

from .circuit import ARITY, Circuit, CouplingGraph, Gate, QubitRegistry
from .errors import ParseError

HEADER = re.compile(r"^qcf 1 qubits=(\d+)$")
ROLE = re.compile(r"^role (\S+) = (\d+) init=([01])$")


def _f(x: float) -> str:
    return f"{x:.16e}"


def emit_gate(g: Gate) -> str:
    parts = [g.kind, *map(str, g.qubits)]
    if g.theta is not None:
        parts.append(f"theta={_f(g.theta)}")
    if g.matrix is not None:
        parts.append("u=" + ";".join(f"{_f(z.real)},{_f(z.imag)}" for z in g.matrix))
    if g.record is not None:
        parts.append(f"rec={g.record}")
    return "  " + " ".join(parts)


def emit_text(circuit: Circuit) -> str:
    out = [f"qcf 1 qubits={circuit.num_qubits}"]
    for name, start, stop in circuit.stages:
        out.append(f"# stage {name} {start} {stop}")
    if circuit.logical:
        out.append("# logical " + " ".join(map(str, circuit.logical)))
    if circuit.final_bits:
        out.append("# final " + " ".join(f"{q}={b}" for q, b in circuit.final_bits))
    reg = circuit.registry
    for i, (role, b) in enumerate(zip(reg.roles, reg.init)):
        out.append(f"role {role} = {i} init={b}")
    if circuit.coupling is not None:
        edges = sorted(circuit.coupling.edges)
        out.append(f"coupling {len(edges)}")
        out.extend(f"edge {a} {b}" for a, b in edges)
    for layer in circuit.layers:
        out.append("layer")
        out.extend(emit_gate(g) for g in layer)
    return "\n".join(out) + "\n"


def _int(tok: str, lineno: int, what: str) -> int:
    if not tok.isdigit():
        raise ParseError(lineno, f"expected {what}, got {tok!r}")
    return int(tok)


def _float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(lineno, f"bad float {tok!r}") from None


def parse_gate(line: str, lineno: int) -> Gate:
    toks = line.split()
    kind = toks[0]
    if kind not in ARITY:
        raise ParseError(lineno, f"unknown gate kind {kind!r}")
    n = ARITY[kind]
    if len(toks) < 1 + n:
        raise ParseError(lineno, f"{kind} needs {n} operands")
    qubits = tuple(_int(t, lineno, "qubit id") for t in toks[1 : 1 + n])
    theta = matrix = record = None
    for tok in toks[1 + n :]:
        key, sep, val = tok.partition("=")
        if not sep:
            raise ParseError(lineno, f"unexpected token {tok!r}")
        if key == "theta" and theta is None:
            theta = _float(val, lineno)
        elif key == "u" and matrix is None:
            entries = val.split(";")
            if len(entries) != 4:
                raise ParseError(lineno, "u= needs 4 complex entries")
            vals = []
            for e in entries:
                re_im = e.split(",")
                if len(re_im) != 2:
                    raise ParseError(lineno, f"bad complex entry {e!r}")
                vals.append(complex(_float(re_im[0], lineno), _float(re_im[1], lineno)))
            matrix = tuple(vals)
        elif key == "rec" and record is None:
            record = _int(val, lineno, "record id")
        else:
            raise ParseError(lineno, f"unexpected attribute {key!r}")
    try:
        return Gate(kind, qubits, theta=theta, matrix=matrix, record=record)
    except ValueError as exc:
        raise ParseError(lineno, str(exc)) from None


def parse_text(text: str) -> Circuit:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError(1, "empty document")
    m = HEADER.match(lines[0])
    if not m:
        raise ParseError(1, "missing 'qcf 1 qubits=<Q>' header")
    num_qubits = int(m.group(1))
    stages, logical, final = [], (), ()
    roles: list[str] = []
    init: list[int] = []
    edges: list[tuple[int, int]] | None = None
    expected_edges = 0
    layers: list[list[Gate]] = []
    section = "meta"
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("# "):
            if section != "meta":
                raise ParseError(lineno, "metadata after registry")
            toks = line[2:].split()
            if not toks:
                raise ParseError(lineno, "empty metadata line")
            if toks[0] == "stage" and len(toks) == 4:
                stages.append((toks[1], _int(toks[2], lineno, "layer"), _int(toks[3], lineno, "layer")))
            elif toks[0] == "logical" and not logical:
                logical = tuple(_int(t, lineno, "qubit id") for t in toks[1:])
            elif toks[0] == "final" and not final:
                pairs = []
                for t in toks[1:]:
                    q, sep, b = t.partition("=")
                    if not sep or b not in ("0", "1"):
                        raise ParseError(lineno, f"bad final bit {t!r}")
                    pairs.append((_int(q, lineno, "qubit id"), int(b)))
                final = tuple(pairs)
            else:
                raise ParseError(lineno, f"unknown metadata {toks[0]!r}")
        elif line.startswith("role "):
            if section not in ("meta", "role"):
                raise ParseError(lineno, "role after coupling or layers")
            section = "role"
            m = ROLE.match(line)
            if not m:
                raise ParseError(lineno, "malformed role line")
            if int(m.group(2)) != len(roles):
                raise ParseError(lineno, f"role ids must be consecutive, expected {len(roles)}")
            roles.append(m.group(1))
            init.append(int(m.group(3)))
        elif line.startswith("coupling "):
            if section not in ("meta", "role") or edges is not None:
                raise ParseError(lineno, "misplaced coupling block")
            section = "coupling"
            expected_edges = _int(line.split(" ", 1)[1], lineno, "edge count")
            edges = []
        elif line.startswith("edge "):
            if section != "coupling":
                raise ParseError(lineno, "edge outside coupling block")
            toks = line.split()
            if len(toks) != 3:
                raise ParseError(lineno, "edge needs two ids")
            a, b = _int(toks[1], lineno, "qubit id"), _int(toks[2], lineno, "qubit id")
            if a >= num_qubits or b >= num_qubits or a == b:
                raise ParseError(lineno, f"bad edge {a} {b}")
            edges.append((a, b))
        elif line == "layer":
            section = "layers"
            layers.append([])
        elif line.startswith("  "):
            if section != "layers":
                raise ParseError(lineno, "gate outside a layer")
            layers[-1].append(parse_gate(line[2:], lineno))
        else:
            raise ParseError(lineno, f"unrecognized line {line!r}")
    if len(roles) != num_qubits:
        raise ParseError(len(lines), f"header says {num_qubits} qubits, registry has {len(roles)}")
    if edges is not None and len(edges) != expected_edges:
        raise ParseError(len(lines), f"coupling block declares {expected_edges} edges, found {len(edges)}")
    for i, layer in enumerate(layers):
        if not layer:
            raise ParseError(len(lines), f"layer {i} is empty")
    try:
        return Circuit(
            QubitRegistry(tuple(roles), tuple(init)),
            tuple(tuple(layer) for layer in layers),
            None if edges is None else CouplingGraph.from_pairs(edges),
            tuple(stages),
            logical,
            final,
        )
    except ValueError as exc:
        raise ParseError(len(lines), str(exc)) from None
