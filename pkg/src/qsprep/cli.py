"""Command-line front end.

Machine output (JSON reports, QCF text, CSV tables) goes to stdout or ``--out``;
human messages go to stderr.  Exit codes: 0 ok, 2 bad input, 3 compile error,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import block, cliffordt, dense, memory, qcf, sparse
from .circuit import Circuit, lowered_depth
from .errors import BudgetUnreachable, ParseError, QSPrepError, SpecError, VerificationFailed
from .sim import SparseState, extract_logical, fidelity, from_logical, logical_action, max_terms

EXIT_SCHEMA, EXIT_COMPILE, EXIT_VERIFY = 2, 3, 4
DEFAULT_THRESHOLD = 1 - 1e-9


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _complex(v) -> complex:
    if isinstance(v, dict):
        return complex(float(v.get("re", 0)), float(v.get("im", 0)))
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise SpecError(f"complex value needs [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(f"not a number: {v!r}")
    return complex(v)


def _bitstring(s, n: int) -> int:
    """Bitstrings are written highest qubit first; plain integers are accepted too."""
    if isinstance(s, int) and not isinstance(s, bool):
        return s
    if not isinstance(s, str) or len(s) != n or set(s) - {"0", "1"}:
        raise SpecError(f"expected a {n}-character bitstring, got {s!r}")
    return int(s, 2)


def parse_state_spec(doc: dict):
    """Dense: ``{"amplitudes": [..]}``.  Sparse: ``{"n": .., "entries": [{"q", "re", "im"}]}``."""
    if not isinstance(doc, dict):
        raise SpecError("spec must be a JSON object")
    if "amplitudes" in doc:
        spec = dense.DenseStateSpec.from_amplitudes([_complex(a) for a in doc["amplitudes"]])
        spec.validate()
        return spec
    if "entries" in doc and "n" in doc:
        n = int(doc["n"])
        entries = []
        for e in doc["entries"]:
            entries.append((_bitstring(e["q"], n), complex(float(e.get("re", 0)), float(e.get("im", 0)))))
        return sparse.SparseStateSpec.build(n, entries)
    raise SpecError("spec needs 'amplitudes' (dense) or 'n' and 'entries' (sparse)")


def parse_oracle_spec(doc: dict):
    kind = doc.get("kind")
    index_bits, word_bits = int(doc["index_bits"]), int(doc.get("word_bits", 1))
    entries = doc.get("entries", [])
    if kind == "pum":
        ident = [np.eye(2)] * word_bits
        table = [list(ident) for _ in range(1 << index_bits)]
        for e in entries:
            mats = [np.array([[_complex(v) for v in row] for row in m]) for m in e["u"]]
            if len(mats) != word_bits:
                raise SpecError(f"entry {e['k']} needs {word_bits} matrices")
            table[int(e["k"])] = mats
        return memory.ProductUnitaryFunction.build(index_bits, word_bits, table)
    if kind in ("sbm", "qram"):
        pairs = [(int(e["k"]), _bitstring(e["word"], word_bits)) for e in entries]
        return memory.SparseBooleanFunction.from_pairs(index_bits, word_bits, pairs)
    if kind == "cqram":
        states = [[1, 0]] * (1 << index_bits)
        for e in entries:
            states[int(e["k"])] = [_complex(v) for v in e["state"]]
        return states
    raise SpecError(f"unknown oracle kind {kind!r}")


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_SCHEMA, f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_SCHEMA, f"{path} is not valid JSON: {exc}") from None


def _spec_from(path: str):
    try:
        return parse_state_spec(_load_json(path))
    except (SpecError, KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_SCHEMA, f"bad spec: {exc}") from None


@dataclass
class Compiled:
    circuit: Circuit
    target: np.ndarray | dict
    clifford_t: bool
    spec: object


def compile_spec(spec, args) -> Compiled:
    try:
        if isinstance(spec, dense.DenseStateSpec):
            if args.clifford_t:
                circuit, _ = cliffordt.compile_dense_cliffordT(spec, args.eps, args.reset_root)
                return Compiled(circuit, spec.vector(), True, spec)
            circuit, _, _ = dense.compile_dense(spec, args.reset_root)
            return Compiled(circuit, spec.vector(), False, spec)
        if args.clifford_t:
            raise CliError(EXIT_SCHEMA, "--clifford-t applies to dense specs only")
        circuit, _, _ = sparse.compile_sparse(spec, args.reset_root, args.schedule)
        return Compiled(circuit, spec.terms(), False, spec)
    except BudgetUnreachable as exc:
        raise CliError(EXIT_COMPILE, str(exc)) from None
    except SpecError as exc:
        raise CliError(EXIT_SCHEMA, f"bad spec: {exc}") from None
    except QSPrepError as exc:
        raise CliError(EXIT_COMPILE, f"compile failed: {exc}") from None


def _embed(circuit: Circuit, target):
    if isinstance(target, dict):
        base = circuit.expected_final_key()
        for q in circuit.logical:
            base &= ~(1 << q)
        terms = {}
        for k, a in target.items():
            key = base
            for m, q in enumerate(circuit.logical):
                if (k >> m) & 1:
                    key |= 1 << q
            terms[key] = a
        return SparseState.from_terms(circuit.num_qubits, terms)
    return from_logical(circuit.num_qubits, circuit.expected_final_key(), circuit.logical, target)


def run_report(compiled: Compiled, timing: bool = False, simulate_state: bool = True) -> dict:
    circuit = compiled.circuit
    t0 = time.perf_counter()
    report = {
        "depth": circuit.depth,
        "lowered_depth": lowered_depth(circuit),
        "qubits": {
            "total": circuit.num_qubits,
            "logical": len(circuit.logical),
            "ancilla": circuit.num_qubits - len(circuit.logical),
        },
        "gate_count": circuit.gate_count(),
        "stages": [{"name": n, "start": a, "stop": b} for n, a, b in circuit.stages],
    }
    if simulate_state:
        target = _embed(circuit, compiled.target)
        if compiled.clifford_t:
            err = cliffordt.measure_errors(compiled.spec, circuit)
            report["error"] = err.final
            report["rotation_error"] = err.rotations
            report["fidelity"] = err.fidelity
            report["ancilla_clean"] = None
        else:
            out_state, peak = max_terms(circuit)
            report["fidelity"] = min(1.0, fidelity(out_state, target))
            report["ancilla_clean"] = extract_logical(out_state, circuit.logical, circuit.expected_final_key())[1]
            report["peak_terms"] = peak
    if timing:
        report["wall_time"] = time.perf_counter() - t0
    return report


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def cmd_compile(args) -> int:
    spec = _spec_from(args.input)
    compiled = compile_spec(spec, args)
    text = qcf.emit_text(compiled.circuit)
    report = run_report(compiled, args.timing, simulate_state=False)
    if args.out:
        _write(args.out, text)
        if args.report:
            _write(args.report, _dumps(report) + "\n")
        else:
            sys.stdout.write(_dumps(report) + "\n")
    else:
        sys.stdout.write(text)
        if args.report:
            _write(args.report, _dumps(report) + "\n")
    return 0


def cmd_verify(args) -> int:
    spec = _spec_from(args.input)
    if args.circuit:
        try:
            with open(args.circuit) as fh:
                circuit = qcf.parse_text(fh.read())
        except OSError as exc:
            raise CliError(EXIT_SCHEMA, f"cannot read {args.circuit}: {exc}") from None
        except ParseError as exc:
            raise CliError(EXIT_VERIFY, f"replayed circuit is unreadable: {exc}") from None
        if args.clifford_t and isinstance(spec, dense.DenseStateSpec):
            compiled = Compiled(circuit, spec.vector(), True, spec)
        else:
            target = spec.vector() if isinstance(spec, dense.DenseStateSpec) else spec.terms()
            compiled = Compiled(circuit, target, False, spec)
        if len(circuit.logical) != spec.n:
            raise CliError(EXIT_VERIFY, "replayed circuit does not act on the spec's register")
    else:
        compiled = compile_spec(spec, args)
    try:
        report = run_report(compiled, args.timing)
    except (QSPrepError, KeyError, ValueError) as exc:
        raise CliError(EXIT_VERIFY, f"simulation failed: {exc}") from None
    if compiled.clifford_t:
        ok = report["error"] <= args.eps
    else:
        ok = report["fidelity"] >= args.threshold and bool(report["ancilla_clean"])
    report["pass"] = bool(ok)
    sys.stdout.write(_dumps(report) + "\n")
    if not ok:
        print("verification failed", file=sys.stderr)
        return EXIT_VERIFY
    return 0


def _values(cfg: dict, key: str) -> list[int]:
    v = cfg.get(key)
    if isinstance(v, dict):
        v = list(range(int(v["start"]), int(v["stop"]) + 1, int(v.get("step", 1))))
    if isinstance(v, int):
        v = [v]
    if not isinstance(v, list) or not v:
        raise CliError(EXIT_SCHEMA, f"sweep parameter {key!r} needs a nonempty list or range")
    return [int(x) for x in v]


def random_dense(n: int, rng: np.random.Generator) -> dense.DenseStateSpec:
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return dense.DenseStateSpec.from_amplitudes(v / np.linalg.norm(v))


def random_sparse(n: int, d: int, rng: np.random.Generator) -> sparse.SparseStateSpec:
    qs = set()
    while len(qs) < d:
        qs.add(int(rng.integers(0, 1 << n)))
    amps = rng.normal(size=d) + 1j * rng.normal(size=d)
    amps /= np.linalg.norm(amps)
    return sparse.SparseStateSpec.build(n, zip(sorted(qs), amps))


def sweep_rows(cfg: dict) -> tuple[list[str], list[list]]:
    mode = cfg.get("mode")
    seed = int(cfg.get("seed", 0))
    reps = int(cfg.get("repetitions", 1))
    schedule = cfg.get("schedule", "pipelined")
    if reps < 1:
        raise CliError(EXIT_SCHEMA, "repetitions must be positive")
    rows = []
    if mode == "dense":
        header = ["n", "rep", "qubits", "depth", "lowered_depth"]
        for n in _values(cfg, "n"):
            for r in range(reps):
                spec = random_dense(n, np.random.default_rng([seed, n, r]))
                c, _, _ = dense.compile_dense(spec)
                rows.append([n, r, c.num_qubits, c.depth, lowered_depth(c)])
    elif mode == "sparse":
        header = ["n", "d", "rep", "qubits", "depth", "lowered_depth"]
        for n in _values(cfg, "n"):
            for d in _values(cfg, "d"):
                for r in range(reps):
                    spec = random_sparse(n, d, np.random.default_rng([seed, n, d, r]))
                    c, _, _ = sparse.compile_sparse(spec, schedule=schedule)
                    rows.append([n, d, r, c.num_qubits, c.depth, lowered_depth(c)])
    elif mode == "pum":
        header = ["index_bits", "word_bits", "qubits", "depth", "lowered_depth"]
        for a in _values(cfg, "index_bits"):
            for w in _values(cfg, "word_bits"):
                x = np.array([[0, 1], [1, 0]])
                table = [[x if (k >> l) & 1 else np.eye(2) for l in range(w)] for k in range(1 << a)]
                c = memory.compile_pum(memory.ProductUnitaryFunction.build(a, w, table), schedule).circuit
                rows.append([a, w, c.num_qubits, c.depth, lowered_depth(c)])
    elif mode == "sbm":
        header = ["index_bits", "s", "word_bits", "qubits", "depth", "lowered_depth"]
        for n in _values(cfg, "index_bits"):
            for s in _values(cfg, "s"):
                for w in _values(cfg, "word_bits"):
                    rng = np.random.default_rng([seed, n, s, w])
                    ks = rng.choice(1 << n, size=min(s, 1 << n), replace=False)
                    pairs = [(int(k), int(rng.integers(1, 1 << w))) for k in ks]
                    c = memory.compile_sbm(memory.SparseBooleanFunction.from_pairs(n, w, pairs)).circuit
                    rows.append([n, s, w, c.num_qubits, c.depth, lowered_depth(c)])
    else:
        raise CliError(EXIT_SCHEMA, f"unknown sweep mode {mode!r}")
    return header, rows


def cmd_sweep(args) -> int:
    cfg = _load_json(args.input)
    if not isinstance(cfg, dict):
        raise CliError(EXIT_SCHEMA, "sweep config must be a JSON object")
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        header, rows = sweep_rows(cfg)
    except (SpecError, KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_SCHEMA, f"bad sweep config: {exc}") from None
    except QSPrepError as exc:
        raise CliError(EXIT_COMPILE, f"compile failed: {exc}") from None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    _write(args.out, buf.getvalue())
    return 0


def cmd_estimate(args) -> int:
    try:
        with open(args.input) as fh:
            h = block.parse_hamiltonian(fh.read())
    except OSError as exc:
        raise CliError(EXIT_SCHEMA, f"cannot read {args.input}: {exc}") from None
    except SpecError as exc:
        raise CliError(EXIT_SCHEMA, f"bad Hamiltonian: {exc}") from None
    if args.t < 0 or not 0 < args.eps <= 1:
        raise CliError(EXIT_SCHEMA, "need t >= 0 and 0 < eps <= 1")
    verify = h.n <= args.verify_max_n
    try:
        art = block.assemble_block_encoding(h, args.schedule, verify=verify)
    except VerificationFailed as exc:
        raise CliError(EXIT_VERIFY, f"block-encoding check failed: {exc}") from None
    except QSPrepError as exc:
        raise CliError(EXIT_COMPILE, f"compile failed: {exc}") from None
    est = block.estimate_qubitization(h, args.t, args.eps, art)
    out = est.to_dict()
    out["block_encoding"] = {
        "verified": verify,
        "max_deviation": art.deviation if verify else None,
        "hermitian": art.hermitian,
        "ancilla_qubits": len(art.ancilla),
        "system_qubits": len(art.system),
        "stage_depths": art.depths,
    }
    sys.stdout.write(_dumps(out) + "\n")
    return 0


def oracle_deviation(kind: str, obj, schedule: str) -> tuple[float, bool]:
    if kind == "pum":
        oc = memory.compile_pum(obj, schedule)
        ref = memory.pum_select_matrix(obj)
    elif kind in ("sbm", "qram"):
        oc = memory.compile_sbm(obj)
        ref = memory.sbm_select_matrix(obj)
    else:
        oc = memory.compile_qram_continuous(obj, schedule)
        m, clean = logical_action(oc.circuit)
        d = 1 << len(oc.index)
        # column k (word |0>) must hold |k>|D_k>
        dev = 0.0
        for k, s in enumerate(obj):
            want = np.zeros(2 * d, dtype=complex)
            want[k], want[k + d] = s[0], s[1]
            dev = max(dev, float(np.max(np.abs(m[:, k] - want))))
        return dev, clean
    m, clean = logical_action(oc.circuit)
    return float(np.max(np.abs(m - ref))), clean


def cmd_oracle_check(args) -> int:
    results = []
    if args.input:
        doc = _load_json(args.input)
        try:
            obj = parse_oracle_spec(doc)
        except (SpecError, KeyError, TypeError, ValueError) as exc:
            raise CliError(EXIT_SCHEMA, f"bad oracle spec: {exc}") from None
        cases = [(doc["kind"], obj)]
    else:
        from scipy.stats import unitary_group

        rng = np.random.default_rng(args.seed or 0)
        cases = []
        for a, w in ((1, 1), (2, 2), (3, 1)):
            table = [[unitary_group.rvs(2, random_state=rng) for _ in range(w)] for _ in range(1 << a)]
            cases.append(("pum", memory.ProductUnitaryFunction.build(a, w, table)))
        for n, s, w in ((3, 2, 2), (4, 4, 3)):
            ks = rng.choice(1 << n, size=s, replace=False)
            pairs = [(int(k), int(rng.integers(1, 1 << w))) for k in ks]
            cases.append(("sbm", memory.SparseBooleanFunction.from_pairs(n, w, pairs)))
    ok = True
    for kind, obj in cases:
        try:
            dev, clean = oracle_deviation(kind, obj, args.schedule)
        except QSPrepError as exc:
            raise CliError(EXIT_COMPILE, f"compile failed: {exc}") from None
        passed = dev <= 1e-10 and clean
        ok &= passed
        results.append({"kind": kind, "max_deviation": dev, "ancilla_clean": clean, "pass": passed})
    sys.stdout.write(_dumps({"cases": results, "pass": ok}) + "\n")
    return 0 if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsprep", description="State-preparation circuit compiler")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spec=True):
        sp.add_argument("--input", required=spec, help="JSON input file")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--schedule", choices=("sequential", "pipelined"), default="pipelined")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--timing", action="store_true", help="include wall time (breaks byte identity)")

    for name in ("compile", "verify"):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--clifford-t", action="store_true")
        sp.add_argument("--eps", type=float, default=0.3)
        sp.add_argument("--reset-root", action=argparse.BooleanOptionalAction, default=True)
        if name == "compile":
            sp.add_argument("--report", help="write the JSON report here")
        else:
            sp.add_argument("--circuit", help="replay this QCF file instead of compiling")
            sp.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    sp = sub.add_parser("sweep")
    common(sp)
    sp = sub.add_parser("estimate")
    common(sp)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--verify-max-n", type=int, default=6)
    sp = sub.add_parser("oracle-check")
    common(sp, spec=False)
    return p


COMMANDS = {
    "compile": cmd_compile,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "estimate": cmd_estimate,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code else 0
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
