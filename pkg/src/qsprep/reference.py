"""Dense state-vector reference simulator for small registers (<= 10 qubits).

Written independently of :mod:`qsprep.sim` (own gate matrices, tensor
contraction instead of key remapping) so the two can cross-check each other.
"""

from __future__ import annotations

import numpy as np

from .circuit import Circuit, Gate
from .errors import DimensionMismatch, UnresolvedMeasurement

MAX_QUBITS = 10

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_P0 = np.diag([1, 0]).astype(complex)
_P1 = np.diag([0, 1]).astype(complex)


def gate_unitary(g: Gate) -> np.ndarray:
    """Unitary on the gate's operands; operand 0 is the most significant factor."""
    k = g.kind
    if k == "X":
        return _X
    if k == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    if k == "T":
        return np.diag([1, np.exp(0.25j * np.pi)])
    if k == "TDG":
        return np.diag([1, np.exp(-0.25j * np.pi)])
    if k == "PH":
        return np.diag([1, np.exp(1j * g.theta)])
    if k == "RY":
        return _expm_y(g.theta)
    if k == "CNOT":
        return np.kron(_P0, _I) + np.kron(_P1, _X)
    if k == "SWAP":
        return sum(np.kron(e, e.conj().T) for e in _units())
    if k in ("PSWAP", "PSWAPDG"):
        # |00> fixed, |11> swaps with |01>; the single-excitation block rotates.
        s, c = np.sin(g.theta), np.cos(g.theta)
        u = np.zeros((4, 4), dtype=complex)
        u[0, 0] = 1
        u[3, 1] = 1
        u[1, 2], u[2, 2] = s, c
        u[1, 3], u[2, 3] = c, -s
        return u if k == "PSWAP" else u.T
    if k == "CU":
        return np.kron(_P0, _I) + np.kron(_P1, np.array(g.matrix).reshape(2, 2))
    if k == "CCNOT":
        u = np.eye(8, dtype=complex)
        u[[6, 7]] = u[[7, 6]]
        return u
    if k == "CSWAP":
        u = np.eye(8, dtype=complex)
        u[[5, 6]] = u[[6, 5]]
        return u
    raise UnresolvedMeasurement(f"{k} has no unitary")


def _expm_y(theta: float) -> np.ndarray:
    y = np.array([[0, -1j], [1j, 0]])
    w, v = np.linalg.eigh(y)
    return (v * np.exp(-0.5j * theta * w)) @ v.conj().T


def _units():
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1
            yield e


def apply(vector: np.ndarray, g: Gate, num_qubits: int) -> np.ndarray:
    u = gate_unitary(g)
    k = len(g.qubits)
    # numpy axis a corresponds to qubit num_qubits-1-a (little-endian keys)
    axes = [num_qubits - 1 - q for q in g.qubits]
    psi = vector.reshape([2] * num_qubits)
    psi = np.tensordot(u.reshape([2] * (2 * k)), psi, axes=(list(range(k, 2 * k)), axes))
    psi = np.moveaxis(psi, list(range(k)), axes)
    return psi.reshape(-1)


def simulate(circuit: Circuit, vector: np.ndarray | None = None) -> np.ndarray:
    q = circuit.num_qubits
    if q > MAX_QUBITS:
        raise DimensionMismatch(f"reference simulator limited to {MAX_QUBITS} qubits")
    if vector is None:
        vector = np.zeros(1 << q, dtype=complex)
        vector[circuit.registry.initial_key()] = 1
    psi = np.asarray(vector, dtype=complex)
    for layer in circuit.layers:
        for g in layer:
            psi = apply(psi, g, q)
    return psi


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    q = circuit.num_qubits
    cols = []
    for k in range(1 << q):
        e = np.zeros(1 << q, dtype=complex)
        e[k] = 1
        cols.append(simulate(circuit, e))
    return np.stack(cols, axis=1)
