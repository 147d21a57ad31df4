"""Brute-force references for testing.

Nothing here touches the kernels, the fusion pass or batching: states are
plain complex vectors, gates are dense 2x2 or 4x4 matrices contracted with
``numpy.einsum`` and observables are materialised as dense matrices.  Slow on
purpose.
"""

from __future__ import annotations

import numpy as np

from .circuit import CNOT, CZ, PAULI, Circuit, PauliString, Rotation, rotation_matrix

MAX_DENSE_QUBITS = 12

_CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)
# basis order |control, target>
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)


def _guard(n: int) -> None:
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense oracle limited to {MAX_DENSE_QUBITS} qubits, got {n}")


def _as_tensor(vec: np.ndarray, n: int) -> np.ndarray:
    # axis 0 is the batch; axis 1+k is qubit n-1-k (big-endian reshape of a little-endian index)
    return vec.reshape((-1,) + (2,) * n)


def _apply_1q(vec, mat, q, n):
    psi = _as_tensor(vec, n)
    ax = n - q
    out = np.tensordot(mat, psi, axes=([1], [ax]))
    return np.moveaxis(out, 0, ax).reshape(vec.shape)


def _apply_2q(vec, mat, q_first, q_second, n):
    """``mat`` in the basis ``|q_first, q_second>``."""
    psi = _as_tensor(vec, n)
    a, b = n - q_first, n - q_second
    m = mat.reshape(2, 2, 2, 2)
    out = np.tensordot(m, psi, axes=([2, 3], [a, b]))
    return np.moveaxis(out, [0, 1], [a, b]).reshape(vec.shape)


def gate_matrix(gate, theta) -> tuple[np.ndarray, tuple]:
    """Dense matrix of a gate and the qubits it acts on (first = most significant)."""
    if isinstance(gate, Rotation):
        return rotation_matrix(gate.axis, theta[gate.param]), (gate.target,)
    if isinstance(gate, CZ):
        return _CZ, (gate.control, gate.target)
    if isinstance(gate, CNOT):
        return _CNOT, (gate.control, gate.target)
    raise TypeError(f"unsupported gate {gate!r}")


def apply_gate(vec: np.ndarray, gate, theta, n: int) -> np.ndarray:
    """Apply one gate to a vector, or to each row of a ``(batch, 2**n)`` array."""
    mat, qs = gate_matrix(gate, theta)
    if len(qs) == 1:
        return _apply_1q(vec, mat, qs[0], n)
    return _apply_2q(vec, mat, qs[0], qs[1], n)


def simulate(circuit: Circuit, vec: np.ndarray, theta=None) -> np.ndarray:
    """Final state of one sample (or each row of a batch), gate by gate."""
    theta = circuit.theta if theta is None else np.asarray(theta, dtype=np.float64)
    out = np.asarray(vec, dtype=np.complex128).copy()
    for gate in circuit.gates:
        out = apply_gate(out, gate, theta, circuit.n_qubits)
    return out


def circuit_to_matrix(circuit: Circuit, theta=None) -> np.ndarray:
    """``U = U_M ... U_1`` as a dense ``2**n`` square matrix."""
    n = circuit.n_qubits
    _guard(n)
    theta = circuit.theta if theta is None else np.asarray(theta, dtype=np.float64)
    # row k of the simulated batch is U|k>, i.e. column k of U
    return simulate(circuit, np.eye(1 << n, dtype=np.complex128), theta).T


def pauli_matrix(pauli: PauliString) -> np.ndarray:
    """Dense operator as a Kronecker product, qubit ``n-1`` leftmost."""
    _guard(pauli.n_qubits)
    out = np.ones((1, 1), dtype=np.complex128)
    for ch in pauli.label:
        out = np.kron(out, PAULI[ch])
    return out


def expectation(vec: np.ndarray, pauli: PauliString) -> float:
    return float(np.real(np.vdot(vec, pauli_matrix(pauli) @ vec)))


class ForwardCounter:
    """Counts full circuit executions made by the oracles."""

    def __init__(self):
        self.executions = 0


def loss(circuit: Circuit, states: np.ndarray, theta, pauli: PauliString,
         counter: ForwardCounter | None = None) -> float:
    """Sum over samples (rows of ``states``) of ``<O>`` after the circuit."""
    if counter is not None:
        counter.executions += 1
    out = simulate(circuit, np.atleast_2d(states), theta)
    return float(np.real(np.vdot(out, out @ pauli_matrix(pauli).T)))


def fd_gradient(circuit: Circuit, states: np.ndarray, theta, pauli: PauliString,
                h: float = 1e-5) -> np.ndarray:
    """Central differences ``(L(t + h e_j) - L(t - h e_j)) / 2h``."""
    if h <= 0:
        raise ValueError("step must be positive")
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for j in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[j] += h
        tm[j] -= h
        grad[j] = (loss(circuit, states, tp, pauli) - loss(circuit, states, tm, pauli)) / (2 * h)
    return grad


def parameter_shift_gradient(circuit: Circuit, states: np.ndarray, theta, pauli: PauliString,
                             counter: ForwardCounter | None = None) -> np.ndarray:
    """``(L(t + pi/2 e_j) - L(t - pi/2 e_j)) / 2``, exact for Pauli rotations."""
    for gate in circuit.gates:
        if not isinstance(gate, (Rotation, CZ, CNOT)):
            raise TypeError(f"parameter shift needs Pauli rotations, got {gate!r}")
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for j in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[j] += np.pi / 2
        tm[j] -= np.pi / 2
        grad[j] = 0.5 * (loss(circuit, states, tp, pauli, counter)
                         - loss(circuit, states, tm, pauli, counter))
    return grad
