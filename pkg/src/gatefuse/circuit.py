"""Gate IR, rotation algebra, the hardware-efficient ansatz and Pauli strings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .statevec import random_angles

AXES = ("X", "Y", "Z")

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@dataclass(frozen=True)
class Rotation:
    """``exp(-i theta/2 P)`` on ``target`` with angle ``theta[param]``."""

    axis: str
    target: int
    param: int

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"rotation axis must be one of {AXES}, got {self.axis!r}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,)


@dataclass(frozen=True)
class CZ:
    control: int
    target: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.control, self.target)


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.control, self.target)


Gate = Union[Rotation, CZ, CNOT]


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over ``n_qubits`` with ``n_params`` angles.

    ``layer_starts`` lists gate indices at which a repeating layer begins
    (empty when the circuit has no layer structure).  ``theta`` is the
    default parameter vector; every operation also accepts an explicit one.
    """

    n_qubits: int
    gates: tuple
    n_params: int
    layer_starts: tuple = ()
    theta: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "layer_starts", tuple(self.layer_starts))
        n = self.n_qubits
        if n < 1:
            raise ValueError("circuit needs at least one qubit")
        seen = np.zeros(self.n_params, dtype=np.int64)
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < n:
                    raise ValueError(f"{g} touches qubit {q} outside 0..{n - 1}")
            if isinstance(g, (CZ, CNOT)):
                if g.control == g.target:
                    raise ValueError(f"{g} has identical control and target")
            elif isinstance(g, Rotation):
                if not 0 <= g.param < self.n_params:
                    raise ValueError(f"{g} parameter index out of range")
                seen[g.param] += 1
            else:
                raise TypeError(f"unsupported gate {g!r}")
        if self.n_params and not np.all(seen == 1):
            bad = np.flatnonzero(seen != 1)[:5].tolist()
            raise ValueError(f"parameters must each be used by exactly one rotation; offending {bad}")
        if any(not 0 <= s <= len(self.gates) for s in self.layer_starts):
            raise ValueError("layer start outside gate list")
        if list(self.layer_starts) != sorted(set(self.layer_starts)):
            raise ValueError("layer starts must be strictly increasing")
        if self.theta is not None:
            theta = np.asarray(self.theta, dtype=np.float64)
            if theta.shape != (self.n_params,):
                raise ValueError("theta length does not match parameter count")
            object.__setattr__(self, "theta", theta)

    @property
    def n_layers(self) -> int:
        return len(self.layer_starts)

    def count(self, kind) -> int:
        return sum(isinstance(g, kind) for g in self.gates)

    def with_theta(self, theta) -> "Circuit":
        return Circuit(self.n_qubits, self.gates, self.n_params, self.layer_starts, theta)


def check_theta(circuit_or_params, theta) -> np.ndarray:
    n_params = getattr(circuit_or_params, "n_params", circuit_or_params)
    if theta is None:
        theta = getattr(circuit_or_params, "theta", None)
        if theta is None:
            raise ValueError("no parameter vector supplied")
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (n_params,):
        raise ValueError(f"expected {n_params} parameters, got shape {theta.shape}")
    return theta


def rotation_matrix(axis: str, theta: float) -> np.ndarray:
    """``cos(theta/2) I - i sin(theta/2) P``."""
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    return np.cos(theta / 2) * PAULI["I"] - 1j * np.sin(theta / 2) * PAULI[axis]


def rotation_derivative(axis: str, theta: float) -> np.ndarray:
    """``d/dtheta`` of :func:`rotation_matrix`: ``-sin/2 I - i cos/2 P``."""
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    return -0.5 * np.sin(theta / 2) * PAULI["I"] - 0.5j * np.cos(theta / 2) * PAULI[axis]


def build_hea(
    n: int,
    d: int,
    *,
    theta=None,
    seed: int | None = 0,
    layer_width: int | None = None,
) -> Circuit:
    """Hardware-efficient ansatz: ``d`` layers of Rx, Ry, Rz per qubit, then a CZ ring.

    Within a layer the rotations run qubit by qubit (``Rx q, Ry q, Rz q``),
    followed by ``CZ(i, (i+1) mod w)`` for ``i`` ascending.  For ``w == 2``
    the ring has a single CZ.

    ``layer_width`` builds the layer for ``w`` logical qubits and folds
    logical qubit ``l`` onto physical qubit ``l % n``.  This keeps the exact
    gate, parameter and fused-block counts of a wide layer while simulating
    a small register.  Parameters default to uniform ``[0, 2pi)`` drawn from
    ``seed``.
    """
    if n < 2:
        raise ValueError("the ansatz needs at least two qubits")
    if d < 0:
        raise ValueError("layer count must be non-negative")
    w = n if layer_width is None else layer_width
    if w < n:
        raise ValueError("layer_width cannot be smaller than the register")
    ring = [(0, 1)] if w == 2 else [(i, (i + 1) % w) for i in range(w)]
    gates: list = []
    starts = []
    p = 0
    for _ in range(d):
        starts.append(len(gates))
        for q in range(w):
            for axis in AXES:
                gates.append(Rotation(axis, q % n, p))
                p += 1
        gates.extend(CZ(c % n, t % n) for c, t in ring)
    if theta is None and seed is not None:
        theta = random_angles(p, seed)
    return Circuit(n, gates, p, starts, theta)


# -- Pauli strings ---------------------------------------------------------


@dataclass(frozen=True)
class PauliString:
    """Pauli product encoded with ``Y = i X Z``.

    Bit ``q`` of ``x_mask`` is set where the factor is X or Y, bit ``q`` of
    ``z_mask`` where it is Z or Y.
    """

    n_qubits: int
    x_mask: int
    z_mask: int
    y_count: int

    def __post_init__(self):
        full = (1 << self.n_qubits) - 1
        if self.x_mask & ~full or self.z_mask & ~full:
            raise ValueError("mask wider than the register")
        if self.y_count != bin(self.x_mask & self.z_mask).count("1"):
            raise ValueError("y_count must equal popcount(x_mask & z_mask)")

    @property
    def label(self) -> str:
        chars = []
        for q in reversed(range(self.n_qubits)):
            x, z = (self.x_mask >> q) & 1, (self.z_mask >> q) & 1
            chars.append("IZXY"[x * 2 + z])
        return "".join(chars)

    def factor(self, q: int) -> str:
        return self.label[self.n_qubits - 1 - q]


def parse_pauli(label: str, n: int | None = None) -> PauliString:
    """Parse e.g. ``"IXYZ"``; the leftmost character acts on qubit ``n-1``."""
    label = label.strip().upper()
    if n is not None and len(label) != n:
        raise ValueError(f"label {label!r} has length {len(label)}, expected {n}")
    if not label:
        raise ValueError("empty Pauli label")
    n = len(label)
    x_mask = z_mask = 0
    for pos, ch in enumerate(label):
        q = n - 1 - pos
        if ch not in "IXYZ":
            raise ValueError(f"invalid Pauli character {ch!r}")
        if ch in "XY":
            x_mask |= 1 << q
        if ch in "ZY":
            z_mask |= 1 << q
    return PauliString(n, x_mask, z_mask, label.count("Y"))


def hea_observable(n: int) -> str:
    """``IXYZ`` repeated and truncated to ``n`` characters."""
    return ("IXYZ" * (n // 4 + 1))[:n]


# -- text serialisation ----------------------------------------------------


def circuit_to_text(circuit: Circuit) -> str:
    """Line format: ``qubits N`` / ``params M`` header, ``layer`` markers, one gate per line."""
    lines = [f"qubits {circuit.n_qubits}", f"params {circuit.n_params}"]
    starts = set(circuit.layer_starts)
    for i, g in enumerate(circuit.gates):
        if i in starts:
            lines.append("layer")
        if isinstance(g, Rotation):
            lines.append(f"r{g.axis.lower()} q{g.target} p{g.param}")
        else:
            name = "cz" if isinstance(g, CZ) else "cnot"
            lines.append(f"{name} q{g.control} q{g.target}")
    if len(circuit.gates) in starts:
        lines.append("layer")
    return "\n".join(lines) + "\n"


def _operand(token: str, prefix: str, lineno: int) -> int:
    if not token.startswith(prefix) or not token[1:].isdigit():
        raise ValueError(f"line {lineno}: expected {prefix}<int>, got {token!r}")
    return int(token[1:])


def circuit_from_text(text: str) -> Circuit:
    n = m = None
    gates: list = []
    starts: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        op = tok[0].lower()
        if op == "qubits":
            n = int(tok[1])
        elif op == "params":
            m = int(tok[1])
        elif op == "layer":
            starts.append(len(gates))
        elif op in ("rx", "ry", "rz"):
            gates.append(Rotation(op[1].upper(), _operand(tok[1], "q", lineno), _operand(tok[2], "p", lineno)))
        elif op in ("cz", "cnot"):
            cls = CZ if op == "cz" else CNOT
            gates.append(cls(_operand(tok[1], "q", lineno), _operand(tok[2], "q", lineno)))
        else:
            raise ValueError(f"line {lineno}: unknown instruction {op!r}")
    if n is None or m is None:
        raise ValueError("missing 'qubits' or 'params' header")
    return Circuit(n, gates, m, starts)
