"""Gate fusion pass.

Consecutive rotations whose targets fall into the same fixed qubit window
``[g*k, g*k + g)`` are merged into one :class:`FusedUnitaryBlock` (at most
``max_constituents`` each).  Runs of CZ gates become one
:class:`FusedCZBlock`, runs of CNOT gates one :class:`FusedCNOTBlock`.  Any
two-qubit gate and any layer boundary closes the open rotation block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .circuit import CNOT, CZ, Circuit, Rotation, rotation_matrix


@dataclass(frozen=True)
class FusionPolicy:
    group_size: int = 3
    max_constituents: int = 9

    def __post_init__(self):
        if not 1 <= self.group_size <= 3:
            raise ValueError("group_size must be 1, 2 or 3")
        if self.max_constituents < 1:
            raise ValueError("max_constituents must be positive")


@dataclass(frozen=True)
class FusedUnitaryBlock:
    """Rotations on a window of adjacent qubits, applied in one traversal.

    ``constituents`` holds ``(axis, local_position, param)`` in circuit
    order; local position ``p`` is bit ``p`` of the in-window index, i.e.
    qubit ``qubits[p]``.
    """

    qubits: tuple
    constituents: tuple

    def __post_init__(self):
        qs = self.qubits
        if not 1 <= len(qs) <= 3 or list(qs) != list(range(qs[0], qs[0] + len(qs))):
            raise ValueError(f"block qubits must be 1-3 adjacent indices, got {qs}")
        for _, pos, _ in self.constituents:
            if not 0 <= pos < len(qs):
                raise ValueError("constituent position outside the block window")

    @property
    def group_size(self) -> int:
        return len(self.qubits)

    @property
    def low_qubit(self) -> int:
        return self.qubits[0]

    @property
    def variational(self) -> bool:
        return any(p is not None for _, _, p in self.constituents)

    @property
    def params(self) -> list[int]:
        return [p for _, _, p in self.constituents]

    def gates(self) -> list[Rotation]:
        return [Rotation(a, self.qubits[pos], p) for a, pos, p in self.constituents]


@dataclass(frozen=True)
class FusedCZBlock:
    """A run of CZ gates; ``pairs`` keeps the source ``(control, target)`` order."""

    pairs: tuple

    @property
    def masks(self) -> list[int]:
        return [(1 << c) | (1 << t) for c, t in self.pairs]

    variational = False

    def gates(self) -> list[CZ]:
        return [CZ(c, t) for c, t in self.pairs]


@dataclass(frozen=True)
class FusedCNOTBlock:
    """An ordered run of CNOT gates."""

    pairs: tuple

    @property
    def control_masks(self) -> list[int]:
        return [1 << c for c, _ in self.pairs]

    @property
    def target_masks(self) -> list[int]:
        return [1 << t for _, t in self.pairs]

    variational = False

    def gates(self) -> list[CNOT]:
        return [CNOT(c, t) for c, t in self.pairs]


FusedOp = Union[FusedUnitaryBlock, FusedCZBlock, FusedCNOTBlock]


@dataclass(frozen=True)
class FusedCircuit:
    n_qubits: int
    ops: tuple
    n_params: int
    policy: FusionPolicy
    layer_starts: tuple = ()
    theta: np.ndarray | None = None

    @property
    def n_layers(self) -> int:
        return len(self.layer_starts)

    @property
    def n_variational(self) -> int:
        return sum(op.variational for op in self.ops)

    def flatten(self) -> list:
        return [g for op in self.ops for g in op.gates()]

    def layer_ranges(self) -> list[tuple[int, int]]:
        """``(start, stop)`` op-index range of each layer."""
        bounds = list(self.layer_starts) + [len(self.ops)]
        return list(zip(bounds[:-1], bounds[1:]))


def fuse_circuit(circuit: Circuit, policy: FusionPolicy | None = None) -> FusedCircuit:
    policy = policy or FusionPolicy()
    g, m, n = policy.group_size, policy.max_constituents, circuit.n_qubits
    ops: list = []
    op_layer_starts: list[int] = []
    layer_starts = set(circuit.layer_starts)

    block_group = None
    block_items: list = []
    run_kind = None
    run_pairs: list = []

    def close_block():
        nonlocal block_group, block_items
        if block_group is not None:
            lo = block_group * g
            ops.append(FusedUnitaryBlock(tuple(range(lo, min(lo + g, n))), tuple(block_items)))
        block_group, block_items = None, []

    def close_run():
        nonlocal run_kind, run_pairs
        if run_kind is not None:
            ops.append(run_kind(tuple(run_pairs)))
        run_kind, run_pairs = None, []

    for i, gate in enumerate(circuit.gates):
        if i in layer_starts:
            close_block()
            close_run()
            op_layer_starts.append(len(ops))
        if isinstance(gate, Rotation):
            close_run()
            group = gate.target // g
            if block_group != group or len(block_items) >= m:
                close_block()
                block_group = group
            block_items.append((gate.axis, gate.target - group * g, gate.param))
        else:
            close_block()
            kind = FusedCZBlock if isinstance(gate, CZ) else FusedCNOTBlock
            if run_kind is not kind:
                close_run()
                run_kind = kind
            run_pairs.append((gate.control, gate.target))
    close_block()
    close_run()
    # layer starting at the very end of the gate list (empty trailing layer)
    op_layer_starts.extend(len(ops) for s in layer_starts if s == len(circuit.gates))
    return FusedCircuit(n, tuple(ops), circuit.n_params, policy, tuple(op_layer_starts), circuit.theta)


def _embed(local: np.ndarray, pos: int, g: int) -> np.ndarray:
    return np.kron(np.kron(np.eye(1 << (g - 1 - pos)), local), np.eye(1 << pos))


def compose_block_unitary(block: FusedUnitaryBlock, theta) -> np.ndarray:
    """Dense ``2**g`` square product of the block's rotations, latest on the left."""
    theta = np.asarray(theta, dtype=np.float64)
    g = block.group_size
    u = np.eye(1 << g, dtype=np.complex128)
    for axis, pos, p in block.constituents:
        u = _embed(rotation_matrix(axis, theta[p]), pos, g) @ u
    return u


def format_fused(fc: FusedCircuit) -> str:
    """Human-readable listing with block boundaries."""
    starts = set(fc.layer_starts)
    out = [f"FusedCircuit n={fc.n_qubits} params={fc.n_params} "
           f"g={fc.policy.group_size} m={fc.policy.max_constituents} ops={len(fc.ops)}"]
    for i, op in enumerate(fc.ops):
        if i in starts:
            out.append(f"-- layer {fc.layer_starts.index(i)}")
        if isinstance(op, FusedUnitaryBlock):
            body = " ".join(f"R{a.lower()}(q{op.qubits[pos]},p{p})" for a, pos, p in op.constituents)
            out.append(f"[{i:4d}] unitary q{op.qubits[0]}..q{op.qubits[-1]} x{len(op.constituents)}: {body}")
        elif isinstance(op, FusedCZBlock):
            out.append(f"[{i:4d}] cz x{len(op.pairs)}: " + " ".join(f"({c},{t})" for c, t in op.pairs))
        else:
            out.append(f"[{i:4d}] cnot x{len(op.pairs)}: " + " ".join(f"({c}->{t})" for c, t in op.pairs))
    return "\n".join(out)

