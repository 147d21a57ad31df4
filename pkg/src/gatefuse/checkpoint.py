"""Layer-block gradient checkpointing and the closed-form memory model.

A circuit of ``d`` repeating layers is cut into ``d / b`` checkpoint blocks
of ``b`` layers.  The forward pass keeps only each block's input state; the
backward pass re-runs one block at a time to rebuild its ledger, walks it
backwards and frees it.  The stored-vector peak is then

    (units per layer) * b + d / b

where a layer costs ``l_var + l_const`` units for the per-gate executor and
one unit per fused variational block (half a unit narrowed) for the fused
executor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .accounting import MODES, MemoryAccountant, StateLedger, TraversalCounter
from .circuit import Circuit, PauliString, check_theta
from .engine import (
    _PingPong,
    _check_state,
    expectation,
    naive_backward,
    naive_forward,
    run_backward_ops,
    run_forward_ops,
    seed_adjoint,
)
from .fusion import FusedCircuit
from .statevec import BatchedState, check_capacity

__all__ = [
    "CheckpointPlan",
    "MemoryAccountant",
    "divisors",
    "fused_layer_units",
    "model_fused",
    "model_native",
    "nearest_divisor_block",
    "optimal_block",
    "plan_checkpoints",
    "run_checkpointed",
    "run_checkpointed_naive",
]


def _check_division(b, d):
    if b < 1 or d < 1:
        raise ValueError("block size and layer count must be positive")
    if d % b:
        raise ValueError(f"block size {b} does not divide layer count {d}")


def model_native(b: int, l_var: int, l_const: int, d: int) -> float:
    """Stored vectors for per-gate checkpointing: ``(l_var + l_const) b + d / b``."""
    _check_division(b, d)
    return (l_var + l_const) * b + d // b


def model_fused(b: int, l_var: int, alpha: int, d: int, narrowed: bool = False) -> float:
    """Stored vectors for fused checkpointing: ``ceil(l_var / alpha) b + d / b``.

    ``alpha`` is the number of rotations merged per fused block.  With
    ``narrowed`` each block output is kept at half width, which halves the
    per-layer term; the ceiling is taken over whole blocks first, so 60
    rotations in blocks of 9 cost 3.5 units per layer, not ``ceil(60/18)``.
    """
    _check_division(b, d)
    if l_var < 0 or alpha < 1:
        raise ValueError("l_var must be non-negative and alpha positive")
    per_layer = math.ceil(l_var / alpha) * (0.5 if narrowed else 1)
    return per_layer * b + d // b


def optimal_block(l_eff: float, d: int) -> float:
    """Minimiser ``sqrt(d / l_eff)`` of ``l_eff * b + d / b`` over real ``b``."""
    if l_eff <= 0 or d <= 0:
        raise ValueError("l_eff and d must be positive")
    return math.sqrt(d / l_eff)


def divisors(d: int) -> list[int]:
    if d < 1:
        raise ValueError("d must be positive")
    return [b for b in range(1, d + 1) if d % b == 0]


def nearest_divisor_block(l_eff: float, d: int) -> int:
    """Divisor of ``d`` closest to the real optimum (the smaller one on ties)."""
    target = optimal_block(l_eff, d)
    return min(divisors(d), key=lambda b: (abs(b - target), b))


def fused_layer_units(fc: FusedCircuit, mode: str = "full") -> float:
    """Ledger units one layer of ``fc`` contributes; layers must agree."""
    counts = {sum(fc.ops[i].variational for i in range(a, z)) for a, z in fc.layer_ranges()}
    if len(counts) != 1:
        raise ValueError("layers differ in their number of variational blocks")
    return counts.pop() * (0.5 if mode == "mem_save" else 1)


@dataclass(frozen=True)
class CheckpointPlan:
    """``d`` layers in ``d / b`` blocks; ``blocks`` are ``(start, stop)`` op or gate ranges."""

    d: int
    b: int
    blocks: tuple

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)


def plan_checkpoints(circuit, b: int) -> CheckpointPlan:
    """Block ranges for a :class:`FusedCircuit` (op indices) or :class:`Circuit` (gate indices)."""
    d = circuit.n_layers
    if d == 0:
        raise ValueError("checkpointing needs a circuit with layer structure")
    _check_division(b, d)
    total = len(circuit.ops) if isinstance(circuit, FusedCircuit) else len(circuit.gates)
    starts = list(circuit.layer_starts)
    if starts[0] != 0:
        raise ValueError("first layer must start at index 0")
    bounds = starts[::b] + [total]
    return CheckpointPlan(d, b, tuple(zip(bounds[:-1], bounds[1:])))


def run_checkpointed(fc: FusedCircuit, state0: BatchedState, theta=None,
                     pauli: PauliString | None = None, b: int = 1, mode: str = "full",
                     counter: TraversalCounter | None = None,
                     accountant: MemoryAccountant | None = None):
    """Fused adjoint gradient with block checkpointing.

    Block inputs are always kept at full precision.  Returns
    ``(loss, grad, peak_units)``.
    """
    if pauli is None:
        raise ValueError("an observable is required")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    _check_state(state0, fc.n_qubits)
    theta = check_theta(fc, theta)
    plan = plan_checkpoints(fc, b)
    check_capacity(state0.nbytes * plan.n_blocks, "checkpoint inputs")
    counter = counter if counter is not None else TraversalCounter()
    acct = accountant if accountant is not None else MemoryAccountant(state0.nbytes)

    work = _PingPong(state0.amps)
    inputs: list = []
    cur = state0.amps
    last = plan.n_blocks - 1
    for k, (start, stop) in enumerate(plan.blocks):
        inputs.append(cur)
        acct.allocate(1)
        cur = run_forward_ops(fc.ops, start, stop, cur, theta, counter, work, keep_last=k < last)

    final = BatchedState(cur)
    loss = float(np.sum(expectation(final, pauli, counter)))
    lam_work = _PingPong(state0.amps)
    lam = seed_adjoint(final, pauli, out=BatchedState(lam_work.other(None)), counter=counter).amps

    grad = np.zeros(fc.n_params)
    scratch = _PingPong(state0.amps)
    for k in range(last, -1, -1):
        start, stop = plan.blocks[k]
        ledger = StateLedger(mode, acct, counter)
        run_forward_ops(fc.ops, start, stop, inputs[k], theta, counter, work, ledger)
        lam = run_backward_ops(fc.ops, start, stop, ledger, lam, theta, grad, counter,
                               lam_work, scratch)
        ledger.clear()
        inputs[k] = None
        acct.free(1)
    acct.working_buffers = len(work.bufs) + len(lam_work.bufs) + len(scratch.bufs)
    return loss, grad, acct.peak


def run_checkpointed_naive(circuit: Circuit, state0: BatchedState, theta=None,
                           pauli: PauliString | None = None, b: int = 1,
                           counter: TraversalCounter | None = None,
                           accountant: MemoryAccountant | None = None):
    """Per-gate counterpart of :func:`run_checkpointed`; every gate input of a block is kept."""
    if pauli is None:
        raise ValueError("an observable is required")
    _check_state(state0, circuit.n_qubits)
    theta = check_theta(circuit, theta)
    plan = plan_checkpoints(circuit, b)
    per_block = max(stop - start for start, stop in plan.blocks)
    check_capacity(state0.nbytes * (plan.n_blocks + per_block), "checkpointed per-gate ledger")
    counter = counter if counter is not None else TraversalCounter()
    acct = accountant if accountant is not None else MemoryAccountant(state0.nbytes)

    inputs: list = []
    cur = state0
    for start, stop in plan.blocks:
        inputs.append(cur)
        acct.allocate(1)
        cur, _ = naive_forward(circuit, cur, theta, counter, store=False, start=start, stop=stop)

    loss = float(np.sum(expectation(cur, pauli, counter)))
    lam = seed_adjoint(cur, pauli, counter=counter).amps
    grad = np.zeros(circuit.n_params)
    for k in range(plan.n_blocks - 1, -1, -1):
        start, stop = plan.blocks[k]
        _, ledger = naive_forward(circuit, inputs[k], theta, counter, acct, start=start, stop=stop)
        lam = naive_backward(circuit, ledger, lam, theta, grad, counter, start, stop)
        ledger.clear()
        inputs[k] = None
        acct.free(1)
    return loss, grad, acct.peak
