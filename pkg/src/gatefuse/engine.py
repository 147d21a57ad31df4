"""Forward execution, expectation values and adjoint differentiation.

Two executors share the same observable kernels:

* the fused executor runs a :class:`~gatefuse.fusion.FusedCircuit`, one
  amplitude pass per fused op, stores only the outputs of variational
  blocks and recomputes every intra-block state during the backward pass;
* the per-gate executor (:func:`naive_gradient`) applies one gate per pass
  and stores the input of every gate, the textbook store-everything
  baseline.

Kernels are out-of-place.  The executors ping-pong between two working
buffers for states that are not kept.
"""

from __future__ import annotations

from functools import lru_cache

import numba
import numpy as np

from . import _kernels as K
from .accounting import MODES, MemoryAccountant, StateLedger, TraversalCounter
from .circuit import CNOT, CZ, Circuit, PauliString, Rotation, check_theta
from .fusion import (
    FusedCircuit,
    FusedCNOTBlock,
    FusedCZBlock,
    FusedUnitaryBlock,
    compose_block_unitary,
)
from .statevec import BatchedState, check_capacity, real_dtype

_AXIS_CODE = {"X": 0, "Y": 1, "Z": 2}

# Relative gradient error (max abs deviation over max abs gradient) allowed
# for mem_save against a full-ledger run.  Measured on HEA n=10, d=10, batch
# 4 over ten seeds: worst 1.8e-3 (bfloat16 ledger) and 3.4e-8 (float32
# ledger); the bounds leave roughly 3x headroom.
MEM_SAVE_REL_BOUND = {"single": 5e-3, "double": 1e-6}


def set_threads(n: int) -> None:
    """Worker threads for the kernels (bounded by ``NUMBA_NUM_THREADS``)."""
    limit = numba.config.NUMBA_NUM_THREADS
    if not 1 <= n <= limit:
        raise ValueError(f"thread count must be in 1..{limit} (raise NUMBA_NUM_THREADS for more)")
    numba.set_num_threads(n)


def get_threads() -> int:
    return numba.get_num_threads()


def _comps(a: np.ndarray) -> np.ndarray:
    return a.view(real_dtype("single" if a.dtype == np.complex64 else "double"))


def _check_state(state: BatchedState, n_qubits: int) -> None:
    if state.n_qubits != n_qubits:
        raise ValueError(f"state has {state.n_qubits} qubits, operation expects {n_qubits}")


def _out_for(state: BatchedState, out: BatchedState | None) -> BatchedState:
    if out is None:
        return BatchedState(np.empty_like(state.amps))
    if out.amps.shape != state.amps.shape or out.amps.dtype != state.amps.dtype:
        raise ValueError("output buffer does not match the input state")
    if np.shares_memory(out.amps, state.amps):
        raise ValueError("kernels are out-of-place; output must not alias the input")
    return out


@lru_cache(maxsize=4096)
def _block_layout(block: FusedUnitaryBlock):
    axes = np.array([_AXIS_CODE[a] for a, _, _ in block.constituents], dtype=np.int64)
    poss = np.array([p for _, p, _ in block.constituents], dtype=np.int64)
    params = np.array(block.params, dtype=np.int64)
    return axes, poss, params


@lru_cache(maxsize=4096)
def _mask_arrays(block):
    if isinstance(block, FusedCZBlock):
        return (np.array(block.masks, dtype=np.int64),)
    return (np.array(block.control_masks, dtype=np.int64),
            np.array(block.target_masks, dtype=np.int64))


def _half_angles(theta, params, dtype):
    half = theta[params] / 2
    return np.cos(half).astype(dtype), np.sin(half).astype(dtype)


# -- array-level kernels ---------------------------------------------------


def _unitary_arrays(src, dst, block, theta):
    u = compose_block_unitary(block, theta)
    rd = src.real.dtype
    K.apply_group_matrix(_comps(src), _comps(dst), u.real.astype(rd), u.imag.astype(rd),
                         block.low_qubit, block.group_size,
                         K.tuple_chunks(src.shape[1], block.group_size)[0])


def _cz_arrays(src, dst, block):
    per, _ = K.amp_chunks(src.shape[1])
    K.apply_cz_masks(_comps(src), _comps(dst), _mask_arrays(block)[0], per)


def _cnot_arrays(src, dst, block, reverse=False):
    per, _ = K.amp_chunks(src.shape[1])
    cm, tm = _mask_arrays(block)
    if reverse:
        cm, tm = cm[::-1].copy(), tm[::-1].copy()
    K.apply_cnot_masks(_comps(src), _comps(dst), cm, tm, per)


def _backward_block_arrays(psi, lam, lam_out, block, theta, psi_out=None):
    axes, poss, params = _block_layout(block)
    rd = psi.real.dtype
    cs, ss = _half_angles(theta, params, rd)
    q0, g = block.low_qubit, block.group_size
    per, cps = K.tuple_chunks(psi.shape[1], g)
    partial = np.empty((psi.shape[0] * cps, len(axes)))
    write_psi = psi_out is not None
    K.backward_group(_comps(psi), _comps(lam), _comps(psi_out if write_psi else lam_out),
                     _comps(lam_out), write_psi, q0, g, axes, poss, cs, ss, partial, per)
    return K.ordered_column_sum(partial)


def _apply_op_arrays(src, dst, op, theta):
    if isinstance(op, FusedUnitaryBlock):
        _unitary_arrays(src, dst, op, theta)
    elif isinstance(op, FusedCZBlock):
        _cz_arrays(src, dst, op)
    elif isinstance(op, FusedCNOTBlock):
        _cnot_arrays(src, dst, op)
    else:
        raise TypeError(f"unknown fused op {op!r}")


def _adjoint_const_arrays(src, dst, op):
    if isinstance(op, FusedCZBlock):
        _cz_arrays(src, dst, op)
    elif isinstance(op, FusedCNOTBlock):
        _cnot_arrays(src, dst, op, reverse=True)
    else:
        raise TypeError(f"{op!r} is not a constant block")


# -- public single-op API --------------------------------------------------


def apply_fused_unitary(state: BatchedState, block: FusedUnitaryBlock, theta,
                        out: BatchedState | None = None,
                        counter: TraversalCounter | None = None) -> BatchedState:
    """Apply all rotations of ``block`` in one pass; returns a new state."""
    if block.qubits[-1] >= state.n_qubits:
        raise ValueError("block acts on qubits outside the state")
    out = _out_for(state, out)
    _unitary_arrays(state.amps, out.amps, block, np.asarray(theta, dtype=np.float64))
    if counter is not None:
        counter.forward += 1
    return out


def apply_fused_cz(state: BatchedState, block: FusedCZBlock,
                   out: BatchedState | None = None,
                   counter: TraversalCounter | None = None) -> BatchedState:
    if any(m >> state.n_qubits for m in block.masks):
        raise ValueError("CZ mask wider than the state")
    out = _out_for(state, out)
    _cz_arrays(state.amps, out.amps, block)
    if counter is not None:
        counter.forward += 1
    return out


def apply_fused_cnot(state: BatchedState, block: FusedCNOTBlock,
                     out: BatchedState | None = None,
                     counter: TraversalCounter | None = None) -> BatchedState:
    if any(m >> state.n_qubits for m in block.control_masks + block.target_masks):
        raise ValueError("CNOT mask wider than the state")
    out = _out_for(state, out)
    _cnot_arrays(state.amps, out.amps, block)
    if counter is not None:
        counter.forward += 1
    return out


def _check_pauli(state: BatchedState, pauli: PauliString) -> None:
    if pauli.n_qubits != state.n_qubits:
        raise ValueError(f"observable acts on {pauli.n_qubits} qubits, state has {state.n_qubits}")


def expectation(state: BatchedState, pauli: PauliString,
                counter: TraversalCounter | None = None) -> np.ndarray:
    """Per-sample ``<psi|O|psi>`` without forming the operator."""
    _check_pauli(state, pauli)
    per, cps = K.amp_chunks(state.dim)
    partial = np.empty((state.batch, cps))
    K.expectation_partials(_comps(state.amps), pauli.x_mask, pauli.z_mask,
                           pauli.y_count % 4, per, partial)
    if counter is not None:
        counter.other += 1
    return K.ordered_row_sums(partial)


def seed_adjoint(state: BatchedState, pauli: PauliString,
                 out: BatchedState | None = None,
                 counter: TraversalCounter | None = None) -> BatchedState:
    """``2 O |psi>``, the adjoint state after the last gate when the loss is ``<O>``."""
    _check_pauli(state, pauli)
    out = _out_for(state, out)
    per, _ = K.amp_chunks(state.dim)
    K.seed_adjoint_kernel(_comps(state.amps), _comps(out.amps), pauli.x_mask,
                          pauli.z_mask, pauli.y_count % 4, per)
    if counter is not None:
        counter.other += 1
    return out


def backward_block(psi_out: BatchedState, lam_out: BatchedState, block: FusedUnitaryBlock,
                   theta, *, out: BatchedState | None = None,
                   psi_in: BatchedState | None = None,
                   counter: TraversalCounter | None = None):
    """Adjoint step through one fused block in a single pass.

    Returns ``(lam_in, contributions)`` where ``contributions[k]`` is the
    gradient of constituent ``k`` summed over the batch.  When ``psi_in``
    is given the recomputed block input is written there as well.
    """
    if not block.variational:
        raise ValueError("backward_block needs a variational block")
    theta = np.asarray(theta, dtype=np.float64)
    if max(block.params) >= theta.shape[0]:
        raise ValueError("block references parameters beyond theta")
    if psi_out.amps.shape != lam_out.amps.shape or psi_out.amps.dtype != lam_out.amps.dtype:
        raise ValueError("state and adjoint buffers differ in shape or precision")
    out = _out_for(lam_out, out)
    if psi_in is not None:
        psi_in = _out_for(psi_out, psi_in)
    contrib = _backward_block_arrays(psi_out.amps, lam_out.amps, out.amps, block, theta,
                                     None if psi_in is None else psi_in.amps)
    if counter is not None:
        counter.backward += 1
    return out, contrib


def backward_constant(lam: BatchedState, block, *, out: BatchedState | None = None,
                      psi_carry: BatchedState | None = None,
                      counter: TraversalCounter | None = None):
    """``lam <- G^dagger lam`` for a CZ or CNOT block.

    With ``psi_carry`` the state is un-computed too and ``(lam, psi)`` is
    returned; the fused executor never needs this.
    """
    out = _out_for(lam, out)
    _adjoint_const_arrays(lam.amps, out.amps, block)
    if counter is not None:
        counter.backward += 1
    if psi_carry is None:
        return out
    psi_prev = BatchedState(np.empty_like(psi_carry.amps))
    _adjoint_const_arrays(psi_carry.amps, psi_prev.amps, block)
    if counter is not None:
        counter.backward += 1
    return out, psi_prev


# -- fused executor --------------------------------------------------------


class _PingPong:
    """Two working buffers; ``other(a)`` is always a buffer distinct from ``a``."""

    def __init__(self, like: np.ndarray):
        self._shape, self._dtype = like.shape, like.dtype
        self.bufs: list = []

    def other(self, arr: np.ndarray) -> np.ndarray:
        for b in self.bufs:
            if b is not arr:
                return b
        b = np.empty(self._shape, dtype=self._dtype)
        self.bufs.append(b)
        return b


def run_forward_ops(ops, start: int, stop: int, amps: np.ndarray, theta, counter: TraversalCounter,
                    work: _PingPong, ledger: StateLedger | None = None,
                    keep_last: bool = False) -> np.ndarray:
    """Apply ``ops[start:stop]`` to ``amps``; variational outputs go to ``ledger``.

    ``keep_last`` makes the final output a fresh array the caller may hold on to.
    """
    cur = amps
    for i in range(start, stop):
        op = ops[i]
        store = ledger is not None and op.variational
        fresh = (store and ledger.mode == "full") or (keep_last and i == stop - 1)
        out = np.empty_like(cur) if fresh else work.other(cur)
        _apply_op_arrays(cur, out, op, theta)
        counter.forward += 1
        if store:
            ledger.store(i, out)
        cur = out
    if keep_last and start == stop:
        cur = cur.copy()
    return cur


def run_backward_ops(ops, start: int, stop: int, ledger: StateLedger, lam: np.ndarray, theta,
                     grad: np.ndarray, counter: TraversalCounter, work: _PingPong,
                     scratch: _PingPong) -> np.ndarray:
    """Walk ``ops[start:stop]`` in reverse, accumulating into ``grad``; returns the adjoint."""
    for i in range(stop - 1, start - 1, -1):
        op = ops[i]
        out = work.other(lam)
        if op.variational:
            psi = ledger.load(i, scratch.other(None) if ledger.mode == "mem_save" else None)
            contrib = _backward_block_arrays(psi, lam, out, op, theta)
            grad[_block_layout(op)[2]] += contrib
        else:
            _adjoint_const_arrays(lam, out, op)
        counter.backward += 1
        lam = out
    return lam


def forward(fc: FusedCircuit, state0: BatchedState, theta=None, mode: str = "full",
            counter: TraversalCounter | None = None,
            accountant: MemoryAccountant | None = None):
    """Run the fused circuit, keeping each variational block's output.

    Returns ``(final_state, ledger)``; ``ledger.counter`` holds the pass count.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    _check_state(state0, fc.n_qubits)
    theta = check_theta(fc, theta)
    counter = counter if counter is not None else TraversalCounter()
    ledger = StateLedger(mode, accountant, counter)
    work = _PingPong(state0.amps)
    final = run_forward_ops(fc.ops, 0, len(fc.ops), state0.amps, theta, counter, work, ledger,
                            keep_last=True)
    return BatchedState(final), ledger


def gradient(fc: FusedCircuit, state0: BatchedState, theta=None, pauli: PauliString | None = None,
             mode: str = "full", counter: TraversalCounter | None = None,
             accountant: MemoryAccountant | None = None):
    """Loss (sum of per-sample ``<O>``) and its gradient via fused adjoint passes."""
    if pauli is None:
        raise ValueError("an observable is required")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    _check_state(state0, fc.n_qubits)
    theta = check_theta(fc, theta)
    counter = counter if counter is not None else TraversalCounter()
    ledger = StateLedger(mode, accountant, counter)
    work = _PingPong(state0.amps)
    final = run_forward_ops(fc.ops, 0, len(fc.ops), state0.amps, theta, counter, work, ledger)
    final_state = BatchedState(final)
    loss = float(np.sum(expectation(final_state, pauli, counter)))
    lam_work = _PingPong(state0.amps)
    lam = seed_adjoint(final_state, pauli, out=BatchedState(lam_work.other(None)), counter=counter).amps
    grad = np.zeros(fc.n_params)
    run_backward_ops(fc.ops, 0, len(fc.ops), ledger, lam, theta, grad, counter, lam_work,
                     _PingPong(state0.amps))
    if accountant is not None:
        accountant.working_buffers = len(work.bufs) + len(lam_work.bufs)
    ledger.clear()
    return loss, grad


# -- per-gate executor -----------------------------------------------------


def _gate_forward(src, dst, gate, theta):
    if isinstance(gate, Rotation):
        h = theta[gate.param] / 2
        rd = src.real.dtype
        K.apply_rotation(_comps(src), _comps(dst), _AXIS_CODE[gate.axis], gate.target,
                         rd.type(np.cos(h)), rd.type(np.sin(h)),
                         K.rows_per_chunk(1 << gate.target))
    elif isinstance(gate, CZ):
        _cz_arrays(src, dst, FusedCZBlock(((gate.control, gate.target),)))
    elif isinstance(gate, CNOT):
        _cnot_arrays(src, dst, FusedCNOTBlock(((gate.control, gate.target),)))
    else:
        raise TypeError(f"unknown gate {gate!r}")


def _gate_backward(psi_in, lam, lam_out, gate, theta) -> float:
    if isinstance(gate, Rotation):
        h = theta[gate.param] / 2
        rd = lam.real.dtype
        t = gate.target
        rpc = K.rows_per_chunk(1 << t)
        n_rows = lam.shape[0] * (lam.shape[1] >> (t + 1))
        partial = np.empty(((n_rows + rpc - 1) // rpc, 1))
        K.backward_rotation(_comps(psi_in), _comps(lam), _comps(lam_out), _AXIS_CODE[gate.axis], t,
                            rd.type(np.cos(h)), rd.type(np.sin(h)), partial, rpc)
        return K.ordered_column_sum(partial)[0]
    # CZ and CNOT are real symmetric involutions
    _gate_forward(lam, lam_out, gate, theta)
    return 0.0


def naive_forward(circuit: Circuit, state0: BatchedState, theta=None,
                  counter: TraversalCounter | None = None,
                  accountant: MemoryAccountant | None = None, store: bool = True,
                  start: int = 0, stop: int | None = None):
    """Per-gate forward pass storing every gate input; returns ``(final, ledger)``."""
    _check_state(state0, circuit.n_qubits)
    theta = check_theta(circuit, theta)
    counter = counter if counter is not None else TraversalCounter()
    ledger = StateLedger("full", accountant, counter)
    stop = len(circuit.gates) if stop is None else stop
    cur = state0.amps
    for i in range(start, stop):
        out = np.empty_like(cur)
        if store:
            ledger.store(i, cur)
        _gate_forward(cur, out, circuit.gates[i], theta)
        counter.forward += 1
        cur = out
    return BatchedState(cur), ledger


def naive_backward(circuit: Circuit, ledger: StateLedger, lam: np.ndarray, theta, grad: np.ndarray,
                   counter: TraversalCounter, start: int = 0, stop: int | None = None) -> np.ndarray:
    stop = len(circuit.gates) if stop is None else stop
    work = _PingPong(lam)
    for i in range(stop - 1, start - 1, -1):
        gate = circuit.gates[i]
        out = work.other(lam)
        g = _gate_backward(ledger.load(i), lam, out, gate, theta)
        if isinstance(gate, Rotation):
            grad[gate.param] += g
        counter.backward += 1
        lam = out
    return lam


def naive_gradient(circuit: Circuit, state0: BatchedState, theta=None,
                   pauli: PauliString | None = None,
                   counter: TraversalCounter | None = None,
                   accountant: MemoryAccountant | None = None):
    """Store-everything adjoint baseline: one pass per gate, every gate input kept."""
    if pauli is None:
        raise ValueError("an observable is required")
    theta = check_theta(circuit, theta)
    counter = counter if counter is not None else TraversalCounter()
    check_capacity(state0.nbytes * (len(circuit.gates) + 1), "per-gate ledger")
    final, ledger = naive_forward(circuit, state0, theta, counter, accountant)
    loss = float(np.sum(expectation(final, pauli, counter)))
    lam = seed_adjoint(final, pauli, counter=counter).amps
    grad = np.zeros(circuit.n_params)
    naive_backward(circuit, ledger, lam, theta, grad, counter)
    ledger.clear()
    return loss, grad
