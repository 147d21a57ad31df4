"""Counters for amplitude-array passes and stored state vectors."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .statevec import (
    BatchedState,
    CapacityError,
    NarrowedState,
    allocation_limit,
    narrow,
    widen,
)

MODES = ("full", "mem_save")


@dataclass
class TraversalCounter:
    """Full read/write passes over a batched amplitude array.

    ``forward`` and ``backward`` count gate kernels, ``other`` the
    expectation and adjoint-seed kernels.  Precision conversions of stored
    states are tallied separately in ``conversions``.
    """

    forward: int = 0
    backward: int = 0
    other: int = 0
    conversions: int = 0

    @property
    def total(self) -> int:
        return self.forward + self.backward + self.other

    def reset(self) -> None:
        self.forward = self.backward = self.other = self.conversions = 0

    def snapshot(self) -> dict:
        return asdict(self) | {"total": self.total}


class MemoryAccountant:
    """Current/peak stored-vector units.

    One unit is one full-precision batched state vector; a narrowed ledger
    entry counts one half.  Working buffers are not part of the tally.
    """

    def __init__(self, sv_bytes: int = 0):
        self.sv_bytes = sv_bytes
        self.current = 0.0
        self.peak = 0.0
        self.working_buffers = 0

    def allocate(self, units: float) -> None:
        self.current += units
        if self.current > self.peak:
            self.peak = self.current

    def free(self, units: float) -> None:
        self.current -= units
        if self.current < 0:
            raise RuntimeError("memory accountant went negative")

    @property
    def peak_bytes(self) -> int:
        return int(self.peak * self.sv_bytes)

    @property
    def current_bytes(self) -> int:
        return int(self.current * self.sv_bytes)

    def __repr__(self):
        return f"MemoryAccountant(current={self.current}, peak={self.peak}, sv_bytes={self.sv_bytes})"


class StateLedger:
    """States kept from the forward pass for use in the backward pass.

    In ``full`` mode entries are references to full-precision arrays; in
    ``mem_save`` mode they are narrowed copies (half a unit each).
    """

    def __init__(self, mode: str = "full", accountant: MemoryAccountant | None = None,
                 counter: TraversalCounter | None = None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.mode = mode
        self.accountant = accountant
        self.counter = counter if counter is not None else TraversalCounter()
        self.entries: dict = {}
        self._nbytes = 0

    @property
    def entry_units(self) -> float:
        return 0.5 if self.mode == "mem_save" else 1.0

    @property
    def units(self) -> float:
        return len(self.entries) * self.entry_units

    @property
    def nbytes(self) -> int:
        return self._nbytes

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def store(self, key, amps: np.ndarray) -> None:
        if key in self.entries:
            raise KeyError(f"ledger already holds entry {key!r}")
        if self.mode == "mem_save":
            entry = narrow(BatchedState(amps))
            self.counter.conversions += 1
        else:
            entry = amps
        if self._nbytes + entry.nbytes > allocation_limit():
            raise CapacityError(
                f"ledger would grow to {self._nbytes + entry.nbytes} bytes, "
                f"limit is {allocation_limit()} bytes"
            )
        self.entries[key] = entry
        self._nbytes += entry.nbytes
        if self.accountant is not None:
            self.accountant.allocate(self.entry_units)

    def load(self, key, scratch: np.ndarray | None = None) -> np.ndarray:
        """Full-precision amplitudes of an entry, widened into ``scratch`` if narrowed."""
        entry = self.entries[key]
        if isinstance(entry, NarrowedState):
            out = None if scratch is None else BatchedState(scratch)
            self.counter.conversions += 1
            return widen(entry, out=out).amps
        return entry

    def release(self, key) -> None:
        entry = self.entries.pop(key)
        self._nbytes -= entry.nbytes
        if self.accountant is not None:
            self.accountant.free(self.entry_units)

    def clear(self) -> None:
        for key in list(self.entries):
            self.release(key)
