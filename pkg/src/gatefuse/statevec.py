"""Batched amplitude storage.

A :class:`BatchedState` holds ``batch`` samples of ``2**n`` complex
amplitudes.  numpy complex arrays are already stored as interleaved
``(real, imag)`` pairs, so ``amps.view(real_dtype)`` gives the component
stream the kernels work on.  Qubit ``t`` is bit ``t`` of the amplitude index.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

PRECISIONS = ("single", "double")

_COMPLEX = {"single": np.complex64, "double": np.complex128}
_REAL = {"single": np.float32, "double": np.float64}
_NORM_TOL = {"single": 1e-6, "double": 1e-12}

DEFAULT_ALLOCATION_LIMIT = 8 * 1024**3
_allocation_limit = DEFAULT_ALLOCATION_LIMIT


class CapacityError(MemoryError):
    """Requested buffer exceeds the configured allocation limit."""


def set_allocation_limit(n_bytes: int) -> int:
    """Set the per-allocation byte limit; returns the previous value."""
    global _allocation_limit
    if n_bytes <= 0:
        raise ValueError("allocation limit must be positive")
    old, _allocation_limit = _allocation_limit, int(n_bytes)
    return old


def allocation_limit() -> int:
    return _allocation_limit


def check_capacity(n_bytes: int, what: str = "state buffer") -> None:
    if n_bytes > _allocation_limit:
        raise CapacityError(
            f"{what} needs {n_bytes} bytes, limit is {_allocation_limit} bytes"
        )


def complex_dtype(precision: str):
    try:
        return _COMPLEX[precision]
    except KeyError:
        raise ValueError(f"unknown precision {precision!r}") from None


def real_dtype(precision: str):
    return _REAL[precision]


def norm_tolerance(precision: str) -> float:
    return _NORM_TOL[precision]


def precision_of(array: np.ndarray) -> str:
    if array.dtype == np.complex64:
        return "single"
    if array.dtype == np.complex128:
        return "double"
    raise TypeError(f"unsupported amplitude dtype {array.dtype}")


def state_bytes(n_qubits: int, batch: int, precision: str) -> int:
    """Bytes of one full-precision batched state vector (``M_sv``)."""
    return batch * (1 << n_qubits) * np.dtype(complex_dtype(precision)).itemsize


@dataclass
class BatchedState:
    """``batch`` pure states on ``n_qubits`` qubits.

    ``amps`` has shape ``(batch, 2**n_qubits)`` and is C-contiguous, samples
    one after the other.
    """

    amps: np.ndarray

    def __post_init__(self):
        a = self.amps
        if a.ndim != 2:
            raise ValueError("amplitudes must have shape (batch, 2**n)")
        dim = a.shape[1]
        if dim < 2 or dim & (dim - 1):
            raise ValueError(f"row length {dim} is not a power of two >= 2")
        precision_of(a)
        if not a.flags.c_contiguous:
            self.amps = np.ascontiguousarray(a)

    @property
    def n_qubits(self) -> int:
        return self.amps.shape[1].bit_length() - 1

    @property
    def batch(self) -> int:
        return self.amps.shape[0]

    @property
    def dim(self) -> int:
        return self.amps.shape[1]

    @property
    def precision(self) -> str:
        return precision_of(self.amps)

    @property
    def nbytes(self) -> int:
        return self.amps.nbytes

    def components(self) -> np.ndarray:
        """Writable ``(batch, 2**n, 2)`` real view of the interleaved storage."""
        return self.amps.view(real_dtype(self.precision)).reshape(self.batch, self.dim, 2)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.amps, axis=1)

    def copy(self) -> "BatchedState":
        return BatchedState(self.amps.copy())


def empty_like(state: BatchedState) -> BatchedState:
    return BatchedState(np.empty_like(state.amps))


def _validate_shape(n: int, batch: int, precision: str) -> None:
    if n < 1:
        raise ValueError(f"need at least one qubit, got n={n}")
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    if n > 62:
        raise ValueError("at most 62 qubits are addressable")
    complex_dtype(precision)
    check_capacity(state_bytes(n, batch, precision))


def new_basis_state(n: int, batch: int = 1, precision: str = "double") -> BatchedState:
    """Every sample set to ``|0...0>``."""
    _validate_shape(n, batch, precision)
    amps = np.zeros((batch, 1 << n), dtype=complex_dtype(precision))
    amps[:, 0] = 1.0
    return BatchedState(amps)


# SplitMix64 constants (Steele, Lea, Flood 2014).
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = (1 << 64) - 1


def splitmix64(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of the SplitMix64 stream for ``seed``.

    Output ``k`` mixes ``seed + (k + 1) * 0x9E3779B97F4A7C15 (mod 2**64)``,
    which is exactly what the sequential generator produces on its
    ``k``-th call.
    """
    counters = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _U64) + _GOLDEN * counters
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniform_stream(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Doubles in ``[0, 1)`` from the top 53 bits of each SplitMix64 output."""
    bits = splitmix64(seed, count, start) >> np.uint64(11)
    return bits.astype(np.float64) * 2.0**-53


def normal_stream(seed: int, count: int) -> np.ndarray:
    """``count`` standard normals via Box-Muller on consecutive uniform pairs.

    Pair ``p`` uses uniforms ``2p`` and ``2p+1`` and yields normals ``2p``
    (cosine branch) and ``2p+1`` (sine branch).
    """
    n_pairs = (count + 1) // 2
    u = uniform_stream(seed, 2 * n_pairs)
    u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(2 * n_pairs)
    out[0::2] = r * np.cos(2.0 * np.pi * u2)
    out[1::2] = r * np.sin(2.0 * np.pi * u2)
    return out[:count]


def new_random_state(
    n: int, batch: int = 1, seed: int = 0, precision: str = "double"
) -> BatchedState:
    """Gaussian random states, normalised per sample.

    Components are filled in storage order (sample-major, then index, real
    before imaginary) from :func:`normal_stream`; normalisation happens in
    double precision before the cast, so every precision is reproducible.
    """
    _validate_shape(n, batch, precision)
    dim = 1 << n
    comps = normal_stream(seed, 2 * batch * dim).reshape(batch, dim, 2)
    amps = comps[..., 0] + 1j * comps[..., 1]
    amps /= np.linalg.norm(amps, axis=1, keepdims=True)
    return BatchedState(amps.astype(complex_dtype(precision)))


def random_angles(count: int, seed: int) -> np.ndarray:
    """Angles uniform in ``[0, 2*pi)`` from the SplitMix64 stream."""
    return 2.0 * np.pi * uniform_stream(seed, count)


def pair_indices(n: int, t: int) -> np.ndarray:
    """All ``(i0, i1)`` index pairs differing only in bit ``t``, ``i0`` ascending.

    >>> pair_indices(2, 1).tolist()
    [[0, 2], [1, 3]]
    """
    if not 0 <= t < n:
        raise ValueError(f"target qubit {t} out of range for n={n}")
    k = np.arange(1 << (n - 1), dtype=np.int64)
    low = k & ((1 << t) - 1)
    i0 = ((k >> t) << (t + 1)) | low
    return np.stack([i0, i0 | (1 << t)], axis=1)


# -- narrowed storage ------------------------------------------------------


@dataclass
class NarrowedState:
    """Reduced-width copy of a batched state.

    ``data`` has shape ``(batch, 2**n, 2)``.  For single-precision compute it
    holds bfloat16 bit patterns as ``uint16``; for double-precision compute
    it holds ``float32`` components.
    """

    data: np.ndarray
    precision: str

    @property
    def n_qubits(self) -> int:
        return self.data.shape[1].bit_length() - 1

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    @property
    def nbytes(self) -> int:
        return self.data.nbytes


def float32_to_bfloat16_bits(x: np.ndarray) -> np.ndarray:
    """Round ``float32`` values to bfloat16 (nearest, ties to even)."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    bits = x.view(np.uint32)
    with np.errstate(over="ignore"):
        rounded = bits + (np.uint32(0x7FFF) + ((bits >> np.uint32(16)) & np.uint32(1)))
    out = (rounded >> np.uint32(16)).astype(np.uint16)
    nan = np.isnan(x)
    if nan.any():
        # keep sign and payload top bits, force quiet bit so NaN survives truncation
        out[nan] = ((bits[nan] >> np.uint32(16)) | np.uint32(0x0040)).astype(np.uint16)
    return out


def bfloat16_bits_to_float32(bits: np.ndarray) -> np.ndarray:
    return (bits.astype(np.uint32) << np.uint32(16)).view(np.float32)


def narrow(state: BatchedState) -> NarrowedState:
    comps = state.components()
    if state.precision == "single":
        data = float32_to_bfloat16_bits(comps)
    else:
        with np.errstate(over="ignore"):
            data = comps.astype(np.float32)
    return NarrowedState(data, state.precision)


def widen(narrowed: NarrowedState, precision: str | None = None, out: BatchedState | None = None) -> BatchedState:
    """Exact embedding of a narrowed state back into compute precision."""
    precision = precision or narrowed.precision
    if narrowed.data.dtype == np.uint16:
        comps = bfloat16_bits_to_float32(narrowed.data)
    else:
        comps = narrowed.data
    if out is None:
        amps = np.empty(narrowed.data.shape[:2], dtype=complex_dtype(precision))
        out = BatchedState(amps)
    out.components()[...] = comps
    return out


# -- raw dump / load -------------------------------------------------------

_MAGIC = b"BSV1"
_HEADER = struct.Struct("<4sIQBH")  # magic, n, batch, precision code, endianness tag
_BYTE_ORDER_MARK = 0xFEFF
_PRECISION_CODE = {"single": 0, "double": 1}


def dump_state(state: BatchedState, fh) -> None:
    """Write header then the little-endian interleaved component stream."""
    fh.write(_HEADER.pack(_MAGIC, state.n_qubits, state.batch,
                          _PRECISION_CODE[state.precision], _BYTE_ORDER_MARK))
    comps = state.components()
    fh.write(comps.astype(comps.dtype.newbyteorder("<"), copy=False).tobytes())


def load_state(fh) -> BatchedState:
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise ValueError("truncated state header")
    magic, n, batch, code, bom = _HEADER.unpack(raw)
    if magic != _MAGIC:
        raise ValueError("not a batched-state dump")
    if bom != _BYTE_ORDER_MARK:
        raise ValueError(f"unexpected endianness tag {bom:#06x}")
    precision = {v: k for k, v in _PRECISION_CODE.items()}[code]
    count = batch * (1 << n) * 2
    rdt = np.dtype(real_dtype(precision)).newbyteorder("<")
    payload = fh.read(count * rdt.itemsize)
    if len(payload) != count * rdt.itemsize:
        raise ValueError("truncated state payload")
    comps = np.frombuffer(payload, dtype=rdt).astype(real_dtype(precision))
    amps = comps.view(complex_dtype(precision)).reshape(batch, 1 << n)
    return BatchedState(amps.copy())
