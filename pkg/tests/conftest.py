import os

# The thread pool size is fixed when numba starts; the determinism checks
# compare 1 and 4 workers, so raise the cap before anything imports numba.
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import numpy as np
import pytest

from gatefuse.circuit import build_hea, hea_observable, parse_pauli
from gatefuse.fusion import fuse_circuit
from gatefuse.statevec import new_random_state


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_instance(n, d, batch=2, seed=0, precision="double"):
    """HEA circuit, its fused form, a random batch and the default observable."""
    circuit = build_hea(n, d, seed=seed)
    state = new_random_state(n, batch, seed=seed + 101, precision=precision)
    return circuit, fuse_circuit(circuit), state, parse_pauli(hea_observable(n))


def rel_err(a, b):
    """max |a - b| / max |b|, the error measure used throughout the suite."""
    a, b = np.asarray(a), np.asarray(b)
    scale = np.max(np.abs(b))
    return float(np.max(np.abs(a - b)) / scale) if scale else float(np.max(np.abs(a)))


@pytest.fixture
def hea_instance():
    return random_instance(4, 2, batch=3, seed=7)
