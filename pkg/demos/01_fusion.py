"""
Fusing a hardware-efficient layer
=================================

A layer of the hardware-efficient ansatz applies Rx, Ry and Rz to every
qubit and closes with a ring of CZ gates.  Executed gate by gate, each of
those gates is one full pass over the amplitude array.  Here we group them
into a handful of fused operators and count what that saves.
"""

import time

import numpy as np

from gatefuse import TraversalCounter, build_hea, forward, fuse_circuit, new_random_state
from gatefuse.engine import naive_forward
from gatefuse.fusion import format_fused

# %%
# A four-qubit layer is small enough to read.  Rotations on qubits 0..2
# collapse into one 3-qubit unitary with nine constituents, qubit 3 gets
# its own block, and the four CZ gates become a single diagonal phase pass.

small = fuse_circuit(build_hea(4, 1, seed=0))
print(format_fused(small))

# %%
# At 20 qubits the same rule gives seven rotation blocks (six of nine gates
# and one of six) plus the CZ block.  The naive executor needs 60 + 20 passes.

n = 20
circuit = build_hea(n, 1, seed=1)
fused = fuse_circuit(circuit)
state = new_random_state(n, 1, seed=2, precision="single")

# one untimed run of each so kernel compilation is not in the timings
forward(fused, state)
naive_forward(circuit, state, store=False)

fc_count, nv_count = TraversalCounter(), TraversalCounter()
t0 = time.perf_counter()
final_fused, _ = forward(fused, state, counter=fc_count)
t_fused = time.perf_counter() - t0
t0 = time.perf_counter()
final_naive, _ = naive_forward(circuit, state, counter=nv_count, store=False)
t_naive = time.perf_counter() - t0

print(f"fused forward traversals: {fc_count.forward}")
print(f"naive forward traversals: {nv_count.forward}")
print(f"wall time fused {t_fused * 1e3:.1f} ms, naive {t_naive * 1e3:.1f} ms")

# %%
# Same answer either way, up to single-precision rounding.

print("max |difference|:", float(np.max(np.abs(final_fused.amps - final_naive.amps))))
