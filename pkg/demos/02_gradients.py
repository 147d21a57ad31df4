"""
Three ways to a gradient
========================

We differentiate ``L(theta) = sum_b <psi_b(theta)| O |psi_b(theta)>`` with
respect to every rotation angle.  Parameter shift and finite differences
treat the circuit as a black box and pay two circuit executions per
parameter.  The fused adjoint method gets all of them from one forward and
one backward sweep.
"""

import time

import numpy as np

from gatefuse import TraversalCounter, build_hea, fuse_circuit, gradient, new_random_state, parse_pauli
from gatefuse.circuit import hea_observable
from gatefuse.oracle import ForwardCounter, fd_gradient, parameter_shift_gradient

n, d = 8, 2
circuit = build_hea(n, d, seed=3)
fused = fuse_circuit(circuit)
state = new_random_state(n, 4, seed=4)
pauli = parse_pauli(hea_observable(n))
print(f"{circuit.n_params} parameters, observable {pauli.label}")

# %%
# The adjoint pass.  The counter records kernel passes over the state.

gradient(fused, state, pauli=pauli)  # compile the kernels first
counter = TraversalCounter()
t0 = time.perf_counter()
loss, adj = gradient(fused, state, pauli=pauli, counter=counter)
print(f"adjoint: loss {loss:.6f}, {counter.total} traversals, {time.perf_counter() - t0:.3f} s")

# %%
# The dense reference oracles.

executions = ForwardCounter()
t0 = time.perf_counter()
ps = parameter_shift_gradient(circuit, state.amps, circuit.theta, pauli, executions)
print(f"parameter shift: {executions.executions} circuit executions, {time.perf_counter() - t0:.3f} s")
fd = fd_gradient(circuit, state.amps, circuit.theta, pauli)

scale = np.max(np.abs(ps))
print(f"adjoint vs shift  : {np.max(np.abs(adj - ps)) / scale:.1e} relative")
print(f"adjoint vs finite : {np.max(np.abs(adj - fd)) / scale:.1e} relative")
