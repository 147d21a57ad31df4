"""
Trading recomputation for memory
================================

A deep circuit keeps one stored state per fused variational block.  With
checkpointing only every ``b``-th layer input is kept; during the backward
pass each block of ``b`` layers is run forward again with a temporary
ledger.  The peak number of stored vectors is then

    ceil(l_var / 9) * b + d / b

which is smallest near ``b* = sqrt(d / l_eff)``.
"""

from gatefuse import build_hea, fuse_circuit, new_random_state, parse_pauli
from gatefuse.checkpoint import divisors, fused_layer_units, model_fused, optimal_block
from gatefuse.checkpoint import run_checkpointed
from gatefuse.circuit import hea_observable

# %%
# A 20-wide layer folded onto 9 physical qubits has the 7-block shape of a
# 20-qubit layer, so the accounting matches a large run while staying fast.

d = 100
fc = fuse_circuit(build_hea(9, d, seed=5, layer_width=20))
state = new_random_state(9, 2, seed=6)
pauli = parse_pauli(hea_observable(9))
units = fused_layer_units(fc)
print(f"{units} stored vectors per layer without checkpointing: {units * d + 1} in total")

# %%
# Scan every exact divisor of d in both ledger modes.

print(f"{'b':>4} {'full':>8} {'mem_save':>9} {'model':>7}")
for b in divisors(d):
    _, _, full = run_checkpointed(fc, state, pauli=pauli, b=b)
    _, _, saved = run_checkpointed(fc, state, pauli=pauli, b=b, mode="mem_save")
    print(f"{b:>4} {full:>8g} {saved:>9g} {model_fused(b, 60, 9, d):>7g}")

print(f"continuous optimum: b* = {optimal_block(units, d):.2f} (full), "
      f"{optimal_block(units / 2, d):.2f} (mem_save)")

# %%
# The gradient does not depend on the schedule.

_, g1, _ = run_checkpointed(fc, state, pauli=pauli, b=1)
_, g4, _ = run_checkpointed(fc, state, pauli=pauli, b=4)
print("max |g(b=1) - g(b=4)|:", abs(g1 - g4).max())
