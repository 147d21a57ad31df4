"""Fused forward/backward adjoint simulation of batched state vectors."""

__version__ = "0.1.0"

from .accounting import MemoryAccountant, StateLedger, TraversalCounter
from .checkpoint import (
    CheckpointPlan,
    model_fused,
    model_native,
    optimal_block,
    plan_checkpoints,
    run_checkpointed,
    run_checkpointed_naive,
)
from .circuit import (
    CNOT,
    CZ,
    Circuit,
    PauliString,
    Rotation,
    build_hea,
    hea_observable,
    parse_pauli,
)
from .engine import (
    apply_fused_cnot,
    apply_fused_cz,
    apply_fused_unitary,
    backward_block,
    backward_constant,
    expectation,
    forward,
    gradient,
    naive_gradient,
    seed_adjoint,
    set_threads,
)
from .fusion import FusedCircuit, FusionPolicy, fuse_circuit
from .statevec import (
    BatchedState,
    CapacityError,
    narrow,
    new_basis_state,
    new_random_state,
    widen,
)
