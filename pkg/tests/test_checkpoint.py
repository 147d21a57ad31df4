import math

import numpy as np
import pytest
from conftest import random_instance

from gatefuse.accounting import MemoryAccountant, TraversalCounter
from gatefuse.checkpoint import (
    divisors,
    fused_layer_units,
    model_fused,
    model_native,
    nearest_divisor_block,
    optimal_block,
    plan_checkpoints,
    run_checkpointed,
    run_checkpointed_naive,
)
from gatefuse.circuit import build_hea, hea_observable, parse_pauli
from gatefuse.engine import gradient
from gatefuse.fusion import fuse_circuit
from gatefuse.statevec import new_random_state


def test_model_native_examples():
    assert model_native(1, 60, 20, 100) == 180
    assert model_native(2, 60, 20, 100) == 210
    assert model_native(100, 60, 20, 100) == 80 * 100 + 1


def test_model_fused_examples():
    assert model_fused(4, 60, 9, 100) == 53
    assert model_fused(5, 60, 9, 100, narrowed=True) == 37.5
    assert model_fused(10, 60, 9, 1000) == 170


def test_models_reject_non_divisor():
    with pytest.raises(ValueError):
        model_native(3, 60, 20, 100)
    with pytest.raises(ValueError):
        model_fused(3, 60, 9, 100)
    with pytest.raises(ValueError):
        model_fused(0, 60, 9, 100)


def test_native_argmin_near_one():
    costs = {b: model_native(b, 60, 20, 100) for b in divisors(100)}
    assert min(costs, key=costs.get) == 1
    assert optimal_block(80, 100) == pytest.approx(1.118, abs=1e-3)


@pytest.mark.parametrize("l_eff,d,expected", [(7, 1000, 11.95), (3.5, 1000, 16.90), (7, 100, 3.78)])
def test_optimal_block_values(l_eff, d, expected):
    assert round(optimal_block(l_eff, d), 2) == expected


def test_optimal_block_minimises_continuous_cost():
    b = optimal_block(7, 1000)
    cost = lambda x: 7 * x + 1000 / x
    assert cost(b) <= min(cost(b - 0.01), cost(b + 0.01))
    assert cost(b) == pytest.approx(2 * math.sqrt(7 * 1000))


def test_divisors_and_nearest():
    assert divisors(100) == [1, 2, 4, 5, 10, 20, 25, 50, 100]
    assert nearest_divisor_block(2, 16) == 2
    assert nearest_divisor_block(2, 64) == 4
    assert nearest_divisor_block(2, 256) == 8


def test_plan_ranges_cover_circuit():
    fc = fuse_circuit(build_hea(6, 8, seed=None))
    plan = plan_checkpoints(fc, 2)
    assert plan.n_blocks == 4
    assert plan.blocks[0][0] == 0 and plan.blocks[-1][1] == len(fc.ops)
    assert all(a[1] == b[0] for a, b in zip(plan.blocks, plan.blocks[1:]))
    with pytest.raises(ValueError):
        plan_checkpoints(fc, 3)


def test_layer_units():
    fc = fuse_circuit(build_hea(9, 2, seed=None, layer_width=20))
    assert fused_layer_units(fc) == 7
    assert fused_layer_units(fc, "mem_save") == 3.5


@pytest.mark.parametrize("b", [1, 2, 4, 8])
def test_checkpointed_gradient_matches_plain(b):
    _, fc, state, pauli = random_instance(6, 8, batch=2, seed=21)
    loss, grad = gradient(fc, state, pauli=pauli)
    c_loss, c_grad, _ = run_checkpointed(fc, state, pauli=pauli, b=b)
    assert abs(c_loss - loss) <= 1e-12
    assert np.max(np.abs(c_grad - grad)) <= 1e-12


def test_naive_checkpointed_gradient_matches_plain():
    circuit, fc, state, pauli = random_instance(5, 6, batch=2, seed=3)
    _, grad = gradient(fc, state, pauli=pauli)
    for b in (1, 2, 3, 6):
        _, c_grad, peak = run_checkpointed_naive(circuit, state, pauli=pauli, b=b)
        assert np.max(np.abs(c_grad - grad)) <= 1e-12
        assert peak == model_native(b, 15, 5, 6)


@pytest.mark.parametrize("n", [4, 5, 7, 8, 10])
@pytest.mark.parametrize("mode", ["full", "mem_save"])
def test_peak_matches_model_for_every_divisor(n, mode):
    d = 10
    circuit, fc, state, pauli = random_instance(n, d, batch=1, seed=n)
    for b in divisors(d):
        _, _, peak = run_checkpointed(fc, state, pauli=pauli, b=b, mode=mode)
        assert peak == model_fused(b, 3 * n, 9, d, narrowed=mode == "mem_save")


def test_traversals_add_one_forward_pass_per_block():
    _, fc, state, pauli = random_instance(6, 8, seed=2)
    plain = TraversalCounter()
    gradient(fc, state, pauli=pauli, counter=plain)
    for b in (1, 2, 4, 8):
        counter = TraversalCounter()
        run_checkpointed(fc, state, pauli=pauli, b=b, counter=counter)
        plan = plan_checkpoints(fc, b)
        extra = sum(stop - start for start, stop in plan.blocks)
        assert counter.forward == plain.forward + extra
        assert counter.backward == plain.backward
        assert counter.other == plain.other == 2


def test_accountant_returns_to_zero():
    _, fc, state, pauli = random_instance(4, 4, seed=1)
    acct = MemoryAccountant(state.nbytes)
    run_checkpointed(fc, state, pauli=pauli, b=2, accountant=acct)
    assert acct.current == 0 and acct.peak == model_fused(2, 12, 9, 4)
    assert acct.peak_bytes == int(acct.peak * state.nbytes)
    assert acct.working_buffers <= 6


def test_accountant_never_negative():
    acct = MemoryAccountant(8)
    acct.allocate(1)
    with pytest.raises(RuntimeError):
        acct.free(2)


def test_sqrt_scaling_of_peak():
    n = 6
    pauli = parse_pauli(hea_observable(n))
    state = new_random_state(n, 1, seed=1)
    peaks = {}
    for d in (16, 64, 256):
        fc = fuse_circuit(build_hea(n, d, seed=d))
        b = nearest_divisor_block(fused_layer_units(fc), d)
        peaks[d] = run_checkpointed(fc, state, pauli=pauli, b=b)[2]
    assert peaks == {16: 12, 64: 24, 256: 48}


def test_checkpoint_requires_layers():
    from gatefuse.circuit import Circuit, Rotation

    c = Circuit(1, [Rotation("X", 0, 0)], 1, theta=[0.1])
    with pytest.raises(ValueError):
        plan_checkpoints(fuse_circuit(c), 1)
