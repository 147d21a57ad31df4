import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatefuse.circuit import CNOT, CZ, Circuit, Rotation, build_hea, rotation_matrix
from gatefuse.fusion import (
    FusedCNOTBlock,
    FusedCZBlock,
    FusedUnitaryBlock,
    FusionPolicy,
    compose_block_unitary,
    format_fused,
    fuse_circuit,
)
from gatefuse.oracle import apply_gate


def test_twenty_qubit_layer_grouping():
    fc = fuse_circuit(build_hea(20, 1))
    blocks = [op for op in fc.ops if isinstance(op, FusedUnitaryBlock)]
    assert len(blocks) == 7
    assert [len(b.constituents) for b in blocks] == [9] * 6 + [6]
    assert [b.qubits for b in blocks][-1] == (18, 19)
    assert isinstance(fc.ops[-1], FusedCZBlock) and len(fc.ops[-1].pairs) == 20
    assert len(fc.ops) == 8


def test_folded_layer_has_wide_block_shape():
    fc = fuse_circuit(build_hea(9, 2, layer_width=20))
    sizes = [len(op.constituents) for op in fc.ops if isinstance(op, FusedUnitaryBlock)]
    assert sizes == ([9] * 6 + [6]) * 2
    assert fc.layer_starts == (0, 8)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 8, 13, 20])
def test_blocks_per_layer(n):
    fc = fuse_circuit(build_hea(n, 2))
    per_layer = -(-n // 3)
    assert fc.n_variational == 2 * per_layer
    assert len(fc.ops) == 2 * (per_layer + 1)


def test_single_qubit_group_of_one():
    c = Circuit(1, [Rotation("X", 0, 0), Rotation("Y", 0, 1), Rotation("Z", 0, 2)], 3)
    fc = fuse_circuit(c, FusionPolicy(group_size=1, max_constituents=3))
    assert len(fc.ops) == 1 and len(fc.ops[0].constituents) == 3


def test_no_fusion_across_cz():
    c = Circuit(2, [Rotation("X", 0, 0), CZ(0, 1), Rotation("X", 0, 1)], 2)
    fc = fuse_circuit(c)
    assert [type(op) for op in fc.ops] == [FusedUnitaryBlock, FusedCZBlock, FusedUnitaryBlock]
    assert fc.flatten() == list(c.gates)


def test_max_constituents_splits_block():
    gates = [Rotation("XYZ"[k % 3], 0, k) for k in range(7)]
    fc = fuse_circuit(Circuit(1, gates, 7), FusionPolicy(group_size=1, max_constituents=3))
    assert [len(op.constituents) for op in fc.ops] == [3, 3, 1]


def test_group_change_closes_block():
    gates = [Rotation("X", 0, 0), Rotation("X", 3, 1), Rotation("X", 1, 2)]
    fc = fuse_circuit(Circuit(4, gates, 3))
    assert [op.qubits for op in fc.ops] == [(0, 1, 2), (3,), (0, 1, 2)]


def test_cnot_runs_keep_order():
    gates = [CNOT(0, 1), CNOT(1, 2), CZ(0, 2), CNOT(2, 0)]
    fc = fuse_circuit(Circuit(3, gates, 0))
    assert [type(op) for op in fc.ops] == [FusedCNOTBlock, FusedCZBlock, FusedCNOTBlock]
    assert fc.ops[0].control_masks == [1, 2] and fc.ops[0].target_masks == [2, 4]
    assert fc.ops[1].masks == [0b101]


def test_policy_validation():
    with pytest.raises(ValueError):
        FusionPolicy(group_size=4)
    with pytest.raises(ValueError):
        FusionPolicy(max_constituents=0)


def test_layer_boundary_closes_block():
    gates = [Rotation("X", 0, 0), Rotation("Y", 0, 1)]
    fc = fuse_circuit(Circuit(1, gates, 2, layer_starts=[0, 1]), FusionPolicy(1, 9))
    assert len(fc.ops) == 2 and fc.layer_starts == (0, 1)


_gate = st.one_of(
    st.tuples(st.just("rot"), st.sampled_from("XYZ"), st.integers(0, 5)),
    st.tuples(st.just("cz"), st.integers(0, 5), st.integers(0, 5)),
    st.tuples(st.just("cnot"), st.integers(0, 5), st.integers(0, 5)),
)


def _build(specs, n=6):
    gates, p = [], 0
    for kind, a, b in specs:
        if kind == "rot":
            gates.append(Rotation(a, b, p))
            p += 1
        elif a != b:
            gates.append((CZ if kind == "cz" else CNOT)(a, b))
    return Circuit(n, gates, p)


@settings(max_examples=100, deadline=None)
@given(st.lists(_gate, max_size=40), st.integers(1, 3), st.integers(1, 9))
def test_flatten_reproduces_source(specs, g, m):
    c = _build(specs)
    fc = fuse_circuit(c, FusionPolicy(g, m))
    assert fc.flatten() == list(c.gates)
    for op in fc.ops:
        if isinstance(op, FusedUnitaryBlock):
            assert len(op.constituents) <= m
            assert op.qubits[0] % g == 0


# -- block unitary ---------------------------------------------------------------


def test_same_axis_composition():
    block = FusedUnitaryBlock((0,), (("Z", 0, 0), ("Z", 0, 1)))
    np.testing.assert_allclose(compose_block_unitary(block, [0.3, 1.1]),
                               rotation_matrix("Z", 1.4), atol=1e-15)


def test_empty_block_is_identity():
    block = FusedUnitaryBlock((0, 1, 2), ())
    np.testing.assert_array_equal(compose_block_unitary(block, []), np.eye(8))
    assert not block.variational


def test_block_rejects_non_adjacent_qubits():
    with pytest.raises(ValueError):
        FusedUnitaryBlock((0, 2), ())


def _embedded(axis, pos, theta):
    # kron ordering: local qubit 2 leftmost
    mats = [np.eye(2)] * 3
    mats[2 - pos] = rotation_matrix(axis, theta)
    return np.kron(np.kron(mats[0], mats[1]), mats[2])


def test_nine_constituent_block_against_kron_product(rng):
    cons = tuple((rng.choice(list("XYZ")), int(rng.integers(3)), k) for k in range(9))
    theta = rng.uniform(0, 2 * np.pi, 9)
    block = FusedUnitaryBlock((3, 4, 5), cons)
    expected = np.eye(8)
    for axis, pos, p in cons:
        expected = _embedded(axis, pos, theta[p]) @ expected
    u = compose_block_unitary(block, theta)
    np.testing.assert_allclose(u, expected, atol=1e-13)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(8), atol=1e-13)


def test_block_unitary_equals_sequential_gates(rng):
    n = 5
    cons = tuple((rng.choice(list("XYZ")), int(rng.integers(3)), k) for k in range(9))
    theta = rng.uniform(0, 2 * np.pi, 9)
    block = FusedUnitaryBlock((2, 3, 4), cons)
    vec = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    seq = vec.copy()
    for gate in block.gates():
        seq = apply_gate(seq, gate, theta, n)
    u = compose_block_unitary(block, theta)
    full = np.kron(u, np.eye(4))  # qubits 2..4 are the top bits
    np.testing.assert_allclose(full @ vec, seq, atol=1e-12)


def test_format_fused_lists_blocks():
    text = format_fused(fuse_circuit(build_hea(4, 1, seed=None)))
    assert "-- layer 0" in text
    assert "unitary q0..q2 x9" in text
    assert "cz x4" in text
