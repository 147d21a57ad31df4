import numpy as np
import pytest

from gatefuse.circuit import (
    CNOT,
    CZ,
    PAULI,
    Circuit,
    PauliString,
    Rotation,
    build_hea,
    circuit_from_text,
    circuit_to_text,
    hea_observable,
    parse_pauli,
    rotation_derivative,
    rotation_matrix,
)
from gatefuse.oracle import circuit_to_matrix

AXES = ["X", "Y", "Z"]


def test_rotation_examples():
    np.testing.assert_allclose(rotation_matrix("Z", 0), np.eye(2), atol=1e-16)
    np.testing.assert_allclose(rotation_matrix("X", np.pi), [[0, -1j], [-1j, 0]], atol=1e-15)
    h = np.sqrt(2) / 2
    np.testing.assert_allclose(rotation_matrix("Y", np.pi / 2), [[h, -h], [h, h]], atol=1e-15)


@pytest.mark.parametrize("axis", AXES)
def test_rotation_is_unitary(axis, rng):
    for theta in rng.uniform(-10, 10, 100):
        u = rotation_matrix(axis, theta)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(2), atol=1e-15)


@pytest.mark.parametrize("axis", AXES)
def test_rotation_is_matrix_exponential(axis):
    # exp(-i t/2 P) via the eigendecomposition of the Pauli matrix
    t = 1.234
    w, v = np.linalg.eigh(PAULI[axis])
    expected = v @ np.diag(np.exp(-0.5j * t * w)) @ v.conj().T
    np.testing.assert_allclose(rotation_matrix(axis, t), expected, atol=1e-15)


def test_derivative_examples():
    np.testing.assert_allclose(rotation_derivative("Z", 0), -0.5j * PAULI["Z"], atol=1e-16)
    np.testing.assert_allclose(rotation_derivative("X", np.pi), -0.5 * np.eye(2), atol=1e-16)


@pytest.mark.parametrize("axis", AXES)
def test_derivative_matches_finite_difference(axis):
    h, t = 1e-5, 0.7
    fd = (rotation_matrix(axis, t + h) - rotation_matrix(axis, t - h)) / (2 * h)
    np.testing.assert_allclose(rotation_derivative(axis, t), fd, atol=1e-8)


@pytest.mark.parametrize("axis", AXES)
def test_derivative_is_half_shifted_rotation(axis, rng):
    for t in rng.uniform(-5, 5, 10):
        np.testing.assert_allclose(rotation_derivative(axis, t),
                                   0.5 * rotation_matrix(axis, t + np.pi), atol=1e-15)


def test_bad_axis():
    with pytest.raises(ValueError):
        rotation_matrix("W", 0.1)
    with pytest.raises(ValueError):
        Rotation("Q", 0, 0)


# -- circuit validation -----------------------------------------------------


def test_circuit_rejects_out_of_range_qubit():
    with pytest.raises(ValueError):
        Circuit(2, [CZ(0, 2)], 0)


def test_circuit_rejects_identical_control_target():
    with pytest.raises(ValueError):
        Circuit(2, [CNOT(1, 1)], 0)


def test_circuit_rejects_reused_parameter():
    with pytest.raises(ValueError):
        Circuit(1, [Rotation("X", 0, 0), Rotation("Y", 0, 0)], 2)


def test_circuit_rejects_bad_theta_length():
    with pytest.raises(ValueError):
        Circuit(1, [Rotation("X", 0, 0)], 1, theta=[0.1, 0.2])


# -- HEA ---------------------------------------------------------------------


def test_hea_twenty_qubit_layer():
    c = build_hea(20, 1)
    assert c.count(Rotation) == 60 and c.count(CZ) == 20
    assert c.n_params == 60


def test_hea_parameter_count_thousand_layers():
    assert build_hea(20, 1000, seed=None).n_params == 60_000


def test_hea_two_qubits_single_cz():
    c = build_hea(2, 1)
    assert c.count(Rotation) == 6 and c.count(CZ) == 1


@pytest.mark.parametrize("n", [3, 4, 7, 12])
def test_hea_counts_per_layer(n):
    c = build_hea(n, 3)
    assert c.count(Rotation) == 9 * n and c.count(CZ) == 3 * n
    assert c.layer_starts == tuple(4 * n * k for k in range(3))


def test_hea_layer_order():
    gates = build_hea(3, 1).gates
    assert [(g.axis, g.target) for g in gates[:6]] == [
        ("X", 0), ("Y", 0), ("Z", 0), ("X", 1), ("Y", 1), ("Z", 1)]
    assert [(g.control, g.target) for g in gates[9:]] == [(0, 1), (1, 2), (2, 0)]


def test_hea_parameters_fresh_and_in_range():
    c = build_hea(5, 4, seed=3)
    assert sorted(g.param for g in c.gates if isinstance(g, Rotation)) == list(range(60))
    assert np.all((c.theta >= 0) & (c.theta < 2 * np.pi))


def test_hea_rejects_single_qubit():
    with pytest.raises(ValueError):
        build_hea(1, 1)


def test_hea_folded_width_matches_wide_layer():
    wide = build_hea(20, 1, seed=None)
    folded = build_hea(9, 1, seed=None, layer_width=20)
    assert folded.count(Rotation) == wide.count(Rotation) == 60
    assert folded.count(CZ) == wide.count(CZ) == 20
    assert [g.param for g in folded.gates if isinstance(g, Rotation)] == list(range(60))


def test_cz_order_does_not_matter(rng):
    # the ring is emitted in ascending order, but any order gives the same operator
    c = build_hea(4, 1, seed=2)
    rots = [g for g in c.gates if isinstance(g, Rotation)]
    czs = [g for g in c.gates if isinstance(g, CZ)]
    shuffled = Circuit(4, rots + [czs[i] for i in rng.permutation(len(czs))], c.n_params, theta=c.theta)
    np.testing.assert_allclose(circuit_to_matrix(c), circuit_to_matrix(shuffled), atol=1e-15)


# -- Pauli strings ------------------------------------------------------------


@pytest.mark.parametrize(
    "label,x,z,y",
    [("Z", 0, 1, 0), ("IXYZ", 0b0110, 0b0011, 1), ("YY", 0b11, 0b11, 2)],
)
def test_parse_pauli(label, x, z, y):
    p = parse_pauli(label)
    assert (p.x_mask, p.z_mask, p.y_count) == (x, z, y)
    assert p.label == label


def test_parse_pauli_errors():
    with pytest.raises(ValueError):
        parse_pauli("IXQ")
    with pytest.raises(ValueError):
        parse_pauli("XX", n=3)
    with pytest.raises(ValueError):
        parse_pauli("")


def test_pauli_invariant_checked():
    with pytest.raises(ValueError):
        PauliString(2, 0b11, 0b01, 0)


def test_pauli_factor_positions():
    p = parse_pauli("XYZI")
    assert [p.factor(q) for q in range(4)] == ["I", "Z", "Y", "X"]


def test_hea_observable():
    assert hea_observable(6) == "IXYZIX"
    assert hea_observable(3) == "IXY"


# -- text format ---------------------------------------------------------------


def test_text_round_trip():
    c = Circuit(3, [Rotation("X", 0, 1), CZ(0, 2), CNOT(2, 1), Rotation("Z", 2, 0)], 2,
                layer_starts=[0, 2])
    text = circuit_to_text(c)
    assert "rx q0 p1" in text and "cnot q2 q1" in text
    back = circuit_from_text(text)
    assert back == c


def test_text_round_trip_hea():
    c = build_hea(5, 3, seed=None)
    assert circuit_from_text(circuit_to_text(c)) == c


@pytest.mark.parametrize("text", [
    "qubits 2\nparams 0\nswap q0 q1\n",
    "params 0\ncz q0 q1\n",
    "qubits 2\nparams 1\nrx 0 p0\n",
])
def test_text_parse_errors(text):
    with pytest.raises(ValueError):
        circuit_from_text(text)
