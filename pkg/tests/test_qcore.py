"""Unit tests for the dense operator/state/channel primitives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qec_sense.qcore import (
    Channel,
    DensityMatrix,
    Operator,
    Superoperator,
    channel_to_superoperator,
    dissipator,
    logical_states,
    pauli_string,
    unvec,
    vec,
)

RNG = np.random.default_rng(20240817)


def random_complex(shape):
    return RNG.normal(size=shape) + 1j * RNG.normal(size=shape)


def random_density(d: int) -> np.ndarray:
    a = random_complex((d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


# ---------------------------------------------------------------- vectorization


def test_vec_unvec_roundtrip():
    for d in (2, 4, 8):
        m = random_complex((d, d))
        np.testing.assert_allclose(unvec(vec(m)), m)


def test_vec_is_column_stacking():
    m = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(vec(m), [1, 3, 2, 4])


def test_vec_kron_identity():
    # vec(A X B) = kron(B.T, A) vec(X), the convention every superoperator uses
    for d in (2, 4):
        a, x, b = (random_complex((d, d)) for _ in range(3))
        np.testing.assert_allclose(np.kron(b.T, a) @ vec(x), vec(a @ x @ b), atol=1e-12)


def test_unvec_rejects_non_square_length():
    with pytest.raises(ValueError, match="stacked square"):
        unvec(np.arange(5.0))


# ---------------------------------------------------------------- Pauli strings


def test_pauli_string_puts_first_label_on_leftmost_factor():
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    eye4 = np.eye(4, dtype=complex)
    np.testing.assert_array_equal(pauli_string(3, "XII").matrix, np.kron(x, eye4))


def test_pauli_string_three_qubit_z_sum_eigenvalues():
    total = sum(
        pauli_string(3, "".join("Z" if k == j else "I" for k in range(3))).matrix
        for j in range(3)
    )
    # |000> and |111> carry the extreme eigenvalues +-3
    np.testing.assert_allclose(np.diag(total), [3, 1, 1, -1, 1, -1, -1, -3])


def test_pauli_string_rejects_bad_input():
    with pytest.raises(ValueError, match="labels"):
        pauli_string(3, "XI")
    with pytest.raises(ValueError, match="unknown Pauli"):
        pauli_string(2, "XQ")


# ---------------------------------------------------------------- Operator


def test_operator_dagger_and_matmul():
    a = Operator(random_complex((4, 4)))
    b = Operator(random_complex((4, 4)))
    np.testing.assert_allclose(a.dagger().matrix, a.matrix.conj().T)
    np.testing.assert_allclose((a @ b).matrix, a.matrix @ b.matrix)


def test_operator_rejects_non_square():
    with pytest.raises(ValueError, match="square"):
        Operator(np.ones((2, 3)))


# ---------------------------------------------------------------- DensityMatrix


def test_density_matrix_accepts_valid_state():
    rho = DensityMatrix(random_density(8))
    assert rho.dim == 8


def test_density_matrix_rejects_non_hermitian():
    bad = np.eye(2, dtype=complex)
    bad[0, 1] = 0.5
    with pytest.raises(ValueError, match="hermitian"):
        DensityMatrix(bad)


def test_density_matrix_rejects_wrong_trace():
    with pytest.raises(ValueError, match="trace"):
        DensityMatrix(2.0 * np.eye(2) / 2.0 + np.eye(2) / 2.0)


def test_density_matrix_rejects_negative_eigenvalue():
    bad = np.diag([1.5, -0.5]).astype(complex)
    with pytest.raises(ValueError, match="positive semidefinite"):
        DensityMatrix(bad)


def test_from_state_vector_normalizes():
    rho = DensityMatrix.from_state_vector([3.0, 4.0])
    np.testing.assert_allclose(np.diag(rho.matrix).real, [9 / 25, 16 / 25])
    with pytest.raises(ValueError, match="zero vector"):
        DensityMatrix.from_state_vector([0.0, 0.0])


def test_expectation_of_observable():
    rho = DensityMatrix.from_state_vector([1.0, 0.0])
    z = Operator(np.diag([1.0, -1.0]).astype(complex))
    assert rho.expectation(z) == pytest.approx(1.0)


# ---------------------------------------------------------------- Channel


def test_channel_rejects_incomplete_kraus_set():
    half = np.sqrt(0.5) * np.eye(2)
    with pytest.raises(ValueError, match="completeness"):
        Channel(kraus=(half,))


def test_channel_apply_is_kraus_sum():
    p = 0.3
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    flip = Channel(kraus=(np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * x))
    rho = random_density(2)
    expected = (1 - p) * rho + p * x @ rho @ x
    np.testing.assert_allclose(flip.apply(rho), expected, atol=1e-14)


def test_channel_matches_its_superoperator():
    p = 0.2
    sx = pauli_string(3, "XII").matrix
    ch = Channel(kraus=(np.sqrt(1 - p) * np.eye(8), np.sqrt(p) * sx))
    s = channel_to_superoperator(ch)
    rho = random_density(8)
    np.testing.assert_allclose(s.apply(rho), ch.apply(rho), atol=1e-13)


def test_channel_preserves_trace_and_positivity():
    p = 0.4
    sx = pauli_string(2, "XI").matrix
    ch = Channel(kraus=(np.sqrt(1 - p) * np.eye(4), np.sqrt(p) * sx))
    rho = random_density(4)
    out = ch.apply(rho)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-13)
    assert np.linalg.eigvalsh(out)[0] >= -1e-13


# ---------------------------------------------------------------- Superoperator


def test_superoperator_power_matches_repeated_matmul():
    s = Superoperator(random_complex((4, 4)) / 4.0)
    np.testing.assert_allclose((s @ s @ s).matrix, s.power(3).matrix, atol=1e-12)
    with pytest.raises(ValueError, match="negative"):
        s.power(-1)


def test_superoperator_rejects_non_square_side():
    with pytest.raises(ValueError, match="perfect square"):
        Superoperator(np.eye(5))


# ---------------------------------------------------------------- helpers


def test_logical_states_are_all_zeros_and_all_ones():
    zero, one = logical_states(3)
    assert zero[0] == 1.0 and np.count_nonzero(zero) == 1
    assert one[-1] == 1.0 and np.count_nonzero(one) == 1


@settings(deadline=None, max_examples=25)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_dissipator_output_is_traceless(seed):
    rng = np.random.default_rng(seed)
    L = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = a @ a.conj().T
    rho = rho / np.trace(rho)
    assert abs(np.trace(dissipator(L, rho))) < 1e-12 * np.linalg.norm(L) ** 2
