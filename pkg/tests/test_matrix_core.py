from functools import reduce

import numpy as np
import pytest

from jsrbound.errors import CapacityError, DimensionError, SymmetryError, ValidationError
from jsrbound.matrix_core import (
    LinearOperator,
    dense_operator,
    kron,
    kron_matvec,
    kron_power,
    operator_radius,
    power_iterate,
    power_iteration,
    spectral_norm,
    spectral_radius,
    svec,
    sym_side,
    unsvec,
)


def test_spectral_radius_and_norm():
    A = np.array([[2.0, 1.0], [0.0, -3.0]])
    assert spectral_radius(A) == pytest.approx(3.0)
    assert spectral_norm(np.diag([3.0, -4.0])) == pytest.approx(4.0)
    assert spectral_radius(np.zeros((3, 3))) == 0.0
    assert spectral_radius([[0.0, 1.0], [0.0, 0.0]]) == pytest.approx(0.0, abs=1e-12)


def test_spectral_radius_rejects_non_square():
    with pytest.raises(DimensionError):
        spectral_radius(np.ones((2, 3)))


def test_kron_matvec_matches_explicit_product():
    rng = np.random.default_rng(1)
    factors = [rng.standard_normal((2, 2)), rng.standard_normal((3, 3)), rng.standard_normal((2, 2))]
    x = rng.standard_normal(12)
    expected = reduce(np.kron, factors) @ x
    np.testing.assert_allclose(kron_matvec(factors, x), expected, rtol=1e-12, atol=1e-12)


def test_kron_power_refuses_beyond_limit():
    assert kron_power(np.eye(2), 3).shape == (8, 8)
    with pytest.raises(CapacityError):
        kron_power(np.eye(4), 7, limit=4096)


def test_svec_uses_unscaled_upper_triangle():
    v = svec([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])
    np.testing.assert_array_equal(v.coords, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    np.testing.assert_array_equal(unsvec(v), [[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])


def test_svec_rejects_asymmetric_input():
    with pytest.raises(SymmetryError):
        svec([[1.0, 2.0], [0.0, 1.0]])


def test_sym_side():
    assert sym_side(6) == 3
    assert sym_side(5050) == 100
    with pytest.raises(DimensionError):
        sym_side(5)


def test_power_iteration_on_positive_matrix():
    estimate, converged = power_iteration(dense_operator([[2.0, 1.0], [1.0, 2.0]]))
    assert converged
    assert estimate == pytest.approx(3.0)


def test_power_iteration_collapses_on_nilpotent_operator():
    res = power_iterate(dense_operator([[0.0, 1.0], [0.0, 0.0]]))
    assert res.converged
    assert res.estimate == 0.0


def test_power_iteration_requires_cone_invariance():
    with pytest.raises(ValidationError):
        power_iterate(dense_operator([[1.0, -1.0], [0.0, 1.0]]))


def test_operator_radius_power_path_matches_dense_solver():
    rng = np.random.default_rng(7)
    A = rng.random((100, 100))
    op = dense_operator(A)
    assert operator_radius(op, dense_eig_limit=64) == pytest.approx(spectral_radius(A), rel=1e-8)


def test_operator_radius_without_cone_uses_dense_solver():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((80, 80))
    op = dense_operator(A, cone_invariant=False)
    assert operator_radius(op, dense_eig_limit=64) == pytest.approx(spectral_radius(A), rel=1e-10)


def test_materialize_refuses_oversized_operator():
    op = LinearOperator(dim=10_000, apply=lambda x: x, cone_invariant=True)
    with pytest.raises(CapacityError):
        op.materialize(limit=4096)


def _charpoly(A: np.ndarray) -> list[float]:
    # Faddeev-LeVerrier, highest degree first
    n = A.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(A)
    for k in range(1, n + 1):
        M = A @ M + coeffs[-1] * np.eye(n)
        coeffs.append(-float(np.trace(A @ M)) / k)
    return coeffs


def test_spectral_radius_matches_characteristic_polynomial_roots():
    rng = np.random.default_rng(12)
    for n in (1, 2, 3, 4) * 5:
        A = rng.standard_normal((n, n))
        roots = np.roots(_charpoly(A))
        assert spectral_radius(A) == pytest.approx(float(np.max(np.abs(roots))), rel=1e-8)


def test_kron_mixed_product():
    rng = np.random.default_rng(20)
    A1, A2 = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    B1, B2 = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    np.testing.assert_allclose(kron(A1, B1) @ kron(A2, B2), kron(A1 @ A2, B1 @ B2), rtol=1e-12, atol=1e-12)


def test_kron_transpose():
    rng = np.random.default_rng(21)
    A, B = rng.standard_normal((2, 3)), rng.standard_normal((3, 2))
    np.testing.assert_array_equal(kron(A, B).T, kron(A.T, B.T))


def test_kron_power_of_product():
    rng = np.random.default_rng(22)
    A, B = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    for k in (1, 2, 3):
        np.testing.assert_allclose(
            kron_power(A @ B, k), kron_power(A, k) @ kron_power(B, k), rtol=1e-12, atol=1e-11
        )


def test_kron_power_norm_and_radius():
    rng = np.random.default_rng(23)
    for n in (2, 3):
        A = rng.standard_normal((n, n))
        for k in (1, 2, 3):
            P = kron_power(A, k)
            assert spectral_norm(P) == pytest.approx(spectral_norm(A) ** k, rel=1e-10)
            assert spectral_radius(P) == pytest.approx(spectral_radius(A) ** k, rel=1e-8)


def test_power_iteration_agrees_on_random_nonnegative_matrices():
    rng = np.random.default_rng(24)
    for n in range(2, 10):
        A = rng.random((n, n))
        estimate, converged = power_iteration(dense_operator(A))
        assert converged
        assert estimate == pytest.approx(spectral_radius(A), rel=1e-8)


def test_power_iteration_needs_a_start_vector():
    op = LinearOperator(dim=3, apply=lambda x: x, cone_invariant=True, start=None)
    with pytest.raises(ValidationError):
        power_iterate(op)
    assert operator_radius(op, dense_eig_limit=1) == pytest.approx(1.0)
