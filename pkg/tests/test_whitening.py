import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wvae.whitening import (
    ConvergenceError,
    WhiteningTransform,
    fit_whitening,
    jacobi_eigh,
    spectrum,
    unwhiten,
    whiten,
)


def random_sym(rng, d):
    a = rng.standard_normal((d, d))
    return (a + a.T) / 2


def correlated(seed, n=500, d=4):
    rng = np.random.default_rng(seed)
    mix = rng.standard_normal((d, d))
    return rng.standard_normal((n, d)) @ mix + rng.standard_normal(d)


def test_jacobi_2x2():
    vals, vecs = jacobi_eigh([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(vals, [3.0, 1.0], atol=1e-14)
    s = 1 / np.sqrt(2)
    assert np.allclose(np.abs(vecs[:, 0]), [s, s], atol=1e-14)
    assert np.allclose(np.abs(vecs[:, 1]), [s, s], atol=1e-14)
    assert vecs[0, 1] * vecs[1, 1] < 0


def test_jacobi_identity():
    vals, vecs = jacobi_eigh(np.eye(4))
    assert np.array_equal(vals, np.ones(4))


def test_jacobi_1x1():
    vals, vecs = jacobi_eigh([[5.0]])
    assert vals.tolist() == [5.0] and vecs.tolist() == [[1.0]]


@pytest.mark.parametrize("seed", range(5))
def test_jacobi_reconstruction_10x10(seed):
    S = random_sym(np.random.default_rng(seed), 10)
    vals, U = jacobi_eigh(S)
    assert np.linalg.norm(U @ np.diag(vals) @ U.T - S) / np.linalg.norm(S) <= 1e-10
    assert np.allclose(U.T @ U, np.eye(10), atol=1e-12)
    assert np.all(np.diff(vals) <= 0)


def test_jacobi_agrees_with_lapack():
    S = random_sym(np.random.default_rng(9), 8)
    assert np.allclose(jacobi_eigh(S)[0], np.sort(np.linalg.eigvalsh(S))[::-1], atol=1e-12)


def test_jacobi_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        jacobi_eigh([[1.0, 2.0], [0.0, 1.0]])


def test_jacobi_non_convergence_reports_residual():
    with pytest.raises(ConvergenceError, match="residual"):
        jacobi_eigh(random_sym(np.random.default_rng(0), 6), max_sweeps=1)


def test_fit_identical_rows_all_degenerate():
    T = fit_whitening(np.tile([1.0, -2.0, 3.0], (5, 1)))
    assert np.array_equal(T.eigvals, np.zeros(3))
    assert T.degenerate.all()
    assert np.array_equal(whiten([4.0, 4.0, 4.0], T), np.zeros(3))


def test_fit_axis_aligned_sample():
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((20000, 2)) * [2.0, 1.0]
    T = fit_whitening(Z)
    oracle = np.cov(Z, rowvar=False)
    assert np.allclose(T.eigvals, np.sort(np.linalg.eigvalsh(oracle))[::-1], rtol=1e-10)
    assert np.allclose(T.eigvals, [4.0, 1.0], rtol=0.05)
    assert np.allclose(np.abs(T.eigvecs), np.eye(2), atol=0.05)


def test_fit_requires_two_rows():
    with pytest.raises(ValueError):
        fit_whitening(np.zeros((1, 3)))


def test_fit_duplication():
    Z = correlated(1)
    a, b = fit_whitening(Z), fit_whitening(np.vstack([Z, Z]))
    assert np.allclose(a.mean, b.mean, atol=1e-12)
    assert np.allclose(a.eigvecs, b.eigvecs, atol=1e-9)
    n = len(Z)
    # the (N-1) estimator scales every eigenvalue by exactly 2(n-1)/(2n-1)
    assert np.allclose(b.eigvals, a.eigvals * 2 * (n - 1) / (2 * n - 1), rtol=1e-9, atol=0)


def test_fit_row_order_invariant():
    Z = correlated(2)
    a = fit_whitening(Z)
    b = fit_whitening(Z[np.random.default_rng(0).permutation(len(Z))])
    assert np.allclose(a.eigvals, b.eigvals, rtol=0, atol=1e-12)
    assert np.allclose(a.eigvecs, b.eigvecs, rtol=0, atol=1e-12)
    assert np.allclose(a.mean, b.mean, rtol=0, atol=1e-12)


def test_transform_invariants():
    Z = correlated(3)
    T = fit_whitening(Z)
    cov = np.cov(Z, rowvar=False)
    assert np.allclose(T.eigvecs.T @ T.eigvecs, np.eye(4), atol=1e-9)
    assert np.all(np.diff(T.eigvals) <= 0) and np.all(T.eigvals >= 0)
    recon = T.eigvecs @ np.diag(T.eigvals) @ T.eigvecs.T
    assert np.linalg.norm(recon - cov) / np.linalg.norm(cov) <= 1e-8
    # largest-magnitude component of each eigenvector is positive
    idx = np.argmax(np.abs(T.eigvecs), axis=0)
    assert np.all(T.eigvecs[idx, np.arange(4)] > 0)


def test_whiten_mean_is_zero():
    T = fit_whitening(correlated(4))
    assert np.allclose(whiten(T.mean, T), 0.0, atol=1e-15)


def test_whiten_hand_example():
    T = WhiteningTransform(np.zeros(2), np.eye(2), np.array([4.0, 1.0]), np.zeros(2, bool))
    assert whiten([2.0, 0.0], T).tolist() == [1.0, 0.0]


def test_whitened_covariance_is_identity():
    Z = correlated(5)
    W = whiten(Z, fit_whitening(Z))
    assert np.allclose(np.cov(W, rowvar=False), np.eye(4), atol=1e-6, rtol=0)


def test_unwhiten_zero_is_mean():
    T = fit_whitening(correlated(6))
    assert np.array_equal(unwhiten(np.zeros(4), T), T.mean)


def test_round_trips():
    Z = correlated(7)
    T = fit_whitening(Z)
    z = np.random.default_rng(1).standard_normal((50, 4)) * 3
    assert np.max(np.abs(unwhiten(whiten(z, T), T) - z)) <= 1e-9
    assert np.max(np.abs(whiten(unwhiten(z, T), T) - z)) <= 1e-9


def test_unit_step_moves_along_scaled_eigenvector():
    T = fit_whitening(correlated(8))
    base = np.random.default_rng(2).standard_normal(4)
    for j in range(4):
        step = base.copy()
        step[j] += 1.0
        diff = unwhiten(step, T) - unwhiten(base, T)
        assert np.allclose(diff, np.sqrt(T.eigvals[j]) * T.eigvecs[:, j], atol=1e-12)


def test_dimension_mismatch():
    T = fit_whitening(correlated(9))
    with pytest.raises(ValueError):
        whiten(np.zeros(3), T)
    with pytest.raises(ValueError):
        unwhiten(np.zeros(5), T)


def test_degenerate_dimension_pinned_to_zero():
    rng = np.random.default_rng(0)
    Z = np.column_stack([rng.standard_normal(200), rng.standard_normal(200), np.full(200, 0.7)])
    T = fit_whitening(Z)
    assert T.degenerate.tolist() == [False, False, True]
    W = whiten(Z, T)
    assert np.all(W[:, 2] == 0.0)
    assert np.allclose(unwhiten(W, T), Z, atol=1e-9)


def test_spectrum():
    T = WhiteningTransform(np.zeros(2), np.eye(2), np.array([3.0, 1.0]), np.zeros(2, bool))
    assert spectrum(T) == [3.0, 1.0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 1))
def test_affine_property(seed, alpha):
    T = fit_whitening(correlated(seed % 50, n=100, d=3))
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(3) * 2, rng.standard_normal(3) * 2
    for f in (whiten, unwhiten):
        lhs = f(alpha * a + (1 - alpha) * b, T)
        rhs = alpha * f(a, T) + (1 - alpha) * f(b, T)
        assert np.allclose(lhs, rhs, atol=1e-9, rtol=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_spectrum_nonincreasing(seed):
    T = fit_whitening(correlated(seed, n=30, d=5))
    s = spectrum(T)
    assert all(x >= y for x, y in zip(s, s[1:]))
