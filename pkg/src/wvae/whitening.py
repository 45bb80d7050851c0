"""PCA whitening of latent codes.

Fit on the encodings of a training corpus, then move between raw latent
coordinates and whitened ones (unit variance, uncorrelated):

    whiten(z)    = diag(eigvals)^(-1/2) U^T (z - mean)
    unwhiten(zw) = U diag(eigvals)^(1/2) zw + mean

Directions with eigenvalue below ``DEGENERATE_TOL`` are pinned to zero in
whitened space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEGENERATE_TOL = 1e-12
SYMMETRY_TOL = 1e-9


class ConvergenceError(RuntimeError):
    pass


def jacobi_eigh(S, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigvals, eigvecs)`` sorted by descending eigenvalue, with
    eigenvectors as columns. Sweeps stop once the largest off-diagonal
    magnitude drops below ``tol * max(1, ||S||_F)``.
    """
    A = np.array(S, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    asym = np.max(np.abs(A - A.T))
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric (max |S - S^T| = {asym:.3g})")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    V = np.eye(n)
    threshold = tol * max(1.0, np.linalg.norm(A))

    def off_max(M):
        return np.max(np.abs(M - np.diag(np.diag(M)))) if n > 1 else 0.0

    for _ in range(max_sweeps + 1):
        if off_max(A) < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps, residual {off_max(A):.3g}")

    eigvals = np.diag(A).copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], V[:, order]


def _fix_signs(U: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


@dataclass(frozen=True)
class WhiteningTransform:
    mean: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    degenerate: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def _scale(self, power: float) -> np.ndarray:
        out = np.zeros(self.dim)
        ok = ~self.degenerate
        out[ok] = self.eigvals[ok] ** power
        return out


def fit_whitening(Z) -> WhiteningTransform:
    """Fit mean, eigenvectors and eigenvalues of the latent covariance (N-1 normalised)."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise ValueError(f"need at least two latent codes, got shape {Z.shape}")
    mean = Z.mean(axis=0)
    centered = Z - mean
    cov = centered.T @ centered / (Z.shape[0] - 1)
    eigvals, eigvecs = jacobi_eigh(cov)
    eigvals = np.maximum(eigvals, 0.0)
    return WhiteningTransform(
        mean=mean,
        eigvecs=_fix_signs(eigvecs),
        eigvals=eigvals,
        degenerate=eigvals < DEGENERATE_TOL,
    )


def _check_dim(z: np.ndarray, T: WhiteningTransform) -> None:
    if z.shape[-1] != T.dim:
        raise ValueError(f"latent width {z.shape[-1]} does not match transform dimension {T.dim}")


def whiten(z, T: WhiteningTransform) -> np.ndarray:
    """Map raw codes (a vector or rows of a batch) into whitened coordinates."""
    z = np.asarray(z, dtype=np.float64)
    _check_dim(z, T)
    return ((z - T.mean) @ T.eigvecs) * T._scale(-0.5)


def unwhiten(z_w, T: WhiteningTransform) -> np.ndarray:
    """Inverse of :func:`whiten` on the non-degenerate subspace."""
    z_w = np.asarray(z_w, dtype=np.float64)
    _check_dim(z_w, T)
    return (z_w * T._scale(0.5)) @ T.eigvecs.T + T.mean


def spectrum(T: WhiteningTransform) -> list[float]:
    return [float(v) for v in T.eigvals]
