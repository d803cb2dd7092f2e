"""Dense matrix kernels shared by the solvers.

SVD is delegated to LAPACK through numpy; singular-vector signs are fixed
deterministically (first significantly-nonzero component of each left
singular vector is made nonnegative) so downstream results do not depend on
backend sign conventions.
"""

from dataclasses import dataclass

import numpy as np

#: Default projection floor keeping multiplicative iterates strictly positive.
DEFAULT_FLOOR = 1e-12


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``m = U @ diag(s) @ V.T`` with s sorted nonincreasing."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    def compose(self):
        return (self.U * self.s) @ self.V.T


def _fix_signs(U, V):
    for j in range(U.shape[1]):
        col = U[:, j]
        scale = np.max(np.abs(col))
        if scale == 0.0:
            continue
        nz = np.nonzero(np.abs(col) > 1e-12 * scale)[0]
        if nz.size and col[nz[0]] < 0.0:
            U[:, j] = -col
            V[:, j] = -V[:, j]
    return U, V


def svd(m):
    """Thin SVD of a finite 2-d matrix.

    Raises
    ------
    ValueError
        If the input contains NaN or infinite entries.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("svd: input has non-finite entries")
    U, s, Vt = np.linalg.svd(m, full_matrices=False)
    U, V = _fix_signs(U, Vt.T.copy())
    return SvdResult(U=U, s=s, V=V)


def soft_threshold_singular_values(s, rho_thr):
    """Shrink nonnegative values toward zero: ``max(s_i - rho_thr, 0)``."""
    if rho_thr < 0:
        raise ValueError(f"threshold must be >= 0, got {rho_thr}")
    return np.maximum(np.asarray(s, dtype=np.float64) - rho_thr, 0.0)


def best_rank_k(m, k):
    """Best rank-``k`` approximation in the Frobenius/spectral sense."""
    m = np.asarray(m, dtype=np.float64)
    if not 1 <= k <= min(m.shape):
        raise ValueError(f"rank {k} out of range for shape {m.shape}")
    r = svd(m)
    return (r.U[:, :k] * r.s[:k]) @ r.V[:, :k].T


def project_floor(m, floor=DEFAULT_FLOOR):
    """Clamp every entry from below; keeps multiplicative iterates positive."""
    return np.maximum(np.asarray(m, dtype=np.float64), floor)
