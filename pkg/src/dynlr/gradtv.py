"""Separated baseline: low-rank gradient reconstruction, then decomposition.

The reconstruction loop alternates a columnwise gradient step on the data
term with singular-value soft-thresholding (the proximal map of the nuclear
norm) and a nonnegativity clip; a single split-Bregman TV denoising pass
runs after the loop.  The decomposition is either a plain truncated SVD
(PCA factors) or a post-hoc nonnegative factorization of the result.
"""

import time
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import NumericalError
from .linalg import DEFAULT_FLOOR, project_floor, soft_threshold_singular_values, svd
from .solvers import (JointConfig, JointResult, SolveTrace, _bcx_b, _bcx_c,
                      _adjoint_data, _rel_change, init_factors)


@dataclass(frozen=True)
class GradTvConfig:
    """Stepsize, nuclear threshold, denoise weight and stopping rule."""

    rho_grad: float
    rho_thr: float
    rho_tv: float
    mu_c_tilde: float = 0.1
    max_iter: int = 1200
    rel_tol: float = 5e-5

    def __post_init__(self):
        for name in ("rho_grad", "rho_thr", "rho_tv", "mu_c_tilde",
                     "max_iter", "rel_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


def low_rank_prox(X, rho_thr):
    """Soft-threshold the singular values of ``X`` and recompose.

    The result has rank at most the number of singular values exceeding
    the threshold.
    """
    r = svd(X)
    s = soft_threshold_singular_values(r.s, rho_thr)
    return (r.U * s) @ r.V.T


def gradtv_solve(Y, operators, cfg, X0=None):
    """Low-rank reconstruction of the stack from undersampled data.

    Per iteration: columnwise gradient step on the least-squares data term,
    nuclear-norm proximal step, clip at zero.  Aborts if the data residual
    grows tenfold over its initial value (stepsize too large).  A per-frame
    TV denoising pass is applied once after the loop.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if X0 is None:
        X = _adjoint_data(operators, Y)
    else:
        X = np.array(X0, dtype=np.float64)
    G = _adjoint_data(operators, Y)
    alpha_implied = cfg.rho_thr / cfg.rho_grad
    trace = SolveTrace()
    res0 = None
    for it in range(cfg.max_iter):
        t0 = time.perf_counter()
        res_sq = 0.0
        grad = np.empty_like(X)
        for t, op in enumerate(operators):
            ax = op.apply(X[:, t])
            r = ax - Y[:, t]
            res_sq += float(r @ r)
            grad[:, t] = op.adjoint(ax) - G[:, t]
        if res0 is None:
            res0 = np.sqrt(res_sq)
        elif np.sqrt(res_sq) > 10.0 * res0 and res0 > 0:
            raise NumericalError(
                f"data residual grew {np.sqrt(res_sq) / res0:.1f}x over its "
                "initial value; reduce rho_grad")
        r = svd(X - cfg.rho_grad * grad)
        s = soft_threshold_singular_values(r.s, cfg.rho_thr)
        X_new = np.maximum((r.U * s) @ r.V.T, 0.0)
        rel = _rel_change(X_new, X, DEFAULT_FLOOR)
        X = X_new
        trace.append(it + 1, 0.5 * res_sq + alpha_implied * float(s.sum()),
                     rel, np.nan, np.nan, time.perf_counter() - t0)
        trace.iterations_run = it + 1
        if rel < cfg.rel_tol:
            trace.stop_reason = "rel-change"
            break
    X = tv_denoise(X, cfg.rho_tv)
    return X, trace


# ---------------------------------------------------------------------------
# Split-Bregman isotropic TV denoising (ROF), applied per time frame.
# ---------------------------------------------------------------------------

def _grad2d(u):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return gx, gy


def _grad2d_adj(px, py):
    out = np.zeros_like(px)
    out[:, :-1] -= px[:, :-1]
    out[:, 1:] += px[:, :-1]
    out[:-1, :] -= py[:-1, :]
    out[1:, :] += py[:-1, :]
    return out


def denoise_frame(f, weight, n_iter=30):
    """Solve ``min_u 0.5 ||u - f||^2 + weight * TV(u)`` on one 2-d frame.

    Split Bregman with penalty ``2 * weight``; the quadratic subproblem is
    solved exactly with a DCT (Neumann boundary), the shrinkage step is the
    isotropic vector soft-threshold.
    """
    f = np.asarray(f, dtype=np.float64)
    beta = 2.0 * weight
    h, w = f.shape
    lam = ((2.0 - 2.0 * np.cos(np.pi * np.arange(h) / h))[:, None]
           + (2.0 - 2.0 * np.cos(np.pi * np.arange(w) / w))[None, :])
    denom = 1.0 + beta * lam
    dx = np.zeros_like(f)
    dy = np.zeros_like(f)
    bx = np.zeros_like(f)
    by = np.zeros_like(f)
    u = f
    for _ in range(n_iter):
        rhs = f + beta * _grad2d_adj(dx - bx, dy - by)
        u = scipy.fft.idctn(scipy.fft.dctn(rhs, norm="ortho") / denom, norm="ortho")
        gx, gy = _grad2d(u)
        sx, sy = gx + bx, gy + by
        mag = np.hypot(sx, sy)
        scale = np.maximum(mag - weight / beta, 0.0) / np.where(mag > 0, mag, 1.0)
        dx, dy = scale * sx, scale * sy
        bx, by = sx - dx, sy - dy
    return u


def tv_denoise(X, rho_tv, n_iter=30):
    """Frame-by-frame TV denoising of a space-time stack."""
    X = np.asarray(X, dtype=np.float64)
    side = round(np.sqrt(X.shape[0]))
    if side * side != X.shape[0]:
        raise ValueError(f"{X.shape[0]} pixels do not form square frames")
    out = np.empty_like(X)
    for t in range(X.shape[1]):
        out[:, t] = denoise_frame(X[:, t].reshape(side, side), rho_tv, n_iter).ravel()
    return out


# ---------------------------------------------------------------------------
# Decomposition of a reconstructed stack.
# ---------------------------------------------------------------------------

def pca_decompose(X, K):
    """Truncated-SVD factors ``B = U_K S_K``, ``C = V_K^T`` (orthonormal rows).

    The product is the best rank-K approximation of ``X`` in the Frobenius
    sense.
    """
    X = np.asarray(X, dtype=np.float64)
    if not 1 <= K <= min(X.shape):
        raise ValueError(f"rank {K} out of range for shape {X.shape}")
    r = svd(X)
    return r.U[:, :K] * r.s[:K], r.V[:, :K].T


def posthoc_nmf(X, K, mu_c_tilde, max_iter=2000, rel_tol=0.0,
                floor=DEFAULT_FLOOR, factors=None):
    """Nonnegative factorization of an already-reconstructed stack.

    Runs the coupled-factor multiplicative updates with unit coupling and no
    data operator: ``min 0.5 ||X - BC||_F^2 + mu_c_tilde/2 ||C||_F^2``.
    Starts from the nonnegative SVD initialization unless an explicit
    ``factors`` pair is given; ``rel_tol <= 0`` disables early stopping.
    """
    X = project_floor(np.asarray(X, dtype=np.float64), floor)
    cfg = JointConfig(K=K, alpha=1.0, mu_C=mu_c_tilde, floor=floor)
    if factors is not None:
        B = project_floor(factors[0], floor)
        C = project_floor(factors[1], floor)
    else:
        B, C = init_factors(X, K, floor)
    trace = SolveTrace()
    for it in range(max_iter):
        t0 = time.perf_counter()
        B_new = _bcx_b(B, C, X, cfg, None)
        C_new = _bcx_c(B_new, C, X, cfg)
        rel_b = _rel_change(B_new, B, floor)
        rel_c = _rel_change(C_new, C, floor)
        B, C = B_new, C_new
        cost = 0.5 * float(np.sum((X - B @ C) ** 2)) \
            + 0.5 * mu_c_tilde * float(np.sum(C * C))
        trace.append(it + 1, cost, np.nan, rel_b, rel_c,
                     time.perf_counter() - t0)
        trace.iterations_run = it + 1
        if rel_tol > 0 and max(rel_b, rel_c) < rel_tol:
            trace.stop_reason = "rel-change"
            break
    return JointResult(X=None, B=B, C=C, trace=trace)
