"""Joint reconstruction and nonnegative factorization solvers.

Three multiplicative schemes, all derived from quadratic majorizers and
therefore monotone in their model costs:

* ``bcx_*``: reconstructs the full stack X alongside factors B, C, coupled
  by a quadratic penalty on ``B @ C - X``.
* ``bc_*``: factors only, with the projector applied to ``B @ C`` inside
  the data term.
* ``sbc_*``: the stationary-operator form of ``bc``; algebraically the same
  iterates, but the projector is applied to the K columns of B instead of
  the T columns of ``B @ C``, which is where the speed-up comes from.

Every update floors its result to keep iterates strictly positive, since
multiplicative rules cannot leave zero once reached.
"""

import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import NumericalError
from .linalg import DEFAULT_FLOOR, project_floor, svd
from .tv import NeighborhoodSystem, TvParams, matrices_pz, tv_value


@dataclass(frozen=True)
class JointConfig:
    """Rank, regularization weights and stopping rule for the joint solvers."""

    K: int
    alpha: float = 0.0
    lambda_B: float = 0.0
    mu_B: float = 0.0
    lambda_C: float = 0.0
    mu_C: float = 0.0
    lambda_X: float = 0.0
    mu_X: float = 0.0
    tau: float = 0.0
    eps_tv: float = 1e-5
    max_iter: int = 1200
    rel_tol: float = 5e-5
    floor: float = DEFAULT_FLOOR
    cost_every: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"rank must be >= 1, got {self.K}")
        for name in ("alpha", "lambda_B", "mu_B", "lambda_C", "mu_C",
                     "lambda_X", "mu_X", "tau"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.rel_tol <= 0 or self.floor <= 0 or self.eps_tv <= 0:
            raise ValueError("rel_tol, floor and eps_tv must be > 0")
        if self.max_iter < 0 or self.cost_every < 1:
            raise ValueError("max_iter must be >= 0 and cost_every >= 1")

    @property
    def tv_params(self):
        return TvParams(self.eps_tv)


@dataclass
class SolveTrace:
    """Per-iteration cost, relative changes and wall time of one solve."""

    iterations: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    rel_change_x: list = field(default_factory=list)
    rel_change_b: list = field(default_factory=list)
    rel_change_c: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    iterations_run: int = 0
    stop_reason: str = "max-iter"

    def append(self, it, cost, rel_x, rel_b, rel_c, secs):
        self.iterations.append(it)
        self.cost.append(cost)
        self.rel_change_x.append(rel_x)
        self.rel_change_b.append(rel_b)
        self.rel_change_c.append(rel_c)
        self.seconds.append(secs)

    def evaluated_costs(self):
        """Iterations and values where the cost was actually computed."""
        pairs = [(i, c) for i, c in zip(self.iterations, self.cost)
                 if not np.isnan(c)]
        its = np.array([p[0] for p in pairs], dtype=int)
        vals = np.array([p[1] for p in pairs])
        return its, vals

    def save_csv(self, path):
        from .matio import atomic_open

        with atomic_open(path, text=True) as fh:
            fh.write("iteration,cost,rel_change_X,rel_change_B,rel_change_C,seconds\n")
            for row in zip(self.iterations, self.cost, self.rel_change_x,
                           self.rel_change_b, self.rel_change_c, self.seconds):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


class JointResult(NamedTuple):
    X: Optional[np.ndarray]
    B: np.ndarray
    C: np.ndarray
    trace: SolveTrace


def _rel_change(new, old, floor):
    return float(np.linalg.norm(new - old) / max(np.linalg.norm(old), floor))


def _check_denominator(den):
    if not np.all(den > 0.0):
        raise NumericalError("zero entry in a multiplicative denominator")


def _adjoint_data(operators, Y):
    """Columnwise A_t^T Y_t; constant across iterations, so precomputed."""
    G = np.empty((operators[0].shape[1], Y.shape[1]))
    for t, op in enumerate(operators):
        G[:, t] = op.adjoint(Y[:, t])
    return G


def _normal_apply(operators, X):
    """Columnwise A_t^T A_t X_t."""
    W = np.empty_like(X)
    for t, op in enumerate(operators):
        W[:, t] = op.adjoint(op.apply(X[:, t]))
    return W


def _nbhd_for(rows):
    return NeighborhoodSystem.for_vector_length(rows)


# ---------------------------------------------------------------------------
# Factor initialization (nonnegative double SVD).
# ---------------------------------------------------------------------------

def init_factors(X0, K, floor=DEFAULT_FLOOR):
    """Nonnegative SVD-based initialization of the factor pair.

    The leading K singular triplets are split into their nonnegative parts;
    remaining zeros are filled with ``1e-2 * mean(X0)`` and the result is
    floored, so both factors come out strictly positive.
    """
    X0 = np.asarray(X0, dtype=np.float64)
    if K > min(X0.shape):
        raise ValueError(f"rank {K} exceeds min{X0.shape}")
    r = svd(X0)
    N, T = X0.shape
    B = np.zeros((N, K))
    C = np.zeros((K, T))
    B[:, 0] = np.sqrt(r.s[0]) * np.abs(r.U[:, 0])
    C[0, :] = np.sqrt(r.s[0]) * np.abs(r.V[:, 0])
    for j in range(1, K):
        u, v = r.U[:, j], r.V[:, j]
        up, un = np.maximum(u, 0), np.maximum(-u, 0)
        vp, vn = np.maximum(v, 0), np.maximum(-v, 0)
        nup, nun = np.linalg.norm(up), np.linalg.norm(un)
        nvp, nvn = np.linalg.norm(vp), np.linalg.norm(vn)
        mp, mn = nup * nvp, nun * nvn
        if mp >= mn and mp > 0:
            scale = np.sqrt(r.s[j] * mp)
            B[:, j] = scale * up / nup
            C[j, :] = scale * vp / nvp
        elif mn > 0:
            scale = np.sqrt(r.s[j] * mn)
            B[:, j] = scale * un / nun
            C[j, :] = scale * vn / nvn
    fill = 1e-2 * float(X0.mean())
    B[B == 0.0] = fill
    C[C == 0.0] = fill
    return project_floor(B, floor), project_floor(C, floor)


def order_features(B, C):
    """Permutation sorting components by descending spatial l2 norm."""
    if B.shape[1] != C.shape[0]:
        raise ValueError("factor shapes disagree on K")
    norms = np.linalg.norm(B, axis=0)
    return np.argsort(-norms, kind="stable")


def apply_feature_order(B, C, perm):
    return B[:, perm], C[perm, :]


# ---------------------------------------------------------------------------
# Model costs.
# ---------------------------------------------------------------------------

def _reg_terms(cfg, B, C, nbhd):
    total = (cfg.lambda_B * np.abs(B).sum()
             + 0.5 * cfg.mu_B * np.sum(B * B)
             + cfg.lambda_C * np.abs(C).sum()
             + 0.5 * cfg.mu_C * np.sum(C * C))
    if cfg.tau > 0:
        nbhd = nbhd or _nbhd_for(B.shape[0])
        total += 0.5 * cfg.tau * tv_value(B, nbhd, cfg.tv_params)
    return total


def cost_bcx(Y, operators, X, B, C, cfg, nbhd=None):
    """Full joint model value: data term on X, coupling to B @ C, and all
    elementwise/TV penalties."""
    data = 0.0
    for t, op in enumerate(operators):
        r = op.apply(X[:, t]) - Y[:, t]
        data += 0.5 * float(r @ r)
    total = data + 0.5 * cfg.alpha * float(np.sum((B @ C - X) ** 2))
    total += (cfg.lambda_X * np.abs(X).sum() + 0.5 * cfg.mu_X * np.sum(X * X))
    return float(total + _reg_terms(cfg, B, C, nbhd))


def cost_bc(Y, operators, B, C, cfg, nbhd=None):
    """Factored model value: data term on B @ C plus penalties."""
    V = B @ C
    data = 0.0
    for t, op in enumerate(operators):
        r = op.apply(V[:, t]) - Y[:, t]
        data += 0.5 * float(r @ r)
    return float(data + _reg_terms(cfg, B, C, nbhd))


def _cost_sbc(Y, op, B, C, cfg, nbhd=None):
    # factored evaluation: (A @ B) @ C never builds the N x T stack
    R = (op.matrix @ B) @ C - Y
    return float(0.5 * np.sum(R * R) + _reg_terms(cfg, B, C, nbhd))


# ---------------------------------------------------------------------------
# BC-X updates: X, then B, then C.
# ---------------------------------------------------------------------------

def _bcx_x(X, BC, G, operators, cfg):
    den = _normal_apply(operators, X) + (cfg.mu_X + cfg.alpha) * X + cfg.lambda_X
    _check_denominator(den)
    return project_floor(X * (G + cfg.alpha * BC) / den, cfg.floor)


def _tv_numden(B, cfg, nbhd):
    """tau * P(B) o Z(B) numerator part and tau * B o P(B) denominator part."""
    if cfg.tau == 0:
        return 0.0, 0.0
    P, Z = matrices_pz(B, nbhd, cfg.tv_params)
    return cfg.tau * P * Z, cfg.tau * B * P


def _bcx_b(B, C, X, cfg, nbhd):
    tv_num, tv_den = _tv_numden(B, cfg, nbhd)
    num = cfg.alpha * (X @ C.T) + tv_num
    den = cfg.alpha * (B @ (C @ C.T)) + cfg.mu_B * B + cfg.lambda_B + tv_den
    _check_denominator(den)
    return project_floor(B * num / den, cfg.floor)


def _bcx_c(B, C, X, cfg):
    num = cfg.alpha * (B.T @ X)
    den = cfg.alpha * ((B.T @ B) @ C) + cfg.mu_C * C + cfg.lambda_C
    _check_denominator(den)
    return project_floor(C * num / den, cfg.floor)


def bcx_update_X(X, B, C, Y, operators, cfg):
    return _bcx_x(X, B @ C, _adjoint_data(operators, Y), operators, cfg)


def bcx_update_B(B, C, X, cfg, nbhd=None):
    if cfg.tau > 0 and nbhd is None:
        nbhd = _nbhd_for(B.shape[0])
    return _bcx_b(B, C, X, cfg, nbhd)


def bcx_update_C(B, C, X, cfg):
    return _bcx_c(B, C, X, cfg)


# ---------------------------------------------------------------------------
# BC updates: B, then C (columnwise), data term through the operators.
# ---------------------------------------------------------------------------

def _bc_b(B, C, G, operators, cfg, nbhd):
    V = B @ C
    W = _normal_apply(operators, V)
    tv_num, tv_den = _tv_numden(B, cfg, nbhd)
    num = G @ C.T + tv_num
    den = W @ C.T + cfg.mu_B * B + cfg.lambda_B + tv_den
    _check_denominator(den)
    return project_floor(B * num / den, cfg.floor)


def _bc_c(B, C, G, operators, cfg):
    V = B @ C
    U = _normal_apply(operators, V)
    num = B.T @ G
    den = B.T @ U + cfg.mu_C * C + cfg.lambda_C
    _check_denominator(den)
    return project_floor(C * num / den, cfg.floor)


def bc_update_B(B, C, Y, operators, cfg, nbhd=None):
    if cfg.tau > 0 and nbhd is None:
        nbhd = _nbhd_for(B.shape[0])
    return _bc_b(B, C, _adjoint_data(operators, Y), operators, cfg, nbhd)


def bc_update_C(B, C, Y, operators, cfg):
    return _bc_c(B, C, _adjoint_data(operators, Y), operators, cfg)


# ---------------------------------------------------------------------------
# sBC updates: one stationary operator, projector applied to B's columns.
# ---------------------------------------------------------------------------

def _sbc_b(B, C, G, op, cfg, nbhd):
    AtAB = op.matrix_t @ (op.matrix @ B)
    tv_num, tv_den = _tv_numden(B, cfg, nbhd)
    num = G @ C.T + tv_num
    den = AtAB @ (C @ C.T) + cfg.mu_B * B + cfg.lambda_B + tv_den
    _check_denominator(den)
    return project_floor(B * num / den, cfg.floor)


def _sbc_c(B, C, G, op, cfg):
    AB = op.matrix @ B
    num = B.T @ G
    den = (AB.T @ AB) @ C + cfg.mu_C * C + cfg.lambda_C
    _check_denominator(den)
    return project_floor(C * num / den, cfg.floor)


def sbc_update_B(B, C, Y, operator, cfg, nbhd=None):
    if cfg.tau > 0 and nbhd is None:
        nbhd = _nbhd_for(B.shape[0])
    return _sbc_b(B, C, operator.matrix_t @ Y, operator, cfg, nbhd)


def sbc_update_C(B, C, Y, operator, cfg):
    return _sbc_c(B, C, operator.matrix_t @ Y, operator, cfg)


# ---------------------------------------------------------------------------
# Solve loops.
# ---------------------------------------------------------------------------

def _want_cost(cfg, it):
    return (it + 1) % cfg.cost_every == 0 or it + 1 == cfg.max_iter


def bcx_solve(Y, operators, cfg, X0, factors=None):
    """Alternate the three updates until the change in X, B and C is small.

    ``X0`` seeds the reconstruction (typically the unfiltered
    backprojection); ``factors`` may carry an explicit (B, C) pair,
    otherwise the nonnegative SVD initialization of ``X0`` is used.
    """
    Y = np.asarray(Y, dtype=np.float64)
    X = project_floor(np.asarray(X0, dtype=np.float64), cfg.floor)
    if factors is None:
        B, C = init_factors(X, cfg.K, cfg.floor)
    else:
        B = project_floor(factors[0], cfg.floor)
        C = project_floor(factors[1], cfg.floor)
    nbhd = _nbhd_for(X.shape[0]) if cfg.tau > 0 else None
    G = _adjoint_data(operators, Y)
    trace = SolveTrace()
    for it in range(cfg.max_iter):
        t0 = time.perf_counter()
        X_new = _bcx_x(X, B @ C, G, operators, cfg)
        B_new = _bcx_b(B, C, X_new, cfg, nbhd)
        C_new = _bcx_c(B_new, C, X_new, cfg)
        rel_x = _rel_change(X_new, X, cfg.floor)
        rel_b = _rel_change(B_new, B, cfg.floor)
        rel_c = _rel_change(C_new, C, cfg.floor)
        X, B, C = X_new, B_new, C_new
        cost = (cost_bcx(Y, operators, X, B, C, cfg, nbhd)
                if _want_cost(cfg, it) else np.nan)
        trace.append(it + 1, cost, rel_x, rel_b, rel_c,
                     time.perf_counter() - t0)
        trace.iterations_run = it + 1
        if max(rel_x, rel_b, rel_c) < cfg.rel_tol:
            trace.stop_reason = "rel-change"
            break
    return JointResult(X=X, B=B, C=C, trace=trace)


def bc_solve(Y, operators, cfg, X0=None, factors=None):
    """Factored solver; the reconstruction, when needed, is ``B @ C``."""
    Y = np.asarray(Y, dtype=np.float64)
    if factors is None:
        if X0 is None:
            raise ValueError("need X0 or an explicit factor pair")
        B, C = init_factors(project_floor(X0, cfg.floor), cfg.K, cfg.floor)
    else:
        B = project_floor(factors[0], cfg.floor)
        C = project_floor(factors[1], cfg.floor)
    nbhd = _nbhd_for(B.shape[0]) if cfg.tau > 0 else None
    G = _adjoint_data(operators, Y)
    trace = SolveTrace()
    for it in range(cfg.max_iter):
        t0 = time.perf_counter()
        B_new = _bc_b(B, C, G, operators, cfg, nbhd)
        C_new = _bc_c(B_new, C, G, operators, cfg)
        rel_b = _rel_change(B_new, B, cfg.floor)
        rel_c = _rel_change(C_new, C, cfg.floor)
        B, C = B_new, C_new
        cost = (cost_bc(Y, operators, B, C, cfg, nbhd)
                if _want_cost(cfg, it) else np.nan)
        trace.append(it + 1, cost, np.nan, rel_b, rel_c,
                     time.perf_counter() - t0)
        trace.iterations_run = it + 1
        if max(rel_b, rel_c) < cfg.rel_tol:
            trace.stop_reason = "rel-change"
            break
    return JointResult(X=None, B=B, C=C, trace=trace)


def sbc_solve(Y, operator, cfg, X0=None, factors=None):
    """Stationary-operator solver; same iterates as ``bc_solve`` under a
    stationary schedule, at a fraction of the per-iteration cost."""
    Y = np.asarray(Y, dtype=np.float64)
    if factors is None:
        if X0 is None:
            raise ValueError("need X0 or an explicit factor pair")
        B, C = init_factors(project_floor(X0, cfg.floor), cfg.K, cfg.floor)
    else:
        B = project_floor(factors[0], cfg.floor)
        C = project_floor(factors[1], cfg.floor)
    nbhd = _nbhd_for(B.shape[0]) if cfg.tau > 0 else None
    G = operator.matrix_t @ Y
    trace = SolveTrace()
    for it in range(cfg.max_iter):
        t0 = time.perf_counter()
        B_new = _sbc_b(B, C, G, operator, cfg, nbhd)
        C_new = _sbc_c(B_new, C, G, operator, cfg)
        rel_b = _rel_change(B_new, B, cfg.floor)
        rel_c = _rel_change(C_new, C, cfg.floor)
        B, C = B_new, C_new
        cost = (_cost_sbc(Y, operator, B, C, cfg, nbhd)
                if _want_cost(cfg, it) else np.nan)
        trace.append(it + 1, cost, np.nan, rel_b, rel_c,
                     time.perf_counter() - t0)
        trace.iterations_run = it + 1
        if max(rel_b, rel_c) < cfg.rel_tol:
            trace.stop_reason = "rel-change"
            break
    return JointResult(X=None, B=B, C=C, trace=trace)
