import numpy as np
import pytest
import scipy.sparse as sp

from dynlr.errors import NumericalError
from dynlr.radon import (ImageGrid, RadonOperator, backprojection_init,
                         build_operators, default_geometry,
                         golden_angle_schedule)
from dynlr.solvers import (JointConfig, apply_feature_order, bc_solve,
                           bc_update_B, bc_update_C, bcx_solve, bcx_update_B,
                           bcx_update_C, bcx_update_X, cost_bc, cost_bcx,
                           init_factors, order_features, sbc_solve,
                           sbc_update_B, sbc_update_C)
from dynlr.tv import NeighborhoodSystem, TvParams, tv_value

FLOOR = 1e-12


def scalar_op(value=1.0):
    """1x1 projector for scalar arithmetic checks."""
    return RadonOperator(sp.csr_matrix(np.array([[value]])), [0.0], 1)


def small_instance(seed=0, side=16, T=10, c=4, K=3, stationary=False):
    rng = np.random.default_rng(seed)
    grid = ImageGrid(side)
    geom = default_geometry(grid)
    sched = golden_angle_schedule(T, c, stationary=stationary)
    ops = build_operators(grid, geom, sched)
    B = rng.random((grid.n_pixels, K)) + 0.1
    C = rng.random((K, T)) + 0.1
    X = B @ C
    Y = np.column_stack([ops[t].apply(X[:, t]) for t in range(T)])
    return grid, geom, sched, ops, B, C, X, Y


def oracle_cost_bcx(Y, dense_ops, X, B, C, cfg, nbhd):
    """Scalar-loop evaluation of every model term."""
    total = 0.0
    for t in range(Y.shape[1]):
        r = dense_ops[t] @ X[:, t] - Y[:, t]
        total += 0.5 * sum(v * v for v in r)
    D = B @ C - X
    total += 0.5 * cfg.alpha * sum(v * v for v in D.ravel())
    for M, lam, mu in ((B, cfg.lambda_B, cfg.mu_B),
                       (C, cfg.lambda_C, cfg.mu_C),
                       (X, cfg.lambda_X, cfg.mu_X)):
        total += lam * sum(abs(v) for v in M.ravel())
        total += 0.5 * mu * sum(v * v for v in M.ravel())
    total += 0.5 * cfg.tau * tv_value(B, nbhd, TvParams(cfg.eps_tv))
    return total


class TestConfig:
    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            JointConfig(K=2, alpha=-1.0)

    def test_bad_rank(self):
        with pytest.raises(ValueError):
            JointConfig(K=0)

    def test_defaults_match_stopping_rule(self):
        cfg = JointConfig(K=1)
        assert cfg.max_iter == 1200
        assert cfg.rel_tol == 5e-5
        assert cfg.floor == 1e-12


class TestInitFactors:
    def test_rank_one_nonnegative_exact(self):
        rng = np.random.default_rng(0)
        u = rng.random(20) + 0.1
        v = rng.random(8) + 0.1
        X0 = np.outer(u, v)
        B, C = init_factors(X0, 1)
        assert np.linalg.norm(X0 - B @ C) / np.linalg.norm(X0) < 1e-8

    def test_strictly_positive(self):
        rng = np.random.default_rng(1)
        X0 = np.maximum(rng.random((15, 9)), FLOOR)
        B, C = init_factors(X0, 3)
        assert B.min() >= FLOOR and C.min() >= FLOOR

    def test_error_bounds(self):
        rng = np.random.default_rng(2)
        X0 = rng.random((20, 12)) + 0.05
        B, C = init_factors(X0, 3)
        err = np.linalg.norm(X0 - B @ C)
        s = np.linalg.svd(X0, compute_uv=False)
        optimal = np.sqrt(np.sum(s[3:] ** 2))
        assert optimal - 1e-10 <= err <= np.linalg.norm(X0)

    def test_rank_too_large(self):
        with pytest.raises(ValueError):
            init_factors(np.ones((4, 3)), 4)


class TestCosts:
    def test_exact_fit_zero(self):
        _, _, _, ops, B, C, X, Y = small_instance(3)
        cfg = JointConfig(K=3)
        assert cost_bcx(Y, ops, X, B, C, cfg) < 1e-15
        assert cost_bc(Y, ops, B, C, cfg) < 1e-15

    def test_single_term_survives(self):
        _, _, _, ops, B, C, X, Y = small_instance(4)
        cfg = JointConfig(K=3, tau=2.0)
        nbhd = NeighborhoodSystem.for_vector_length(B.shape[0])
        expected = 0.5 * 2.0 * tv_value(B, nbhd, TvParams(cfg.eps_tv))
        assert np.isclose(cost_bc(Y, ops, B, C, cfg), expected, rtol=1e-12)

    def test_oracle_agreement(self):
        _, _, _, ops, B, C, X, Y = small_instance(5, side=4, T=3, c=2, K=2)
        rng = np.random.default_rng(6)
        X = X + rng.random(X.shape)  # off the exact fit
        cfg = JointConfig(K=2, alpha=1.7, lambda_B=0.2, mu_B=0.3,
                          lambda_C=0.05, mu_C=0.4, lambda_X=0.01, mu_X=0.2,
                          tau=0.9)
        nbhd = NeighborhoodSystem.for_vector_length(B.shape[0])
        dense = [op.matrix.toarray() for op in ops]
        expected = oracle_cost_bcx(Y, dense, X, B, C, cfg, nbhd)
        assert np.isclose(cost_bcx(Y, ops, X, B, C, cfg), expected, rtol=1e-12)

    def test_bc_scaling_invariance(self):
        # the data term only sees B @ C, so (B D, D^-1 C) leaves it unchanged
        _, _, _, ops, B, C, _, Y = small_instance(7)
        cfg = JointConfig(K=3)
        rng = np.random.default_rng(8)
        d = rng.random(3) + 0.5
        base = cost_bc(Y, ops, B, C, cfg)
        scaled = cost_bc(Y, ops, B * d, C / d[:, None], cfg)
        assert np.isclose(base, scaled, rtol=1e-9)


class TestScalarUpdates:
    def test_x_update(self):
        op = scalar_op()
        cfg = JointConfig(K=1, alpha=1.0)
        X = np.array([[1.0]])
        out = bcx_update_X(X, np.array([[1.0]]), np.array([[1.0]]),
                           np.array([[2.0]]), [op], cfg)
        assert np.isclose(out[0, 0], 1.5)

    def test_bcx_b_update(self):
        cfg = JointConfig(K=1, alpha=1.0)
        out = bcx_update_B(np.array([[2.0]]), np.array([[1.0]]),
                           np.array([[4.0]]), cfg)
        assert np.isclose(out[0, 0], 4.0)

    def test_bcx_c_update_formula_and_fixed_point(self):
        cfg = JointConfig(K=1, alpha=1.0)
        # off the fit: B=2, C=1, X=4 -> numerator 8, denominator 4
        out = bcx_update_C(np.array([[2.0]]), np.array([[1.0]]),
                           np.array([[4.0]]), cfg)
        assert np.isclose(out[0, 0], 2.0)
        # on the fit (X = BC): 8/8, already stationary
        out = bcx_update_C(np.array([[2.0]]), np.array([[2.0]]),
                           np.array([[4.0]]), cfg)
        assert np.isclose(out[0, 0], 2.0)

    def test_bc_b_update(self):
        op = scalar_op()
        cfg = JointConfig(K=1)
        out = bc_update_B(np.array([[1.0]]), np.array([[1.0]]),
                          np.array([[2.0]]), [op], cfg)
        assert np.isclose(out[0, 0], 2.0)

    def test_bc_c_update(self):
        op = scalar_op()
        cfg = JointConfig(K=1)
        out = bc_update_C(np.array([[1.0]]), np.array([[1.0]]),
                          np.array([[2.0]]), [op], cfg)
        assert np.isclose(out[0, 0], 2.0)

    def test_sbc_scalar_fixed_point(self):
        op = scalar_op()
        cfg = JointConfig(K=1)
        B, C = np.array([[1.0]]), np.array([[2.0]])
        Y = np.array([[2.0]])  # A(BC) = Y exactly
        assert np.isclose(sbc_update_B(B, C, Y, op, cfg)[0, 0], 1.0)
        assert np.isclose(sbc_update_C(B, C, Y, op, cfg)[0, 0], 2.0)


class TestFixedPoints:
    """Exact-fit, zero-regularization configurations are stationary."""

    def test_bcx_updates(self):
        _, _, _, ops, B, C, X, Y = small_instance(9)
        cfg = JointConfig(K=3, alpha=1.0)
        Xf = np.maximum(X, FLOOR)
        assert np.max(np.abs(bcx_update_X(Xf, B, C, Y, ops, cfg) - Xf)) <= 1e-12
        assert np.max(np.abs(bcx_update_B(B, C, B @ C, cfg) - B)) <= 1e-12
        assert np.max(np.abs(bcx_update_C(B, C, B @ C, cfg) - C)) <= 1e-12

    def test_bc_updates(self):
        _, _, _, ops, B, C, X, Y = small_instance(10)
        cfg = JointConfig(K=3)
        assert np.max(np.abs(bc_update_B(B, C, Y, ops, cfg) - B)) <= 1e-12
        assert np.max(np.abs(bc_update_C(B, C, Y, ops, cfg) - C)) <= 1e-12

    def test_sbc_updates(self):
        _, _, _, ops, B, C, X, Y = small_instance(11, stationary=True)
        cfg = JointConfig(K=3)
        op = ops[0]
        assert np.max(np.abs(sbc_update_B(B, C, Y, op, cfg) - B)) <= 1e-12
        assert np.max(np.abs(sbc_update_C(B, C, Y, op, cfg) - C)) <= 1e-12


class TestMonotonicity:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_bcx_trace_nonincreasing(self, seed):
        _, _, sched, ops, B, C, X, Y = small_instance(seed, side=8, T=6, c=3, K=2)
        grid, geom = ImageGrid(8), default_geometry(ImageGrid(8))
        cfg = JointConfig(K=2, alpha=1.5, mu_C=0.2, tau=0.7, lambda_B=0.01,
                          max_iter=120, rel_tol=1e-13)
        X0 = backprojection_init(Y, sched, grid, geom)
        res = bcx_solve(Y, ops, cfg, X0)
        _, costs = res.trace.evaluated_costs()
        assert np.all(np.diff(costs) <= 1e-10 * (1.0 + np.abs(costs[:-1])))

    def test_single_updates_decrease_cost(self):
        _, _, _, ops, B, C, X, Y = small_instance(12, side=8, T=6, c=3, K=2)
        rng = np.random.default_rng(13)
        B = B * rng.uniform(0.5, 2.0, B.shape)
        C = C * rng.uniform(0.5, 2.0, C.shape)
        cfg = JointConfig(K=2, mu_B=0.1, mu_C=0.2, tau=1.1)
        before = cost_bc(Y, ops, B, C, cfg)
        B2 = bc_update_B(B, C, Y, ops, cfg)
        mid = cost_bc(Y, ops, B2, C, cfg)
        C2 = bc_update_C(B2, C, Y, ops, cfg)
        after = cost_bc(Y, ops, B2, C2, cfg)
        assert mid <= before + 1e-10 * (1 + abs(before))
        assert after <= mid + 1e-10 * (1 + abs(mid))

    def test_positivity_throughout(self):
        _, _, sched, ops, _, _, _, Y = small_instance(14, side=8, T=5, c=3, K=2)
        grid, geom = ImageGrid(8), default_geometry(ImageGrid(8))
        cfg = JointConfig(K=2, alpha=1.0, max_iter=30, rel_tol=1e-13)
        X0 = backprojection_init(Y, sched, grid, geom)
        res = bcx_solve(Y, ops, cfg, X0)
        assert res.X.min() >= FLOOR
        assert res.B.min() >= FLOOR
        assert res.C.min() >= FLOOR


class TestSolveLoops:
    def test_zero_iterations_is_noop(self):
        _, _, _, ops, B, C, X, Y = small_instance(15)
        cfg = JointConfig(K=3, alpha=1.0, max_iter=0)
        Xf = np.maximum(X, FLOOR)
        res = bcx_solve(Y, ops, cfg, Xf, factors=(B, C))
        assert np.array_equal(res.X, Xf)
        assert np.array_equal(res.B, B)
        assert np.array_equal(res.C, C)
        assert res.trace.iterations_run == 0

    def test_rel_change_stop(self):
        _, _, sched, ops, B, C, X, Y = small_instance(16, side=8, T=5, c=3, K=2)
        grid, geom = ImageGrid(8), default_geometry(ImageGrid(8))
        cfg = JointConfig(K=2, alpha=1.0, max_iter=5000, rel_tol=1e-4)
        X0 = backprojection_init(Y, sched, grid, geom)
        res = bcx_solve(Y, ops, cfg, X0)
        assert res.trace.stop_reason == "rel-change"
        assert res.trace.iterations_run < 5000

    def test_bcx_noiseless_rank1_recovery(self):
        rng = np.random.default_rng(17)
        grid = ImageGrid(8)
        geom = default_geometry(grid)
        sched = golden_angle_schedule(5, 4)
        ops = build_operators(grid, geom, sched)
        X_true = np.outer(rng.random(64) + 0.2, rng.random(5) + 0.2)
        Y = np.column_stack([ops[t].apply(X_true[:, t]) for t in range(5)])
        cfg = JointConfig(K=1, alpha=1.0, max_iter=2000, rel_tol=1e-9)
        X0 = backprojection_init(Y, sched, grid, geom)
        res = bcx_solve(Y, ops, cfg, X0)
        resid = np.sqrt(sum(
            np.sum((ops[t].apply(res.X[:, t]) - Y[:, t]) ** 2)
            for t in range(5))) / np.linalg.norm(Y)
        assert resid < 0.05

    def test_trace_csv(self, tmp_path):
        _, _, sched, ops, _, _, _, Y = small_instance(18, side=8, T=4, c=2, K=2)
        grid, geom = ImageGrid(8), default_geometry(ImageGrid(8))
        cfg = JointConfig(K=2, alpha=1.0, max_iter=7, rel_tol=1e-13)
        res = bcx_solve(Y, ops, cfg, backprojection_init(Y, sched, grid, geom))
        path = tmp_path / "trace.csv"
        res.trace.save_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "iteration,cost,rel_change_X,rel_change_B,rel_change_C,seconds"
        assert len(lines) == 8


class TestStationaryEquivalence:
    def test_iterates_agree(self):
        _, _, sched, ops, _, _, _, Y = small_instance(19, stationary=True)
        grid, geom = ImageGrid(16), default_geometry(ImageGrid(16))
        X0 = backprojection_init(Y, sched, grid, geom)
        cfg = JointConfig(K=3, mu_C=0.1, tau=1.0, max_iter=50, rel_tol=1e-15)
        r_bc = bc_solve(Y, ops, cfg, X0)
        r_sbc = sbc_solve(Y, ops[0], cfg, X0)
        assert np.max(np.abs(r_bc.B - r_sbc.B)) <= 1e-10
        assert np.max(np.abs(r_bc.C - r_sbc.C)) <= 1e-10


class TestOrderFeatures:
    def test_sorted_is_identity(self):
        B = np.array([[3.0, 1.0], [0.0, 0.0]])
        C = np.ones((2, 4))
        assert np.array_equal(order_features(B, C), [0, 1])

    def test_swap(self):
        B = np.array([[1.0, 2.0], [0.0, 0.0]])
        C = np.ones((2, 4))
        assert np.array_equal(order_features(B, C), [1, 0])

    def test_product_invariant(self):
        rng = np.random.default_rng(20)
        B = rng.random((6, 3))
        C = rng.random((3, 5))
        perm = order_features(B, C)
        B2, C2 = apply_feature_order(B, C, perm)
        assert np.allclose(B2 @ C2, B @ C, atol=1e-14)


class TestDegeneracy:
    def test_zero_denominator_raises(self):
        # alpha = mu_C = lambda_C = 0 leaves an all-zero C denominator
        cfg = JointConfig(K=1)
        with pytest.raises(NumericalError):
            bcx_update_C(np.array([[1.0]]), np.array([[1.0]]),
                         np.array([[1.0]]), cfg)
