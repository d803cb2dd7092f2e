"""End-to-end experiment orchestration and benchmark timing."""

import os
import time
import timeit

import numpy as np

from . import kernels
from .errors import ConfigError
from .gradtv import gradtv_solve, pca_decompose, posthoc_nmf
from .matio import atomic_open, save_csv, save_dlr1
from .metrics import evaluate_stack
from .phantoms import (add_gaussian_noise, dynamic_shepp_logan,
                       save_frames_pgm, simulate_measurements, vessel_phantom)
from .radon import (ImageGrid, backprojection_init, build_operators,
                    default_geometry, golden_angle_schedule)
from .solvers import (JointConfig, apply_feature_order, bc_solve, bcx_solve,
                      order_features, sbc_solve)


def _make_phantom(cfg):
    kind = cfg.phantom["kind"]
    maker = dynamic_shepp_logan if kind == "shepp" else vessel_phantom
    return maker(cfg.phantom["side"], cfg.phantom["steps"])


def _reconstruct(cfg, Y, schedule, grid, geometry):
    """Dispatch one method; returns (X, B, C, trace) with B/C possibly None."""
    name = cfg.method["name"]
    ops = build_operators(grid, geometry, schedule)
    if name in ("bcx", "bc", "sbc"):
        jc = cfg.joint_config()
        X0 = backprojection_init(Y, schedule, grid, geometry, jc.floor)
        if name == "bcx":
            res = bcx_solve(Y, ops, jc, X0)
            return res.X, res.B, res.C, res.trace
        if name == "bc":
            res = bc_solve(Y, ops, jc, X0)
            return res.B @ res.C, res.B, res.C, res.trace
        if not schedule.stationary:
            raise ConfigError("method sbc needs a stationary schedule")
        res = sbc_solve(Y, ops[0], jc, X0)
        return res.B @ res.C, res.B, res.C, res.trace
    gc = cfg.gradtv_config()
    X, trace = gradtv_solve(Y, ops, gc)
    if name == "gradtv_pca":
        B, C = pca_decompose(X, cfg.method["K"])
        return X, B, C, trace
    if name == "gradtv_nmf":
        res = posthoc_nmf(X, cfg.method["K"], gc.mu_c_tilde,
                          max_iter=gc.max_iter, rel_tol=gc.rel_tol)
        return X, res.B, res.C, trace
    return X, None, None, trace


def _write_run(out_dir, cfg, gt, schedule, Y, Y_noisy, X, B, C, trace,
               runtime):
    os.makedirs(out_dir, exist_ok=True)
    with atomic_open(os.path.join(out_dir, "config.txt"), text=True) as fh:
        fh.write(cfg.to_text())
    save_dlr1(os.path.join(out_dir, "X_true.dlr"), gt.X_true)
    save_csv(os.path.join(out_dir, "B_true.csv"), gt.B_true)
    save_csv(os.path.join(out_dir, "C_true.csv"), gt.C_true)
    schedule.save_csv(os.path.join(out_dir, "schedule.csv"))
    save_dlr1(os.path.join(out_dir, "Y.dlr"), Y)
    save_dlr1(os.path.join(out_dir, "Y_noisy.dlr"), Y_noisy)
    save_dlr1(os.path.join(out_dir, "X.dlr"), X)
    trace.save_csv(os.path.join(out_dir, "trace.csv"))
    if B is not None:
        perm = order_features(B, C)
        B_ord, C_ord = apply_feature_order(B, C, perm)
        save_dlr1(os.path.join(out_dir, "B.dlr"), B_ord)
        save_dlr1(os.path.join(out_dir, "C.dlr"), C_ord)
        save_csv(os.path.join(out_dir, "temporal.csv"), C_ord)
        feat_dir = os.path.join(out_dir, "features")
        for k in range(B_ord.shape[1]):
            col = B_ord[:, k]
            save_frames_pgm(col[:, None], gt.side, feat_dir,
                            prefix=f"spatial_{k:02d}")
    report = evaluate_stack(X, gt.X_true, runtime_seconds=runtime)
    report.save_csv(os.path.join(out_dir, "report.csv"))
    if cfg.output.get("frames"):
        save_frames_pgm(gt.X_true, gt.side, os.path.join(out_dir, "frames"),
                        data_max=float(gt.X_true.max()))
    return report


def run_experiment(cfg, out_dir=None):
    """Run phantom -> data -> reconstruction -> report for one config.

    A multi-valued ``angles_per_step`` produces one subdirectory (``c02``,
    ``c06``, ...) per angle count.  Returns the artifact directory.
    """
    out_dir = out_dir or cfg.output["dir"]
    gt = _make_phantom(cfg)
    grid = ImageGrid(cfg.phantom["side"])
    geometry = default_geometry(grid)
    sweep = cfg.schedule["angles_per_step"]
    for c in sweep:
        run_dir = out_dir if len(sweep) == 1 else os.path.join(out_dir, f"c{c:02d}")
        schedule = golden_angle_schedule(
            cfg.phantom["steps"], c, cfg.schedule["increment"],
            cfg.schedule["stationary"])
        Y = simulate_measurements(gt, schedule, grid, geometry)
        Y_noisy = add_gaussian_noise(Y, cfg.noise["level"], cfg.noise["seed"])
        t0 = time.perf_counter()
        X, B, C, trace = _reconstruct(cfg, Y_noisy, schedule, grid, geometry)
        runtime = time.perf_counter() - t0
        _write_run(run_dir, cfg, gt, schedule, Y, Y_noisy, X, B, C, trace,
                   runtime)
    return out_dir


# ---------------------------------------------------------------------------
# Benchmarks.
# ---------------------------------------------------------------------------

def benchmark_solvers(side=64, steps=100, K=5, c=6, iterations=25, seed=0):
    """Per-iteration wall time of the factored solver against the generic
    one on the same stationary problem.

    Returns a list of (method, iterations, total_seconds, seconds_per_iter)
    rows; the factored path should win whenever T is well above 2K.
    """
    gt = dynamic_shepp_logan(side, steps)
    grid = ImageGrid(side)
    geometry = default_geometry(grid)
    schedule = golden_angle_schedule(steps, c, stationary=True)
    Y = add_gaussian_noise(
        simulate_measurements(gt, schedule, grid, geometry), 0.01, seed)
    jc = JointConfig(K=K, mu_C=0.1, tau=10.0, max_iter=iterations,
                     rel_tol=1e-12, cost_every=10 ** 9)
    X0 = backprojection_init(Y, schedule, grid, geometry)
    ops = build_operators(grid, geometry, schedule)
    rows = []
    for name, solve in (("bc", lambda: bc_solve(Y, ops, jc, X0)),
                        ("sbc", lambda: sbc_solve(Y, ops[0], jc, X0))):
        t0 = time.perf_counter()
        res = solve()
        total = time.perf_counter() - t0
        per_iter = float(np.median(res.trace.seconds))
        rows.append((name, res.trace.iterations_run, total, per_iter))
    return rows


def benchmark_kernels(side=64, c=6, repeats=5):
    """Time the numba kernel builds against their numpy twins."""
    angles = np.deg2rad(golden_angle_schedule(1, c).angles_per_step[0])
    sigmas = np.arange(-side, side + 1, dtype=np.float64) + 0.5
    u = np.abs(np.random.default_rng(0).normal(size=(side, side))) + 0.1
    cases = [
        ("siddon_rays", lambda f: f(angles, sigmas, side),
         kernels.siddon_rays_np, kernels.siddon_rays_nb),
        ("tv_pz", lambda f: f(u, 1e-5), kernels.tv_pz_np, kernels.tv_pz_nb),
        ("tv_grad", lambda f: f(u, 1e-5), kernels.tv_grad_np, kernels.tv_grad_nb),
        ("tv_value", lambda f: f(u, 1e-5), kernels.tv_value_np, kernels.tv_value_nb),
    ]
    rows = []
    for name, call, f_np, f_nb in cases:
        variants = [("numpy", f_np)]
        if kernels.NUMBA_AVAILABLE:
            call(f_nb)  # warm up the JIT before timing
            variants.append(("numba", f_nb))
        for label, f in variants:
            best = min(timeit.repeat(lambda: call(f), number=3, repeat=repeats)) / 3
            rows.append((name, label, best))
    return rows


def save_benchmark_csv(path, rows, header):
    with atomic_open(path, text=True) as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
