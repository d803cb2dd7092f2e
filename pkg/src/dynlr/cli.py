"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import os
import sys

from . import _accel
from .config import ExperimentConfig, PRESETS
from .errors import ConfigError, NumericalError
from .gradtv import pca_decompose, posthoc_nmf
from .harness import (benchmark_kernels, benchmark_solvers, run_experiment,
                      save_benchmark_csv)
from .matio import load_dlr1, save_csv, save_dlr1
from .metrics import evaluate_stack
from .phantoms import save_frames_pgm
from .radon import SamplingSchedule


def _load_config(args):
    if args.preset:
        cfg = ExperimentConfig.from_preset(args.preset)
    elif args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig.from_sections({})
    if args.seed is not None:
        cfg.noise["seed"] = args.seed
    if args.out is not None:
        cfg.output["dir"] = args.out
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("DYNLR_THREADS", "0") or 0)
    if threads:
        cfg.output["threads"] = threads
        _accel.set_threads(threads)
    return cfg


def _cmd_generate_phantom(args):
    from .harness import _make_phantom

    cfg = _load_config(args)
    gt = _make_phantom(cfg)
    out = cfg.output["dir"]
    save_dlr1(os.path.join(out, "X_true.dlr"), gt.X_true)
    save_csv(os.path.join(out, "B_true.csv"), gt.B_true)
    save_csv(os.path.join(out, "C_true.csv"), gt.C_true)
    save_frames_pgm(gt.X_true, gt.side, os.path.join(out, "frames"),
                    data_max=float(gt.X_true.max()))
    print(f"phantom written to {out}")


def _cmd_simulate(args):
    from .harness import _make_phantom
    from .phantoms import add_gaussian_noise, simulate_measurements
    from .radon import ImageGrid, default_geometry, golden_angle_schedule

    cfg = _load_config(args)
    gt = _make_phantom(cfg)
    grid = ImageGrid(cfg.phantom["side"])
    geometry = default_geometry(grid)
    schedule = golden_angle_schedule(
        cfg.phantom["steps"], cfg.schedule["angles_per_step"][0],
        cfg.schedule["increment"], cfg.schedule["stationary"])
    Y = simulate_measurements(gt, schedule, grid, geometry)
    Y_noisy = add_gaussian_noise(Y, cfg.noise["level"], cfg.noise["seed"])
    out = cfg.output["dir"]
    save_dlr1(os.path.join(out, "X_true.dlr"), gt.X_true)
    schedule.save_csv(os.path.join(out, "schedule.csv"))
    save_dlr1(os.path.join(out, "Y.dlr"), Y)
    save_dlr1(os.path.join(out, "Y_noisy.dlr"), Y_noisy)
    print(f"data written to {out}")


def _cmd_reconstruct(args):
    from .harness import _reconstruct
    from .radon import ImageGrid, default_geometry

    cfg = _load_config(args)
    data_dir = args.data or cfg.output["dir"]
    y_path = os.path.join(data_dir, "Y_noisy.dlr")
    if not os.path.exists(y_path):
        y_path = os.path.join(data_dir, "Y.dlr")
    if not os.path.exists(y_path):
        raise ConfigError(f"no Y_noisy.dlr or Y.dlr under {data_dir}")
    Y = load_dlr1(y_path)
    schedule = SamplingSchedule.load_csv(os.path.join(data_dir, "schedule.csv"))
    grid = ImageGrid(cfg.phantom["side"])
    geometry = default_geometry(grid)
    X, B, C, trace = _reconstruct(cfg, Y, schedule, grid, geometry)
    out = cfg.output["dir"]
    save_dlr1(os.path.join(out, "X.dlr"), X)
    if B is not None:
        save_dlr1(os.path.join(out, "B.dlr"), B)
        save_dlr1(os.path.join(out, "C.dlr"), C)
    trace.save_csv(os.path.join(out, "trace.csv"))
    print(f"reconstruction ({cfg.method['name']}) written to {out}, "
          f"{trace.iterations_run} iterations, stop: {trace.stop_reason}")


def _cmd_decompose(args):
    cfg = _load_config(args)
    data_dir = args.data or cfg.output["dir"]
    X = load_dlr1(os.path.join(data_dir, "X.dlr"))
    K = cfg.method["K"]
    if args.mode == "pca":
        B, C = pca_decompose(X, K)
    else:
        res = posthoc_nmf(X, K, cfg.method["mu_c_tilde"],
                          max_iter=cfg.method["max_iter"],
                          rel_tol=cfg.method["rel_tol"])
        B, C = res.B, res.C
    out = cfg.output["dir"]
    save_dlr1(os.path.join(out, "B.dlr"), B)
    save_dlr1(os.path.join(out, "C.dlr"), C)
    save_csv(os.path.join(out, "temporal.csv"), C)
    print(f"{args.mode} decomposition (K={K}) written to {out}")


def _cmd_evaluate(args):
    cfg = _load_config(args)
    data_dir = args.data or cfg.output["dir"]
    X = load_dlr1(os.path.join(data_dir, "X.dlr"))
    X_true = load_dlr1(os.path.join(data_dir, "X_true.dlr"))
    report = evaluate_stack(X, X_true)
    out = cfg.output["dir"]
    report.save_csv(os.path.join(out, "report.csv"))
    print(f"mean PSNR {report.mean_psnr:.2f} dB, mean SSIM "
          f"{report.mean_ssim:.4f} -> {os.path.join(out, 'report.csv')}")


def _cmd_benchmark(args):
    cfg = _load_config(args)
    out = cfg.output["dir"]
    os.makedirs(out, exist_ok=True)
    if args.kernels:
        rows = benchmark_kernels()
        path = os.path.join(out, "kernel_benchmark.csv")
        save_benchmark_csv(path, rows, "kernel,variant,best_seconds")
        for name, variant, secs in rows:
            print(f"{name:12s} {variant:6s} {secs * 1e3:9.3f} ms")
    else:
        rows = benchmark_solvers(side=cfg.phantom["side"],
                                 steps=cfg.phantom["steps"],
                                 K=cfg.method["K"],
                                 c=cfg.schedule["angles_per_step"][0],
                                 iterations=args.iterations,
                                 seed=cfg.noise["seed"])
        path = os.path.join(out, "benchmark.csv")
        save_benchmark_csv(
            path, rows, "method,iterations,total_seconds,seconds_per_iteration")
        for name, iters, total, per_iter in rows:
            print(f"{name:4s} {iters:4d} iterations  total {total:8.2f} s  "
                  f"per-iteration {per_iter * 1e3:8.2f} ms")
        ratio = rows[0][3] / rows[1][3]
        print(f"speed-up (bc / sbc per-iteration): {ratio:.1f}x")
    print(f"written to {path}")


def _cmd_run(args):
    cfg = _load_config(args)
    out = run_experiment(cfg)
    print(f"experiment artifacts in {out}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dynlr",
        description="Dynamic tomography with joint nonnegative low-rank "
                    "decomposition")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "generate-phantom": (_cmd_generate_phantom,
                             "write ground-truth phantom files"),
        "simulate": (_cmd_simulate, "project the phantom and add noise"),
        "reconstruct": (_cmd_reconstruct, "run the configured solver"),
        "decompose": (_cmd_decompose, "factorize a reconstructed stack"),
        "evaluate": (_cmd_evaluate, "score a reconstruction against truth"),
        "benchmark": (_cmd_benchmark, "time bc vs sbc (or kernel variants)"),
        "run": (_cmd_run, "full pipeline: phantom, data, solve, report"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="path to a flat key = value config")
        p.add_argument("--preset", help="named preset; see README",
                       choices=sorted(PRESETS))
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the noise seed")
        p.add_argument("--threads", type=int,
                       help="numba thread cap (env DYNLR_THREADS)")
        if name in ("reconstruct", "decompose", "evaluate"):
            p.add_argument("--data", help="directory with input matrices")
        if name == "decompose":
            p.add_argument("--mode", choices=("pca", "nmf"), default="nmf")
        if name == "benchmark":
            p.add_argument("--kernels", action="store_true",
                           help="compare numba and numpy kernel builds")
            p.add_argument("--iterations", type=int, default=25)
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
