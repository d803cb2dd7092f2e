"""Space-time phantoms with an exact spatial/temporal factorization.

Both generators return a ground truth whose image stack is the exact
product of nonnegative spatial components and temporal curves, so solver
output can be scored against known factors.  Intensities live in [0, 1].
"""

import os
from dataclasses import dataclass

import numpy as np

from .matio import save_pgm16
from .radon import build_operators

# (value, semi_axis_x, semi_axis_y, center_x, center_y, rotation_deg) in
# normalized [-1, 1] coordinates.
_HEAD_STATIC = (
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.10, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    (0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
)
_HEAD_DYNAMIC = (
    (0.25, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.25, 0.1600, 0.2000, 0.00, -0.3500, 0.0),
)

_CHEST_STATIC = (
    (0.40, 0.8500, 0.7000, 0.00, 0.00, 0.0),
    (-0.30, 0.3200, 0.4500, -0.42, -0.02, 8.0),
    (-0.30, 0.3200, 0.4500, 0.42, -0.02, -8.0),
    (0.25, 0.0900, 0.1200, 0.00, -0.55, 0.0),
    (0.15, 0.0500, 0.0700, -0.12, 0.05, 0.0),
    (0.12, 0.0500, 0.0700, 0.12, 0.05, 0.0),
)
# branching tube inside the left lung: (x0, y0) -> (x1, y1) per segment
_VESSEL_SEGMENTS = (
    ((-0.42, -0.38), (-0.40, -0.05)),
    ((-0.40, -0.05), (-0.60, 0.28)),
    ((-0.40, -0.05), (-0.24, 0.30)),
)
_VESSEL_RADIUS = 0.06
_VESSEL_VALUE = 0.50


@dataclass(frozen=True)
class GroundTruth:
    """Exact factorization ``X_true = B_true @ C_true`` of a phantom."""

    X_true: np.ndarray  # N x T
    B_true: np.ndarray  # N x K0
    C_true: np.ndarray  # K0 x T
    side: int

    @property
    def n_components(self):
        return self.B_true.shape[1]

    @property
    def steps(self):
        return self.X_true.shape[1]


def _pixel_coords(n):
    # pixel centers on the [-1, 1]^2 square, row-major like the projector
    c = (np.arange(n) + 0.5 - n / 2.0) / (n / 2.0)
    return np.meshgrid(c, c, indexing="xy")


def _render_ellipses(n, ellipses):
    x, y = _pixel_coords(n)
    img = np.zeros((n, n))
    for value, a, b, x0, y0, phi in ellipses:
        rad = np.deg2rad(phi)
        xr = (x - x0) * np.cos(rad) + (y - y0) * np.sin(rad)
        yr = -(x - x0) * np.sin(rad) + (y - y0) * np.cos(rad)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += value
    # intensities that cancel exactly can leave -1e-17 residue
    return np.maximum(img, 0.0)


def _render_tube(n, segments, radius):
    x, y = _pixel_coords(n)
    dist = np.full((n, n), np.inf)
    for (x0, y0), (x1, y1) in segments:
        ux, uy = x1 - x0, y1 - y0
        L2 = ux * ux + uy * uy
        s = np.clip(((x - x0) * ux + (y - y0) * uy) / L2, 0.0, 1.0)
        dist = np.minimum(dist, np.hypot(x - (x0 + s * ux), y - (y0 + s * uy)))
    return (dist <= radius).astype(np.float64)


def _check_args(n, T):
    if n < 32:
        raise ValueError(f"phantom side must be >= 32, got {n}")
    if T < 2:
        raise ValueError(f"need at least 2 time steps, got {T}")


def dynamic_shepp_logan(n, T):
    """Head phantom with two inner ellipses pulsing at different rates.

    Three components: a constant background and two additive ellipses whose
    intensities follow ``0.5 * (1 + sin(2 pi f (t-1) / T))`` with f = 2, 3.
    """
    _check_args(n, T)
    background = _render_ellipses(n, _HEAD_STATIC)
    blobs = [_render_ellipses(n, (e,)) for e in _HEAD_DYNAMIC]
    B = np.column_stack([background.ravel()] + [b.ravel() for b in blobs])
    t = np.arange(1, T + 1, dtype=np.float64)
    C = np.vstack([
        np.ones(T),
        0.5 * (1.0 + np.sin(2.0 * np.pi * 2.0 * (t - 1) / T)),
        0.5 * (1.0 + np.sin(2.0 * np.pi * 3.0 * (t - 1) / T)),
    ])
    return GroundTruth(X_true=B @ C, B_true=B, C_true=C, side=n)


def vessel_phantom(n, T):
    """Chest phantom with a branching vessel taking up a tracer bolus.

    Two components: a constant lung-like background and a tube mask whose
    curve is zero until ``t0 = ceil(T/5)``, jumps to one there and decays
    as ``exp(-4 (t - t0) / T)``.
    """
    _check_args(n, T)
    background = _render_ellipses(n, _CHEST_STATIC)
    vessel = _VESSEL_VALUE * _render_tube(n, _VESSEL_SEGMENTS, _VESSEL_RADIUS)
    B = np.column_stack([background.ravel(), vessel.ravel()])
    t0 = int(np.ceil(T / 5.0))
    t = np.arange(1, T + 1, dtype=np.float64)
    curve = np.where(t < t0, 0.0, np.exp(-4.0 * (t - t0) / T))
    C = np.vstack([np.ones(T), curve])
    return GroundTruth(X_true=B @ C, B_true=B, C_true=C, side=n)


def simulate_measurements(gt, schedule, grid, geometry):
    """Project every phantom frame with its time step's operator."""
    if grid.n_pixels != gt.X_true.shape[0]:
        raise ValueError(
            f"grid has {grid.n_pixels} pixels, phantom has {gt.X_true.shape[0]}")
    if schedule.steps != gt.steps:
        raise ValueError(
            f"schedule has {schedule.steps} steps, phantom has {gt.steps}")
    ops = build_operators(grid, geometry, schedule)
    Y = np.empty((ops[0].shape[0], gt.steps))
    for t, op in enumerate(ops):
        Y[:, t] = op.apply(gt.X_true[:, t])
    return Y


def add_gaussian_noise(Y, level, seed):
    """Additive white noise with std ``level * max(Y)``, clipped at zero.

    Deterministic for a fixed seed (numpy PCG64 generator).
    """
    if level < 0:
        raise ValueError(f"noise level must be >= 0, got {level}")
    Y = np.asarray(Y, dtype=np.float64)
    if level == 0.0:
        return Y.copy()
    rng = np.random.default_rng(seed)
    noisy = Y + rng.normal(0.0, level * Y.max(), size=Y.shape)
    return np.maximum(noisy, 0.0)


def save_frames_pgm(X, side, out_dir, prefix="frame", data_max=None):
    """One 16-bit PGM per time step, zero-padded index suffix."""
    X = np.asarray(X, dtype=np.float64)
    if data_max is None:
        data_max = float(X.max())
    os.makedirs(out_dir, exist_ok=True)
    width = max(4, len(str(X.shape[1] - 1)))
    for t in range(X.shape[1]):
        frame = np.flipud(X[:, t].reshape(side, side))
        save_pgm16(os.path.join(out_dir, f"{prefix}_{t:0{width}d}.pgm"),
                   frame, data_max)
