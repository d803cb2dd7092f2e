"""Discrete parallel-beam Radon transform and golden-angle sampling.

Each time step's operator is a sparse nonnegative matrix of exact
line/pixel intersection lengths (ray driven), so the adjoint, unfiltered
backprojection, is the plain transpose.  Operators are cached per distinct
angle set: a stationary schedule builds exactly one matrix, which is what
makes the factored stationary solver path cheap.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .linalg import DEFAULT_FLOOR, project_floor
from .matio import atomic_open

#: Tiny golden-angle increment in degrees.
TINY_GOLDEN_ANGLE = 32.039


@dataclass(frozen=True)
class ImageGrid:
    """Square n x n pixel grid with unit pixels; N = side**2 unknowns."""

    side: int
    pixel_size: float = 1.0

    def __post_init__(self):
        if self.side < 2:
            raise ValueError(f"grid side must be >= 2, got {self.side}")

    @property
    def n_pixels(self):
        return self.side * self.side


@dataclass(frozen=True)
class Geometry:
    """Detector line: ``detector_count`` bins spaced like the pixels."""

    detector_count: int
    detector_spacing: float = 1.0


def default_geometry(grid):
    """Detector row covering the grid diagonal, odd bin count."""
    n_s = int(np.ceil(np.sqrt(2.0) * grid.side))
    if n_s % 2 == 0:
        n_s += 1
    return Geometry(detector_count=n_s, detector_spacing=grid.pixel_size)


@dataclass
class SamplingSchedule:
    """Per-time-step angle sets, every step with the same angle count."""

    angles_per_step: np.ndarray  # (T, c) degrees in [0, 180)
    stationary: bool = False

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.angles_per_step, dtype=np.float64))
        if self.stationary and not np.all(a == a[0]):
            raise ValueError("stationary schedule must repeat one angle set")
        self.angles_per_step = a

    @property
    def steps(self):
        return self.angles_per_step.shape[0]

    @property
    def angles_per_time(self):
        return self.angles_per_step.shape[1]

    def save_csv(self, path):
        with atomic_open(path, text=True) as fh:
            for row in self.angles_per_step:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load_csv(cls, path):
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append([float(t) for t in line.split(",")])
        a = np.array(rows, dtype=np.float64)
        return cls(a, stationary=bool(np.all(a == a[0])))


def golden_angle_schedule(T, c, phi=TINY_GOLDEN_ANGLE, stationary=False):
    """Golden-angle sampling: c consecutive angles of the global sequence
    ``(j * phi) mod 180`` per time step, or the first c angles everywhere
    when stationary."""
    if T < 1 or c < 1:
        raise ValueError("need T >= 1 and c >= 1")
    if stationary:
        base = (np.arange(c, dtype=np.float64) * phi) % 180.0
        angles = np.tile(base, (T, 1))
    else:
        seq = (np.arange(T * c, dtype=np.float64) * phi) % 180.0
        angles = seq.reshape(T, c)
    return SamplingSchedule(angles, stationary=stationary)


class RadonOperator:
    """Sparse nonnegative projector for one angle set.

    Row ``a * detector_count + d`` holds the intersection lengths of the
    ray at angle index ``a`` and detector offset index ``d``.
    """

    def __init__(self, matrix, angles_deg, detector_count):
        self.matrix = matrix.tocsr()
        self.matrix_t = self.matrix.T.tocsr()
        self.angles_deg = np.asarray(angles_deg, dtype=np.float64)
        self.detector_count = detector_count

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.matrix.shape[1],):
            raise ValueError(
                f"image vector length {x.shape} incompatible with N={self.matrix.shape[1]}")
        return self.matrix @ x

    def adjoint(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.matrix.shape[0],):
            raise ValueError(
                f"sinogram length {y.shape} incompatible with M={self.matrix.shape[0]}")
        return self.matrix_t @ y


def detector_offsets(grid, geometry):
    """Signed detector offsets from the grid center.

    The detector lattice is shifted by half a spacing when grid and
    detector parities differ, so axis-aligned rays pass through pixel
    centers instead of along pixel boundaries.
    """
    n_s = geometry.detector_count
    base = np.arange(n_s, dtype=np.float64) - (n_s - 1) / 2.0
    shift = (0.5 if grid.side % 2 == 0 else 0.0) - (0.5 if n_s % 2 == 0 else 0.0)
    return (base + shift) * geometry.detector_spacing


def build_operator(grid, geometry, angles_deg):
    """Materialize the sparse projector for one angle set (degrees)."""
    angles_deg = np.atleast_1d(np.asarray(angles_deg, dtype=np.float64))
    if angles_deg.size == 0:
        raise ValueError("angle set must not be empty")
    diag = np.sqrt(2.0) * grid.side
    if geometry.detector_count < diag:
        raise ValueError(
            f"{geometry.detector_count} detectors cannot cover the "
            f"{diag:.1f}-pixel grid diagonal")
    angles_deg = np.mod(angles_deg, 180.0)
    sigmas = detector_offsets(grid, geometry)
    rows, cols, vals = kernels.siddon_rays(
        np.deg2rad(angles_deg), sigmas, grid.side)
    m = angles_deg.size * geometry.detector_count
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(m, grid.n_pixels))
    return RadonOperator(mat, angles_deg, geometry.detector_count)


def apply(op, x):
    return op.apply(x)


def apply_adjoint(op, y):
    return op.adjoint(y)


def build_operators(grid, geometry, schedule):
    """One operator per time step, sharing matrices across equal angle sets."""
    cache = {}
    ops = []
    for row in schedule.angles_per_step:
        key = tuple(np.round(np.mod(row, 180.0), 9))
        if key not in cache:
            cache[key] = build_operator(grid, geometry, row)
        ops.append(cache[key])
    return ops


def backprojection_init(Y, schedule, grid, geometry, floor=DEFAULT_FLOOR):
    """Unfiltered backprojection of a sinogram stack, floored entrywise."""
    Y = np.asarray(Y, dtype=np.float64)
    ops = build_operators(grid, geometry, schedule)
    if Y.ndim != 2 or Y.shape[1] != schedule.steps or Y.shape[0] != ops[0].shape[0]:
        raise ValueError(
            f"data shape {Y.shape} does not match schedule "
            f"({ops[0].shape[0]} x {schedule.steps})")
    X = np.empty((grid.n_pixels, schedule.steps))
    for t, op in enumerate(ops):
        X[:, t] = op.adjoint(Y[:, t])
    return project_floor(X, floor)
