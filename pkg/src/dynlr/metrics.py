"""Per-frame PSNR/SSIM scoring and temporal-component matching."""

from dataclasses import dataclass

import numpy as np

from .matio import atomic_open

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5

#: Relative standard deviation below which a temporal row counts as constant
#: when matching components (Pearson is undefined against a constant row).
CONSTANT_ROW_TOL = 0.05


@dataclass
class QualityReport:
    """Frame-resolved and averaged reconstruction quality."""

    psnr_per_frame: np.ndarray
    ssim_per_frame: np.ndarray
    mean_psnr: float
    mean_ssim: float
    runtime_seconds: float = 0.0

    def save_csv(self, path):
        with atomic_open(path, text=True) as fh:
            fh.write("frame,psnr_db,ssim\n")
            for t, (p, s) in enumerate(zip(self.psnr_per_frame, self.ssim_per_frame)):
                fh.write(f"{t},{float(p)!r},{float(s)!r}\n")
            fh.write(f"mean,{float(self.mean_psnr)!r},{float(self.mean_ssim)!r}\n")
            fh.write(f"runtime_seconds,{float(self.runtime_seconds)!r},\n")


def psnr(frame, reference, data_range):
    """Peak signal-to-noise ratio in dB; +inf for identical inputs."""
    frame = np.asarray(frame, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if frame.shape != reference.shape:
        raise ValueError(f"shape mismatch: {frame.shape} vs {reference.shape}")
    if data_range <= 0:
        raise ValueError("data_range must be > 0")
    mse = float(np.mean((frame - reference) ** 2))
    if mse == 0.0:
        return np.inf
    return 10.0 * np.log10(data_range * data_range / mse)


def _gaussian_window(size=_SSIM_WINDOW, sigma=_SSIM_SIGMA):
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def _windowed_mean(img, kernel):
    win = np.lib.stride_tricks.sliding_window_view(img, kernel.shape)
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


def ssim(frame, reference, data_range):
    """Mean local structural similarity over all full 11x11 windows.

    Gaussian window (sigma 1.5), stability constants ``(0.01 * range)**2``
    and ``(0.03 * range)**2``.
    """
    x = np.asarray(frame, dtype=np.float64)
    y = np.asarray(reference, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if min(x.shape) < _SSIM_WINDOW:
        raise ValueError(f"frame smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} window")
    k = _gaussian_window()
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mx = _windowed_mean(x, k)
    my = _windowed_mean(y, k)
    vx = _windowed_mean(x * x, k) - mx * mx
    vy = _windowed_mean(y * y, k) - my * my
    cxy = _windowed_mean(x * y, k) - mx * my
    num = (2.0 * mx * my + c1) * (2.0 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def evaluate_stack(X, X_true, runtime_seconds=0.0):
    """Per-frame PSNR/SSIM of a stack against ground truth.

    ``data_range`` is the global maximum of the ground truth; infinite PSNR
    frames (exact matches) propagate into the mean.
    """
    X = np.asarray(X, dtype=np.float64)
    X_true = np.asarray(X_true, dtype=np.float64)
    if X.shape != X_true.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {X_true.shape}")
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("expected a nonempty N x T stack")
    side = round(np.sqrt(X.shape[0]))
    if side * side != X.shape[0]:
        raise ValueError(f"{X.shape[0]} pixels do not form square frames")
    rng = float(X_true.max())
    ps = np.empty(X.shape[1])
    ss = np.empty(X.shape[1])
    for t in range(X.shape[1]):
        a = X[:, t].reshape(side, side)
        b = X_true[:, t].reshape(side, side)
        ps[t] = psnr(a, b, rng)
        ss[t] = ssim(a, b, rng)
    return QualityReport(psnr_per_frame=ps, ssim_per_frame=ss,
                         mean_psnr=float(np.mean(ps)), mean_ssim=float(np.mean(ss)),
                         runtime_seconds=runtime_seconds)


def _is_constant(row):
    scale = max(abs(float(np.mean(row))), 1e-12)
    return float(np.std(row)) <= CONSTANT_ROW_TOL * scale


def _row_correlation(a, b):
    ca, cb = _is_constant(a), _is_constant(b)
    if ca or cb:
        return 1.0 if (ca and cb) else 0.0
    return float(np.corrcoef(a, b)[0, 1])


def match_components(C_est, C_true):
    """Greedily assign estimated temporal rows to ground-truth rows.

    Pairs are picked in order of decreasing Pearson correlation; rows that
    are constant up to :data:`CONSTANT_ROW_TOL` correlate 1 with other
    constant rows and 0 with non-constant ones.

    Returns
    -------
    assignment : int array, length K_true
        ``assignment[j]`` is the estimated row matched to true row j.
    correlations : float array, length K_true
    """
    C_est = np.atleast_2d(np.asarray(C_est, dtype=np.float64))
    C_true = np.atleast_2d(np.asarray(C_true, dtype=np.float64))
    k_est, k_true = C_est.shape[0], C_true.shape[0]
    if k_est < k_true:
        raise ValueError(f"need at least {k_true} estimated rows, got {k_est}")
    corr = np.array([[_row_correlation(C_est[i], C_true[j])
                      for j in range(k_true)] for i in range(k_est)])
    assignment = np.full(k_true, -1, dtype=int)
    out = np.zeros(k_true)
    free_est = set(range(k_est))
    free_true = set(range(k_true))
    while free_true:
        best = max(((corr[i, j], i, j) for i in free_est for j in free_true),
                   key=lambda t: t[0])
        _, i, j = best
        assignment[j] = i
        out[j] = corr[i, j]
        free_est.remove(i)
        free_true.remove(j)
    return assignment, out
