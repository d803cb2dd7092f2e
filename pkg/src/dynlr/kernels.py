"""Hot inner-loop kernels: ray tracing and total-variation pixel machinery.

Every kernel ships in two builds, a vectorized numpy one (``*_np``) and a
numba ``@njit`` one (``*_nb``).  The module-level aliases (``siddon_rays``,
``tv_value``, ...) point at whichever build :mod:`dynlr._accel` selected.
The two builds implement identical arithmetic and are cross-checked in the
test suite; ``dynlr benchmark --kernels`` times them against each other.

Geometry conventions used by the ray tracer: the image is an ``n x n`` grid
of unit pixels covering ``[0, n] x [0, n]``; pixel ``(i, j)`` spans
``[j, j+1] x [i, i+1]`` with ``i`` the row index along ``y``.  A ray with
angle ``theta`` and detector offset ``sigma`` is the line through
``center + sigma * (cos t, sin t)`` with direction ``(-sin t, cos t)``, so
at ``theta = 0`` rays run parallel to image columns.
"""

import numpy as np

from ._accel import NUMBA_AVAILABLE, NUMBA_ENABLED, njit

_TINY = 1e-12


# ---------------------------------------------------------------------------
# Siddon-style ray tracing: exact line/pixel intersection lengths.
# ---------------------------------------------------------------------------

def _ray_box_range(p0, d, n):
    """Parameter interval [t_lo, t_hi] where the ray is inside [0, n]^2."""
    t_lo, t_hi = -np.inf, np.inf
    for ax in (0, 1):
        if abs(d[ax]) > _TINY:
            ta = (0.0 - p0[ax]) / d[ax]
            tb = (n - p0[ax]) / d[ax]
            t_lo = max(t_lo, min(ta, tb))
            t_hi = min(t_hi, max(ta, tb))
        elif p0[ax] < 0.0 or p0[ax] > n:
            return 0.0, 0.0
    return t_lo, t_hi


def siddon_rays_np(angles_rad, sigmas, n):
    """Trace all (angle, detector) rays through an n x n pixel grid.

    Parameters
    ----------
    angles_rad : 1-d array of ray angles in radians.
    sigmas : 1-d array of signed detector offsets from the grid center.
    n : grid side in pixels.

    Returns
    -------
    rows, cols, vals : int64/int64/float64 arrays
        Sparse triplets; row ``a * len(sigmas) + d`` holds the intersection
        lengths of ray ``(a, d)`` with each pixel it crosses.
    """
    n_s = len(sigmas)
    half = n / 2.0
    rows_out, cols_out, vals_out = [], [], []
    for a, theta in enumerate(angles_rad):
        c, s = np.cos(theta), np.sin(theta)
        d = (-s, c)
        for k, sigma in enumerate(sigmas):
            p0 = (half + sigma * c, half + sigma * s)
            t_lo, t_hi = _ray_box_range(p0, d, n)
            if t_hi - t_lo <= _TINY:
                continue
            ts = [np.array([t_lo, t_hi])]
            for ax in (0, 1):
                if abs(d[ax]) > _TINY:
                    xa = p0[ax] + t_lo * d[ax]
                    xb = p0[ax] + t_hi * d[ax]
                    m = np.arange(np.ceil(min(xa, xb)), np.floor(max(xa, xb)) + 1.0)
                    tm = (m - p0[ax]) / d[ax]
                    ts.append(tm[(tm > t_lo) & (tm < t_hi)])
            t = np.sort(np.concatenate(ts))
            lens = np.diff(t)
            keep = lens > _TINY
            if not np.any(keep):
                continue
            mids = 0.5 * (t[:-1] + t[1:])[keep]
            px = p0[0] + mids * d[0]
            py = p0[1] + mids * d[1]
            ix = np.clip(np.floor(px).astype(np.int64), 0, n - 1)
            iy = np.clip(np.floor(py).astype(np.int64), 0, n - 1)
            cols_out.append(iy * n + ix)
            vals_out.append(lens[keep])
            rows_out.append(np.full(int(keep.sum()), a * n_s + k, dtype=np.int64))
    if not rows_out:
        return (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64))
    return (np.concatenate(rows_out), np.concatenate(cols_out),
            np.concatenate(vals_out))


@njit(cache=True)
def _siddon_fill_nb(angles_rad, sigmas, n, rows, cols, vals):  # pragma: no cover
    n_s = sigmas.shape[0]
    half = n / 2.0
    tbuf = np.empty(2 * n + 4, np.float64)
    out = 0
    for a in range(angles_rad.shape[0]):
        c = np.cos(angles_rad[a])
        s = np.sin(angles_rad[a])
        dx = -s
        dy = c
        for k in range(n_s):
            p0x = half + sigmas[k] * c
            p0y = half + sigmas[k] * s
            # clip the ray parameter to the grid bounding box
            t_lo = -1e300
            t_hi = 1e300
            ok = True
            if abs(dx) > _TINY:
                ta = (0.0 - p0x) / dx
                tb = (n - p0x) / dx
                t_lo = max(t_lo, min(ta, tb))
                t_hi = min(t_hi, max(ta, tb))
            elif p0x < 0.0 or p0x > n:
                ok = False
            if abs(dy) > _TINY:
                ta = (0.0 - p0y) / dy
                tb = (n - p0y) / dy
                t_lo = max(t_lo, min(ta, tb))
                t_hi = min(t_hi, max(ta, tb))
            elif p0y < 0.0 or p0y > n:
                ok = False
            if not ok or t_hi - t_lo <= _TINY:
                continue
            cnt = 0
            tbuf[cnt] = t_lo
            cnt += 1
            tbuf[cnt] = t_hi
            cnt += 1
            if abs(dx) > _TINY:
                xa = p0x + t_lo * dx
                xb = p0x + t_hi * dx
                m = np.ceil(min(xa, xb))
                m_hi = np.floor(max(xa, xb))
                while m <= m_hi:
                    tm = (m - p0x) / dx
                    if t_lo < tm < t_hi:
                        tbuf[cnt] = tm
                        cnt += 1
                    m += 1.0
            if abs(dy) > _TINY:
                ya = p0y + t_lo * dy
                yb = p0y + t_hi * dy
                m = np.ceil(min(ya, yb))
                m_hi = np.floor(max(ya, yb))
                while m <= m_hi:
                    tm = (m - p0y) / dy
                    if t_lo < tm < t_hi:
                        tbuf[cnt] = tm
                        cnt += 1
                    m += 1.0
            t = np.sort(tbuf[:cnt])
            row = a * n_s + k
            for q in range(cnt - 1):
                seg = t[q + 1] - t[q]
                if seg > _TINY:
                    mid = 0.5 * (t[q] + t[q + 1])
                    ix = int(np.floor(p0x + mid * dx))
                    iy = int(np.floor(p0y + mid * dy))
                    if ix < 0:
                        ix = 0
                    elif ix > n - 1:
                        ix = n - 1
                    if iy < 0:
                        iy = 0
                    elif iy > n - 1:
                        iy = n - 1
                    rows[out] = row
                    cols[out] = iy * n + ix
                    vals[out] = seg
                    out += 1
    return out


def siddon_rays_nb(angles_rad, sigmas, n):
    """Numba build of :func:`siddon_rays_np` (identical output contract)."""
    angles_rad = np.ascontiguousarray(angles_rad, dtype=np.float64)
    sigmas = np.ascontiguousarray(sigmas, dtype=np.float64)
    cap = len(angles_rad) * len(sigmas) * (2 * n + 3)
    rows = np.empty(cap, np.int64)
    cols = np.empty(cap, np.int64)
    vals = np.empty(cap, np.float64)
    m = _siddon_fill_nb(angles_rad, sigmas, int(n), rows, cols, vals)
    return rows[:m].copy(), cols[:m].copy(), vals[:m].copy()


# ---------------------------------------------------------------------------
# Smoothed isotropic TV on a single 2-d image.
#
# Forward neighbors of pixel (i, j) are (i, j+1) and (i+1, j), truncated at
# the boundary; the adjoint neighbors are therefore (i, j-1) and (i-1, j).
# g holds the per-pixel smoothed gradient magnitudes
# sqrt(eps^2 + sum of squared forward differences).
# ---------------------------------------------------------------------------

def _tv_terms_np(u, eps):
    dr = np.zeros_like(u)
    dd = np.zeros_like(u)
    dr[:, :-1] = u[:, :-1] - u[:, 1:]
    dd[:-1, :] = u[:-1, :] - u[1:, :]
    g = np.sqrt(eps * eps + dr * dr + dd * dd)
    return g, dr, dd


def tv_value_np(u, eps):
    g, _, _ = _tv_terms_np(u, eps)
    return float(g.sum())


def tv_grad_np(u, eps):
    g, dr, dd = _tv_terms_np(u, eps)
    grad = (dr + dd) / g
    grad[:, 1:] -= dr[:, :-1] / g[:, :-1]
    grad[1:, :] -= dd[:-1, :] / g[:-1, :]
    return grad


def tv_pz_np(u, eps):
    """Per-pixel curvature weights P and weighted neighbor averages Z."""
    g, _, _ = _tv_terms_np(u, eps)
    inv_g = 1.0 / g
    cnt = np.zeros_like(u)
    cnt[:, :-1] += 1.0
    cnt[:-1, :] += 1.0
    p = cnt * inv_g
    p[:, 1:] += inv_g[:, :-1]
    p[1:, :] += inv_g[:-1, :]
    num = np.zeros_like(u)
    num[:, :-1] += 0.5 * (u[:, :-1] + u[:, 1:])
    num[:-1, :] += 0.5 * (u[:-1, :] + u[1:, :])
    num *= inv_g
    num[:, 1:] += 0.5 * (u[:, 1:] + u[:, :-1]) * inv_g[:, :-1]
    num[1:, :] += 0.5 * (u[1:, :] + u[:-1, :]) * inv_g[:-1, :]
    return p, num / p


@njit(cache=True)
def _tv_g_nb(u, eps):  # pragma: no cover
    h, w = u.shape
    g = np.empty((h, w), np.float64)
    for i in range(h):
        for j in range(w):
            acc = eps * eps
            if j + 1 < w:
                d = u[i, j] - u[i, j + 1]
                acc += d * d
            if i + 1 < h:
                d = u[i, j] - u[i + 1, j]
                acc += d * d
            g[i, j] = np.sqrt(acc)
    return g


@njit(cache=True)
def tv_value_nb(u, eps):  # pragma: no cover
    g = _tv_g_nb(u, eps)
    return g.sum()


@njit(cache=True)
def tv_grad_nb(u, eps):  # pragma: no cover
    h, w = u.shape
    g = _tv_g_nb(u, eps)
    grad = np.zeros((h, w), np.float64)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            if j + 1 < w:
                acc += (u[i, j] - u[i, j + 1]) / g[i, j]
            if i + 1 < h:
                acc += (u[i, j] - u[i + 1, j]) / g[i, j]
            if j > 0:
                acc += (u[i, j] - u[i, j - 1]) / g[i, j - 1]
            if i > 0:
                acc += (u[i, j] - u[i - 1, j]) / g[i - 1, j]
            grad[i, j] = acc
    return grad


@njit(cache=True)
def tv_pz_nb(u, eps):  # pragma: no cover
    h, w = u.shape
    g = _tv_g_nb(u, eps)
    p = np.zeros((h, w), np.float64)
    z = np.zeros((h, w), np.float64)
    for i in range(h):
        for j in range(w):
            fwd = 0.0
            if j + 1 < w:
                fwd += 1.0
            if i + 1 < h:
                fwd += 1.0
            pv = fwd / g[i, j]
            if j > 0:
                pv += 1.0 / g[i, j - 1]
            if i > 0:
                pv += 1.0 / g[i - 1, j]
            num = 0.0
            if j + 1 < w:
                num += 0.5 * (u[i, j] + u[i, j + 1])
            if i + 1 < h:
                num += 0.5 * (u[i, j] + u[i + 1, j])
            num /= g[i, j]
            if j > 0:
                num += 0.5 * (u[i, j] + u[i, j - 1]) / g[i, j - 1]
            if i > 0:
                num += 0.5 * (u[i, j] + u[i - 1, j]) / g[i - 1, j]
            p[i, j] = pv
            z[i, j] = num / pv
    return p, z


if NUMBA_ENABLED:
    siddon_rays = siddon_rays_nb
    tv_value = tv_value_nb
    tv_grad = tv_grad_nb
    tv_pz = tv_pz_nb
else:
    siddon_rays = siddon_rays_np
    tv_value = tv_value_np
    tv_grad = tv_grad_np
    tv_pz = tv_pz_np

__all__ = [
    "NUMBA_AVAILABLE",
    "NUMBA_ENABLED",
    "siddon_rays",
    "siddon_rays_np",
    "siddon_rays_nb",
    "tv_value",
    "tv_value_np",
    "tv_value_nb",
    "tv_grad",
    "tv_grad_np",
    "tv_grad_nb",
    "tv_pz",
    "tv_pz_np",
    "tv_pz_nb",
]
