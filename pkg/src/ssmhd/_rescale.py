"""Compiled rescaling kernel: out(x) = amp * bump(|x|) * src_ext(lam * x)."""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def _bump(r, r_core, r_cut):
    if r <= r_core:
        return 1.0
    if r >= r_cut:
        return 0.0
    u = (r - r_core) / (r_cut - r_core)
    a = math.exp(-1.0 / (1.0 - u))
    b = math.exp(-1.0 / u)
    return a / (a + b)


@numba.njit(cache=True)
def _rescale(src, out, l, h, lam, amp, radius, power, r_core, r_cut):
    n = src.shape[0]
    for i in range(n):
        x1 = -l + h * i
        for j in range(n):
            x2 = -l + h * j
            for k in range(n):
                x3 = -l + h * k
                r = math.sqrt(x1 * x1 + x2 * x2 + x3 * x3)
                wt = _bump(r, r_core, r_cut)
                if wt == 0.0:
                    out[i, j, k] = 0.0
                    continue
                y1 = lam * x1
                y2 = lam * x2
                y3 = lam * x3
                rho = lam * r
                fac = amp * wt
                if rho > radius:
                    c = radius / rho
                    y1 *= c
                    y2 *= c
                    y3 *= c
                    fac *= c**power
                f1 = (y1 + l) / h
                f2 = (y2 + l) / h
                f3 = (y3 + l) / h
                i0 = min(max(int(math.floor(f1)), 0), n - 2)
                j0 = min(max(int(math.floor(f2)), 0), n - 2)
                k0 = min(max(int(math.floor(f3)), 0), n - 2)
                t1 = f1 - i0
                t2 = f2 - j0
                t3 = f3 - k0
                c00 = src[i0, j0, k0] * (1 - t3) + src[i0, j0, k0 + 1] * t3
                c01 = src[i0, j0 + 1, k0] * (1 - t3) + src[i0, j0 + 1, k0 + 1] * t3
                c10 = src[i0 + 1, j0, k0] * (1 - t3) + src[i0 + 1, j0, k0 + 1] * t3
                c11 = src[i0 + 1, j0 + 1, k0] * (1 - t3) + src[i0 + 1, j0 + 1, k0 + 1] * t3
                c0 = c00 * (1 - t2) + c01 * t2
                c1 = c10 * (1 - t2) + c11 * t2
                out[i, j, k] = fac * (c0 * (1 - t1) + c1 * t1)


def rescale(src, grid, lam, amp, radius, power, r_core, r_cut, out=None):
    """Sample amp * src(lam x) on ``grid`` with the far-field law (radius/|y|)^power beyond ``radius``,
    then apply the radial taper.  ``src`` is one (n, n, n) component."""
    src = np.ascontiguousarray(src, dtype=np.float64)
    if out is None:
        out = np.empty_like(src)
    _rescale(src, out, grid.l, grid.h, float(lam), float(amp), float(radius), float(power),
             float(r_core), float(r_cut))
    return out
