"""Standalone invariant suites behind ``ssmhd verify``.

Each check returns ``{"name", "passed", "value", "tol"}``; values are the
measured error (or statistic) and ``tol`` the gate it is compared against.
"""

import numpy as np

from . import kernels, spectral
from .fields import Grid3, VectorField, field_from_array, taper
from .initial_data import caloric_profile, check_divergence_free, linear_profile_residual


def _check(name, value, tol, passed=None):
    value = float(value)
    if passed is None:
        passed = bool(value <= tol)
    return {"name": name, "passed": bool(passed), "value": value, "tol": float(tol)}


def _cube(l, h):
    ax = np.arange(-l, l + 0.5 * h, h)
    x = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
    return ax, x


def kernel_suite():
    out = []
    h = 0.25
    _, x = _cube(12.0, h)
    gam = kernels.heat_kernel(x, 1.0)
    out.append(_check("heat_normalisation", abs(np.sum(gam) * h**3 - 1.0), 1e-6))

    # Gamma_s * Gamma_t = Gamma_{s+t}, discrete convolution on a periodic box
    g = Grid3(64, 12.0)
    pts = g.points()
    a = kernels.heat_kernel(pts, 0.5)
    b = kernels.heat_kernel(pts, 0.5)
    shift = np.fft.ifftshift
    conv = np.real(np.fft.ifftn(np.fft.fftn(shift(a)) * np.fft.fftn(shift(b)))) * g.cell_volume
    conv = np.fft.fftshift(conv)
    ref = kernels.heat_kernel(pts, 1.0)
    inner = g.radius() <= 6.0
    out.append(_check("heat_semigroup", np.max(np.abs(conv - ref)[inner]) / np.max(ref), 1e-6))

    rng = np.random.default_rng(1)
    t = np.geomspace(0.05, 20.0, 12)
    xs = rng.normal(size=(12, 40, 3)) * np.sqrt(t)[:, None, None] * 2.5
    tt = np.broadcast_to(t[:, None], xs.shape[:2])
    core = np.linalg.norm(xs, axis=-1) / np.sqrt(tt) <= 8.0
    s = kernels.oseen_tensor(xs[core], tt[core])
    tr = np.trace(s, axis1=-2, axis2=-1)
    two_gamma = 2.0 * kernels.heat_kernel(xs[core], tt[core])
    out.append(_check("oseen_trace", np.max(np.abs(tr - two_gamma) / two_gamma), 1e-10))

    d = 1e-3
    xs = rng.normal(size=(60, 3)) * 1.5
    tv = np.full(60, 0.7)
    div = np.zeros((60, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = d
        st = [kernels.oseen_tensor(xs + c * e, tv)[:, i, :] for c in (2, 1, -1, -2)]
        div += (-st[0] + 8 * st[1] - 8 * st[2] + st[3]) / (12 * d)
    out.append(_check("oseen_divergence_free", np.max(np.abs(div)), 1e-6))
    return out


def envelope_suite(betas=(0.25, 0.5, 1.0), max_k=2, max_l=1):
    """Weighted sups of kernel derivatives over the log-spaced cloud (finite, slope <= 0.05)."""
    x, t = kernels.sample_cloud()
    out = []
    ks = [(0, 0, 0), (1, 0, 0), (0, 1, 1), (2, 0, 0), (1, 1, 0)]
    for k in ks:
        if sum(k) > max_k:
            continue
        for l in range(max_l + 1):
            fams = [("heat", 0.0), ("oseen", 0.0)] + [("fractional_oseen", b) for b in betas]
            for fam, beta in fams:
                vals = kernels.kernel_derivative(x, t, fam, k=k, l=l, beta=beta)
                env = kernels.EstimateEnvelope.for_kernel(sum(k), l, beta if fam == "fractional_oseen" else 0.0)
                rep = kernels.envelope_check((x, t, vals.reshape(len(x), -1)), env,
                                             f"{fam}:k={''.join(map(str, k))}:l={l}:beta={beta}")
                out.append({"name": rep.estimate_id, "passed": (not rep.violation) and np.isfinite(rep.sup_constant),
                            "value": rep.slope, "tol": 0.05, "sup_constant": rep.sup_constant})
    return out


def spectral_suite(n=64, l=8.0, seed=0):
    g = Grid3(n, l)
    rng = np.random.default_rng(seed)
    v = VectorField(g, rng.normal(size=(3,) + g.shape))
    pv = spectral.leray_project(v)
    ppv = spectral.leray_project(pv)
    out = [_check("leray_idempotent", np.max(np.abs(ppv.data - pv.data)) / pv.sup(), 1e-10)]
    divp = spectral.div(pv)
    out.append(_check("leray_divergence_free", divp.sup() / pv.sup(), 1e-10))
    q = field_from_array(g, rng.normal(size=g.shape))
    gq = spectral.grad(q)
    out.append(_check("leray_annihilates_gradients", spectral.leray_project(gq).sup() / gq.sup(), 1e-10))
    m = field_from_array(g, rng.normal(size=(9,) + g.shape))
    p = spectral.poisson_invert_divdiv(m)
    wn = spectral.wavenumbers(g)
    lhs = wn.kappa2 * spectral.rfft_array(p.data[0])
    rhs = spectral.divdiv_modes(spectral.rfft_array(m.data), wn)
    rhs = np.where(wn.kappa2 > 0, rhs, 0.0)
    out.append(_check("poisson_residual", np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)), 1e-10))
    f = field_from_array(g, rng.normal(size=g.shape))
    f = f - float(np.mean(f.data))
    for beta in (0.25, 0.5, 0.9):
        back = spectral.fractional_laplacian(spectral.fractional_laplacian(f, beta), -beta)
        out.append(_check(f"fractional_composition_beta_{beta}", np.max(np.abs(back.data - f.data)) / f.sup(), 1e-10))
    return out


def profile_suite(kappa_u, kappa_b, grid, quad, r_core, r_cut):
    out = []
    for name, kappa in (("u", kappa_u), ("b", kappa_b)):
        out.append(_check(f"kappa_{name}_divergence_free", check_divergence_free(kappa), 1e-8))
        u0 = caloric_profile(kappa, grid, quad)
        tap = taper(u0, r_core, r_cut)
        inside = grid.radius() <= r_core
        div = np.max(np.abs(spectral.div(tap).data[0][inside]), initial=0.0)
        out.append(_check(f"U0_{name}_spectral_divergence", div / tap.sup() if tap.sup() else 0.0, 1e-8))
        res = linear_profile_residual(u0, r_core, r_cut)
        out.append(_check(f"U0_{name}_linear_residual", res, 1e-3))
    return out


__all__ = ["envelope_suite", "kernel_suite", "profile_suite", "spectral_suite"]
