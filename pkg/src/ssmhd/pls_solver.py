"""Perturbed Leray system at t = 1: Duhamel operator, Picard iteration, pressure, diagnostics.

With U = U0 + V and B = B0 + G the correction solves

    -Delta V - V/2 - x.grad V / 2 + div F + grad P = 0,   F = U (x) U - B (x) B,
    -Delta G - G/2 - x.grad G / 2 - div H = 0,            H = U (x) B - B (x) U,

with (div M)_i = d_j M_ij.  In mild form V = -W_P[F] and G = W[H], where

    W[M](x) = int_0^1 e^{(1-s) Delta} (P) div [ s^{-1} M(./sqrt(s)) ](x) ds.

Below ``s_split`` the rescaled forcing is narrower than the grid, so that
part of the integral is folded back through the exact self-similarity
identity  W = int_{s1}^1 (...) ds + e^{(1 - s1) Delta} [ s1^{-1/2} W(./sqrt(s1)) ],
which is solved by fixed-point iteration (the dilation stretches outward, so
it stays resolved).
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import roots_legendre

from ._rescale import rescale
from ._validation import check_same_grid
from .errors import AccuracyError, DivergenceError, UsageError
from .fields import ScalarField, TensorField, VectorField, check_taper_radii, taper
from . import spectral
from .spectral import irfft_array, rfft_array, wavenumbers


@dataclass(frozen=True)
class SolveParams:
    """Picard and quadrature settings.

    ``r_core``/``r_cut`` default to 0.8 L and 0.9 L of the grid in use.
    ``s_gate``: if set, the first Duhamel evaluation is repeated with doubled
    s-nodes and an AccuracyError is raised when the sup change exceeds it.
    """

    theta: float = 1.0
    tol: float = 1e-8
    max_iters: int = 50
    s_nodes: int = 32
    dealias: bool = True
    s_split: float = 0.25
    recursion_tol: float = 1e-12
    r_core: float = None
    r_cut: float = None
    s_gate: float = None

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise UsageError(f"theta must lie in (0, 1], got {self.theta}")
        if not self.tol > 0:
            raise UsageError(f"tol must be positive, got {self.tol}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise UsageError(f"max_iters must be a positive integer, got {self.max_iters}")
        if int(self.s_nodes) != self.s_nodes or self.s_nodes < 8:
            raise UsageError(f"s_nodes must be an integer >= 8, got {self.s_nodes}")
        if not 0.0 < self.s_split < 1.0:
            raise UsageError(f"s_split must lie in (0, 1), got {self.s_split}")

    def radii(self, grid):
        r_core = 0.8 * grid.l if self.r_core is None else float(self.r_core)
        r_cut = 0.9 * grid.l if self.r_cut is None else float(self.r_cut)
        check_taper_radii(grid, r_core, r_cut)
        return r_core, r_cut


@dataclass
class NonlinearTensors:
    f_tensor: TensorField
    h_tensor: TensorField


@dataclass
class ProfileSolution:
    initial: object
    v: VectorField
    g: VectorField
    p: ScalarField
    iterations: int
    converged: bool
    history: list
    params: SolveParams = field(default_factory=SolveParams)

    @property
    def grid(self):
        return self.v.grid

    @property
    def u(self):
        return self.initial.u0 + self.v

    @property
    def b(self):
        return self.initial.b0 + self.g


def _symmetric_terms():
    return [(3 * i + j, [(i, j, 1.0)] + ([(j, i, 1.0)] if i != j else []))
            for i in range(3) for j in range(i, 3)]


def _antisymmetric_terms():
    return [(3 * i + j, [(i, j, 1.0), (j, i, -1.0)]) for i in range(3) for j in range(i + 1, 3)]


class _Products:
    """Lazy components of F and H; avoids holding nine full-grid products at once."""

    def __init__(self, v, g, initial):
        check_same_grid(v, g, initial.u0, initial.b0)
        self.grid = v.grid
        self.u0, self.b0, self.v, self.g = initial.u0.data, initial.b0.data, v.data, g.data
        self.magnetic = bool(np.any(self.b0)) or bool(np.any(self.g))

    def u(self, i):
        return self.u0[i] + self.v[i]

    def b(self, i):
        return self.b0[i] + self.g[i]

    def f(self, c):
        i, j = divmod(c, 3)
        return self.u(i) * self.u(j) - self.b(i) * self.b(j)

    def h(self, c):
        i, j = divmod(c, 3)
        return self.u(i) * self.b(j) - self.b(i) * self.u(j)

    def f_components(self):
        return [(c, terms, lambda c=c: self.f(c)) for c, terms in _symmetric_terms()]

    def h_components(self):
        if not self.magnetic:
            return []
        return [(c, terms, lambda c=c: self.h(c)) for c, terms in _antisymmetric_terms()]


def nonlinear_tensors(v, g, initial):
    """F = U (x) U - B (x) B and H = U (x) B - B (x) U with U = U0 + V, B = B0 + G."""
    pr = _Products(v, g, initial)
    n = v.grid.n
    f = np.empty((9, n, n, n))
    h = np.zeros((9, n, n, n))
    for c, _ in _symmetric_terms():
        i, j = divmod(c, 3)
        f[c] = pr.f(c)
        f[3 * j + i] = f[c]
    if pr.magnetic:
        for c, _ in _antisymmetric_terms():
            i, j = divmod(c, 3)
            h[c] = pr.h(c)
            h[3 * j + i] = -h[c]
    return NonlinearTensors(TensorField(v.grid, f, copy=False), TensorField(v.grid, h, copy=False))


def s_quadrature(n, a=0.0):
    """Gauss-Legendre in u under s = a + (1 - a) u^2 (3 - 2u); clusters nodes at both ends."""
    x, w = roots_legendre(n)
    u = 0.5 * (x + 1.0)
    s = a + (1.0 - a) * u * u * (3.0 - 2.0 * u)
    return s, 0.5 * w * 6.0 * u * (1.0 - u) * (1.0 - a)


def _tensor_components(m):
    """Unique components of m as (index, div contributions, getter)."""
    d = m.data
    if m.is_symmetric():
        terms = _symmetric_terms()
    elif m.is_antisymmetric(tol=0.0):
        terms = [(c, t) for c, t in _antisymmetric_terms() if np.any(d[c])]
    else:
        terms = [(3 * i + j, [(i, j, 1.0)]) for i in range(3) for j in range(3)]
    return [(c, t, lambda c=c: d[c]) for c, t in terms]


def _heat_div_accumulate(acc, comp_hat, terms, factor, wn):
    comp_hat *= factor
    for row, col, sign in terms:
        acc[row] += (sign * 1j) * wn.kappa[col] * comp_hat


def duhamel_apply(t_field, project=True, s_nodes=32, *, dealias=True, rescale_forcing=True,
                  s_split=0.25, r_core=None, r_cut=None, recursion_tol=1e-12, w0=None,
                  max_recursion=200):
    """W[M] at t = 1 as defined in the module docstring.

    With ``rescale_forcing=False`` the forcing is treated as scale invariant
    (M_s = M), which gives the per-mode closed form (1 - e^{-|k|^2}) / |k|^2.
    ``w0`` warm-starts the small-s fixed point.
    """
    if not isinstance(t_field, TensorField):
        raise UsageError("duhamel_apply expects a TensorField")
    comps = _tensor_components(t_field)
    antisym = t_field.is_antisymmetric(tol=0.0)
    return _duhamel(comps, t_field.grid, project, s_nodes, antisym, dealias=dealias,
                    rescale_forcing=rescale_forcing, s_split=s_split, r_core=r_core, r_cut=r_cut,
                    recursion_tol=recursion_tol, w0=w0, max_recursion=max_recursion)


def _duhamel(comps, grid, project, s_nodes, solenoidal_tail, *, dealias=True, rescale_forcing=True,
             s_split=0.25, r_core=None, r_cut=None, recursion_tol=1e-12, w0=None, max_recursion=200,
             sign=1.0):
    if int(s_nodes) != s_nodes or s_nodes < 8:
        raise UsageError(f"s_nodes must be an integer >= 8, got {s_nodes}")
    wn = wavenumbers(grid)
    half = (grid.n, grid.n, grid.n // 2 + 1)
    mask = wn.dealias if dealias else 1.0
    if not comps:
        return VectorField(grid, np.zeros((3,) + grid.shape))
    acc = np.zeros((3,) + half, dtype=complex)

    if not rescale_forcing:
        s, w = s_quadrature(s_nodes)
        factor = sum(wj * np.exp(-(1.0 - sj) * wn.k2) for sj, wj in zip(s, w)) * mask
        for _, terms, get in comps:
            _heat_div_accumulate(acc, rfft_array(get()), terms, factor, wn)
        acc *= sign
        if project:
            spectral.leray_modes_inplace(acc, wn)
        return VectorField(grid, irfft_array(acc, grid.n), copy=False)

    if r_core is None or r_cut is None:
        r_core, r_cut = 0.8 * grid.l, 0.9 * grid.l
    check_taper_radii(grid, r_core, r_cut)
    s1 = float(s_split)
    s, w = s_quadrature(s_nodes, s1)
    buf = np.empty(grid.shape)
    for c, terms, get in comps:
        src = np.ascontiguousarray(get())
        if not np.any(src):
            continue
        for sj, wj in zip(s, w):
            rescale(src, grid, sj**-0.5, 1.0 / sj, r_core, 2.0, r_core, r_cut, out=buf)
            factor = np.exp(-(1.0 - sj) * wn.k2)
            factor *= wj * mask
            _heat_div_accumulate(acc, rfft_array(buf), terms, factor, wn)
        del src
    acc *= sign
    if project:
        spectral.leray_modes_inplace(acc, wn)

    # small-s part: W = A + e^{(1 - s1) Delta} D W, solved by iteration
    heat = np.exp(-(1.0 - s1) * wn.k2)
    if w0 is None:
        cur = np.stack([irfft_array(acc[i], grid.n) for i in range(3)])
    else:
        cur = np.array(w0.data)
    dw = np.empty((3,) + half, dtype=complex)
    for _ in range(max_recursion):
        for i in range(3):
            rescale(cur[i], grid, s1**-0.5, s1**-0.5, r_core, 3.0, r_core, r_cut, out=buf)
            dw[i] = rfft_array(buf)
            dw[i] *= heat
        if project or solenoidal_tail:
            # the exact tail is solenoidal here; projecting removes interpolation noise
            spectral.leray_modes_inplace(dw, wn)
        dw += acc
        # dw already holds every component of the update, so cur can be overwritten in place
        delta = 0.0
        for i in range(3):
            nxt = irfft_array(dw[i], grid.n)
            np.subtract(nxt, cur[i], out=buf)
            delta = max(delta, float(np.max(np.abs(buf))))
            cur[i] = nxt
            del nxt
        if delta <= recursion_tol * max(float(np.max(np.abs(cur))), 1e-300):
            break
    else:
        raise AccuracyError(f"small-s Duhamel recursion did not settle (last change {delta:.3e})")
    del dw
    return VectorField(grid, cur, copy=False)


def _sup_change(a, b):
    return max(float(np.max(np.abs(a[i] - b[i]))) for i in range(a.shape[0]))


def _duhamel_kwargs(params, grid):
    r_core, r_cut = params.radii(grid)
    return dict(dealias=params.dealias, s_split=params.s_split, r_core=r_core, r_cut=r_cut,
                recursion_tol=params.recursion_tol)


def quadrature_gate(t_field, project, params):
    """Sup change of W[M] when the s-nodes are doubled."""
    kw = _duhamel_kwargs(params, t_field.grid)
    a = duhamel_apply(t_field, project, params.s_nodes, **kw)
    b = duhamel_apply(t_field, project, 2 * params.s_nodes, **kw)
    return _sup_change(a.data, b.data)


def picard_step(v, g, initial, params, warm=None):
    """One damped Picard step; returns (v_next, g_next, (v_update, g_update))."""
    grid = v.grid
    kw = _duhamel_kwargs(params, grid)
    pr = _Products(v, g, initial)
    wv, wg = (None, None) if warm is None else warm
    # V = -W[F], computed as W with the forcing sign flipped so the warm start is V itself
    v_up = _duhamel(pr.f_components(), grid, True, params.s_nodes, False, w0=wv, sign=-1.0, **kw)
    h_comps = pr.h_components()
    if h_comps:
        g_up = _duhamel(h_comps, grid, False, params.s_nodes, True, w0=wg, **kw)
    else:
        g_up = VectorField(grid, np.zeros((3,) + grid.shape))
    th = params.theta
    if th == 1.0:
        return v_up, g_up, (v_up, g_up)
    v_next = VectorField(grid, (1.0 - th) * v.data + th * v_up.data)
    g_next = VectorField(grid, (1.0 - th) * g.data + th * g_up.data)
    return v_next, g_next, (v_up, g_up)


def solve_fixed_point(initial, params=None, v0=None, g0=None, callback=None):
    """Iterate picard_step until the sup change of (V, G) drops below ``params.tol``."""
    params = params or SolveParams()
    grid = initial.u0.grid
    params.radii(grid)
    zero = np.zeros((3,) + grid.shape)
    v = v0 if v0 is not None else VectorField(grid, zero)
    g = g0 if g0 is not None else VectorField(grid, zero)
    if params.s_gate is not None:
        pr = _Products(v, g, initial)
        kw = _duhamel_kwargs(params, grid)
        a = _duhamel(pr.f_components(), grid, True, params.s_nodes, False, **kw)
        b = _duhamel(pr.f_components(), grid, True, 2 * params.s_nodes, False, **kw)
        change = _sup_change(a.data, b.data)
        if change > params.s_gate:
            raise AccuracyError(f"Duhamel s-quadrature gate failed: doubling nodes changes W by {change:.3e}")
    history = []
    warm = None
    converged = False
    for it in range(1, params.max_iters + 1):
        v_new, g_new, warm = picard_step(v, g, initial, params, warm)
        delta = max(_sup_change(v_new.data, v.data), _sup_change(g_new.data, g.data))
        history.append(delta)
        v, g = v_new, g_new
        if callback is not None:
            callback(it, delta)
        if not np.isfinite(delta):
            raise DivergenceError("Picard iteration produced non-finite values", history)
        if delta < params.tol:
            converged = True
            break
        if len(history) > 5 and history[-1] > 10.0 * history[-6]:
            raise DivergenceError(
                f"Picard iteration diverging: delta grew from {history[-6]:.3e} to {history[-1]:.3e}", history)
    p = pressure_from_profiles(v, g, initial, params)
    return ProfileSolution(initial, v, g, p, len(history), converged, history, params)


def _tapered_spectra(comps, grid, r_core, r_cut):
    """Half spectra of the tapered components, one at a time."""
    from .fields import bump
    w = bump(grid.radius(), r_core, r_cut)
    for c, terms, get in comps:
        yield c, terms, rfft_array(get() * w)


def pressure_from_profiles(v, g, initial, params=None):
    """Zero-mean P with -Delta P = d_i d_j F_ij, F tapered to the solver window."""
    params = params or SolveParams()
    grid = v.grid
    r_core, r_cut = params.radii(grid)
    wn = wavenumbers(grid)
    src = np.zeros((grid.n, grid.n, grid.n // 2 + 1), dtype=complex)
    for _, terms, fh in _tapered_spectra(_Products(v, g, initial).f_components(), grid, r_core, r_cut):
        for row, col, sign in terms:
            src -= sign * wn.kappa[row] * wn.kappa[col] * fh
    with np.errstate(divide="ignore", invalid="ignore"):
        phat = np.where(wn.kappa2 > 0, src / np.where(wn.kappa2 > 0, wn.kappa2, 1.0), 0.0)
    return ScalarField(grid, irfft_array(phat, grid.n), copy=False)


def _div_products(comps, grid, r_core, r_cut):
    wn = wavenumbers(grid)
    acc = np.zeros((3, grid.n, grid.n, grid.n // 2 + 1), dtype=complex)
    for _, terms, fh in _tapered_spectra(comps, grid, r_core, r_cut):
        for row, col, sign in terms:
            acc[row] += (sign * 1j) * wn.kappa[col] * fh
    return acc


def _drift_component(a, grid, wn):
    """-Delta a - a/2 - x.grad a / 2 for one (already tapered) component."""
    n = grid.n
    ahat = rfft_array(a)
    out = irfft_array(wn.kappa2 * ahat, n)
    out -= 0.5 * a
    x = grid.coords()
    for j in range(3):
        out -= 0.5 * x[j] * irfft_array(1j * wn.kappa[j] * ahat, n)
    return out


def _norms(sq, inside, grid):
    mag2 = sq[inside]
    return {"sup": float(np.sqrt(np.max(mag2, initial=0.0))),
            "l2": float(np.sqrt(np.sum(mag2) * grid.cell_volume))}


def pls_residual(sol, r_core=None, r_cut=None):
    """Strong-form residuals of both profile equations on |x| <= r_core.

    ``v_projected`` is the pressure-free form with P div F in place of div F + grad P.
    Components are processed one at a time to bound memory.
    """
    from .fields import bump

    grid = sol.grid
    if r_core is None or r_cut is None:
        r_core, r_cut = sol.params.radii(grid)
    n = grid.n
    w = bump(grid.radius(), r_core, r_cut)
    pr = _Products(sol.v, sol.g, sol.initial)
    wn = wavenumbers(grid)
    phat = rfft_array(sol.p.data[0])
    div_f_hat = _div_products(pr.f_components(), grid, r_core, r_cut)
    sq_v = np.zeros(grid.shape)
    sq_vp = np.zeros(grid.shape)
    drift = []
    for i in range(3):
        lv = _drift_component(sol.v.data[i] * w, grid, wn)
        r = lv + irfft_array(div_f_hat[i], n) + irfft_array(1j * wn.kappa[i] * phat, n)
        sq_v += r * r
        drift.append(lv)
    spectral.leray_modes_inplace(div_f_hat, wn)
    for i in range(3):
        r = drift[i] + irfft_array(div_f_hat[i], n)
        sq_vp += r * r
    del drift, div_f_hat
    sq_g = np.zeros(grid.shape)
    div_h_hat = _div_products(pr.h_components(), grid, r_core, r_cut)
    for i in range(3):
        r = _drift_component(sol.g.data[i] * w, grid, wn) - irfft_array(div_h_hat[i], n)
        sq_g += r * r
    inside = grid.radius() <= r_core
    return {
        "v": _norms(sq_v, inside, grid),
        "v_projected": _norms(sq_vp, inside, grid),
        "g": _norms(sq_g, inside, grid),
        "r_core": r_core,
    }


def energy_identity(sol, r_core=None, r_cut=None):
    """Both sides of the energy identity for (V, G) tested against themselves.

    lhs = |(V, G)|_2^2 / 4 + |(grad V, grad G)|_2^2
    rhs = int (B0.grad B0 - U0.grad U0).V + (F2 - F1).V + (B0.grad U0 - U0.grad B0).G + (F4 - F3).G

    With U = U0 + V and B = B0 + G the advective terms regroup exactly into
    rhs = int (B.grad B - U.grad U).V + (B.grad U - U.grad B).G, which is
    evaluated one component at a time.  All fields carry the solver taper.
    """
    from .fields import bump

    grid = sol.grid
    if r_core is None or r_cut is None:
        r_core, r_cut = sol.params.radii(grid)
    wn = wavenumbers(grid)
    w = bump(grid.radius(), r_core, r_cut)
    V, G = sol.v.data, sol.g.data
    U = np.stack([(sol.initial.u0.data[i] + V[i]) * w for i in range(3)])
    B = np.stack([(sol.initial.b0.data[i] + G[i]) * w for i in range(3)])
    lhs = rhs = 0.0
    for i in range(3):
        vi, gi = V[i] * w, G[i] * w
        lhs += 0.25 * (np.sum(vi * vi) + np.sum(gi * gi))
        for d in spectral.scalar_gradient(vi, wn):
            lhs += np.sum(d * d)
        for d in spectral.scalar_gradient(gi, wn):
            lhs += np.sum(d * d)
        du = spectral.scalar_gradient(U[i], wn)
        db = spectral.scalar_gradient(B[i], wn)
        # (B.grad B - U.grad U)_i V_i + (B.grad U - U.grad B)_i G_i
        for j in range(3):
            rhs += np.sum((B[j] * db[j] - U[j] * du[j]) * vi + (B[j] * du[j] - U[j] * db[j]) * gi)
    vol = grid.cell_volume
    lhs, rhs = float(lhs * vol), float(rhs * vol)
    scale = max(abs(lhs), abs(rhs))
    gap = abs(lhs - rhs) / scale if scale > 0 else 0.0
    return lhs, rhs, float(gap)


def with_params(sol, **kw):
    return replace(sol, params=replace(sol.params, **kw))
