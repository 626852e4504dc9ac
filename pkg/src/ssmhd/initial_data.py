"""Homogeneous degree -1 initial data and their caloric profiles U0 = e^Delta u0.

For f(x) = kappa(x/|x|) / |x| the heat extension at t = 1 factorises by
spherical-harmonic degree:

    (Gamma_1 * f)(x) = sum_l K_l(|x|) kappa_l(x/|x|),
    K_l(r) = (4 pi)^{-1/2} int_0^inf exp(-(r^2 + rho^2)/4) i_l(r rho / 2) rho d rho,

where kappa_l is the degree-l part of kappa and i_l the modified spherical
Bessel function.  Sphere quadrature extracts kappa_l, Gauss-Legendre in rho
evaluates K_l, and the grid is filled from a table indexed by the integer
|node index|^2.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ive, roots_legendre, sph_harm_y

from .errors import AccuracyError, UsageError
from .fields import VectorField, taper
from . import spectral

# exp(-d^2/4) < 1e-14 beyond this distance from rho = r
_GAUSS_REACH = 12.0


@dataclass(frozen=True)
class QuadratureSettings:
    """sphere_order: Gauss nodes in cos(theta) (exact through degree 2*order - 1);
    radial_nodes: Gauss-Legendre nodes per radial piece; l_max: harmonic cutoff
    for non-polynomial profiles."""

    sphere_order: int = 15
    radial_nodes: int = 64
    l_max: int = 8

    def __post_init__(self):
        if self.sphere_order < 1 or self.radial_nodes < 1 or self.l_max < 0:
            raise UsageError("quadrature orders must be positive")

    def doubled(self):
        return QuadratureSettings(2 * self.sphere_order, 2 * self.radial_nodes, self.l_max)


def sphere_rule(order):
    """Product rule on S^2: Gauss-Legendre in cos(theta) times 2*order uniform longitudes."""
    x, w = roots_legendre(order)
    nphi = 2 * order
    phi = 2 * np.pi * np.arange(nphi) / nphi
    theta = np.arccos(x)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    wt = np.repeat(w[:, None], nphi, axis=1) * (2 * np.pi / nphi)
    omega = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
    return omega.reshape(-1, 3), wt.ravel()


def to_angles(omega):
    omega = np.asarray(omega, dtype=float)
    theta = np.arccos(np.clip(omega[..., 2], -1.0, 1.0))
    phi = np.arctan2(omega[..., 1], omega[..., 0])
    return theta, phi


def real_harmonics(l, omega):
    """Orthonormal real spherical harmonics of degree l, shape (2l + 1, ...)."""
    theta, phi = to_angles(omega)
    out = [sph_harm_y(l, 0, theta, phi).real]
    for m in range(1, l + 1):
        y = sph_harm_y(l, m, theta, phi)
        out.append(np.sqrt(2.0) * y.real)
        out.append(np.sqrt(2.0) * y.imag)
    return np.stack(out)


class AngularProfile:
    """Angular vector field kappa on S^2 defining f(x) = kappa(x/|x|) / |x|.

    Subclasses provide :meth:`evaluate` and :meth:`degree_part`.
    ``data_class`` records the user-declared regularity of kappa
    (``"C0,1"``, ``"C1,alpha"`` or ``"C1,1"``); it is reported, never checked.
    """

    degrees = ()
    data_class = "C0,1"
    amplitude = 1.0
    lipschitz_bound = None

    def evaluate(self, omega):
        raise NotImplementedError

    def degree_part(self, l, omega):
        raise NotImplementedError

    def __call__(self, x):
        """The homogeneous field f(x) = kappa(x/|x|)/|x| (undefined at 0)."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return self.evaluate(x / r) / r

    def describe(self):
        return {"kind": type(self).__name__, "data_class": self.data_class}


class LinearProfile(AngularProfile):
    """kappa(omega) = M omega.  f is divergence-free exactly when M is antisymmetric."""

    degrees = (1,)
    data_class = "C1,1"

    def __init__(self, matrix, amplitude=1.0, name="linear"):
        self.matrix = np.asarray(matrix, dtype=float).reshape(3, 3)
        self.amplitude = float(amplitude)
        self.name = name
        self.lipschitz_bound = float(np.linalg.norm(self.matrix, 2))

    def evaluate(self, omega):
        return np.asarray(omega, dtype=float) @ self.matrix.T

    def degree_part(self, l, omega):
        if l != 1:
            return np.zeros(np.shape(omega))
        return self.evaluate(omega)

    def __add__(self, other):
        return LinearProfile(self.matrix + other.matrix, 1.0, name="linear_combination")

    def __rmul__(self, c):
        return LinearProfile(c * self.matrix, 1.0, name=self.name)

    def __neg__(self):
        return LinearProfile(-self.matrix, -self.amplitude, name=self.name)

    def describe(self):
        d = super().describe()
        d.update(name=self.name, matrix=self.matrix.tolist())
        return d


class HarmonicProfile(AngularProfile):
    """kappa given by real spherical-harmonic coefficients, coeffs[l] of shape (3, 2l + 1)."""

    def __init__(self, coeffs, amplitude=1.0, data_class="C0,1", lipschitz_bound=None):
        self.coeffs = {int(l): np.asarray(c, dtype=float) for l, c in coeffs.items()}
        self.degrees = tuple(sorted(l for l, c in self.coeffs.items() if np.any(c != 0)))
        self.amplitude = float(amplitude)
        self.data_class = data_class
        self.lipschitz_bound = lipschitz_bound

    @classmethod
    def project(cls, fn, l_max, sphere_order=None, **kw):
        """Project a callable kappa(omega) -> (N, 3) onto degrees <= l_max."""
        order = sphere_order or l_max + 2
        omega, w = sphere_rule(order)
        vals = np.asarray(fn(omega), dtype=float)
        coeffs = {}
        for l in range(l_max + 1):
            y = real_harmonics(l, omega)
            coeffs[l] = np.einsum("np,mp->nm", (vals * w[:, None]).T, y)
        # degrees carrying only rounding noise are dropped
        top = max(np.max(np.abs(c)) for c in coeffs.values())
        coeffs = {l: c for l, c in coeffs.items() if np.max(np.abs(c)) > 1e-13 * top}
        return cls(coeffs, **kw)

    @classmethod
    def fit(cls, omega, values, l_max, **kw):
        """Least-squares fit of tabulated kappa values at scattered directions."""
        omega = np.asarray(omega, dtype=float)
        blocks = [real_harmonics(l, omega) for l in range(l_max + 1)]
        design = np.concatenate(blocks, axis=0).T
        sol, *_ = np.linalg.lstsq(design, np.asarray(values, dtype=float), rcond=None)
        coeffs, start = {}, 0
        for l, b in enumerate(blocks):
            coeffs[l] = sol[start:start + b.shape[0]].T
            start += b.shape[0]
        return cls(coeffs, **kw)

    def degree_part(self, l, omega):
        c = self.coeffs.get(l)
        if c is None:
            return np.zeros(np.shape(omega))
        y = real_harmonics(l, omega)
        return np.einsum("cm,m...->...c", c, y)

    def evaluate(self, omega):
        out = np.zeros(np.shape(omega))
        for l in self.degrees:
            out = out + self.degree_part(l, omega)
        return out


def _skew(axis):
    a = np.asarray(axis, dtype=float)
    return np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])


def preset_kappa(name, amplitude=1.0, axis=None, terms=None):
    """Preset angular profiles.

    ``rotational``: kappa = A e3 x omega, so f = A (-x2, x1, 0) / |x|^2.
    ``rotated_rotational``: the same swirl about a unit ``axis``.
    ``linear_combination``: sum of ``terms``, a list of (coefficient, profile)
    pairs or of preset specs ``{"name": ..., "amplitude": ..., "axis": ...}``.
    """
    if name == "rotational":
        return LinearProfile(amplitude * _skew((0.0, 0.0, 1.0)), amplitude, name)
    if name == "rotated_rotational":
        if axis is None:
            raise UsageError("rotated_rotational needs an axis")
        a = np.asarray(axis, dtype=float)
        if a.shape != (3,) or not np.linalg.norm(a) > 0:
            raise UsageError(f"axis must be a non-zero 3-vector, got {axis!r}")
        return LinearProfile(amplitude * _skew(a / np.linalg.norm(a)), amplitude, name)
    if name == "linear_combination":
        if not terms:
            raise UsageError("linear_combination needs at least one term")
        total = np.zeros((3, 3))
        for term in terms:
            if isinstance(term, dict):
                prof = preset_kappa(term["name"], term.get("amplitude", 1.0), term.get("axis"))
                coef = term.get("coefficient", 1.0)
            else:
                coef, prof = term
            total = total + coef * prof.matrix
        return LinearProfile(amplitude * total, amplitude, name)
    if name == "zero":
        return LinearProfile(np.zeros((3, 3)), 0.0, name)
    raise UsageError(f"unknown preset {name!r}")


def load_tabulated_kappa(path, l_max=8, data_class="C0,1"):
    """Read rows ``theta phi kappa1 kappa2 kappa3`` (radians, '#' comments) and fit harmonics."""
    rows = np.loadtxt(Path(path), comments="#", ndmin=2)
    if rows.shape[1] != 5:
        raise UsageError(f"tabulated kappa needs 5 columns, found {rows.shape[1]}")
    theta, phi = rows[:, 0], rows[:, 1]
    omega = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
    if omega.shape[0] < (l_max + 1) ** 2:
        raise UsageError(f"{omega.shape[0]} samples cannot determine harmonics up to degree {l_max}")
    return HarmonicProfile.fit(omega, rows[:, 2:], l_max, data_class=data_class)


def check_divergence_free(kappa, n_points=200, seed=0):
    """Sup of |div f| over a cloud with |x| in [0.5, 2], by fourth-order central differences.

    The step is 1e-4 |x| per point.
    """
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n_points, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    x = d * rng.uniform(0.5, 2.0, size=(n_points, 1))
    step = 1e-4 * np.linalg.norm(x, axis=1)
    total = np.zeros(n_points)
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        s = step[:, None] * e
        fp1, fm1 = kappa(x + s)[:, i], kappa(x - s)[:, i]
        fp2, fm2 = kappa(x + 2 * s)[:, i], kappa(x - 2 * s)[:, i]
        total += (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * step)
    return float(np.max(np.abs(total)))


def radial_kernel(l, r, nodes=64):
    """K_l(r): the caloric profile of Y(omega)/|x| is Y(x/|x|) K_l(|x|)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    u, w = roots_legendre(nodes)
    u = 0.5 * (u + 1.0)
    w = 0.5 * w
    out = np.zeros_like(r)
    pos = r > 0
    rp = r[pos][:, None]
    total = 0.0
    lo = np.maximum(rp - _GAUSS_REACH, 0.0)
    for a, b in ((lo, rp), (rp, rp + _GAUSS_REACH)):
        rho = a + (b - a) * u
        z = 0.5 * rp * rho
        # exp(-(r^2 + rho^2)/4) i_l(r rho / 2) without overflow
        val = np.exp(-0.25 * (rp - rho) ** 2) * np.sqrt(np.pi / (2.0 * z)) * ive(l + 0.5, z) * rho
        total = total + np.sum(val * w, axis=1) * (b - a)[:, 0]
    out[pos] = total / np.sqrt(4.0 * np.pi)
    if l == 0:
        out[~pos] = 1.0 / np.sqrt(np.pi)
    return out


@dataclass
class CaloricProfile:
    """U0 = e^Delta f as an evaluable object; ``tables[l]`` caches K_l on integer |index|^2."""

    kappa: AngularProfile
    quad: QuadratureSettings = field(default_factory=QuadratureSettings)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return self._combine(x, r, lambda l: radial_kernel(l, r.ravel(), self.quad.radial_nodes).reshape(r.shape))

    def _combine(self, x, r, kernel):
        out = np.zeros(x.shape)
        if isinstance(self.kappa, LinearProfile):
            k1 = kernel(1)
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.where(r > 0, k1 / np.where(r > 0, r, 1.0), 0.0)
            return ratio[..., None] * (x @ self.kappa.matrix.T)
        with np.errstate(invalid="ignore", divide="ignore"):
            omega = np.where(r[..., None] > 0, x / np.where(r > 0, r, 1.0)[..., None], [0.0, 0.0, 1.0])
        for l in self.kappa.degrees:
            out = out + kernel(l)[..., None] * self.kappa.degree_part(l, omega)
        return out

    def on_grid(self, grid, scale=1.0):
        """U0(scale * x) at every node; K_l is tabulated on the integer values of |index|^2."""
        n = grid.n
        idx = np.arange(n) - n // 2
        q = idx[:, None, None] ** 2 + idx[None, :, None] ** 2 + idx[None, None, :] ** 2
        rtab = scale * grid.h * np.sqrt(np.arange(3 * (n // 2) ** 2 + 1))
        tables = {l: radial_kernel(l, rtab, self.quad.radial_nodes) for l in self.kappa.degrees}
        if isinstance(self.kappa, LinearProfile):
            # U0 = K_1(r)/r M x, assembled per component
            rs = scale * grid.radius()
            ratio = tables[1][q] if 1 in tables else np.zeros(grid.shape)
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.where(rs > 0, ratio / np.where(rs > 0, rs, 1.0), 0.0)
            xs = [scale * c for c in grid.coords()]
            m = self.kappa.matrix
            data = np.empty((3,) + grid.shape)
            for i in range(3):
                data[i] = ratio * (m[i, 0] * xs[0] + m[i, 1] * xs[1] + m[i, 2] * xs[2])
            return VectorField(grid, data, copy=False)
        x = scale * grid.points()
        r = scale * grid.radius()
        data = self._combine(x, r, lambda l: tables[l][q])
        return VectorField(grid, np.moveaxis(data, -1, 0))


def resolve_profile(kappa, quad):
    """Harmonic representation used for the convolution (callables are projected)."""
    if isinstance(kappa, (LinearProfile, HarmonicProfile)):
        return kappa
    if not callable(kappa):
        raise UsageError(f"kappa must be an AngularProfile or a callable, got {type(kappa).__name__}")
    return HarmonicProfile.project(kappa, quad.l_max, quad.sphere_order)


def caloric_profile(kappa, grid, quad=None, gate=1e-4, check_points=400):
    """Sample U0 = Gamma_1 * f on ``grid``.

    Raises AccuracyError when doubling the quadrature changes U0 by more
    than ``gate`` (sup over a random subset of nodes plus the axis nodes).
    """
    quad = quad or QuadratureSettings()
    prof = resolve_profile(kappa, quad)
    if gate is not None:
        rng = np.random.default_rng(0)
        pts = rng.uniform(-grid.l, grid.l, size=(check_points, 3))
        pts = np.concatenate([pts, np.outer(grid.axis[:: max(1, grid.n // 32)], [1.0, 0.0, 0.0])])
        coarse = CaloricProfile(prof, quad)(pts)
        fine_prof = prof
        if not isinstance(kappa, (LinearProfile, HarmonicProfile)):
            fine_prof = HarmonicProfile.project(kappa, quad.l_max, quad.doubled().sphere_order)
        fine = CaloricProfile(fine_prof, quad.doubled())(pts)
        change = float(np.max(np.abs(fine - coarse), initial=0.0))
        if change > gate:
            raise AccuracyError(f"caloric quadrature not converged: doubling changes U0 by {change:.3e}")
    return CaloricProfile(prof, quad).on_grid(grid)


def linear_profile_residual(u0, r_core, r_cut):
    """Sup over |x| <= r_core of |Delta U0 + U0/2 + x.grad U0 / 2| by spectral derivatives."""
    grid = u0.grid
    tapered = taper(u0, r_core, r_cut)
    wn = spectral.wavenumbers(grid)
    x = grid.coords()
    sq = np.zeros(grid.shape)
    for a in tapered.data:
        ahat = spectral.rfft_array(a)
        res = spectral.irfft_array(-wn.kappa2 * ahat, grid.n) + 0.5 * a
        for j in range(3):
            res += 0.5 * x[j] * spectral.irfft_array(1j * wn.kappa[j] * ahat, grid.n)
        sq += res * res
    inside = grid.radius() <= r_core
    return float(np.sqrt(np.max(sq[inside], initial=0.0)))


@dataclass
class InitialProfiles:
    """Caloric profiles (U0, B0) on a common grid plus the settings that produced them."""

    u0: VectorField
    b0: VectorField
    kappa_u: AngularProfile = None
    kappa_b: AngularProfile = None
    meta: dict = field(default_factory=dict)

    quad: QuadratureSettings = field(default_factory=QuadratureSettings)

    @property
    def grid(self):
        return self.u0.grid

    def caloric(self, which="u"):
        kappa = self.kappa_u if which == "u" else self.kappa_b
        if kappa is None:
            raise UsageError(f"no angular profile stored for {which!r}")
        return CaloricProfile(kappa, self.quad)


def build_initial_profiles(kappa_u, kappa_b, grid, quad=None):
    quad = quad or QuadratureSettings()
    u0 = caloric_profile(kappa_u, grid, quad)
    b0 = caloric_profile(kappa_b, grid, quad)
    meta = {
        "sphere_order": quad.sphere_order,
        "radial_nodes": quad.radial_nodes,
        "l_max": quad.l_max,
        "kappa_u": kappa_u.describe() if isinstance(kappa_u, AngularProfile) else "callable",
        "kappa_b": kappa_b.describe() if isinstance(kappa_b, AngularProfile) else "callable",
    }
    return InitialProfiles(u0, b0, resolve_profile(kappa_u, quad), resolve_profile(kappa_b, quad), meta, quad)
