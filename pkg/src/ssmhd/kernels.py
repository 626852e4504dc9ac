"""Closed-form heat and Oseen kernels in R^3 and their pointwise envelopes.

Every kernel here is radial, ``f(|x|^2)``, or built from second derivatives
of a radial potential.  Derivatives of any order are obtained from the
q-derivatives ``f^(m)(q)`` through the expansion

    d^alpha f(|x|^2) = sum_j prod_i alpha_i! / (j_i! (alpha_i - 2 j_i)!)
                       (2 x_i)^(alpha_i - 2 j_i) f^(|alpha| - |j|)(q)

which is exact for every smooth ``f``.  The radial profiles are all of
confluent hypergeometric type: the inverse Fourier transform of
``|xi|^mu exp(-t |xi|^2)`` is

    t^{-(3+mu)/2} Gamma(a) / (4 pi^2) 1F1(a; 3/2; -|x|^2 / 4t),  a = (3+mu)/2,

which gives the heat kernel (mu = 0), the Newtonian potential of the
Gaussian (mu = -2) and their fractional powers.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, gamma, gammaincc, hyp1f1, poch

from ._validation import check_points, check_time
from .errors import UnsupportedOrderError, UsageError

MAX_SPACE_ORDER = 4
MAX_TIME_ORDER = 2

# below this value of |x|/sqrt(t) the erf form of psi loses digits
_TAYLOR_SWITCH = 1e-3


def _q_derivatives(mu, q, t, nmax):
    """f^(m)(q) for m = 0..nmax, f the inverse FT of |xi|^mu exp(-t|xi|^2)."""
    a = 0.5 * (3.0 + mu)
    z = q / (4.0 * t)
    pref = t ** (-a) * gamma(a) / (4.0 * np.pi**2)
    out = []
    for m in range(nmax + 1):
        coef = pref * (-1.0 / (4.0 * t)) ** m * poch(a, m) / poch(1.5, m)
        if mu == 0:
            out.append(coef * np.exp(-z))
        else:
            out.append(coef * hyp1f1(a + m, 1.5 + m, -z))
    return out


def _multi_index(k):
    k = tuple(int(v) for v in k)
    if len(k) != 3 or any(v < 0 for v in k):
        raise UsageError(f"multi-index must be three non-negative integers, got {k}")
    return k


def _radial_partial(derivs, x, alpha):
    """Partial derivative d^alpha of f(|x|^2) given derivs[m] = f^(m)(|x|^2)."""
    order = sum(alpha)
    total = 0.0
    ranges = [range(a // 2 + 1) for a in alpha]
    for js in itertools.product(*ranges):
        term = derivs[order - sum(js)]
        coef = 1.0
        for i, (a, j) in enumerate(zip(alpha, js)):
            p = a - 2 * j
            coef *= math.factorial(a) / (math.factorial(j) * math.factorial(p)) * 2.0**p
            if p:
                term = term * x[..., i] ** p
        total = total + coef * term
    return total


def _laplacian_power(l):
    """Expand Delta^l as [(coefficient, beta)] with Delta^l = sum coef * d^(2 beta)."""
    terms = []
    for beta in itertools.product(range(l + 1), repeat=3):
        if sum(beta) == l:
            c = math.factorial(l) / math.prod(math.factorial(b) for b in beta)
            terms.append((c, beta))
    return terms


def _check_orders(k, l):
    k = _multi_index(k)
    if sum(k) > MAX_SPACE_ORDER or not 0 <= l <= MAX_TIME_ORDER:
        raise UnsupportedOrderError(
            f"supported orders are |k| <= {MAX_SPACE_ORDER}, l <= {MAX_TIME_ORDER}; got k={k}, l={l}"
        )
    return k, int(l)


def heat_kernel(x, t):
    """Gauss-Weierstrass kernel (4 pi t)^{-3/2} exp(-|x|^2 / 4t)."""
    x = check_points(x)
    t = check_time(t)
    q = np.sum(x * x, axis=-1)
    return (4.0 * np.pi * t) ** -1.5 * np.exp(-q / (4.0 * t))


def heat_kernel_derivative(x, t, k=(0, 0, 0), l=0):
    """Exact d_t^l D_x^k of the heat kernel.

    Time derivatives are traded for Laplacians (d_t Gamma = Delta Gamma), so
    the result is a Hermite polynomial times the Gaussian.
    """
    k, l = _check_orders(k, l)
    x = check_points(x)
    t = check_time(t)
    q = np.sum(x * x, axis=-1)
    order = sum(k) + 2 * l
    gauss = (4.0 * np.pi * t) ** -1.5 * np.exp(-q / (4.0 * t))
    derivs = [(-1.0 / (4.0 * t)) ** m * gauss for m in range(order + 1)]
    total = 0.0
    for c, beta in _laplacian_power(l):
        alpha = tuple(ki + 2 * bi for ki, bi in zip(k, beta))
        total = total + c * _radial_partial(derivs, x, alpha)
    return total


def newtonian_of_gaussian(x, t):
    """psi(x, t) = erf(|x| / 2 sqrt t) / (4 pi |x|), the decaying solution of -Delta psi = Gamma_t."""
    x = check_points(x)
    t = check_time(t)
    r = np.sqrt(np.sum(x * x, axis=-1))
    rt = np.sqrt(t)
    s = r / rt
    z = s * s / 4.0
    # 1F1(1/2; 3/2; -z) to four terms
    series = (1.0 - z / 3.0 + z * z / 10.0 - z**3 / 42.0) / (4.0 * np.pi**1.5 * rt)
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = erf(r / (2.0 * rt)) / (4.0 * np.pi * r)
    return np.where(s < _TAYLOR_SWITCH, series, closed)


def _split_potential_derivs(q, t, nmax):
    """q-derivatives of psi = Phi - psi_c with Phi = 1/(4 pi |x|) and psi_c the erfc remainder.

    Uses d/dw [w^-a Gamma(a, w)] = -w^-(a+1) Gamma(a+1, w) with w = q / 4t,
    so the remainder keeps full relative accuracy where it is exponentially
    small.  Only valid away from the origin.
    """
    w = q / (4.0 * t)
    newton, remainder = [], []
    for m in range(nmax + 1):
        newton.append((-1.0) ** m * poch(0.5, m) * q ** (-0.5 - m) / (4.0 * np.pi))
        a = 0.5 + m
        h = w ** (-a) * gamma(a) * gammaincc(a, w)
        remainder.append((-1.0) ** m * (4.0 * t) ** (-m) * h / (8.0 * np.pi**1.5 * np.sqrt(t)))
    return newton, remainder


def kernel_derivative(x, t, family, k=(0, 0, 0), l=0, beta=0.0):
    """d_t^l D^k of a kernel family, returned with shape (..., 3, 3) or (...,).

    ``family`` is ``"heat"`` (scalar), ``"oseen"`` (matrix) or
    ``"fractional_oseen"``, meaning (-Delta)^{beta/2} S, with beta in (-1, 1].
    """
    k, l = _check_orders(k, l)
    x = check_points(x)
    t = check_time(t)
    if family == "heat":
        return heat_kernel_derivative(x, t, k, l)
    if family == "oseen":
        beta = 0.0
    elif family == "fractional_oseen":
        if not -1.0 < beta <= 1.0:
            raise UsageError(f"beta must lie in (-1, 1], got {beta}")
    else:
        raise UsageError(f"unknown kernel family {family!r}")

    q = np.sum(x * x, axis=-1)
    order = sum(k) + 2 * l + 2
    scalar = _q_derivatives(beta, q, t, order)
    lap = _laplacian_power(l)
    far = None
    if family == "oseen":
        # away from the origin use the Newtonian/erfc split of psi
        far = q / np.broadcast_to(t, q.shape) >= 1.0
        qs = np.where(far, q, 1.0)
        newton, remainder = _split_potential_derivs(qs, t, order)
    potential = _q_derivatives(beta - 2.0, q, t, order)
    traceless = family == "oseen" and l == 0 and sum(k) == 0

    def pot(alpha):
        val = _radial_partial(potential, x, alpha)
        if far is not None:
            val = np.where(far, -_radial_partial(remainder, x, alpha), val)
            if not traceless:
                val = val + np.where(far, _radial_partial(newton, x, alpha), 0.0)
        return val

    out = np.zeros(q.shape + (3, 3))
    diag = 0.0
    for c, b in lap:
        alpha = tuple(ki + 2 * bi for ki, bi in zip(k, b))
        diag = diag + c * _radial_partial(scalar, x, alpha)
    for i in range(3):
        for j in range(i, 3):
            val = 0.0
            for c, b in lap:
                alpha = [ki + 2 * bi for ki, bi in zip(k, b)]
                alpha[i] += 1
                alpha[j] += 1
                val = val + c * pot(tuple(alpha))
            out[..., i, j] = val
            out[..., j, i] = val
    if traceless:
        out += np.where(far[..., None, None], _newton_hessian(x, qs), 0.0)
    for i in range(3):
        out[..., i, i] += diag
    return out


def _newton_hessian(x, q):
    """Hessian of 1/(4 pi |x|), traceless to the last bit."""
    r5 = 4.0 * np.pi * q**2.5
    h = 3.0 * x[..., :, None] * x[..., None, :] / r5[..., None, None]
    d = np.arange(3)
    h[..., d, d] -= (q / r5)[..., None]
    h[..., 2, 2] = -(h[..., 0, 0] + h[..., 1, 1])
    return h


def oseen_tensor(x, t):
    """Oseen kernel S_ij = delta_ij Gamma_t + d_i d_j psi, shape (..., 3, 3)."""
    return kernel_derivative(x, t, "oseen")


@dataclass(frozen=True)
class EstimateEnvelope:
    """Weighted bound |d_t^l D^k K| <= C t^{-l} (sqrt t + |x|)^{-exponent}."""

    k: int = 0
    l: int = 0
    beta: float = 0.0
    constant: float = 1.0
    exponent: float = 3.0

    def __post_init__(self):
        if self.k < 0 or self.l < 0:
            raise UsageError("derivative orders must be non-negative")
        if not -1.0 < self.beta <= 1.0:
            raise UsageError("beta must lie in (-1, 1]")
        if not self.constant > 0:
            raise UsageError("envelope constant must be positive")

    @classmethod
    def for_kernel(cls, k=0, l=0, beta=0.0):
        return cls(k=k, l=l, beta=beta, exponent=3.0 + k + beta)


@dataclass
class BoundReport:
    estimate_id: str
    sup_constant: float
    violation: bool
    samples: int
    slope: float = float("nan")

    def to_dict(self):
        return {
            "estimate_id": self.estimate_id,
            "sup_constant": self.sup_constant,
            "violation": self.violation,
            "samples": self.samples,
            "slope": self.slope,
        }


def tail_slope(rho, weighted, n_bins=24, tail_decades=1.0):
    """Log-log slope of the binned upper envelope of ``weighted`` over the outer decade(s) of ``rho``."""
    rho = np.asarray(rho, dtype=float)
    weighted = np.asarray(weighted, dtype=float)
    keep = (rho > 0) & (weighted > 0) & np.isfinite(weighted)
    if keep.sum() < 2:
        return float("-inf")
    rho, weighted = rho[keep], weighted[keep]
    hi = rho.max()
    lo = max(rho.min(), hi / 10.0**tail_decades)
    edges = np.geomspace(lo, hi * (1 + 1e-12), n_bins + 1)
    idx = np.digitize(rho, edges) - 1
    centers, maxima = [], []
    for b in range(n_bins):
        sel = idx == b
        if sel.any():
            centers.append(np.sqrt(edges[b] * edges[b + 1]))
            maxima.append(weighted[sel].max())
    if len(centers) < 2:
        return float("-inf")
    slope, _ = np.polyfit(np.log(centers), np.log(maxima), 1)
    return float(slope)


def envelope_check(samples, env, estimate_id="envelope", slope_tol=0.05):
    """Extract the sup constant of an envelope over sampled kernel values.

    ``samples`` is a sequence of ``((x, t), value)`` pairs or a tuple of
    arrays ``(x, t, value)`` with ``x`` of shape (N, 3).  The report flags a
    violation when the sup is non-finite or when the weighted values still
    grow over the outer decade of sqrt(t) + |x| (fitted slope > slope_tol).
    """
    if isinstance(samples, tuple) and len(samples) == 3:
        x, t, value = samples
    else:
        samples = list(samples)
        if not samples:
            raise UsageError("envelope_check needs at least one sample")
        x = np.array([p[0] for p, _ in samples], dtype=float)
        t = np.array([p[1] for p, _ in samples], dtype=float)
        value = np.array([v for _, v in samples], dtype=float)
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
    value = np.asarray(value, dtype=float).reshape(x.shape[0], -1)
    if x.shape[0] == 0:
        raise UsageError("envelope_check needs at least one sample")
    mag = np.max(np.abs(value), axis=1)
    rho = np.sqrt(t) + np.linalg.norm(x, axis=1)
    weighted = mag * rho**env.exponent * t**env.l
    sup = float(np.max(weighted))
    slope = tail_slope(rho, weighted)
    violation = (not np.isfinite(sup)) or slope > slope_tol
    return BoundReport(estimate_id, sup, bool(violation), int(x.shape[0]), slope)


def sample_cloud(n_radii=40, n_times=9, n_dirs=6, r_max=1e3, t_range=(1e-2, 1e2), seed=0):
    """Log-spaced cloud of (x, t) with |x| in {0} U [1e-3, r_max]."""
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_dirs, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.concatenate([[0.0], np.geomspace(1e-3, r_max, n_radii)])
    times = np.geomspace(t_range[0], t_range[1], n_times)
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    x = np.repeat(pts, len(times), axis=0)
    t = np.tile(times, len(pts))
    return x, t
