"""Periodic Fourier operators on grid fields.

Wavenumbers live on the lattice (pi / L) * Z^3.  Odd-order multipliers use
``kappa``, the wavevector with its Nyquist entries zeroed, so that every
operator maps real fields to real fields and the discrete identities
div(P v) = 0, P grad = 0 hold exactly in spectral coefficients.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import DomainError, UsageError
from .fields import Field, ScalarField, TensorField, VectorField, field_from_array

# worker threads handed to pocketfft; results do not depend on it
WORKERS = 1


@dataclass(frozen=True)
class Wavenumbers:
    k: tuple        # true wavevector components, broadcastable to the rfft shape
    kappa: tuple    # Nyquist-zeroed components for odd derivatives
    k2: np.ndarray
    kappa2: np.ndarray
    dealias: np.ndarray


@lru_cache(maxsize=8)
def wavenumbers(grid):
    n = grid.n
    full = np.pi / grid.l * sfft.fftfreq(n, d=1.0 / n)
    half = np.pi / grid.l * sfft.rfftfreq(n, d=1.0 / n)
    k1 = full[:, None, None]
    k2 = full[None, :, None]
    k3 = half[None, None, :]
    nyq = np.pi / grid.l * (n // 2)

    def zero_nyq(a):
        return np.where(np.abs(a) == nyq, 0.0, a)

    kappa = (zero_nyq(k1), zero_nyq(k2), zero_nyq(k3))
    ks = (k1, k2, k3)
    ksq = k1**2 + k2**2 + k3**2
    kappasq = kappa[0] ** 2 + kappa[1] ** 2 + kappa[2] ** 2
    cut = 2.0 / 3.0 * nyq
    mask = (np.abs(k1) < cut) & (np.abs(k2) < cut) & (np.abs(k3) < cut)
    for arr in (*ks, *kappa, ksq, kappasq, mask):
        arr.setflags(write=False)
    return Wavenumbers(ks, kappa, ksq, kappasq, mask)


@dataclass(frozen=True)
class SpectralField:
    """Half-spectrum (rfftn layout) of a real grid field, shape (ncomp, n, n, n//2 + 1)."""

    grid: object
    modes: np.ndarray

    def __len__(self):
        return self.modes.shape[0]


def rfft_array(a):
    return sfft.rfftn(a, axes=(-3, -2, -1), workers=WORKERS)


def irfft_array(a, n):
    return sfft.irfftn(a, s=(n, n, n), axes=(-3, -2, -1), workers=WORKERS)


def fft(field):
    return SpectralField(field.grid, rfft_array(field.data))


def ifft(spec, taper=None):
    n = spec.grid.n
    if spec.modes.shape[1:] != (n, n, n // 2 + 1):
        raise UsageError("spectral array does not match its grid")
    return field_from_array(spec.grid, irfft_array(spec.modes, n), taper=taper, copy=False)


def _check_kind(field, cls):
    if not isinstance(field, cls):
        raise UsageError(f"expected {cls.__name__}, got {type(field).__name__}")


def leray_modes(vhat, wn):
    """Apply P = I - kappa kappa^T / |kappa|^2 to a (3, ...) half spectrum; zero mode untouched."""
    kap = wn.kappa
    with np.errstate(invalid="ignore", divide="ignore"):
        inv = np.where(wn.kappa2 > 0, 1.0 / np.where(wn.kappa2 > 0, wn.kappa2, 1.0), 0.0)
    dot = (kap[0] * vhat[0] + kap[1] * vhat[1] + kap[2] * vhat[2]) * inv
    return np.stack([vhat[i] - kap[i] * dot for i in range(3)])


def leray_modes_inplace(vhat, wn):
    """:func:`leray_modes` overwriting ``vhat``; keeps one scalar spectrum of scratch."""
    kap = wn.kappa
    with np.errstate(invalid="ignore", divide="ignore"):
        inv = np.where(wn.kappa2 > 0, 1.0 / np.where(wn.kappa2 > 0, wn.kappa2, 1.0), 0.0)
    dot = kap[0] * vhat[0]
    dot += kap[1] * vhat[1]
    dot += kap[2] * vhat[2]
    dot *= inv
    for i in range(3):
        vhat[i] -= kap[i] * dot
    return vhat


def leray_project(v):
    _check_kind(v, VectorField)
    wn = wavenumbers(v.grid)
    return ifft(SpectralField(v.grid, leray_modes(rfft_array(v.data), wn)))


def heat_multiplier(wn, tau):
    return np.exp(-tau * wn.k2)


def heat_semigroup(field, tau):
    """e^{tau Delta} as the multiplier exp(-tau |k|^2)."""
    if not tau >= 0:
        raise DomainError(f"heat semigroup needs tau >= 0, got {tau}")
    if tau == 0:
        return field_from_array(field.grid, field.data)
    wn = wavenumbers(field.grid)
    return ifft(SpectralField(field.grid, rfft_array(field.data) * heat_multiplier(wn, tau)))


def grad_modes(fhat, wn):
    return np.stack([1j * wn.kappa[i] * fhat for i in range(3)])


def grad(field):
    """Gradient of a scalar (3 components) or of a vector (9 components, [i, j] = d_j f_i)."""
    wn = wavenumbers(field.grid)
    fhat = rfft_array(field.data)
    if isinstance(field, ScalarField):
        return ifft(SpectralField(field.grid, grad_modes(fhat[0], wn)))
    if isinstance(field, VectorField):
        out = np.stack([1j * wn.kappa[j] * fhat[i] for i in range(3) for j in range(3)])
        return ifft(SpectralField(field.grid, out))
    raise UsageError("grad expects a scalar or vector field")


def scalar_gradient(a, wn):
    """Gradient of one real grid array as three arrays (one transform in, three out)."""
    n = a.shape[-1]
    ahat = rfft_array(a)
    return [irfft_array(1j * wn.kappa[j] * ahat, n) for j in range(3)]


def grad_magnitude(field):
    """|grad f| (Frobenius for vectors) accumulated one component at a time."""
    wn = wavenumbers(field.grid)
    acc = np.zeros(field.grid.shape)
    for comp in field.data:
        for d in scalar_gradient(comp, wn):
            acc += d * d
    return field_from_array(field.grid, np.sqrt(acc, out=acc), copy=False)


def div_modes(vhat, wn):
    return 1j * (wn.kappa[0] * vhat[0] + wn.kappa[1] * vhat[1] + wn.kappa[2] * vhat[2])


def div(v):
    _check_kind(v, VectorField)
    wn = wavenumbers(v.grid)
    return ifft(SpectralField(v.grid, div_modes(rfft_array(v.data), wn)[None]))


def div_tensor_modes(mhat, wn):
    """(div M)_i = d_j M_ij on a (9, ...) half spectrum."""
    return np.stack([
        1j * (wn.kappa[0] * mhat[3 * i] + wn.kappa[1] * mhat[3 * i + 1] + wn.kappa[2] * mhat[3 * i + 2])
        for i in range(3)
    ])


def div_tensor(m):
    _check_kind(m, TensorField)
    wn = wavenumbers(m.grid)
    return ifft(SpectralField(m.grid, div_tensor_modes(rfft_array(m.data), wn)))


def curl(v):
    _check_kind(v, VectorField)
    wn = wavenumbers(v.grid)
    vh = rfft_array(v.data)
    kap = wn.kappa
    out = np.stack([
        1j * (kap[1] * vh[2] - kap[2] * vh[1]),
        1j * (kap[2] * vh[0] - kap[0] * vh[2]),
        1j * (kap[0] * vh[1] - kap[1] * vh[0]),
    ])
    return ifft(SpectralField(v.grid, out))


def laplacian(field):
    """Spectral Laplacian -|kappa|^2, the composition div(grad)."""
    wn = wavenumbers(field.grid)
    return ifft(SpectralField(field.grid, -wn.kappa2 * rfft_array(field.data)))


def fractional_laplacian(field, beta, atol=1e-12):
    """(-Delta)^{beta/2} as the multiplier |k|^beta, beta in (-1, 1]."""
    if not -1.0 < beta <= 1.0:
        raise UsageError(f"beta must lie in (-1, 1], got {beta}")
    wn = wavenumbers(field.grid)
    fhat = rfft_array(field.data)
    if beta == 0:
        return field_from_array(field.grid, field.data)
    if beta < 0:
        scale = np.max(np.abs(field.data), initial=0.0) * field.grid.n**3
        if np.max(np.abs(fhat[:, 0, 0, 0]), initial=0.0) > atol * max(scale, 1.0):
            raise UsageError("negative-order fractional Laplacian needs a zero-mean field")
    with np.errstate(divide="ignore"):
        mult = np.where(wn.k2 > 0, wn.k2 ** (0.5 * beta), 0.0)
    return ifft(SpectralField(field.grid, fhat * mult))


def divdiv_modes(mhat, wn):
    out = 0.0
    for i in range(3):
        for j in range(3):
            out = out - wn.kappa[i] * wn.kappa[j] * mhat[3 * i + j]
    return out


def poisson_invert_divdiv(m):
    """Zero-mean P with -Delta P = d_i d_j M_ij, i.e. P^ = -kappa_i kappa_j M^_ij / |kappa|^2."""
    _check_kind(m, TensorField)
    wn = wavenumbers(m.grid)
    src = divdiv_modes(rfft_array(m.data), wn)
    with np.errstate(divide="ignore", invalid="ignore"):
        phat = np.where(wn.kappa2 > 0, src / np.where(wn.kappa2 > 0, wn.kappa2, 1.0), 0.0)
    return ifft(SpectralField(m.grid, phat[None]))


def spectral_sup(spec):
    return float(np.max(np.abs(spec.modes), initial=0.0))


__all__ = [
    "Field",
    "SpectralField",
    "Wavenumbers",
    "curl",
    "div",
    "div_tensor",
    "fft",
    "fractional_laplacian",
    "grad",
    "heat_semigroup",
    "ifft",
    "laplacian",
    "leray_project",
    "poisson_invert_divdiv",
    "wavenumbers",
]
