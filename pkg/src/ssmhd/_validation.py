"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np

from .errors import DomainError, UsageError


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise UsageError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise UsageError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise UsageError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_time(t, name="t"):
    """Return ``t`` as a float array, raising DomainError unless every entry is > 0."""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        raise DomainError(f"{name} must be finite and > 0")
    return t


def check_points(x):
    """Coerce positions to a float array of shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (3,):
        raise UsageError(f"positions must have a trailing axis of length 3, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("positions must be finite")
    return x


def check_int_in_range(value, name, low, high=None):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise UsageError(f"{name} must be an integer, got {value!r}")
    if value < low or (high is not None and value > high):
        bounds = f">= {low}" if high is None else f"in [{low}, {high}]"
        raise UsageError(f"{name} must be {bounds}, got {value}")
    return int(value)


def check_same_grid(*fields):
    grids = {f.grid for f in fields}
    if len(grids) != 1:
        raise UsageError("fields live on different grids")
    return fields[0].grid
