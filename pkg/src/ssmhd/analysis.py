"""Decay fits, bound constants, space-time reconstruction and deterministic reports."""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from ._rescale import rescale
from ._validation import check_positive
from .errors import AccuracyError, BinningError, UsageError
from .fields import Field, ScalarField, field_from_array, taper
from .kernels import BoundReport
from . import spectral

FORMAT_VERSION = "ssmhd-report/1"


@dataclass
class DecayReport:
    field_name: str
    window: tuple
    exponent: float
    constant: float
    r2: float
    shell_maxima: list = field(default_factory=list)
    log_corrected: dict = None

    def to_dict(self):
        d = {
            "field_name": self.field_name,
            "window": [float(self.window[0]), float(self.window[1])],
            "exponent": self.exponent,
            "constant": self.constant,
            "r2": self.r2,
            "shell_maxima": [[r, m] for r, m in self.shell_maxima],
        }
        if self.log_corrected is not None:
            d["log_corrected"] = dict(self.log_corrected)
        return d


def _magnitude(f):
    if isinstance(f, Field):
        return f.grid, f.norm(), f.taper
    raise UsageError("expected a grid field")


def shell_maxima(f, window, width=None):
    """(radius, max) per radial bin of ``width`` (default h * sqrt(3)) covering ``window``.

    The radius reported is that of the node attaining the shell maximum, so
    an exact power law is reproduced exactly.
    """
    grid, mag, tap = _magnitude(f)
    r_min, r_max = map(float, window)
    if not 0 <= r_min < r_max:
        raise UsageError(f"window must satisfy 0 <= r_min < r_max, got {window}")
    limit = tap[1] if tap else grid.l
    if r_max > limit:
        raise UsageError(f"window edge {r_max} exceeds the usable radius {limit}")
    width = grid.h * math.sqrt(3.0) if width is None else float(width)
    nbins = int(math.floor((r_max - r_min) / width + 1e-9))
    if nbins < 8:
        raise BinningError(f"window {window} holds only {nbins} shells of width {width:.4g}; need >= 8")
    r = grid.radius()
    sel = (r >= r_min) & (r < r_min + nbins * width)
    rs, vs = r[sel], mag[sel]
    idx = np.minimum(((rs - r_min) / width).astype(int), nbins - 1)
    order = np.lexsort((-vs, idx))
    first = np.unique(idx[order], return_index=True)
    if len(first[0]) < nbins:
        missing = sorted(set(range(nbins)) - set(first[0].tolist()))
        raise BinningError(f"empty shell at r = {r_min + missing[0] * width:.4g}")
    pick = order[first[1]]
    return [(float(rs[k]), float(vs[k])) for k in pick]


def _fit(radii, values):
    lr = np.log(radii)
    lv = np.log(values)
    res = stats.linregress(lr, lv)
    return float(res.slope), float(math.exp(res.intercept)), float(res.rvalue**2)


def decay_fit(f, window=(10.0, 40.0), name=None, width=None, log_power=None):
    """Least-squares slope of log(shell max) against log(radius).

    With ``log_power = k`` the report also carries the slope of
    max * (1 + r)^k / log(2 + r), the flatness statistic for bounds with a
    logarithmic loss.
    """
    shells = shell_maxima(f, window, width)
    radii = np.array([s[0] for s in shells])
    vals = np.array([s[1] for s in shells])
    if np.any(vals <= 0):
        raise BinningError("shell maximum is zero; a log-log fit is undefined")
    exponent, constant, r2 = _fit(radii, vals)
    logc = None
    if log_power is not None:
        weighted = vals * (1.0 + radii) ** log_power / np.log(2.0 + radii)
        slope, c, _ = _fit(radii, weighted)
        logc = {"power": float(log_power), "slope": slope, "constant": float(np.max(weighted))}
    return DecayReport(name or type(f).__name__, (float(window[0]), float(window[1])), exponent, constant, r2,
                       shells, logc)


def log_flatness(report, tol=0.05):
    """True when the log-corrected weighted maxima do not grow (slope <= tol)."""
    if report.log_corrected is None:
        raise UsageError("decay report has no log-corrected fit")
    return report.log_corrected["slope"] <= tol


def bound_constant(f, weight_exponent, t=1.0, estimate_id="bound", window=None, slope_tol=0.05,
                   log_loss=False):
    """sup |f(x)| (sqrt(t) + |x|)^k over the nodes in ``window`` with a growth test.

    ``log_loss`` divides the weight by log(2 + |x|) for bounds that carry a
    logarithmic factor.  The violation flag is raised when the weighted shell maxima grow with a
    fitted log-log slope above ``slope_tol``.
    """
    check_positive(t, "t")
    grid, mag, tap = _magnitude(f)
    if window is None:
        window = (0.0, 0.8 * (tap[0] if tap else grid.l))
    r = grid.radius()
    sel = (r >= window[0]) & (r <= window[1])
    weight = (math.sqrt(t) + r) ** weight_exponent
    if log_loss:
        weight = weight / np.log(2.0 + r)
    weighted = mag[sel] * weight[sel]
    if weighted.size == 0:
        raise BinningError(f"no nodes inside window {window}")
    const = float(np.max(weighted))
    wf = field_from_array(grid, np.where(sel, mag * weight, 0.0))
    lo = max(window[0], grid.h * 2)
    shells = shell_maxima(wf, (lo, window[1]))
    rad = np.array([s[0] for s in shells])
    val = np.array([s[1] for s in shells])
    if np.all(val > 0):
        slope = _fit(rad[len(rad) // 2:], val[len(val) // 2:])[0]
    else:
        slope = float("-inf")
    violation = (not math.isfinite(const)) or slope > slope_tol
    return BoundReport(estimate_id, const, bool(violation), int(weighted.size), float(slope))


def _far_power(which, derivative):
    # leading far-field homogeneity of the profile being extended
    base = {"u": 1, "b": 1, "v": 3, "g": 3, "p": 2}[which]
    return base + derivative


def reconstruct(sol, t, which="u", derivative=0, min_cells=2.0):
    """Sample u, b or p (or their gradients) at time t on the solution's grid.

    u(x, t) = t^{-1/2} (U0 + V)(x / sqrt(t)), p(x, t) = t^{-1} P(x / sqrt(t));
    a derivative adds a factor t^{-1/2}.  U0 and B0 are evaluated from their
    angular profiles when available; V, G and P use trilinear interpolation
    with a power-law far field beyond r_core.  AccuracyError when the
    profile's resolved core would span fewer than ``min_cells`` grid cells.
    """
    check_positive(t, "t")
    if which not in ("u", "b", "p"):
        raise UsageError(f"which must be 'u', 'b' or 'p', got {which!r}")
    if derivative not in (0, 1):
        raise UsageError(f"derivative must be 0 or 1, got {derivative!r}")
    grid = sol.grid
    r_core, r_cut = sol.params.radii(grid)
    if math.sqrt(t) * r_core < min_cells * grid.h:
        raise AccuracyError(f"t = {t} shrinks the resolved core below {min_cells} grid cells")
    lam = 1.0 / math.sqrt(t)
    inf = float("inf")

    def interp(data, power, amp):
        return np.stack([rescale(c, grid, lam, amp, r_core, power, inf, inf) for c in data])

    if which == "p":
        src = sol.p
        if derivative:
            src = spectral.grad(src)
        return field_from_array(grid, interp(src.data, _far_power("p", derivative), t ** (-1.0 - 0.5 * derivative)))

    corr = sol.v if which == "u" else sol.g
    base = sol.initial.u0 if which == "u" else sol.initial.b0
    kappa = sol.initial.kappa_u if which == "u" else sol.initial.kappa_b
    amp = t ** (-0.5 - 0.5 * derivative)
    if derivative:
        corr_d = spectral.grad(taper(corr, r_core, r_cut)).data
        base_d = spectral.grad(taper(base, r_core, r_cut)).data
        out = interp(corr_d, _far_power(which, 1) + 2, amp) + interp(base_d, _far_power(which, 1), amp)
        return field_from_array(grid, out)
    out = interp(corr.data, 3, amp)
    if kappa is not None and hasattr(sol.initial, "caloric"):
        exact = sol.initial.caloric(which).on_grid(grid, scale=lam).data
        out = out + amp * exact
    else:
        out = out + interp(base.data, 1, amp)
    return field_from_array(grid, out)


def caloric_at_time(initial, t, which="u"):
    """e^{t Delta} u0 = t^{-1/2} U0(x / sqrt(t)) on the profile grid."""
    check_positive(t, "t")
    grid = initial.grid
    return t**-0.5 * initial.caloric(which).on_grid(grid, scale=t**-0.5)


# --- reports ---------------------------------------------------------------

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "ssmhd report",
    "type": "object",
    "required": ["format_version", "grid", "solver", "decay", "bounds", "checks", "config"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "grid": {
            "type": "object",
            "required": ["n", "l"],
            "properties": {"n": {"type": "integer", "minimum": 16}, "l": {"type": "number", "exclusiveMinimum": 0}},
        },
        "solver": {
            "type": "object",
            "required": ["iterations", "converged", "history"],
            "properties": {
                "iterations": {"type": "integer", "minimum": 0},
                "converged": {"type": "boolean"},
                "history": {"type": "array", "items": {"type": ["number", "null"]}},
            },
        },
        "decay": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["field_name", "window", "exponent", "constant", "r2", "shell_maxima"],
                "properties": {
                    "window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    "shell_maxima": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                                  "minItems": 2, "maxItems": 2}},
                },
            },
        },
        "bounds": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["estimate_id", "sup_constant", "violation", "samples"],
                "properties": {"violation": {"type": "boolean"}, "samples": {"type": "integer"}},
            },
        },
        "checks": {"type": "array", "items": {"type": "object", "required": ["name", "passed"]}},
        "config": {"type": "object"},
    },
}


def _plain(obj):
    if isinstance(obj, (DecayReport, BoundReport)):
        return _plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise UsageError(f"cannot serialise {type(obj).__name__} in a report")


def dumps(obj, indent=2, _level=0):
    """JSON text with sorted keys and floats printed to 17 significant digits (non-finite -> null)."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return format(obj, ".17g")
    return json.dumps(obj)


def make_report(sol=None, checks=(), config=None, grid=None):
    """Deterministic report document (a dict); serialise with :func:`dumps`.

    ``checks`` may hold DecayReports, BoundReports and plain dicts with at
    least ``name`` and ``passed``.
    """
    decay, bounds, other = [], [], []
    for c in checks:
        if isinstance(c, DecayReport):
            decay.append(c.to_dict())
        elif isinstance(c, BoundReport):
            bounds.append(c.to_dict())
        elif isinstance(c, dict):
            other.append(c)
        else:
            raise UsageError(f"unsupported check entry {type(c).__name__}")
    grid = grid or (sol.grid if sol is not None else None)
    if grid is None:
        raise UsageError("make_report needs a solution or a grid")
    solver = {"iterations": 0, "converged": False, "history": []}
    if sol is not None:
        solver = {"iterations": sol.iterations, "converged": sol.converged, "history": list(sol.history)}
    doc = {
        "format_version": FORMAT_VERSION,
        "grid": {"n": grid.n, "l": grid.l},
        "solver": solver,
        "decay": decay,
        "bounds": bounds,
        "checks": other,
        "config": config or {},
    }
    return _plain(doc)


def write_report(doc, path):
    Path(path).write_text(dumps(doc) + "\n", encoding="utf-8")


def write_shell_csv(reports, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["field", "radius", "shell_max"])
        for rep in reports:
            for r, m in rep.shell_maxima:
                w.writerow([rep.field_name, format(r, ".17g"), format(m, ".17g")])
