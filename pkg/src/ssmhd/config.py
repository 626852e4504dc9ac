"""Run configuration: TOML file with dotted sections plus ``--set key=value`` overrides."""

import copy
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

from .errors import UsageError
from .fields import Grid3, check_taper_radii
from .initial_data import QuadratureSettings, load_tabulated_kappa, preset_kappa
from .pls_solver import SolveParams

DEFAULTS = {
    "grid": {"n": 256, "l": 50.0, "r_core": None, "r_cut": None},
    "kappa_u": {"preset": "rotational", "amplitude": 0.1, "data_class": "C1,1"},
    "kappa_b": {"preset": "rotated_rotational", "amplitude": 0.1, "axis": [1.0, 1.0, 1.0], "data_class": "C1,1"},
    "quad": {"sphere_order": 15, "radial_nodes": 64, "l_max": 8, "s_nodes": 32, "s_split": 0.25},
    "solver": {"theta": 1.0, "tol": 1e-8, "max_iters": 50, "dealias": True},
    "output": {"dir": "ssmhd-out", "emit_fields": False},
    "analysis": {"window": None},
}

_KAPPA_KEYS = {"preset", "file", "amplitude", "axis", "terms", "data_class", "l_max"}


def _parse_value(text):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_override(cfg, assignment):
    if "=" not in assignment:
        raise UsageError(f"override must look like key=value, got {assignment!r}")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    if len(parts) != 2:
        raise UsageError(f"override key must be section.name, got {key!r}")
    section, name = parts
    if section not in DEFAULTS:
        raise UsageError(f"unknown config section {section!r}")
    cfg.setdefault(section, {})[name] = _parse_value(text.strip())
    return cfg


@dataclass
class RunConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def load(cls, path=None, overrides=()):
        cfg = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                user = tomli.loads(Path(path).read_text(encoding="utf-8"))
            except OSError as exc:
                raise UsageError(f"cannot read config {path}: {exc}") from None
            except tomli.TOMLDecodeError as exc:
                raise UsageError(f"config {path} is not valid TOML: {exc}") from None
            for section, values in user.items():
                if section not in DEFAULTS or not isinstance(values, dict):
                    raise UsageError(f"unknown config section {section!r}")
                if section.startswith("kappa") and ("preset" in values or "file" in values):
                    cfg[section] = {}
                cfg[section].update(values)
        for o in overrides:
            apply_override(cfg, o)
        rc = cls(cfg)
        rc.validate()
        return rc

    def section(self, name):
        return self.data[name]

    def validate(self):
        for section, values in self.data.items():
            if section not in DEFAULTS:
                raise UsageError(f"unknown config section {section!r}")
            allowed = _KAPPA_KEYS if section.startswith("kappa") else set(DEFAULTS[section]) | {"s_gate"}
            extra = set(values) - allowed
            if extra:
                raise UsageError(f"unknown key(s) {sorted(extra)} in section [{section}]")
        g = self.grid()
        check_taper_radii(g, *self.radii())
        self.quad()
        self.solve_params()
        w = self.window()
        if len(w) != 2 or not 0 <= w[0] < w[1]:
            raise UsageError(f"analysis.window must be [r_min, r_max], got {w}")
        for name in ("kappa_u", "kappa_b"):
            self.kappa(name)

    def grid(self):
        g = self.data["grid"]
        if not isinstance(g["n"], int):
            raise UsageError(f"grid.n must be an integer, got {g['n']!r}")
        return Grid3(g["n"], float(g["l"]))

    def radii(self):
        """(r_core, r_cut); unset entries default to 0.8 L and 0.9 L."""
        g = self.data["grid"]
        l = float(g["l"])
        r_core = 0.8 * l if g["r_core"] is None else float(g["r_core"])
        r_cut = 0.9 * l if g["r_cut"] is None else float(g["r_cut"])
        return r_core, r_cut

    def quad(self):
        q = self.data["quad"]
        return QuadratureSettings(int(q["sphere_order"]), int(q["radial_nodes"]), int(q["l_max"]))

    def solve_params(self):
        s, q = self.data["solver"], self.data["quad"]
        r_core, r_cut = self.radii()
        return SolveParams(theta=float(s["theta"]), tol=float(s["tol"]), max_iters=s["max_iters"],
                           s_nodes=q["s_nodes"], dealias=bool(s["dealias"]), s_split=float(q["s_split"]),
                           r_core=r_core, r_cut=r_cut, s_gate=q.get("s_gate"))

    def kappa(self, name):
        k = self.data[name]
        amp = float(k.get("amplitude", 1.0))
        if "file" in k:
            prof = load_tabulated_kappa(k["file"], l_max=int(k.get("l_max", 8)),
                                        data_class=k.get("data_class", "C0,1"))
            if amp != 1.0:
                prof.coeffs = {l: amp * c for l, c in prof.coeffs.items()}
                prof.amplitude = amp
            return prof
        if "preset" not in k:
            raise UsageError(f"[{name}] needs a preset or a file")
        prof = preset_kappa(k["preset"], amp, axis=k.get("axis"), terms=k.get("terms"))
        prof.data_class = k.get("data_class", prof.data_class)
        return prof

    def window(self):
        """Decay-fit window; defaults to [0.2 L, 0.8 L], i.e. [10, 40] at L = 50."""
        w = self.data["analysis"]["window"]
        if w is None:
            l = float(self.data["grid"]["l"])
            return (0.2 * l, 0.8 * l)
        return tuple(float(v) for v in w)

    def output_dir(self):
        return Path(self.data["output"]["dir"])

    def echo(self):
        d = copy.deepcopy(self.data)
        d["grid"]["r_core"], d["grid"]["r_cut"] = self.radii()
        d["analysis"]["window"] = list(self.window())
        return d
