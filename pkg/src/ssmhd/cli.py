"""Command-line front end: ``ssmhd {profile,solve,verify,reconstruct,report}``.

Exit codes: 0 success, 2 validation failure, 3 solver divergence,
4 accuracy-gate failure.
"""

import argparse
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import analysis, checks, spectral
from .config import RunConfig
from .errors import AccuracyError, DivergenceError, SSMHDError, UsageError
from .fields import read_field, taper, write_field
from .initial_data import build_initial_profiles
from .pls_solver import ProfileSolution, energy_identity, pls_residual, solve_fixed_point

LOCK_NAME = ".ssmhd.lock"


@contextmanager
def output_lock(directory):
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise UsageError(f"output directory {directory} is locked by another run ({lock})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield directory
    finally:
        lock.unlink(missing_ok=True)


def _initial(cfg):
    return build_initial_profiles(cfg.kappa("kappa_u"), cfg.kappa("kappa_b"), cfg.grid(), cfg.quad())


def _load_solution(cfg, out):
    paths = {k: out / f"{k}.ssmhd" for k in ("v", "g", "p")}
    missing = [str(p) for p in paths.values() if not p.exists()]
    if missing:
        raise UsageError(f"no solution in {out}; run 'solve' first (missing {', '.join(missing)})")
    initial = _initial(cfg)
    v, g, p = (read_field(paths[k]) for k in ("v", "g", "p"))
    if v.grid != initial.grid:
        raise UsageError(f"stored solution grid {v.grid} does not match the configuration {initial.grid}")
    hist = {}
    rep = out / "solve_report.json"
    if rep.exists():
        hist = json.loads(rep.read_text())["solver"]
    return ProfileSolution(initial, v, g, p, hist.get("iterations", 0), hist.get("converged", False),
                           [h for h in hist.get("history", []) if h is not None], cfg.solve_params())


def _write(cfg, out, name, sol=None, checks_=(), extra=None):
    doc = analysis.make_report(sol, checks_, cfg.echo(), grid=cfg.grid())
    if extra:
        doc.update(analysis._plain(extra))
    analysis.write_report(doc, out / name)
    return doc


def cmd_profile(cfg, out, args):
    initial = _initial(cfg)
    write_field(initial.u0, out / "u0.ssmhd")
    write_field(initial.b0, out / "b0.ssmhd")
    _write(cfg, out, "profile_report.json", extra={"profile": initial.meta})
    return 0


def cmd_solve(cfg, out, args):
    initial = _initial(cfg)
    try:
        sol = solve_fixed_point(initial, cfg.solve_params())
    except DivergenceError as exc:
        doc = analysis.make_report(None, [], cfg.echo(), grid=cfg.grid())
        doc["solver"] = {"iterations": len(exc.history), "converged": False, "history": exc.history}
        doc["error"] = str(exc)
        analysis.write_report(analysis._plain(doc), out / "solve_report.json")
        raise
    for k, f in (("v", sol.v), ("g", sol.g), ("p", sol.p)):
        write_field(f, out / f"{k}.ssmhd")
    if cfg.data["output"]["emit_fields"]:
        write_field(initial.u0, out / "u0.ssmhd")
        write_field(initial.b0, out / "b0.ssmhd")
    _write(cfg, out, "solve_report.json", sol)
    return 0


def _solution_checks(cfg, sol):
    r_core, r_cut = cfg.radii()
    window = cfg.window()
    reps = []
    for name, f, lp in (("U0", sol.initial.u0, None), ("B0", sol.initial.b0, None),
                        ("V", sol.v, 3), ("G", sol.g, 3), ("P", sol.p, None)):
        reps.append(analysis.decay_fit(f, window, name, log_power=lp))
        reps.append(analysis.decay_fit(spectral.grad_magnitude(taper(f, r_core, r_cut)), window, f"grad {name}"))
    bounds = [
        analysis.bound_constant(sol.v, 3, estimate_id="T1.1-iii:V", window=(0.0, r_core), log_loss=True),
        analysis.bound_constant(sol.g, 3, estimate_id="T1.1-iii:G", window=(0.0, r_core), log_loss=True),
        analysis.bound_constant(sol.p, 2, estimate_id="T1.1-iv:P", window=(0.0, r_core)),
        analysis.bound_constant(sol.initial.u0, 1, estimate_id="L2.3-i:U0", window=(0.0, r_core)),
    ]
    return reps, bounds


def cmd_verify(cfg, out, args):
    results = checks.kernel_suite() + checks.spectral_suite() + checks.envelope_suite()
    r_core, r_cut = cfg.radii()
    results += checks.profile_suite(cfg.kappa("kappa_u"), cfg.kappa("kappa_b"), cfg.grid(), cfg.quad(),
                                    r_core, r_cut)
    reps, bounds, sol = [], [], None
    if (out / "v.ssmhd").exists():
        sol = _load_solution(cfg, out)
        reps, bounds = _solution_checks(cfg, sol)
        res = pls_residual(sol)
        lhs, rhs, gap = energy_identity(sol)
        results.append({"name": "energy_identity", "passed": gap <= 5e-2, "value": gap, "tol": 5e-2,
                        "lhs": lhs, "rhs": rhs})
        results.append({"name": "pls_residual", "passed": True, "value": max(res["v"]["sup"], res["g"]["sup"]),
                        "tol": None, "detail": res})
    _write(cfg, out, "verify_report.json", sol, list(reps) + list(bounds) + results)
    failed = [c["name"] for c in results if not c["passed"]] + [b.estimate_id for b in bounds if b.violation]
    if failed:
        raise AccuracyError("verification gates failed: " + ", ".join(failed))
    return 0


def cmd_reconstruct(cfg, out, args):
    sol = _load_solution(cfg, out)
    times = args.t if args.t else [1.0]
    entries = []
    for t in times:
        for which in ("u", "b", "p"):
            f = analysis.reconstruct(sol, t, which)
            path = out / f"{which}_t{t:.17g}.ssmhd"
            write_field(f, path)
            entries.append({"t": t, "which": which, "path": path.name, "sup": f.sup()})
    _write(cfg, out, "reconstruct_report.json", sol, extra={"slices": entries})
    return 0


def cmd_report(cfg, out, args):
    sol = _load_solution(cfg, out)
    reps, bounds = _solution_checks(cfg, sol)
    res = pls_residual(sol)
    lhs, rhs, gap = energy_identity(sol)
    extra = [{"name": "energy_identity", "passed": gap <= 5e-2, "value": gap, "tol": 5e-2, "lhs": lhs, "rhs": rhs},
             {"name": "pls_residual", "passed": True, "value": max(res["v"]["sup"], res["g"]["sup"]),
              "detail": res}]
    _write(cfg, out, "report.json", sol, reps + bounds + extra)
    analysis.write_shell_csv(reps, out / "shells.csv")
    return 0


COMMANDS = {
    "profile": cmd_profile,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "reconstruct": cmd_reconstruct,
    "report": cmd_report,
}


def _times(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--t expects a comma-separated list of times, got {text!r}") from None
    if not vals or any(not np.isfinite(v) or v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("times must be finite and > 0")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="ssmhd", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("-c", "--config", type=Path, help="TOML run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. --set solver.theta=0.5")
    p.add_argument("-o", "--out", type=Path, help="output directory (overrides output.dir)")
    p.add_argument("--t", type=_times, help="reconstruction times, comma separated")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        overrides = list(args.overrides)
        if args.out is not None:
            overrides.append(f"output.dir={json.dumps(str(args.out))}")
        cfg = RunConfig.load(args.config, overrides)
        with output_lock(cfg.output_dir()) as out:
            return COMMANDS[args.command](cfg, out, args)
    except SSMHDError as exc:
        print(f"ssmhd {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError:
        print(f"ssmhd {args.command}: out of memory; reduce grid.n", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
