import pytest

from ssmhd.config import RunConfig, apply_override
from ssmhd.errors import UsageError


def test_defaults():
    cfg = RunConfig.load()
    assert cfg.grid().n == 256 and cfg.grid().l == 50.0
    assert cfg.radii() == (40.0, 45.0)
    assert cfg.window() == (10.0, 40.0)
    assert cfg.solve_params().tol == 1e-8
    assert cfg.kappa("kappa_b").name == "rotated_rotational"


def test_file_and_overrides(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('[grid]\nn = 64\nl = 20.0\n[kappa_u]\npreset = "zero"\n[solver]\ntheta = 0.5\n')
    cfg = RunConfig.load(p, ["solver.tol=1e-6", "analysis.window=[4.0, 16.0]"])
    assert cfg.grid().n == 64
    assert cfg.radii() == (16.0, 18.0)
    assert cfg.solve_params().theta == 0.5 and cfg.solve_params().tol == 1e-6
    assert cfg.window() == (4.0, 16.0)
    assert not cfg.kappa("kappa_u").matrix.any()
    echo = cfg.echo()
    assert echo["grid"]["r_core"] == 16.0 and echo["analysis"]["window"] == [4.0, 16.0]


@pytest.mark.parametrize("override", [
    "grid.n=100", "grid.n=64.0", "solver.theta=2", "nosection.x=1", "grid.bogus=1", "grid", "a.b.c=1",
    "grid.r_core=60", "analysis.window=[5.0]", "kappa_u.preset=\"nope\"",
])
def test_bad_overrides(override):
    with pytest.raises(UsageError):
        RunConfig.load(None, [override])


def test_bad_files(tmp_path):
    with pytest.raises(UsageError):
        RunConfig.load(tmp_path / "missing.toml")
    p = tmp_path / "bad.toml"
    p.write_text("[grid\n")
    with pytest.raises(UsageError):
        RunConfig.load(p)
    p.write_text("[other]\nx = 1\n")
    with pytest.raises(UsageError):
        RunConfig.load(p)


def test_string_values_pass_through():
    cfg = {}
    apply_override(cfg, "output.dir=some/path")
    assert cfg["output"]["dir"] == "some/path"
