import numpy as np
import pytest

from ssmhd.errors import AccuracyError, UsageError
from ssmhd.fields import Grid3
from ssmhd.initial_data import (CaloricProfile, HarmonicProfile, LinearProfile, QuadratureSettings,
                                build_initial_profiles, caloric_profile, check_divergence_free,
                                linear_profile_residual, load_tabulated_kappa, preset_kappa, radial_kernel,
                                real_harmonics, sphere_rule)

# Frozen output of tests/oracles/caloric_rotational.py (adaptive nquad in spherical
# coordinates): second component of Gamma_1 * (-y2, y1, 0)/|y|^2.
ORACLE_U0_2 = {
    (1.0, 0.0, 0.0): 0.15112723299595537,
    (2.0, 0.5, -1.0): 0.20860258310177188,
}


@pytest.mark.parametrize("x,ref", ORACLE_U0_2.items())
def test_caloric_rotational_matches_quadrature_oracle(x, ref):
    u0 = CaloricProfile(preset_kappa("rotational"))(np.array([x]))[0]
    assert u0[1] == pytest.approx(ref, abs=1e-4 * abs(ref))
    assert u0[1] == pytest.approx(ref, rel=1e-9)


def test_harmonic_route_matches_linear_route():
    kappa = preset_kappa("rotated_rotational", 0.3, axis=(1, 2, -1))
    harm = HarmonicProfile.project(kappa.evaluate, l_max=3, sphere_order=8)
    assert harm.degrees == (1,)
    x = np.random.default_rng(0).normal(size=(30, 3)) * 4
    np.testing.assert_allclose(CaloricProfile(harm)(x), CaloricProfile(kappa)(x), atol=1e-12)


def test_caloric_far_field_expansion():
    # e^Delta f = f + Delta f + ..., and Delta f = -2 f / |x|^2 for linear kappa
    kappa = preset_kappa("rotational")
    x = np.array([[30.0, 10.0, -5.0]])
    r2 = np.sum(x**2)
    np.testing.assert_allclose(CaloricProfile(kappa)(x), kappa(x) * (1 - 2 / r2), rtol=1e-5)


def test_radial_kernel_at_origin_and_small_r():
    assert radial_kernel(0, 0.0)[0] == pytest.approx(1 / np.sqrt(np.pi))
    # K_1(r) ~ c r near 0, so K_1/r is finite
    k = radial_kernel(1, np.array([1e-3, 2e-3]))
    assert k[1] / k[0] == pytest.approx(2.0, rel=1e-5)


def test_sphere_rule_integrates_harmonics():
    omega, w = sphere_rule(15)
    assert w.sum() == pytest.approx(4 * np.pi, rel=1e-14)
    for l in (2, 7, 14):
        y = real_harmonics(l, omega)
        gram = (y * w) @ y.T
        np.testing.assert_allclose(gram, np.eye(2 * l + 1), atol=1e-12)


def test_presets():
    rot = preset_kappa("rotational", 0.1)
    np.testing.assert_allclose(rot(np.array([1.0, 0.0, 0.0])), [0.0, 0.1, 0.0])
    assert check_divergence_free(rot) < 1e-8
    rr = preset_kappa("rotated_rotational", 0.1, axis=(1, 1, 1))
    np.testing.assert_allclose(rr.matrix, -rr.matrix.T)
    combo = preset_kappa("linear_combination", 1.0, terms=[(2.0, rot), {"name": "rotational", "amplitude": 0.1}])
    np.testing.assert_allclose(combo.matrix, 3 * rot.matrix)
    assert not np.any(preset_kappa("zero").matrix)
    for bad in [("nope", {}), ("rotated_rotational", {}), ("rotated_rotational", {"axis": (0, 0, 0)})]:
        with pytest.raises(UsageError):
            preset_kappa(bad[0], **bad[1])


def test_divergence_check_detects_sources():
    radial = LinearProfile(np.eye(3))
    assert check_divergence_free(radial) > 0.1


def test_tabulated_kappa(tmp_path):
    rng = np.random.default_rng(1)
    theta = np.arccos(rng.uniform(-1, 1, 200))
    phi = rng.uniform(0, 2 * np.pi, 200)
    om = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
    vals = preset_kappa("rotational").evaluate(om)
    p = tmp_path / "k.txt"
    np.savetxt(p, np.column_stack([theta, phi, vals]), header="theta phi k1 k2 k3")
    prof = load_tabulated_kappa(p, l_max=2)
    np.testing.assert_allclose(prof.evaluate(om), vals, atol=1e-12)
    np.savetxt(p, np.column_stack([theta, phi, vals[:, :2]]))
    with pytest.raises(UsageError):
        load_tabulated_kappa(p)


def test_grid_profile_and_linear_residual():
    grid = Grid3(64, 20.0)
    u0 = caloric_profile(preset_kappa("rotational", 0.1), grid)
    pts = grid.points()[40, 33, 29]
    np.testing.assert_allclose(u0.data[:, 40, 33, 29], CaloricProfile(preset_kappa("rotational", 0.1))(pts),
                               rtol=1e-12)
    # coarse grid: residual is small but only O(1e-2) at h = 0.625
    assert linear_profile_residual(u0, 16.0, 18.0) < 5e-2


def test_quadrature_gate_raises():
    grid = Grid3(16, 4.0)
    with pytest.raises(AccuracyError):
        caloric_profile(preset_kappa("rotational"), grid, QuadratureSettings(radial_nodes=4), gate=1e-12)


def test_build_initial_profiles_metadata():
    grid = Grid3(16, 4.0)
    ini = build_initial_profiles(preset_kappa("rotational"), preset_kappa("zero"), grid)
    assert ini.meta["sphere_order"] == 15
    assert ini.b0.sup() == 0.0
    assert ini.grid == grid
