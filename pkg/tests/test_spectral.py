import numpy as np
import pytest

from ssmhd import spectral
from ssmhd.checks import spectral_suite
from ssmhd.errors import UsageError
from ssmhd.fields import Grid3, VectorField, field_from_array, sample


@pytest.fixture(scope="module")
def grid():
    return Grid3(32, np.pi)


def test_derivatives_of_a_trig_field(grid):
    # 2 pi periodic box: sin(x1) cos(2 x2) is resolved exactly
    f = sample(lambda x: np.sin(x[..., 0]) * np.cos(2 * x[..., 1]), grid)
    x1, x2, _ = np.broadcast_arrays(*grid.coords())
    g = spectral.grad(f)
    np.testing.assert_allclose(g.data[0], np.cos(x1) * np.cos(2 * x2), atol=1e-12)
    np.testing.assert_allclose(g.data[1], -2 * np.sin(x1) * np.sin(2 * x2), atol=1e-12)
    np.testing.assert_allclose(spectral.laplacian(f).data, -5 * f.data, atol=1e-11)
    np.testing.assert_allclose(spectral.fractional_laplacian(f, 0.5).data, 5**0.25 * f.data, atol=1e-11)


def test_heat_semigroup_on_mode(grid):
    f = sample(lambda x: np.cos(3 * x[..., 2]), grid)
    np.testing.assert_allclose(spectral.heat_semigroup(f, 0.2).data, np.exp(-9 * 0.2) * f.data, atol=1e-13)


def test_curl_of_gradient_vanishes(grid):
    rng = np.random.default_rng(0)
    q = field_from_array(grid, rng.normal(size=grid.shape))
    assert spectral.curl(spectral.grad(q)).sup() < 1e-10 * spectral.grad(q).sup()


def test_leray_properties(grid):
    rng = np.random.default_rng(1)
    v = VectorField(grid, rng.normal(size=(3,) + grid.shape))
    pv = spectral.leray_project(v)
    assert spectral.div(pv).sup() < 1e-10 * pv.sup()
    np.testing.assert_allclose(spectral.leray_project(pv).data, pv.data, atol=1e-12)


def test_div_tensor_row_convention(grid):
    # (div M)_i = d_j M_ij
    m = np.zeros((9,) + grid.shape)
    x1, x2, x3 = grid.coords()
    m[1] = np.broadcast_to(np.sin(x2), grid.shape)  # M_01
    d = spectral.div_tensor(field_from_array(grid, m))
    np.testing.assert_allclose(d.data[0], np.broadcast_to(np.cos(x2), grid.shape), atol=1e-12)
    assert np.max(np.abs(d.data[1:])) < 1e-12


def test_kind_checks(grid):
    with pytest.raises(UsageError):
        spectral.leray_project(field_from_array(grid, np.zeros(grid.shape)))


def test_spectral_suite_gates():
    for c in spectral_suite():
        assert c["passed"], c
