import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssmhd import kernels
from ssmhd.errors import DomainError, UnsupportedOrderError, UsageError


def mp_heat(x, t):
    q = sum(mpmath.mpf(c) ** 2 for c in x)
    return (4 * mpmath.pi * t) ** mpmath.mpf(-1.5) * mpmath.exp(-q / (4 * t))


def mp_psi(x, t):
    r = mpmath.sqrt(sum(mpmath.mpf(c) ** 2 for c in x))
    return mpmath.erf(r / (2 * mpmath.sqrt(t))) / (4 * mpmath.pi * r)


@pytest.mark.parametrize("x,t", [((0.3, -1.2, 0.7), 0.5), ((4.0, 0.0, 1.0), 2.0), ((0.0, 0.0, 0.0), 0.1)])
def test_heat_kernel_matches_mpmath(x, t):
    ref = float(mp_heat(x, t))
    assert kernels.heat_kernel(np.array(x), t) == pytest.approx(ref, rel=1e-14)


def test_heat_derivatives_against_mpmath_diff():
    x, t = (0.4, -0.9, 1.3), 0.8
    mpmath.mp.dps = 30
    for k in [(1, 0, 0), (0, 2, 0), (1, 1, 1), (0, 0, 3)]:
        ref = mpmath.diff(lambda a, b, c: mp_heat((a, b, c), t), x, k)
        got = kernels.heat_kernel_derivative(np.array(x), t, k=k)
        assert got == pytest.approx(float(ref), rel=1e-10, abs=1e-14)
    # d_t Gamma = Delta Gamma
    ref = mpmath.diff(lambda s: mp_heat(x, s), t)
    assert kernels.heat_kernel_derivative(np.array(x), t, l=1) == pytest.approx(float(ref), rel=1e-10)


def test_newtonian_potential_and_taylor_branch():
    for x in [(1e-5, 0.0, 0.0), (0.3, 0.2, -0.1), (5.0, 1.0, 2.0)]:
        got = kernels.newtonian_of_gaussian(np.array(x), 0.7)
        assert got == pytest.approx(float(mp_psi(x, mpmath.mpf("0.7"))), rel=1e-12)


def test_oseen_against_mpmath_hessian():
    mpmath.mp.dps = 30
    x, t = (0.6, -0.4, 1.1), 0.9
    s = kernels.oseen_tensor(np.array(x), t)
    for i in range(3):
        for j in range(3):
            order = [0, 0, 0]
            order[i] += 1
            order[j] += 1
            ref = mpmath.diff(lambda a, b, c: mp_psi((a, b, c), t), x, tuple(order))
            ref += (i == j) * mp_heat(x, t)
            assert s[i, j] == pytest.approx(float(ref), rel=1e-9, abs=1e-13)


def test_oseen_symmetric_and_trace():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(50, 3)) * 2
    s = kernels.oseen_tensor(x, 1.3)
    np.testing.assert_allclose(s, np.swapaxes(s, -1, -2), atol=1e-15)
    np.testing.assert_allclose(np.trace(s, axis1=-2, axis2=-1), 2 * kernels.heat_kernel(x, 1.3), rtol=1e-10)


def test_fractional_beta_zero_reduces_to_oseen():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(20, 3))
    a = kernels.kernel_derivative(x, 0.6, "fractional_oseen", beta=0.0)
    b = kernels.kernel_derivative(x, 0.6, "oseen")
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.0, 30.0))
def test_heat_scaling(t, r):
    x = np.array([r, 0.0, 0.0])
    lam = 1.7
    lhs = kernels.heat_kernel(lam * x, lam**2 * t)
    rhs = lam**-3 * kernels.heat_kernel(x, t)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


def test_bad_inputs():
    with pytest.raises(DomainError):
        kernels.heat_kernel(np.zeros(3), 0.0)
    with pytest.raises(UsageError):
        kernels.heat_kernel(np.zeros(2), 1.0)
    with pytest.raises(UnsupportedOrderError):
        kernels.heat_kernel_derivative(np.zeros(3), 1.0, k=(5, 0, 0))
    with pytest.raises(UsageError):
        kernels.kernel_derivative(np.zeros(3), 1.0, "nope")
    with pytest.raises(UsageError):
        kernels.EstimateEnvelope(beta=2.0)


def test_envelope_check_flags_growth():
    rho = np.geomspace(1, 1e3, 200)
    x = np.stack([rho, 0 * rho, 0 * rho], axis=1)
    env = kernels.EstimateEnvelope(exponent=3.0)
    ok = kernels.envelope_check((x, 1e-12, rho**-3.0), env)
    bad = kernels.envelope_check((x, 1e-12, rho**-2.0), env)
    assert not ok.violation and abs(ok.slope) < 0.05
    assert bad.violation and bad.slope == pytest.approx(1.0, abs=0.05)


def test_kernel_suite_gates():
    from ssmhd.checks import kernel_suite

    for c in kernel_suite():
        assert c["passed"], c
