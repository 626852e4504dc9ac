"""Adaptive 3D quadrature for U0 = Gamma_1 * f, f = (-y2, y1, 0)/|y|^2.

Regenerates the frozen value used in tests/test_initial_data.py.  Integrates
in spherical coordinates about the origin, so the 1/|y| singularity is
absorbed by the r^2 Jacobian.  Slow (a few minutes); not run by pytest.
"""
import numpy as np
from scipy import integrate


def integrand(phi, theta, r, x):
    w = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    d2 = np.sum((x - r * w) ** 2)
    gauss = (4 * np.pi) ** -1.5 * np.exp(-d2 / 4)
    # second component of kappa is w1; measure r^2 sin(theta), f carries 1/r
    return gauss * w[0] * r * np.sin(theta)


def u0_second_component(x):
    x = np.asarray(x, dtype=float)
    rmax = np.linalg.norm(x) + 14.0
    val, err = integrate.nquad(
        integrand,
        [[0, 2 * np.pi], [0, np.pi], [0, rmax]],
        args=(x,),
        opts=[{"epsabs": 1e-13, "epsrel": 1e-11, "limit": 200}] * 3,
    )
    return val, err


if __name__ == "__main__":
    for x in ([1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [2.0, 0.5, -1.0]):
        print(x, u0_second_component(x))
