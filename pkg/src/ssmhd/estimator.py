"""scikit-learn style front ends: a profile solver estimator and a power-law regressor."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from .analysis import reconstruct
from .errors import UsageError
from .fields import Grid3
from .initial_data import AngularProfile, QuadratureSettings, build_initial_profiles, preset_kappa
from .pls_solver import SolveParams, energy_identity, pls_residual, solve_fixed_point


class SelfSimilarProfile(BaseEstimator):
    """Forward self-similar MHD profile for given angular data.

    ``fit(kappa_u, kappa_b)`` builds the caloric profiles and runs the Picard
    iteration; ``predict(t)`` samples u, b or p at time t on the same grid.

    Examples
    --------
    >>> est = SelfSimilarProfile(n=32, l=12.0, tol=1e-6)
    >>> est.fit("rotational", "zero").converged_
    True
    """

    def __init__(self, n=128, l=50.0, r_core=None, r_cut=None, amplitude=0.1, sphere_order=15,
                 radial_nodes=64, l_max=8, s_nodes=32, s_split=0.25, theta=1.0, tol=1e-8,
                 max_iters=50, dealias=True):
        self.n = n
        self.l = l
        self.r_core = r_core
        self.r_cut = r_cut
        self.amplitude = amplitude
        self.sphere_order = sphere_order
        self.radial_nodes = radial_nodes
        self.l_max = l_max
        self.s_nodes = s_nodes
        self.s_split = s_split
        self.theta = theta
        self.tol = tol
        self.max_iters = max_iters
        self.dealias = dealias

    def _kappa(self, k):
        if isinstance(k, str):
            return preset_kappa(k, self.amplitude)
        if isinstance(k, AngularProfile) or callable(k):
            return k
        raise UsageError(f"kappa must be a preset name, an AngularProfile or a callable, got {type(k).__name__}")

    def fit(self, kappa_u, kappa_b=None):
        grid = Grid3(self.n, self.l)
        params = SolveParams(theta=self.theta, tol=self.tol, max_iters=self.max_iters, s_nodes=self.s_nodes,
                             dealias=self.dealias, s_split=self.s_split, r_core=self.r_core, r_cut=self.r_cut)
        params.radii(grid)
        quad = QuadratureSettings(self.sphere_order, self.radial_nodes, self.l_max)
        ku = self._kappa(kappa_u)
        kb = self._kappa("zero" if kappa_b is None else kappa_b)
        self.initial_ = build_initial_profiles(ku, kb, grid, quad)
        self.solution_ = solve_fixed_point(self.initial_, params)
        self.v_ = self.solution_.v
        self.g_ = self.solution_.g
        self.p_ = self.solution_.p
        self.history_ = list(self.solution_.history)
        self.n_iter_ = self.solution_.iterations
        self.converged_ = self.solution_.converged
        return self

    def predict(self, t, which="u", derivative=0):
        check_is_fitted(self, "solution_")
        return reconstruct(self.solution_, t, which, derivative)

    def residuals(self):
        check_is_fitted(self, "solution_")
        return pls_residual(self.solution_)

    def energy_gap(self):
        check_is_fitted(self, "solution_")
        return energy_identity(self.solution_)[2]


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Fit y = C r^p by least squares in log-log coordinates.

    ``X`` holds radii (one column), ``y`` positive values.  With
    ``log_power`` set, the fit is applied to y (1 + r)^k / log(2 + r)
    instead, so ``exponent_`` near 0 means the log-loss bound is flat.
    """

    def __init__(self, log_power=None):
        self.log_power = log_power

    def _target(self, r, y):
        if self.log_power is None:
            return y
        return y * (1.0 + r) ** self.log_power / np.log(2.0 + r)

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2)
        r = X[:, 0]
        if np.any(r <= 0) or np.any(y <= 0):
            raise UsageError("radii and values must be positive for a log-log fit")
        z = self._target(r, y)
        p, c = np.polyfit(np.log(r), np.log(z), 1)
        self.exponent_ = float(p)
        self.constant_ = float(np.exp(c))
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        r = check_array(X)[:, 0]
        z = self.constant_ * r**self.exponent_
        if self.log_power is None:
            return z
        return z * np.log(2.0 + r) / (1.0 + r) ** self.log_power
