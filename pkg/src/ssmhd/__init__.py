"""Forward self-similar solutions of the incompressible MHD equations.

Kernels and their estimates, grid fields with the SSMHD1 on-disk format,
spectral operators, caloric initial profiles, the profile fixed-point solver
and the decay / report analysis behind the ``ssmhd`` command.
"""

from .errors import (AccuracyError, BinningError, DivergenceError, DomainError, FormatError, SamplingError,
                     SSMHDError, UnsupportedOrderError, UsageError)
from .estimator import PowerLawRegressor, SelfSimilarProfile
from .fields import Grid3, ScalarField, TensorField, VectorField, read_field, taper, write_field
from .initial_data import (CaloricProfile, HarmonicProfile, LinearProfile, QuadratureSettings, build_initial_profiles,
                           caloric_profile, preset_kappa)
from .pls_solver import SolveParams, energy_identity, pls_residual, solve_fixed_point
from .analysis import bound_constant, decay_fit, reconstruct

__version__ = "0.1.0"

__all__ = [
    "AccuracyError", "BinningError", "CaloricProfile", "DivergenceError", "DomainError", "FormatError", "Grid3",
    "HarmonicProfile", "LinearProfile", "PowerLawRegressor", "QuadratureSettings", "SSMHDError", "SamplingError",
    "ScalarField", "SelfSimilarProfile", "SolveParams", "TensorField", "UnsupportedOrderError", "UsageError",
    "VectorField", "bound_constant", "build_initial_profiles", "caloric_profile", "decay_fit", "energy_identity",
    "pls_residual", "preset_kappa", "read_field", "reconstruct", "solve_fixed_point", "taper", "write_field",
]
