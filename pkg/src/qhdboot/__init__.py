"""Weighted empirical processes, tail-mean and compound functionals, their
quasi-Hadamard derivatives, exchangeable and blockwise bootstrap schemes, and
a Monte Carlo harness certifying bootstrap consistency at desk scale."""

__version__ = "0.1.0"

from .errors import (BlockLengthInvalid, ConfigInvalid, EmptySample,
                     FactorizationFailed, IoError, LatticeMismatch,
                     LengthMismatch, LevelOutOfRange, MomentDiverges,
                     NonIntegrable, NonIntegrableDirection, NormInfinite,
                     PathTooShort, QhdbootError, RangeTooSmall)
from .functionals import (AvarParams, CompoundParams, CompoundResult, avar,
                          avar_difference, avar_quantile_form, composition,
                          compound_cdf, convolve_pmf, h_measure, k_fold,
                          model_to_grid)
from .models import Ar1Model, ContinuousModel, CountModel, phi_moment, sample_ar1, sample_iid
from .resampling import (BootstrapWeights, blockwise_expected_weights,
                         blockwise_weights, bootstrap_cdf, centering,
                         empirical_cdf, exchangeable_weights)
from .stepfun import (GridPmf, StepFunction, WeightFunction, discretize,
                      left_continuous_inverse, weighted_sup_norm)

__all__ = [name for name in dir() if not name.startswith("_")]
