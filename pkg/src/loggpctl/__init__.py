"""Locally growing random trees of Gaussian processes for learning the
residual load in human-in-the-loop trajectory tracking, with a simulated
plant, synthetic patients and an experiment harness."""
from .estimator import LoGGPRegressor
from .gp_exact import FactorizedModel, Hyperparameters
from .loggp import LogGpTree, VectorPredictor
from .validation import ConfigError, DegenerateSplitError, NonFiniteSampleError, NumericError

__version__ = "0.1.0"

__all__ = [
    "LoGGPRegressor",
    "Hyperparameters",
    "FactorizedModel",
    "LogGpTree",
    "VectorPredictor",
    "NumericError",
    "NonFiniteSampleError",
    "DegenerateSplitError",
    "ConfigError",
]
