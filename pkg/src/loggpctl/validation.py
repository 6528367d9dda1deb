"""Input validation helpers and the package's exception types."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

__all__ = [
    "NumericError",
    "NonFiniteSampleError",
    "DegenerateSplitError",
    "ConfigError",
    "as_input_vector",
    "check_inputs",
    "check_targets",
]


class NumericError(ArithmeticError):
    """A factorization or linear solve failed.

    ``minor`` is the 1-based index of the failing leading minor when known.
    """

    def __init__(self, message, minor=None):
        super().__init__(message)
        self.minor = minor


class NonFiniteSampleError(ValueError):
    """A training sample contained NaN or infinite values and was dropped."""


class DegenerateSplitError(ValueError):
    """All points of a leaf coincide, so no splitting plane exists."""


class ConfigError(ValueError):
    pass


def as_input_vector(x, n_inputs: int) -> np.ndarray:
    """Cheap per-sample check used on the hot path (no copies for float arrays)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n_inputs,):
        x = x.reshape(-1)
        if x.shape[0] != n_inputs:
            raise ValueError(f"expected an input of dimension {n_inputs}, got {x.shape[0]}")
    return x


def check_inputs(X, n_inputs: int | None = None, allow_nan: bool = False) -> np.ndarray:
    """Validate a 2-D batch of inputs, sklearn style."""
    X = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan" if allow_nan else True)
    if n_inputs is not None and X.shape[1] != n_inputs:
        raise ValueError(f"X has {X.shape[1]} features, but the model expects {n_inputs}")
    return X


def check_targets(y, n_samples: int) -> np.ndarray:
    """Targets as a 2-D ``(n_samples, n_outputs)`` float array."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[0] != n_samples:
        raise ValueError(f"y has shape {y.shape}, expected {n_samples} rows")
    return y
