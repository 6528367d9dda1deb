"""Exact Gaussian process regression with a squared exponential kernel.

The functions here work on plain ``(X, y)`` arrays and a :class:`Hyperparameters`
value.  :class:`FactorizedModel` keeps the Cholesky factor of the noisy kernel
matrix so that streaming data can be appended with a bordered (rank one)
update instead of a full refactorization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack
from scipy.spatial.distance import cdist

from . import _kernels
from .validation import NumericError

__all__ = [
    "Hyperparameters",
    "FactorizedModel",
    "kernel_eval",
    "kernel_matrix",
    "kernel_vector",
    "log_marginal_likelihood",
    "log_likelihood_gradient",
    "model_log_likelihood",
    "model_log_likelihood_gradient",
    "posterior_mean",
    "posterior",
    "insert_point",
    "refresh_factorization",
    "factorize",
    "JITTER_LEVELS",
]

# Relative diagonal jitter (times sigma_f**2); the second level is the retry.
JITTER_LEVELS = (1e-8, 1e-6)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel signal std, per-dimension lengthscales and target noise std."""

    sigma_f: float
    lengthscales: np.ndarray
    sigma_on: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if ls.ndim != 1:
            raise ValueError("lengthscales must be a vector")
        vals = np.concatenate(([self.sigma_f], ls, [self.sigma_on]))
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError(f"hyperparameters must be finite and positive, got {vals}")

    @property
    def n_inputs(self) -> int:
        return self.lengthscales.shape[0]

    def to_vector(self) -> np.ndarray:
        """Return ``(sigma_f, l_1, ..., l_rho, sigma_on)``."""
        return np.concatenate(([self.sigma_f], self.lengthscales, [self.sigma_on]))

    @classmethod
    def from_vector(cls, theta) -> "Hyperparameters":
        theta = np.asarray(theta, dtype=float)
        return cls(float(theta[0]), theta[1:-1].copy(), float(theta[-1]))

    @classmethod
    def _from_positive_vector(cls, theta: np.ndarray) -> "Hyperparameters":
        # skips validation; callers guarantee finite positive entries (e.g. exp of a clipped vector)
        hp = object.__new__(cls)
        object.__setattr__(hp, "sigma_f", float(theta[0]))
        object.__setattr__(hp, "lengthscales", theta[1:-1].copy())
        object.__setattr__(hp, "sigma_on", float(theta[-1]))
        return hp

    def __eq__(self, other):
        if not isinstance(other, Hyperparameters):
            return NotImplemented
        return np.array_equal(self.to_vector(), other.to_vector())

    __hash__ = None


def _check_dim(n: int, hp: Hyperparameters):
    if n != hp.n_inputs:
        raise ValueError(f"input dimension {n} does not match {hp.n_inputs} lengthscales")


def kernel_eval(a, b, hp: Hyperparameters) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"input shapes differ: {a.shape} vs {b.shape}")
    _check_dim(a.shape[0], hp)
    r = (a - b) / hp.lengthscales
    return hp.sigma_f**2 * math.exp(-0.5 * float(r @ r))


def kernel_matrix(X, hp: Hyperparameters) -> np.ndarray:
    """Noise-free kernel matrix ``K_ij = k(x_i, x_j)``."""
    X = np.asarray(X, dtype=float).reshape(-1, hp.n_inputs)
    if X.shape[0] == 0:
        return np.zeros((0, 0))
    Z = X / hp.lengthscales
    return hp.sigma_f**2 * np.exp(-0.5 * cdist(Z, Z, "sqeuclidean"))


def kernel_vector(X, x, hp: Hyperparameters) -> np.ndarray:
    """``k_i(x) = k(x_i, x)`` for every row of ``X``."""
    if X.shape[0] == 0:
        return np.zeros(0)
    d = (X - x) / hp.lengthscales
    return hp.sigma_f**2 * np.exp(-0.5 * np.einsum("ij,ij->i", d, d))


def _cholesky(A: np.ndarray) -> tuple[np.ndarray, int]:
    L, info = lapack.dpotrf(A, lower=1, clean=1)
    return L, info


def _noisy_factor(K: np.ndarray, hp: Hyperparameters) -> tuple[np.ndarray, float]:
    """Cholesky factor of ``K + (sigma_on**2 + jitter) I`` with one jitter retry."""
    n = K.shape[0]
    info = 0
    for rel in JITTER_LEVELS:
        jitter = rel * hp.sigma_f**2
        A = K.copy()
        A.flat[:: n + 1] += hp.sigma_on**2 + jitter
        L, info = _cholesky(A)
        if info == 0:
            return L, jitter
    raise NumericError(
        f"kernel matrix not positive definite after jitter (leading minor {info})",
        minor=int(info),
    )


@dataclass
class FactorizedModel:
    """Training data plus the lower Cholesky factor of ``K + sigma_on**2 I``.

    ``alpha`` is ``(K + sigma_on**2 I)^-1 y``, ``K`` the noise-free kernel
    matrix and ``jitter`` the absolute diagonal jitter folded into the factor.
    """

    X: np.ndarray
    y: np.ndarray
    hyper: Hyperparameters
    factor: np.ndarray
    alpha: np.ndarray
    K: np.ndarray
    jitter: float = field(default=0.0)

    @property
    def n_points(self) -> int:
        return self.y.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.hyper.n_inputs

    def __len__(self):
        return self.n_points


def factorize(X, y, hp: Hyperparameters) -> FactorizedModel:
    """Batch construction of a :class:`FactorizedModel`."""
    X = np.asarray(X, dtype=float).reshape(-1, hp.n_inputs)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
    if X.shape[0] == 0:
        empty = np.zeros((0, 0))
        return FactorizedModel(X, y, hp, empty, np.zeros(0), empty, JITTER_LEVELS[0] * hp.sigma_f**2)
    K = kernel_matrix(X, hp)
    L, jitter = _noisy_factor(K, hp)
    alpha = lapack.dpotrs(L, y, lower=1)[0]
    return FactorizedModel(X, y, hp, L, alpha, K, jitter)


def refresh_factorization(model: FactorizedModel, new_hp: Hyperparameters) -> FactorizedModel:
    """Refactorize the same data under ``new_hp``."""
    return factorize(model.X, model.y, new_hp)


def insert_point(model: FactorizedModel, x, y: float) -> FactorizedModel:
    """Append one training pair using a bordered Cholesky update, O(N^2).

    Falls back to a full refactorization (with the retry jitter) when the new
    pivot is not positive.
    """
    hp = model.hyper
    x = np.asarray(x, dtype=float).reshape(-1)
    _check_dim(x.shape[0], hp)
    n = model.n_points
    X_new = np.empty((n + 1, hp.n_inputs))
    X_new[:n] = model.X
    X_new[n] = x
    y_new = np.empty(n + 1)
    y_new[:n] = model.y
    y_new[n] = y
    if n == 0:
        jitter = JITTER_LEVELS[0] * hp.sigma_f**2
        d = math.sqrt(hp.sigma_f**2 + hp.sigma_on**2 + jitter)
        return FactorizedModel(
            X_new, y_new, hp, np.array([[d]]), np.array([y / d**2]), np.array([[hp.sigma_f**2]]), jitter
        )

    k = kernel_vector(model.X, x, hp)
    L = model.factor
    v = lapack.dtrtrs(L, k, lower=1)[0]
    pivot = hp.sigma_f**2 + hp.sigma_on**2 + model.jitter - float(v @ v)
    if pivot <= 0.0:
        if model.jitter >= JITTER_LEVELS[-1] * hp.sigma_f**2:
            raise NumericError(f"non-positive pivot {pivot:.3e} on insert", minor=n + 1)
        return factorize(X_new, y_new, hp)

    L_new = np.zeros((n + 1, n + 1))
    L_new[:n, :n] = L
    L_new[n, :n] = v
    L_new[n, n] = math.sqrt(pivot)
    K_new = np.empty((n + 1, n + 1))
    K_new[:n, :n] = model.K
    K_new[n, :n] = k
    K_new[:n, n] = k
    K_new[n, n] = hp.sigma_f**2
    alpha = lapack.dpotrs(L_new, y_new, lower=1)[0]
    return FactorizedModel(X_new, y_new, hp, L_new, alpha, K_new, model.jitter)


def posterior(model: FactorizedModel, x) -> tuple[float, float]:
    """Posterior mean and variance at a single input ``x``."""
    hp = model.hyper
    x = np.asarray(x, dtype=float).reshape(-1)
    k = kernel_vector(model.X, x, hp)
    mean = float(k @ model.alpha)
    v = lapack.dtrtrs(model.factor, k, lower=1)[0]
    var = hp.sigma_f**2 - float(v @ v)
    return mean, min(max(var, 0.0), hp.sigma_f**2)


def posterior_mean(model: FactorizedModel, x) -> float:
    if model.n_points == 0:
        return 0.0
    return float(kernel_vector(model.X, x, model.hyper) @ model.alpha)


def log_marginal_likelihood(X, y, hp: Hyperparameters) -> float:
    return model_log_likelihood(factorize(X, y, hp))


def model_log_likelihood(model: FactorizedModel) -> float:
    """Log marginal likelihood evaluated through an existing factorization."""
    if model.n_points == 0:
        raise ValueError("log likelihood needs at least one training point")
    L = model.factor
    n = model.n_points
    return (
        -0.5 * float(model.y @ model.alpha)
        - float(np.sum(np.log(np.diag(L))))
        - 0.5 * n * _LOG_2PI
    )


def log_likelihood_gradient(X, y, hp: Hyperparameters) -> np.ndarray:
    """Gradient of the log marginal likelihood w.r.t. ``(sigma_f, l_1..l_rho, sigma_on)``.

    Component ``i`` is ``0.5 * (alpha^T dK_i alpha - tr(Kinv dK_i))`` with
    ``Kinv = (K + sigma_on**2 I)^-1`` and ``alpha = Kinv y``.
    """
    return model_log_likelihood_gradient(factorize(X, y, hp))


def model_log_likelihood_gradient(model: FactorizedModel) -> np.ndarray:
    if model.n_points == 0:
        raise ValueError("gradient needs at least one training point")
    hp = model.hyper
    Kinv, info = lapack.dpotri(model.factor, lower=1)
    if info != 0:
        raise NumericError("factor inversion failed", minor=int(info))
    # W = alpha alpha^T - Kinv; dpotri fills only the lower triangle
    wk, tr_w, S = _kernels.se_gradient_sums(Kinv, model.alpha, model.K, model.X)

    grad = np.empty(hp.n_inputs + 2)
    # the jitter scales with sigma_f**2, so it is part of the sigma_f derivative
    grad[0] = (wk + model.jitter * tr_w) / hp.sigma_f
    grad[1:-1] = 0.5 * S / hp.lengthscales**3
    grad[-1] = hp.sigma_on * tr_w
    return grad


def warm_up() -> None:
    """Load the compiled helpers so the first timed call does not pay for it."""
    hp = Hyperparameters(1.0, np.ones(1), 0.1)
    model_log_likelihood_gradient(factorize(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]), hp))
