#!/usr/bin/env python3
"""
GP Core - Gaussian-Process Surrogate for Threshold Tuning
RBF-kernel GP regression through a Cholesky factorization, with the
lower-confidence-bound acquisition minimized by the BO loop
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import linalg, optimize
from scipy.spatial.distance import cdist

from transition_config import TRANSITION_CONFIG
from transition_errors import InvalidInputError, NumericalFailureError

logger = logging.getLogger(__name__)

MAX_JITTER_ESCALATIONS = 3


@dataclass(frozen=True)
class GpHyper:
    lengthscale: float
    signal_variance: float
    noise_variance: float
    jitter: float = TRANSITION_CONFIG["gp"]["jitter"]

    def __post_init__(self):
        for name in ("lengthscale", "signal_variance", "noise_variance", "jitter"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidInputError(f"GP hyperparameter {name} must be > 0, got {value}")


@dataclass
class GpModel:
    """
    Fitted posterior. X holds normalized inputs, y the centered targets;
    chol is the lower factor of K + (noise + jitter_used) I and alpha solves it against y.
    """

    X: np.ndarray
    y: np.ndarray
    y_mean: float
    hyper: GpHyper
    chol: np.ndarray
    alpha: np.ndarray
    jitter_used: float

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def diagonal_noise(self):
        return self.hyper.noise_variance + self.jitter_used


def default_hyper(y, settings=None) -> GpHyper:
    """Length-scale 0.2 on the unit cube, signal variance from the data, tiny relative noise."""
    settings = settings or TRANSITION_CONFIG["gp"]
    y = np.asarray(y, dtype=float)
    signal = max(float(np.var(y)) if y.size else 0.0, settings["min_signal_variance"])
    return GpHyper(
        lengthscale=settings["lengthscale"],
        signal_variance=signal,
        noise_variance=settings["noise_ratio"] * signal,
        jitter=settings["jitter"],
    )


def _as_points(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise InvalidInputError(f"Expected a 2-D array of points, got shape {X.shape}")
    return X


def rbf_kernel(x, x_prime, hyper: GpHyper) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if x.shape != x_prime.shape:
        raise InvalidInputError(f"Kernel inputs differ in dimension: {x.shape} vs {x_prime.shape}")
    sq = float(np.sum((x - x_prime) ** 2))
    return float(hyper.signal_variance * np.exp(-sq / (2.0 * hyper.lengthscale ** 2)))


def rbf_gram(A, B, hyper: GpHyper) -> np.ndarray:
    A, B = _as_points(A), _as_points(B)
    if A.shape[1] != B.shape[1]:
        raise InvalidInputError(f"Point sets differ in dimension: {A.shape[1]} vs {B.shape[1]}")
    sq = cdist(A, B, metric="sqeuclidean")
    return hyper.signal_variance * np.exp(-sq / (2.0 * hyper.lengthscale ** 2))


def _factorize(K, base_noise, jitter):
    n = K.shape[0]
    current = jitter
    for attempt in range(MAX_JITTER_ESCALATIONS + 1):
        try:
            factor, _ = linalg.cho_factor(K + (base_noise + current) * np.eye(n), lower=True)
            return np.tril(factor), current
        except linalg.LinAlgError:
            logger.debug(f"Cholesky failed with jitter {current:.1e} (attempt {attempt + 1})")
            current *= 10.0
    raise NumericalFailureError(
        f"Covariance matrix not positive definite after {MAX_JITTER_ESCALATIONS} jitter escalations")


def gp_fit(X, y, hyper: Optional[GpHyper] = None) -> GpModel:
    """Fit the GP posterior on (X, y); y is centered and its mean is the prior mean."""
    X = _as_points(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise InvalidInputError("gp_fit needs at least one observation")
    if X.shape[0] != y.shape[0]:
        raise InvalidInputError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InvalidInputError("GP training data must be finite")

    hyper = hyper or default_hyper(y)
    y_mean = float(y.mean())
    centered = y - y_mean

    K = rbf_gram(X, X, hyper)
    chol, jitter_used = _factorize(K, hyper.noise_variance, hyper.jitter)
    alpha = linalg.cho_solve((chol, True), centered)
    return GpModel(X=X, y=centered, y_mean=y_mean, hyper=hyper, chol=chol, alpha=alpha, jitter_used=jitter_used)


def gp_predict(model: GpModel, x_star):
    """
    Posterior mean and standard deviation.

    A 1-D x_star of length d is one point and returns scalars; a 2-D array returns
    arrays. Far from the data the mean reverts to the sample mean of y.
    """
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    single = x_star.ndim == 1 and x_star.shape[0] == model.dim
    points = x_star.reshape(1, -1) if single else _as_points(x_star)
    if points.shape[1] != model.dim:
        raise InvalidInputError(f"Prediction points have dimension {points.shape[1]}, model has {model.dim}")

    Ks = rbf_gram(model.X, points, model.hyper)
    mean = Ks.T @ model.alpha + model.y_mean
    v = linalg.solve_triangular(model.chol, Ks, lower=True)
    var = model.hyper.signal_variance - np.sum(v ** 2, axis=0)
    std = np.sqrt(np.clip(var, 0.0, None))

    if single:
        return float(mean[0]), float(std[0])
    return mean, std


def acquisition_value(mean, std, k):
    if not 0.0 <= k <= 1.0:
        raise InvalidInputError(f"k must lie in [0, 1], got {k}")
    return k * np.asarray(mean) - (1.0 - k) * np.asarray(std)


def acquisition(model: GpModel, x, k=None):
    """Lower confidence bound k*mean - (1-k)*std; lower is more promising."""
    k = TRANSITION_CONFIG["bo"]["k"] if k is None else k
    mean, std = gp_predict(model, x)
    value = acquisition_value(mean, std, k)
    return float(value) if np.ndim(value) == 0 else value


# =============================================================================
# OPTIONAL MARGINAL-LIKELIHOOD REFIT
# =============================================================================

def negative_log_marginal_likelihood(X, y, hyper: GpHyper) -> float:
    X = _as_points(X)
    centered = np.asarray(y, dtype=float).ravel()
    centered = centered - centered.mean()
    K = rbf_gram(X, X, hyper)
    try:
        chol, _ = _factorize(K, hyper.noise_variance, hyper.jitter)
    except NumericalFailureError:
        return np.inf
    alpha = linalg.cho_solve((chol, True), centered)
    n = centered.size
    return float(0.5 * centered @ alpha + np.sum(np.log(np.diag(chol))) + 0.5 * n * np.log(2.0 * np.pi))


def refit_hyper(X, y, initial: Optional[GpHyper] = None) -> GpHyper:
    """Maximize the marginal likelihood over log length-scale, signal and noise variance (L-BFGS-B)."""
    initial = initial or default_hyper(y)
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 3:
        logger.info("Fewer than 3 observations; keeping default GP hyperparameters")
        return initial

    scale = max(float(np.var(y)), TRANSITION_CONFIG["gp"]["min_signal_variance"])
    bounds = [(np.log(1e-2), np.log(10.0)),
              (np.log(scale * 1e-3), np.log(scale * 1e3)),
              (np.log(scale * 1e-10), np.log(scale))]

    def objective(theta):
        candidate = replace(initial, lengthscale=float(np.exp(theta[0])),
                            signal_variance=float(np.exp(theta[1])),
                            noise_variance=float(np.exp(theta[2])))
        value = negative_log_marginal_likelihood(X, y, candidate)
        return value if np.isfinite(value) else 1e12

    start = np.log([initial.lengthscale, initial.signal_variance, initial.noise_variance])
    start = np.clip(start, [b[0] for b in bounds], [b[1] for b in bounds])
    result = optimize.minimize(objective, start, method="L-BFGS-B", bounds=bounds)
    if not result.success:
        logger.warning(f"GP hyperparameter refit did not converge ({result.message}); keeping defaults")
        return initial

    fitted = replace(initial, lengthscale=float(np.exp(result.x[0])),
                     signal_variance=float(np.exp(result.x[1])),
                     noise_variance=float(np.exp(result.x[2])))
    logger.debug(f"GP refit: {fitted}")
    return fitted


def model_to_dict(model: GpModel) -> dict:
    """JSON-ready dump of a fitted model for debugging."""
    return {
        "X": model.X.tolist(),
        "y_centered": model.y.tolist(),
        "y_mean": model.y_mean,
        "hyper": {
            "lengthscale": model.hyper.lengthscale,
            "signal_variance": model.hyper.signal_variance,
            "noise_variance": model.hyper.noise_variance,
            "jitter": model.hyper.jitter,
        },
        "jitter_used": model.jitter_used,
        "alpha": model.alpha.tolist(),
    }
