"""Synthetic predictor, coefficient, and response generation.

Factor values are uniform integers on {1..100}; factors 2..k are correlated
with factor 1 through a Gaussian copula that preserves the uniform marginals
exactly. Responses come from a designated true model at a calibrated
noise-to-signal level and are standardized to mean 0, sd 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, GenerationError
from .modelspace import ModelSpec, term_factors, term_order

# Mean of the uniform distribution on {1..100}; the point at which the
# deterministic part is pinned to 1 - sigma_level.
MEAN_FACTOR_VALUE = 50.5

MAX_CORRELATION = 0.9


CALIBRATIONS = ("expectation-ratio", "unit-mean")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """The data-generating configuration: model, coefficients, noise, design.

    ``sigma_level`` is the noise fraction f. Either calibration pins the
    error-variance to deterministic-expectation ratio at exactly
    f : (1-f) per dataset (0.2 -> 1:4, 0.5 -> 1:1, 0.8 -> 4:1):

    - ``expectation-ratio`` (default): the deterministic part keeps the raw
      term scale and the noise variance is set to E(y|mu_x) * f/(1-f).
    - ``unit-mean``: the deterministic part is rescaled so its value at the
      mean predictor vector is 1-f, and the noise variance is f. Same ratio,
      but the rescaling shrinks the signal *variance* relative to the noise
      by roughly E(y|mu_x)/(1-f), giving a much harder detection problem.

    ``beta`` may be None for uses that redraw coefficients per dataset
    (win-probability estimation); simulation runs fix one draw up front.
    """

    true_model: ModelSpec
    sigma_level: float
    correlation: float
    n: int
    beta: np.ndarray | None = None
    calibration: str = "expectation-ratio"

    def __post_init__(self):
        if not 0.0 < self.sigma_level < 1.0:
            raise ConfigurationError(f"sigma_level {self.sigma_level} outside (0, 1)")
        if not 0.0 <= self.correlation < MAX_CORRELATION:
            raise ConfigurationError(
                f"correlation {self.correlation} outside [0, {MAX_CORRELATION}); "
                "near-collinear predictors are rejected"
            )
        if self.n < 3:
            raise ConfigurationError(f"sample size {self.n} too small")
        if self.calibration not in CALIBRATIONS:
            raise ConfigurationError(
                f"unknown noise calibration {self.calibration!r}; expected one of {CALIBRATIONS}"
            )
        if self.beta is not None:
            beta = np.asarray(self.beta, dtype=float)
            if beta.shape != (self.true_model.p,):
                raise ConfigurationError(
                    f"beta has {beta.shape} entries for a {self.true_model.p}-term model"
                )
            if (beta < 0).any() or abs(beta.sum() - 1.0) > 1e-9:
                raise ConfigurationError("beta must be nonnegative and sum to 1")
            object.__setattr__(self, "beta", beta)


@dataclass(frozen=True, eq=False)
class Dataset:
    """One synthetic sample: raw integer factors and the standardized response."""

    X_raw: np.ndarray
    y: np.ndarray


def latent_correlation(target: float) -> float:
    """Gaussian-copula latent correlation giving a target Pearson correlation
    between uniform marginals: rho* = 2 sin(pi r / 6)."""
    return 2.0 * math.sin(math.pi * target / 6.0)


def gen_predictors(n: int, k: int, correlation: float, rng: np.random.Generator) -> np.ndarray:
    """Draw an n x k matrix of factor values, uniform integers on {1..100}.

    Columns 2..k share a latent Gaussian factor with column 1 so their
    Pearson correlation with it matches ``correlation``; marginals stay
    exactly uniform because the copula only reorders quantiles.
    """
    if not 0.0 <= correlation < MAX_CORRELATION:
        raise ConfigurationError(
            f"correlation {correlation} outside [0, {MAX_CORRELATION})"
        )
    if n < k + 2:
        raise ConfigurationError(f"need n >= k+2 samples, got n={n}, k={k}")
    z = rng.standard_normal((n, k))
    if k > 1 and correlation > 0.0:
        rho = latent_correlation(correlation)
        z[:, 1:] = rho * z[:, :1] + math.sqrt(1.0 - rho * rho) * z[:, 1:]
    u = ndtr(z)
    return np.floor(u * 100.0).astype(np.int64) + 1


def gen_coefficients(true_model: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Coefficients for the true model's terms: flat Dirichlet on the simplex."""
    return rng.dirichlet(np.ones(true_model.p))


def term_column(X_raw: np.ndarray, mask: int) -> np.ndarray:
    """Design column for one term: elementwise product of its raw factors."""
    factors = term_factors(mask)
    col = X_raw[:, factors[0] - 1].astype(np.float64)
    for j in factors[1:]:
        col = col * X_raw[:, j - 1]
    return col


def design_matrix(X_raw: np.ndarray, model: ModelSpec) -> np.ndarray:
    """n x p design for a model, columns in canonical term order."""
    return np.column_stack([term_column(X_raw, t) for t in model.sorted_terms])


def deterministic_part(X_raw: np.ndarray, model: ModelSpec, beta: np.ndarray) -> np.ndarray:
    return design_matrix(X_raw, model) @ beta


def expectation_at_mean(model: ModelSpec, beta: np.ndarray) -> float:
    """Model value with every factor at its mean (50.5 plugged into products)."""
    powers = np.array([MEAN_FACTOR_VALUE ** term_order(t) for t in model.sorted_terms])
    return float(beta @ powers)


def standardize(v: np.ndarray) -> np.ndarray:
    """Center and scale to sample mean 0, sample sd 1 (ddof=1)."""
    sd = v.std(ddof=1)
    if sd == 0.0 or not np.isfinite(sd):
        raise GenerationError("cannot standardize a zero-variance response")
    return (v - v.mean()) / sd


def noise_sd(truth: GroundTruth, beta: np.ndarray) -> float:
    """Error standard deviation fixing sigma^2 : E(y|mu_x) at f : (1-f)."""
    f = truth.sigma_level
    if truth.calibration == "unit-mean":
        return math.sqrt(f)
    e_mu = expectation_at_mean(truth.true_model, beta)
    return math.sqrt(e_mu * f / (1.0 - f))


def gen_response(X_raw: np.ndarray, truth: GroundTruth, rng: np.random.Generator) -> Dataset:
    """Generate a standardized response from the true model.

    Gaussian noise is calibrated per ``truth.calibration`` so that the error
    variance to deterministic-expectation ratio is exactly
    sigma_level : (1 - sigma_level), then the response is standardized to
    sample mean 0, sample sd 1.
    """
    if truth.beta is None:
        raise ConfigurationError("gen_response needs truth.beta; draw it with gen_coefficients")
    if X_raw.shape[0] != truth.n:
        raise ConfigurationError(
            f"X_raw has {X_raw.shape[0]} rows but truth.n = {truth.n}"
        )
    g = deterministic_part(X_raw, truth.true_model, truth.beta)
    if np.ptp(g) == 0.0:
        raise GenerationError("deterministic part is constant; X carries no signal")
    if truth.calibration == "unit-mean":
        g = (1.0 - truth.sigma_level) / expectation_at_mean(truth.true_model, truth.beta) * g
    y_star = g + noise_sd(truth, truth.beta) * rng.standard_normal(truth.n)
    return Dataset(X_raw=X_raw, y=standardize(y_star))


def gen_dataset(truth: GroundTruth, rng: np.random.Generator, k: int) -> Dataset:
    """Fresh predictors plus a fresh response in one call."""
    X = gen_predictors(truth.n, k, truth.correlation, rng)
    return gen_response(X, truth, rng)
