"""Least-squares fitting, information criteria, and win-probability estimation.

Scores follow the standard forms AIC = 2p + n·ln(RSS/n) and
SC = p·ln(n) + n·ln(RSS/n); both are rounded to ``ndec`` decimals before any
comparison, and ties keep the incumbent model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import seeding
from .datagen import Dataset, GroundTruth, gen_coefficients, gen_predictors, gen_response, term_column
from .errors import ConfigurationError, EstimationError, FitError
from .modelspace import ModelSpace, ModelSpec

# An RSS this small relative to y'y means y is numerically in the column
# span: the Gaussian likelihood degenerates and scores are undefined.
_DEGENERATE_RSS_REL = 1e-20

_RANK_TOL_REL = 1e-10


class Statistic(Enum):
    """Model-comparison statistic; smaller scores are better."""

    AIC = "AIC"
    SC = "SC"


def parse_statistic(name: str) -> Statistic:
    """Accepts AIC, SC, or the alias BIC (== SC)."""
    up = name.strip().upper()
    if up == "AIC":
        return Statistic.AIC
    if up in ("SC", "BIC"):
        return Statistic.SC
    raise ConfigurationError(f"unknown comparison statistic {name!r}")


class CompareOutcome(Enum):
    PROPOSED_WINS = "proposed-wins"
    INCUMBENT_STAYS = "incumbent-stays"


@dataclass(frozen=True)
class FitScore:
    """A scored model fit: the rounded criterion value plus its ingredients."""

    rss: float
    p: int
    n: int
    statistic: Statistic
    value: float

    @classmethod
    def compute(cls, rss, p, n, statistic, ndec) -> "FitScore":
        return cls(rss=rss, p=p, n=n, statistic=statistic,
                   value=score(rss, p, n, statistic, ndec))


def _rss_from_columns(columns: list[np.ndarray], y: np.ndarray) -> float:
    """RSS of a least-squares fit via Householder QR of [A | y].

    The design is the standardized-regression one: term columns are centered
    (the response is already standardized to mean zero, so this is exactly a
    shared intercept, which cancels in every score difference) and then
    normalized so the rank test on diag(R) measures true conditioning rather
    than the huge scale spread of interaction products. The trailing diagonal
    entry of R is the residual norm.
    """
    p = len(columns)
    aug = np.empty((y.shape[0], p + 1))
    for j, col in enumerate(columns):
        aug[:, j] = col
    aug[:, p] = y
    aug[:, :p] -= aug[:, :p].mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", aug[:, :p], aug[:, :p]))
    if (norms == 0.0).any():
        raise FitError("design matrix has a zero (constant) column")
    aug[:, :p] /= norms
    r = np.linalg.qr(aug, mode="r")
    diag = np.abs(np.diagonal(r)[:p])
    if diag.min() < _RANK_TOL_REL * diag.max():
        raise FitError("design matrix is rank deficient")
    rss = float(r[p, p]) ** 2
    if rss <= _DEGENERATE_RSS_REL * float(y @ y):
        raise FitError("exact fit: residual sum of squares is numerically zero")
    return rss


def fit_ols(y: np.ndarray, model: ModelSpec, X_raw: np.ndarray) -> tuple[float, int]:
    """Least-squares fit of a model's term design to ``y``.

    Returns (rss, p). Rank-deficient designs and exact fits raise
    :class:`FitError` rather than silently pseudo-inverting.
    """
    cols = [term_column(X_raw, t) for t in model.sorted_terms]
    return _rss_from_columns(cols, y), model.p


def score(rss: float, p: int, n: int, statistic: Statistic, ndec: int) -> float:
    """Criterion value rounded to ``ndec`` decimals.

    AIC = 2p + n·ln(rss/n); SC = p·ln(n) + n·ln(rss/n).
    """
    if rss <= 0.0:
        raise FitError(f"rss must be positive, got {rss}")
    if n <= p:
        raise ConfigurationError(f"need n > p, got n={n}, p={p}")
    goodness = n * math.log(rss / n)
    if statistic is Statistic.AIC:
        penalty = 2.0 * p
    else:
        penalty = p * math.log(n)
    return round(penalty + goodness, ndec)


def compare(mp: ModelSpec, mg: ModelSpec, dataset: Dataset, statistic: Statistic,
            ndec: int) -> CompareOutcome:
    """One idealized comparison: the proposal must win strictly.

    Equal models and rounded-score ties keep the incumbent.
    """
    if mp.terms == mg.terms:
        return CompareOutcome.INCUMBENT_STAYS
    n = dataset.y.shape[0]
    rss_p, p_p = fit_ols(dataset.y, mp, dataset.X_raw)
    rss_g, p_g = fit_ols(dataset.y, mg, dataset.X_raw)
    s_p = score(rss_p, p_p, n, statistic, ndec)
    s_g = score(rss_g, p_g, n, statistic, ndec)
    return CompareOutcome.PROPOSED_WINS if s_p < s_g else CompareOutcome.INCUMBENT_STAYS


@dataclass(frozen=True, eq=False)
class WinMatrix:
    """Monte Carlo estimates w[l, i] of P(S(M_l) < S(M_i)) under a true model.

    Diagonal entries are 1 by convention. Off-diagonal estimates are clipped
    to [1/(2V), 1 - 1/(2V)]: the exact win probabilities are strictly
    positive (Gaussian noise, full-support coefficients), so a raw zero is a
    resolution artifact that would break ergodicity of the induced chain.
    The clip is below Monte Carlo resolution and keeps w[l,i] + w[i,l] <= 1.
    """

    w: np.ndarray
    V: int
    truth: GroundTruth
    statistic: Statistic
    ndec: int
    labels: tuple[str, ...]

    @property
    def L(self) -> int:
        return self.w.shape[0]


def _score_columns(term_cols: dict[int, np.ndarray], y: np.ndarray,
                   models: tuple[ModelSpec, ...]) -> np.ndarray:
    """RSS for every model on one dataset, sharing term columns."""
    out = np.empty(len(models))
    for m_idx, model in enumerate(models):
        cols = [term_cols[t] for t in model.sorted_terms]
        out[m_idx] = _rss_from_columns(cols, y)
    return out


def _replicate_rss(truth: GroundTruth, space: ModelSpace, rng) -> np.ndarray:
    """One win-matrix replicate: fresh X, fresh beta, fresh noise; all-model RSS."""
    X = gen_predictors(truth.n, space.k, truth.correlation, rng)
    beta = gen_coefficients(truth.true_model, rng)
    ds = gen_response(X, replace(truth, beta=beta), rng)
    term_cols = {t: term_column(X, t) for t in range(1, 1 << space.k)}
    return _score_columns(term_cols, ds.y, space.models)


def estimate_win_matrices(truth: GroundTruth, space: ModelSpace,
                          statistics, V: int, ndec: int, rng) -> dict[Statistic, WinMatrix]:
    """Estimate win matrices for several statistics from shared replicates.

    Each replicate draws an independent dataset (fresh predictors,
    coefficients, and noise), scores every model in the space, and each
    ordered pair's estimate is the fraction of replicates where the row
    model's rounded score is strictly below the column model's. Replicates
    are seeded individually from the input seed, so results do not depend on
    evaluation order. More than 1% failed fits aborts the estimate.
    """
    if V < 1000:
        raise ConfigurationError(f"V={V} too small; need V >= 1000 replicates")
    statistics = tuple(statistics)
    L = space.L
    n = truth.n
    p_vec = np.array([m.p for m in space.models], dtype=float)
    seeds = seeding.spawn(rng, V)
    rss = np.empty((V, L))
    max_failures = max(1, int(0.01 * V))
    failures = 0
    for v, child in enumerate(seeds):
        attempt_seed, attempt = child, 0
        while True:
            try:
                rss[v] = _replicate_rss(truth, space, seeding.generator(attempt_seed))
                break
            except FitError:
                failures += 1
                if failures > max_failures:
                    raise EstimationError(
                        f"more than {max_failures} failed fits in {V} replicates"
                    ) from None
                attempt += 1
                attempt_seed = seeding.labeled(child, attempt)

    out = {}
    log_term = n * np.log(rss / n)
    for statistic in statistics:
        penalty = 2.0 * p_vec if statistic is Statistic.AIC else p_vec * math.log(n)
        scores = np.round(penalty + log_term, ndec)
        wins = (scores[:, :, None] < scores[:, None, :]).mean(axis=0)
        clip = 0.5 / V
        w = np.clip(wins, clip, 1.0 - clip)
        np.fill_diagonal(w, 1.0)
        out[statistic] = WinMatrix(w=w, V=V, truth=truth, statistic=statistic,
                                   ndec=ndec, labels=space.labels())
    return out


def estimate_win_matrix(truth: GroundTruth, space: ModelSpace, statistic: Statistic,
                        V: int, ndec: int, rng) -> WinMatrix:
    """Single-statistic convenience wrapper around :func:`estimate_win_matrices`."""
    return estimate_win_matrices(truth, space, (statistic,), V, ndec, rng)[statistic]
