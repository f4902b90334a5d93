"""Exact Markov-chain analysis of the replication-free consensus process.

The consensus model evolves as a first-order chain whose transition
probabilities combine three ingredients: how often each strategy is drawn,
how likely that strategy is to propose each model given the incumbent, and
how likely the proposal is to win the score comparison. With soft
strategies the chain is ergodic, so the stationary distribution, mean first
passage times, and per-model stay probabilities are all linear-algebra
exercises on a 14x14 (or smaller) matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve

from .errors import AnalysisError, ConfigurationError
from .modelspace import ModelSpace
from .selection import WinMatrix
from .strategies import Mode, Population, StrategyKind, proposal_distribution

_CONSISTENCY_TOL = 1e-9


def proposal_mixture(population: Population, space: ModelSpace) -> np.ndarray:
    """Row-stochastic matrix mix[i, l]: probability that a randomly drawn
    scientist proposes model l when the consensus is model i."""
    L = space.L
    mix = np.zeros((L, L))
    weights = {
        StrategyKind.TESS: population.tess,
        StrategyKind.MAVE: population.mave,
        StrategyKind.BO: population.bo,
    }
    for i, mg in enumerate(space.models):
        row = np.zeros(L)
        for kind, weight in weights.items():
            if weight > 0.0:
                row += weight * proposal_distribution(kind, mg, space, population.mode)
        mix[i] = row
    return mix


def _require_chain_population(population: Population) -> None:
    if population.has_replicator:
        raise ConfigurationError(
            "chain analysis requires a replicator-free population: replication "
            "makes the process a higher-order chain (use the simulation engine)"
        )
    if population.mode is not Mode.SOFT:
        raise ConfigurationError("chain analysis requires soft strategies (ergodicity)")


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """One-step consensus transition probabilities P[i, l]."""

    P: np.ndarray
    labels: tuple[str, ...]

    @property
    def L(self) -> int:
        return self.P.shape[0]


def build_transition_matrix(win: WinMatrix, population: Population,
                            space: ModelSpace) -> TransitionMatrix:
    """Assemble the consensus chain from win probabilities and a population.

    Off-diagonal entries are win[l, i] * mix[i, l]; the diagonal is the
    complement, cross-checked against the direct stay-probability formula
    (incumbent retains on strict incumbent wins, ties, and self-proposals).
    """
    _require_chain_population(population)
    if win.L != space.L:
        raise ConfigurationError("win matrix and model space sizes disagree")
    mix = proposal_mixture(population, space)
    P = win.w.T * mix
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    for i in range(space.L):
        direct = stickiness_from_parts(win.w, mix, i)
        if abs(direct - P[i, i]) > _CONSISTENCY_TOL:
            raise AnalysisError(
                f"stay-probability cross-check failed at model {i}: "
                f"{direct} vs diagonal {P[i, i]}"
            )
    if (P < 0.0).any() or (P > 1.0).any():
        raise AnalysisError("transition probabilities left [0, 1]")
    return TransitionMatrix(P=P, labels=win.labels)


def stickiness_from_parts(w: np.ndarray, mix: np.ndarray, i: int) -> float:
    """Stay probability of model i: sum over proposals of (retain | proposal).

    A proposal l != i is retained against with probability 1 - w[l, i]
    (strict incumbent wins plus rounded-score ties); a self-proposal always
    retains.
    """
    retain = 1.0 - w[:, i]
    retain[i] = 1.0
    return float(mix[i] @ retain)


def stickiness(win: WinMatrix, population: Population, space: ModelSpace,
               model_index: int) -> float:
    """Probability the consensus stays at ``model_index`` for one step."""
    _require_chain_population(population)
    mix = proposal_mixture(population, space)
    return stickiness_from_parts(win.w, mix, model_index)


def stationary_distribution(P: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Unique fixed point pi of an ergodic chain, via a direct linear solve.

    Solves pi (P - I) = 0 with the normalization sum(pi) = 1 replacing one
    equation, then verifies the residual.
    """
    L = P.shape[0]
    A = P.T - np.eye(L)
    A[-1, :] = 1.0
    b = np.zeros(L)
    b[-1] = 1.0
    try:
        pi = solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise AnalysisError(f"stationary solve failed: {exc}") from exc
    residual = np.abs(pi @ P - pi).max()
    if not np.isfinite(pi).all() or residual > tol:
        raise AnalysisError(f"stationary residual {residual} exceeds tol {tol}")
    return pi


def mean_first_passage(P: np.ndarray, target_index: int) -> np.ndarray:
    """Expected steps to first reach ``target_index`` from every model.

    Solves tau_i = 1 + sum_{l != T} P[i, l] tau_l. The target entry is the
    expected return time to the target.
    """
    L = P.shape[0]
    masked = P.copy()
    masked[:, target_index] = 0.0
    A = np.eye(L) - masked
    try:
        tau = solve(A, np.ones(L))
    except np.linalg.LinAlgError as exc:
        raise AnalysisError(f"first-passage solve failed: {exc}") from exc
    if not np.isfinite(tau).all() or (tau < 1.0 - 1e-9).any():
        raise AnalysisError("first-passage solution is not a valid time vector")
    return tau


@dataclass(frozen=True, eq=False)
class ChainSummary:
    """Stationary distribution, first-passage times, and stay probabilities
    for one (win matrix, population) pair with a designated true model."""

    transition: TransitionMatrix
    stationary: np.ndarray
    mfpt: np.ndarray
    stickiness: np.ndarray
    true_index: int

    @property
    def occupancy_of_truth(self) -> float:
        return float(self.stationary[self.true_index])

    @property
    def mean_mfpt(self) -> float:
        """Mean first-passage time over initial models other than the target."""
        mask = np.ones(len(self.mfpt), dtype=bool)
        mask[self.true_index] = False
        return float(self.mfpt[mask].mean())


def summarize_chain(win: WinMatrix, population: Population, space: ModelSpace,
                    true_index: int, tol: float = 1e-10) -> ChainSummary:
    """Full analysis bundle for one true model and population."""
    tm = build_transition_matrix(win, population, space)
    pi = stationary_distribution(tm.P, tol=tol)
    tau = mean_first_passage(tm.P, true_index)
    sticky = np.diagonal(tm.P).copy()
    return ChainSummary(transition=tm, stationary=pi, mfpt=tau,
                        stickiness=sticky, true_index=true_index)


def simulate_chain(P: np.ndarray, steps: int, rng, start: int | None = None) -> np.ndarray:
    """Directly simulate a chain given its transition matrix (oracle helper)."""
    L = P.shape[0]
    cum = np.cumsum(P, axis=1)
    state = int(rng.integers(L)) if start is None else start
    path = np.empty(steps + 1, dtype=np.int64)
    path[0] = state
    draws = rng.random(steps)
    for t in range(steps):
        state = min(int(np.searchsorted(cum[state], draws[t], side="right")), L - 1)
        path[t + 1] = state
    return path
