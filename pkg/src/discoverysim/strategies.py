"""Scientist research strategies: proposal distributions and populations.

Four strategy kinds exist. Tess refines the consensus by moving one main
effect at a time; Mave proposes uniformly from the whole space; Bo grows the
consensus by one interaction; Rey replicates the previous experiment (a
control-flow rule in the simulation engine, not a proposal distribution).

In *soft* mode every non-Rey strategy leaks a small probability to all
models, which keeps the induced consensus chain ergodic. In *hard* mode
Tess and Bo propose only strategy-consistent models; the residual
1/(m+1) probability mass goes to a self-proposal of the current consensus
(a no-op experiment) by default, or is renormalized over the neighborhood
with ``hard_residual="renormalize"``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError
from .modelspace import ModelSpace, ModelSpec, bo_moves, tess_neighbors


class StrategyKind(Enum):
    REY = "rey"
    TESS = "tess"
    MAVE = "mave"
    BO = "bo"


STRATEGY_ORDER = (StrategyKind.REY, StrategyKind.TESS, StrategyKind.MAVE, StrategyKind.BO)


class Mode(Enum):
    HARD = "hard"
    SOFT = "soft"


PRESET_NAMES = ("rey-dominant", "tess-dominant", "mave-dominant", "bo-dominant", "all-equal")

_THIRD = 1.0 / 3.0
_MINOR = 1.0 / 300.0

# (rey, tess, mave, bo) weights per preset; the replicator-free presets put
# Rey at exactly zero so the first-order chain theory applies.
_PRESETS_NO_REPLICATOR = {
    "tess-dominant": (0.0, 0.99, 0.005, 0.005),
    "mave-dominant": (0.0, 0.005, 0.99, 0.005),
    "bo-dominant": (0.0, 0.005, 0.005, 0.99),
    "all-equal": (0.0, _THIRD, _THIRD, _THIRD),
}
_PRESETS_WITH_REPLICATOR = {
    "rey-dominant": (0.99, _MINOR, _MINOR, _MINOR),
    "tess-dominant": (_MINOR, 0.99, _MINOR, _MINOR),
    "mave-dominant": (_MINOR, _MINOR, 0.99, _MINOR),
    "bo-dominant": (_MINOR, _MINOR, _MINOR, 0.99),
    "all-equal": (0.25, 0.25, 0.25, 0.25),
}


@dataclass(frozen=True)
class Population:
    """Strategy weights plus the hard/soft proposal mode."""

    rey: float
    tess: float
    mave: float
    bo: float
    mode: Mode = Mode.SOFT
    name: str = "custom"

    def __post_init__(self):
        w = self.as_array()
        if (w < 0).any():
            raise ConfigurationError("strategy weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"strategy weights sum to {w.sum()!r}, not 1")

    def as_array(self) -> np.ndarray:
        """Weights in STRATEGY_ORDER (Rey, Tess, Mave, Bo)."""
        return np.array([self.rey, self.tess, self.mave, self.bo])

    @property
    def has_replicator(self) -> bool:
        return self.rey > 0.0

    @classmethod
    def preset(cls, name: str, replicator: bool, mode: Mode = Mode.SOFT) -> "Population":
        """A named population mixture.

        ``replicator`` selects between the two preset families: replicator
        presets give the three minority types 1/300 each (all-equal: 0.25
        each); replicator-free presets give minorities 0.005 (all-equal:
        equal thirds, no Rey).
        """
        table = _PRESETS_WITH_REPLICATOR if replicator else _PRESETS_NO_REPLICATOR
        if name not in table:
            extra = "" if replicator else " (rey-dominant requires replicator=True)"
            raise ConfigurationError(f"unknown population preset {name!r}{extra}")
        rey, tess, mave, bo = table[name]
        return cls(rey=rey, tess=tess, mave=mave, bo=bo, mode=mode, name=name)

    @classmethod
    def from_counts(cls, n_rey: int, n_tess: int, n_mave: int, n_bo: int,
                    mode: Mode = Mode.SOFT, name: str = "custom") -> "Population":
        """Normalized integer head counts (e.g. 300/1/1/1 -> 0.9901/0.0033/...)."""
        counts = np.array([n_rey, n_tess, n_mave, n_bo], dtype=float)
        if (counts < 0).any() or counts.sum() <= 0:
            raise ConfigurationError("population counts must be nonnegative and not all zero")
        w = counts / counts.sum()
        return cls(rey=w[0], tess=w[1], mave=w[2], bo=w[3], mode=mode, name=name)


def _neighborhood(strategy: StrategyKind, mg: ModelSpec, space: ModelSpace) -> list[int]:
    if strategy is StrategyKind.TESS:
        moves = tess_neighbors(mg, space)
    elif strategy is StrategyKind.BO:
        moves = bo_moves(mg, space)
    else:
        raise ConfigurationError(f"{strategy} has no model neighborhood")
    return sorted(space.index_of(m) for m in moves)


def proposal_distribution(strategy: StrategyKind, mg: ModelSpec, space: ModelSpace,
                          mode: Mode, hard_residual: str = "self") -> np.ndarray:
    """Proposal probabilities over the whole space for one strategy.

    Mave is uniform 1/L in both modes. For Tess and Bo with m neighborhood
    models: each neighbor gets 1/(m+1); in soft mode the remaining models
    (including the consensus itself) share the leftover mass at
    1/[(L-m)(m+1)] each, while in hard mode the leftover 1/(m+1) goes to a
    self-proposal (or, with ``hard_residual="renormalize"``, neighbors get
    1/m and the consensus nothing). Rey has no proposal distribution.
    """
    if strategy is StrategyKind.REY:
        raise ConfigurationError("the replicator does not propose models")
    if hard_residual not in ("self", "renormalize"):
        raise ConfigurationError(f"unknown hard_residual policy {hard_residual!r}")
    L = space.L
    if strategy is StrategyKind.MAVE:
        return np.full(L, 1.0 / L)
    mg_index = space.index_of(mg)
    neighbors = _neighborhood(strategy, mg, space)
    m = len(neighbors)
    probs = np.zeros(L)
    if m == 0:
        if mode is Mode.HARD:
            probs[mg_index] = 1.0
        else:
            probs[:] = 1.0 / L
        return probs
    share = 1.0 / (m + 1)
    if mode is Mode.SOFT:
        probs[:] = 1.0 / ((L - m) * (m + 1))
        probs[neighbors] = share
    else:
        if hard_residual == "self":
            probs[neighbors] = share
            probs[mg_index] = share
        else:
            probs[neighbors] = 1.0 / m
    return probs


def sample_strategy(population: Population, rng: np.random.Generator) -> StrategyKind:
    """Categorical draw of a scientist type by population weights."""
    u = rng.random()
    acc = 0.0
    for kind, weight in zip(STRATEGY_ORDER, population.as_array()):
        acc += weight
        if u < acc:
            return kind
    return STRATEGY_ORDER[-1]


def sample_proposal(dist: np.ndarray, rng: np.random.Generator) -> int:
    """Categorical draw of a model index from a proposal distribution."""
    total = dist.sum()
    if abs(total - 1.0) > 1e-9 or (dist < 0).any():
        raise ConfigurationError("proposal distribution is not a probability vector")
    idx = int(np.searchsorted(np.cumsum(dist), rng.random(), side="right"))
    return min(idx, dist.shape[0] - 1)
