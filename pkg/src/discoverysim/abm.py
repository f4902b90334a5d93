"""Forward simulation of the discovery process, including replication.

Each step one scientist runs an idealized experiment: a proposal is drawn
from their strategy (or, for the replicator, the previous experiment's
proposed/incumbent pair is rerun on fresh data), a fresh dataset is
generated from the true model, and the winner of the score comparison
becomes the consensus. Replication makes the process path dependent, which
is why these properties come from simulation rather than the chain algebra
in :mod:`discoverysim.chain`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from . import seeding
from .datagen import (
    MEAN_FACTOR_VALUE,
    GroundTruth,
    gen_coefficients,
    latent_correlation,
    standardize,
)
from .errors import ConfigurationError, FitError, GenerationError
from .modelspace import ModelSpace, term_factors
from .selection import Statistic, _rss_from_columns
from .strategies import Population, StrategyKind, proposal_distribution

_MAX_STEP_RETRIES = 100


@dataclass(slots=True)
class ExperimentRecord:
    """One step of the process: who ran what against what, and the outcome.

    ``reproduced`` is set only on replication steps: True when the
    consensus-update outcome matched the replicated experiment's outcome
    (equivalently, the consensus did not move).
    """

    t: int
    strategy: StrategyKind
    proposed: int
    incumbent: int
    winner: int
    was_replication: bool
    reproduced: bool | None = None


@dataclass(slots=True)
class SimulationState:
    """Mutable process state threaded through steps."""

    t: int
    global_index: int
    predecessor: ExperimentRecord | None
    beta: np.ndarray | None


@dataclass(frozen=True)
class AbmMetrics:
    """The four discovery properties measured on one run.

    Conditional reproducibility rates are None (not 0) when no replication
    event of that kind occurred. ``first_passage`` counts steps from the
    initial consensus, is 0 when the run starts at the true model, and holds
    the horizon with ``first_passage_censored=True`` when the true model was
    never reached.
    """

    time_at_true: float
    first_passage: int
    first_passage_censored: bool
    stickiness_emp: float | None
    repro_overall: float | None
    repro_at_true: float | None
    repro_not_true: float | None
    v_total: int
    v_true: int
    v_not: int
    fit_retries: int = 0


@dataclass(frozen=True, eq=False)
class RunSpec:
    """Everything one simulation run needs besides a seed.

    ``truth.beta`` may be preset; otherwise one draw is made at run start
    and held fixed. ``fresh_beta=True`` instead redraws coefficients for
    every experiment, which realizes the parameter-marginalized process the
    chain analysis describes (used by the oracle-equivalence checks).
    """

    space: ModelSpace
    truth: GroundTruth
    population: Population
    statistic: Statistic
    ndec: int
    t_max: int
    burn_in: int
    hard_residual: str = "self"
    fresh_beta: bool = False

    def __post_init__(self):
        if self.t_max <= 0 or not 0 <= self.burn_in < self.t_max:
            raise ConfigurationError(
                f"need 0 <= burn_in < t_max, got burn_in={self.burn_in}, t_max={self.t_max}"
            )
        if self.population.rey >= 1.0:
            raise ConfigurationError(
                "a population of only replicators never proposes a model"
            )
        self.space.index_of(self.truth.true_model)

    @property
    def true_index(self) -> int:
        return self.space.index_of(self.truth.true_model)


class Engine:
    """Precomputed tables plus the per-step transition logic for one RunSpec."""

    def __init__(self, spec: RunSpec):
        self.spec = spec
        space, population = spec.space, spec.population
        L = space.L
        self.L = L
        self.k = space.k
        self.n = spec.truth.n
        self.correlation = spec.truth.correlation
        self.sigma = spec.truth.sigma_level
        self.noise_sd = math.sqrt(self.sigma)
        self.true_index = spec.true_index
        self.terms_by_model = [m.sorted_terms for m in space.models]
        self.true_terms = self.terms_by_model[self.true_index]
        # 50.5**order per true-model term; beta @ mean_powers is E(y|mu_x),
        # recomputed only when beta moves.
        self.mean_powers = np.array(
            [MEAN_FACTOR_VALUE ** len(term_factors(t)) for t in self.true_terms]
        )
        self.unit_mean = spec.truth.calibration == "unit-mean"
        self.strategy_cum = np.cumsum(population.as_array())
        self.proposal_cum = {}
        for kind in (StrategyKind.TESS, StrategyKind.MAVE, StrategyKind.BO):
            if getattr(population, kind.value) > 0.0:
                self.proposal_cum[kind] = np.vstack([
                    np.cumsum(proposal_distribution(kind, mg, space, population.mode,
                                                    spec.hard_residual))
                    for mg in space.models
                ])
        self.uniform_cum = np.cumsum(np.full(L, 1.0 / L))
        n = self.n
        if spec.statistic is Statistic.AIC:
            self.penalty = 2.0 * np.array([m.p for m in space.models], dtype=float)
        else:
            self.penalty = math.log(n) * np.array([m.p for m in space.models], dtype=float)
        self.latent_rho = None
        if self.k > 1 and self.correlation > 0.0:
            rho = latent_correlation(self.correlation)
            self.latent_rho = (rho, math.sqrt(1.0 - rho * rho))
        self.fit_retries = 0

    def initial_state(self, rng) -> SimulationState:
        beta = None
        if not self.spec.fresh_beta:
            beta = self.spec.truth.beta
            if beta is None:
                beta = gen_coefficients(self.spec.truth.true_model, rng)
        return SimulationState(
            t=0, global_index=int(rng.integers(self.L)), predecessor=None, beta=beta
        )

    def _draw_strategy(self, rng) -> StrategyKind:
        u = rng.random()
        for idx, kind in enumerate(
            (StrategyKind.REY, StrategyKind.TESS, StrategyKind.MAVE, StrategyKind.BO)
        ):
            if u < self.strategy_cum[idx]:
                return kind
        return StrategyKind.BO

    def _draw_proposal(self, cum_row, rng) -> int:
        return min(int(np.searchsorted(cum_row, rng.random(), side="right")), self.L - 1)

    def _predictors(self, rng) -> np.ndarray:
        z = rng.standard_normal((self.n, self.k))
        if self.latent_rho is not None:
            rho, comp = self.latent_rho
            z[:, 1:] = rho * z[:, :1] + comp * z[:, 1:]
        return np.floor(ndtr(z) * 100.0) + 1.0

    def _compare(self, proposed: int, incumbent: int, beta, rng) -> int:
        """Winner of one freshly generated experiment (a model index)."""
        for _ in range(_MAX_STEP_RETRIES):
            try:
                X = self._predictors(rng)
                if self.spec.fresh_beta:
                    beta = rng.dirichlet(np.ones(len(self.true_terms)))
                cols = {}
                for t in self.true_terms:
                    cols[t] = self._column(X, t)
                g = beta[0] * cols[self.true_terms[0]]
                for j in range(1, len(self.true_terms)):
                    g = g + beta[j] * cols[self.true_terms[j]]
                e_mu = float(beta @ self.mean_powers)
                if self.unit_mean:
                    g = (1.0 - self.sigma) / e_mu * g
                    sd = self.noise_sd
                else:
                    sd = math.sqrt(e_mu * self.sigma / (1.0 - self.sigma))
                y_star = g + sd * rng.standard_normal(self.n)
                if np.ptp(y_star) == 0.0:
                    raise GenerationError("constant response")
                y = standardize(y_star)
                n = self.n
                rss_p = _rss_from_columns(
                    [cols[t] if t in cols else self._cache_col(cols, X, t)
                     for t in self.terms_by_model[proposed]], y)
                rss_g = _rss_from_columns(
                    [cols[t] if t in cols else self._cache_col(cols, X, t)
                     for t in self.terms_by_model[incumbent]], y)
                s_p = round(self.penalty[proposed] + n * math.log(rss_p / n), self.spec.ndec)
                s_g = round(self.penalty[incumbent] + n * math.log(rss_g / n), self.spec.ndec)
                return proposed if s_p < s_g else incumbent
            except (FitError, GenerationError):
                self.fit_retries += 1
        raise FitError(
            f"{_MAX_STEP_RETRIES} consecutive degenerate datasets at one step"
        )

    @staticmethod
    def _column(X, mask):
        factors = term_factors(mask)
        col = X[:, factors[0] - 1]
        for j in factors[1:]:
            col = col * X[:, j - 1]
        return col

    def _cache_col(self, cols, X, mask):
        col = self._column(X, mask)
        cols[mask] = col
        return col

    def step(self, state: SimulationState, rng) -> tuple[SimulationState, ExperimentRecord]:
        """Advance the process one experiment."""
        strategy = self._draw_strategy(rng)
        incumbent = state.global_index
        if strategy is StrategyKind.REY and state.predecessor is not None:
            pred = state.predecessor
            proposed, pair_incumbent = pred.proposed, pred.incumbent
            if proposed == pair_incumbent:
                winner = pair_incumbent
            else:
                winner = self._compare(proposed, pair_incumbent, state.beta, rng)
            record = ExperimentRecord(
                t=state.t, strategy=strategy, proposed=proposed,
                incumbent=pair_incumbent, winner=winner, was_replication=True,
                reproduced=(winner == pred.winner),
            )
        else:
            if strategy is StrategyKind.REY:
                # Replicator drawn with no predecessor (t=0): fall back to a
                # uniform proposal; the step is not a replication.
                cum_row = self.uniform_cum
            else:
                cum_row = self.proposal_cum[strategy][incumbent]
            proposed = self._draw_proposal(cum_row, rng)
            if proposed == incumbent:
                winner = incumbent
            else:
                winner = self._compare(proposed, incumbent, state.beta, rng)
            record = ExperimentRecord(
                t=state.t, strategy=strategy, proposed=proposed,
                incumbent=incumbent, winner=winner, was_replication=False,
            )
        return (
            SimulationState(t=state.t + 1, global_index=record.winner,
                            predecessor=record, beta=state.beta),
            record,
        )


def run(spec: RunSpec, seed, collect_records: bool = False):
    """Simulate ``spec.t_max`` experiments from a uniform random consensus.

    Returns ``(AbmMetrics, records)``; records is None unless requested.
    Identical seeds replay identical trajectories bit for bit.
    """
    rng = seeding.generator(seed)
    engine = Engine(spec)
    state = engine.initial_state(rng)
    records = []
    for _ in range(spec.t_max):
        state, record = engine.step(state, rng)
        records.append(record)
    metrics = compute_metrics(records, spec.true_index, spec.burn_in)
    metrics = replace(metrics, fit_retries=engine.fit_retries)
    return metrics, (records if collect_records else None)


def compute_metrics(records, true_index: int, burn_in: int) -> AbmMetrics:
    """Discovery-property estimators over a record list.

    Occupancy, stickiness, and reproducibility use post-burn-in steps only;
    first passage scans the whole run including burn-in. The consensus state
    before step t is records[t-1].winner (records[0].incumbent at t=0).
    """
    if not records:
        raise ConfigurationError("cannot compute metrics on an empty record list")
    if not 0 <= burn_in < len(records):
        raise ConfigurationError(f"burn_in {burn_in} outside 0..{len(records) - 1}")
    t_max = len(records)
    winners = np.fromiter((r.winner for r in records), dtype=np.int64, count=t_max)
    prev = np.empty(t_max, dtype=np.int64)
    prev[0] = records[0].incumbent
    prev[1:] = winners[:-1]
    was_rep = np.fromiter((r.was_replication for r in records), dtype=bool, count=t_max)
    repro = np.fromiter(
        ((1 if r.reproduced else 0) if r.reproduced is not None else -1 for r in records),
        dtype=np.int8, count=t_max,
    )

    states = np.concatenate(([prev[0]], winners))
    hits = np.nonzero(states == true_index)[0]
    censored = hits.size == 0
    first_passage = int(t_max if censored else hits[0])

    tail = slice(burn_in, t_max)
    time_at_true = float((winners[tail] == true_index).mean())

    at_true_before = prev[tail] == true_index
    if at_true_before.any():
        stickiness_emp = float((winners[tail][at_true_before] == true_index).mean())
    else:
        stickiness_emp = None

    rep_tail = was_rep[tail]
    repro_tail = repro[tail]
    prev_tail = prev[tail]

    def _rate(mask):
        count = int(mask.sum())
        if count == 0:
            return None, 0
        return float((repro_tail[mask] == 1).mean()), count

    repro_overall, v_total = _rate(rep_tail)
    repro_at_true, v_true = _rate(rep_tail & (prev_tail == true_index))
    repro_not_true, v_not = _rate(rep_tail & (prev_tail != true_index))

    return AbmMetrics(
        time_at_true=time_at_true,
        first_passage=first_passage,
        first_passage_censored=censored,
        stickiness_emp=stickiness_emp,
        repro_overall=repro_overall,
        repro_at_true=repro_at_true,
        repro_not_true=repro_not_true,
        v_total=v_total,
        v_true=v_true,
        v_not=v_not,
    )


def write_trajectory(path, records) -> None:
    """Dump one record per step as CSV (for audits and invariance checks)."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "strategy", "proposed", "incumbent", "winner",
             "was_replication", "reproduced"]
        )
        for r in records:
            writer.writerow([
                r.t, r.strategy.value, r.proposed, r.incumbent, r.winner,
                int(r.was_replication),
                "" if r.reproduced is None else int(r.reproduced),
            ])
