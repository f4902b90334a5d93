"""Experiment harness: factorial sweeps, persistence, and summary statistics.

A sweep expands a configuration into (cell x replication) tasks, runs them
across a worker pool with per-row seeds derived from the root seed, and
writes a canonical CSV plus a JSON metadata sidecar. Row seeds depend only
on (root seed, cell identity, replication index), so any worker count and
any resume history produce byte-identical output.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from . import __version__, seeding
from .abm import AbmMetrics, RunSpec, run
from .chain import ChainSummary, summarize_chain
from .datagen import GroundTruth
from .errors import ConfigurationError, DiscoverySimError
from .modelspace import ModelSpace, enumerate_models, parse_model
from .selection import Statistic, WinMatrix, estimate_win_matrices, parse_statistic
from .strategies import Mode, Population, PRESET_NAMES

RESULTS_SCHEMA_VERSION = 1

# One row per (cell x replication); empty string = undefined/not applicable.
RESULT_COLUMNS = (
    "true_model", "sigma", "population", "statistic", "mode", "replication",
    "seed", "time_at_true", "first_passage", "first_passage_censored",
    "stickiness_emp", "repro_overall", "repro_at_true", "repro_not_true",
    "v_total", "v_true", "v_not", "fit_retries", "error",
)

_METRIC_COLUMNS = (
    "time_at_true", "first_passage", "stickiness_emp",
    "repro_overall", "repro_at_true", "repro_not_true",
)

DEFAULT_TRUE_MODELS = (
    "x1 + x2",
    "x1 + x2 + x3 + x1x2",
    "x1 + x2 + x3 + x1x2 + x1x3 + x2x3",
)


@dataclass(frozen=True)
class RunConfig:
    """Factorial design description; the defaults are the reference design.

    ``populations`` are preset names (replicator presets for the simulation
    sweep); explicit head counts can be supplied instead via ``counts`` as a
    (nRey, nTess, nMave, nBo) tuple, which adds a single normalized custom
    population.
    """

    replications: int = 100
    timesteps: int = 11000
    k: int = 3
    sigma: tuple[float, ...] = (0.2, 0.5, 0.8)
    sample_size: int = 100
    true_models: tuple[str, ...] = DEFAULT_TRUE_MODELS
    correlation: float = 0.2
    populations: tuple[str, ...] = PRESET_NAMES
    counts: tuple[int, int, int, int] | None = None
    statistics: tuple[str, ...] = ("AIC", "SC")
    ndec: int = 4
    mode: str = "hard"
    burn_in: int = 1000
    seed: int = 42
    calibration: str = "expectation-ratio"
    hard_residual: str = "self"
    fresh_beta: bool = False
    workers: int | None = None

    def __post_init__(self):
        if self.replications <= 0 or self.timesteps <= 0:
            raise ConfigurationError("replications and timesteps must be positive")
        if not 0 <= self.burn_in < self.timesteps:
            raise ConfigurationError("need 0 <= burn_in < timesteps")
        if self.mode not in ("hard", "soft"):
            raise ConfigurationError(f"mode must be 'hard' or 'soft', got {self.mode!r}")
        for s in self.statistics:
            parse_statistic(s)
        space = enumerate_models(self.k)
        for tm in self.true_models:
            space.find(tm)

    @property
    def mode_enum(self) -> Mode:
        return Mode.HARD if self.mode == "hard" else Mode.SOFT


@dataclass(frozen=True)
class Cell:
    """One factorial cell: the identifiers every result row carries."""

    true_model: str
    sigma: float
    population: str
    statistic: str
    mode: str

    @property
    def key(self) -> str:
        return (
            f"tm={self.true_model}|sigma={self.sigma!r}|pop={self.population}"
            f"|stat={self.statistic}|mode={self.mode}"
        )


def expand_cells(config: RunConfig) -> list[Cell]:
    """The full cell grid in canonical order."""
    cells = []
    pops = list(config.populations)
    if config.counts is not None:
        pops.append("custom")
    for tm in config.true_models:
        for sigma in config.sigma:
            for pop in pops:
                for stat in config.statistics:
                    canonical_stat = parse_statistic(stat).value
                    cells.append(Cell(tm, float(sigma), pop, canonical_stat, config.mode))
    return cells


def _population_for(config: RunConfig, name: str) -> Population:
    if name == "custom":
        if config.counts is None:
            raise ConfigurationError("custom population requested without counts")
        return Population.from_counts(*config.counts, mode=config.mode_enum)
    return Population.preset(name, replicator=True, mode=config.mode_enum)


def _row_seed(config: RunConfig, cell: Cell, replication: int):
    return seeding.labeled(config.seed, cell.key, replication)


def build_run_spec(config: RunConfig, cell: Cell) -> RunSpec:
    space = enumerate_models(config.k)
    truth = GroundTruth(
        true_model=space[space.find(cell.true_model)],
        sigma_level=cell.sigma,
        correlation=config.correlation,
        n=config.sample_size,
        calibration=config.calibration,
    )
    return RunSpec(
        space=space,
        truth=truth,
        population=_population_for(config, cell.population),
        statistic=parse_statistic(cell.statistic),
        ndec=config.ndec,
        t_max=config.timesteps,
        burn_in=config.burn_in,
        hard_residual=config.hard_residual,
        fresh_beta=config.fresh_beta,
    )


def _execute_row(config: RunConfig, cell: Cell, replication: int) -> dict:
    seed_seq = _row_seed(config, cell, replication)
    row = {
        "true_model": cell.true_model,
        "sigma": _fmt(cell.sigma),
        "population": cell.population,
        "statistic": cell.statistic,
        "mode": cell.mode,
        "replication": str(replication),
        "seed": str(seeding.state_digest(seed_seq)),
        "error": "",
    }
    try:
        spec = build_run_spec(config, cell)
        metrics, _ = run(spec, seed_seq)
        row.update(_metrics_to_columns(metrics))
    except DiscoverySimError as exc:
        for col in RESULT_COLUMNS:
            row.setdefault(col, "")
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _metrics_to_columns(metrics: AbmMetrics) -> dict:
    def opt(v):
        return "" if v is None else _fmt(v)

    return {
        "time_at_true": _fmt(metrics.time_at_true),
        "first_passage": str(metrics.first_passage),
        "first_passage_censored": str(int(metrics.first_passage_censored)),
        "stickiness_emp": opt(metrics.stickiness_emp),
        "repro_overall": opt(metrics.repro_overall),
        "repro_at_true": opt(metrics.repro_at_true),
        "repro_not_true": opt(metrics.repro_not_true),
        "v_total": str(metrics.v_total),
        "v_true": str(metrics.v_true),
        "v_not": str(metrics.v_not),
        "fit_retries": str(metrics.fit_retries),
    }


def _fmt(value) -> str:
    """Deterministic shortest round-trip decimal rendering."""
    return repr(float(value))


def _row_sort_key(row: dict):
    return (
        row["true_model"], float(row["sigma"]), row["population"],
        row["statistic"], row["mode"], int(row["replication"]),
    )


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write_results(path: Path, rows: list[dict]) -> None:
    rows = sorted(rows, key=_row_sort_key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({col: row.get(col, "") for col in RESULT_COLUMNS})
    path.write_text(buf.getvalue())


def _sidecar(config: RunConfig, path: Path, elapsed: float, computed: int,
             skipped: int) -> None:
    meta = {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "tool_version": __version__,
        "config": dataclasses.asdict(config),
        "root_seed": config.seed,
        "rows_computed": computed,
        "rows_reused": skipped,
        "elapsed_seconds": round(elapsed, 3),
        "quantile_rule": "linear interpolation between order statistics (type 7)",
        "seed_derivation": "SeedSequence(root) child keyed by (crc32(cell key), replication)",
    }
    path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _pool_init():
    # Keep worker BLAS pools from oversubscribing the process pool.
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")


def run_factorial(config: RunConfig, output: str | Path,
                  progress: bool = False) -> list[dict]:
    """Execute every (cell x replication), resuming from an existing output.

    Rows already present in the output file (matched on cell identifiers and
    replication index) are kept as-is; missing rows are computed, the merged
    set is sorted canonically, and the file is rewritten along with its
    metadata sidecar. Per-row failures are recorded in the ``error`` column
    and never abort the sweep.
    """
    t0 = time.perf_counter()
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    cells = expand_cells(config)
    existing: dict[tuple, dict] = {}
    if output.exists():
        for row in read_results(output):
            existing[_row_sort_key(row)] = row

    todo = []
    for cell in cells:
        for rep in range(config.replications):
            probe = {
                "true_model": cell.true_model, "sigma": _fmt(cell.sigma),
                "population": cell.population, "statistic": cell.statistic,
                "mode": cell.mode, "replication": str(rep),
            }
            if _row_sort_key(probe) not in existing:
                todo.append((cell, rep))

    rows = list(existing.values())
    if todo:
        workers = config.workers or os.cpu_count() or 1
        if workers == 1:
            done_iter = (_execute_row(config, cell, rep) for cell, rep in todo)
            for i, row in enumerate(done_iter):
                rows.append(row)
                if progress and (i + 1) % 50 == 0:
                    print(f"  {i + 1}/{len(todo)} rows", flush=True)
        else:
            with ProcessPoolExecutor(max_workers=workers, initializer=_pool_init) as pool:
                futures = [pool.submit(_execute_row, config, cell, rep)
                           for cell, rep in todo]
                for i, fut in enumerate(futures):
                    rows.append(fut.result())
                    if progress and (i + 1) % 50 == 0:
                        print(f"  {i + 1}/{len(todo)} rows", flush=True)

    _write_results(output, rows)
    _sidecar(config, output, time.perf_counter() - t0, len(todo), len(existing))
    return read_results(output)


# ---------------------------------------------------------------------------
# Config files: flat key = value text, comma-separated lists, # comments.

_CONFIG_KEYS = {
    "replications": ("replications", int),
    "timesteps": ("timesteps", int),
    "k": ("k", int),
    "sigma": ("sigma", "float_list"),
    "samplesize": ("sample_size", int),
    "truemodel": ("true_models", "str_list"),
    "correlation": ("correlation", float),
    "modelcompare": ("statistics", "str_list"),
    "ndec": ("ndec", int),
    "mode": ("mode", str),
    "burnin": ("burn_in", int),
    "burn_in": ("burn_in", int),
    "seed": ("seed", int),
    "populations": ("populations", "str_list"),
    "calibration": ("calibration", str),
    "hardresidual": ("hard_residual", str),
    "hard_residual": ("hard_residual", str),
    "workers": ("workers", int),
}
_COUNT_KEYS = {"nrey": 0, "ntess": 1, "nmave": 2, "nbo": 3}


def load_config_file(path) -> dict:
    """Parse a flat ``key = value`` config file into RunConfig keyword args."""
    overrides: dict = {}
    counts = [None, None, None, None]
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        lower = key.lower()
        if lower in _COUNT_KEYS:
            counts[_COUNT_KEYS[lower]] = int(value)
            continue
        if lower not in _CONFIG_KEYS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        field_name, kind = _CONFIG_KEYS[lower]
        if kind == "float_list":
            overrides[field_name] = tuple(float(v) for v in value.split(","))
        elif kind == "str_list":
            overrides[field_name] = tuple(v.strip() for v in value.split(",") if v.strip())
        else:
            overrides[field_name] = kind(value)
    if any(c is not None for c in counts):
        overrides["counts"] = tuple(0 if c is None else c for c in counts)
    return overrides


def make_run_config(file_path=None, **cli_overrides) -> RunConfig:
    """RunConfig from defaults, then a config file, then CLI flags (strongest)."""
    values: dict = {}
    if file_path is not None:
        values.update(load_config_file(file_path))
    values.update({k: v for k, v in cli_overrides.items() if v is not None})
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# Summaries


def _column_values(rows, column):
    defined, censored = [], 0
    for row in rows:
        raw = row.get(column, "")
        if raw != "" and row.get("error", "") == "":
            defined.append(float(raw))
            if column == "first_passage" and row.get("first_passage_censored") == "1":
                censored += 1
    return np.array(defined), censored


def summarize(rows: list[dict], group_by: tuple[str, ...],
              metrics: tuple[str, ...] = _METRIC_COLUMNS) -> list[dict]:
    """Per-group median, IQR, mean, count, and censor count for each metric.

    Quantiles interpolate linearly between order statistics (numpy default,
    the "type 7" rule). Groups with no defined values for a metric are
    omitted for that metric with a warning entry instead.
    """
    if not rows:
        raise ConfigurationError("no result rows to summarize")
    for key in group_by:
        if key not in RESULT_COLUMNS:
            raise ConfigurationError(f"unknown grouping column {key!r}")
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in group_by), []).append(row)

    out = []
    for gkey in sorted(groups):
        grows = groups[gkey]
        for metric in metrics:
            values, censored = _column_values(grows, metric)
            entry = dict(zip(group_by, gkey))
            entry["metric"] = metric
            entry["count"] = int(values.size)
            if values.size == 0:
                entry.update(median="", iqr="", mean="", censored="",
                             warning="no defined values")
            else:
                q1, q3 = np.percentile(values, [25.0, 75.0])
                entry.update(
                    median=_fmt(np.median(values)),
                    iqr=_fmt(q3 - q1),
                    mean=_fmt(values.mean()),
                    censored=str(censored),
                    warning="",
                )
            out.append(entry)
    return out


def write_summary(path, summary_rows: list[dict], group_by: tuple[str, ...]) -> None:
    fieldnames = list(group_by) + ["metric", "count", "median", "iqr", "mean",
                                   "censored", "warning"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(summary_rows)


def spearman(x, y) -> float:
    """Rank correlation: Pearson correlation of average-ranked values.

    Ties receive mean ranks. Returns NaN when either rank vector has zero
    variance (the coefficient is undefined there).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 3:
        raise ConfigurationError("spearman needs two equal-length vectors of size >= 3")
    rx, ry = rankdata(x), rankdata(y)
    if rx.std() == 0.0 or ry.std() == 0.0:
        return math.nan
    return float(np.corrcoef(rx, ry)[0, 1])


# ---------------------------------------------------------------------------
# Win-matrix cache and chain analysis


class WinMatrixStore:
    """Disk cache of win matrices keyed by their full estimation recipe."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _key(self, space, true_label, sigma, correlation, n, statistic, V, ndec,
             seed, calibration):
        recipe = json.dumps({
            "k": space.k, "true_model": true_label, "sigma": sigma,
            "correlation": correlation, "n": n, "statistic": statistic.value,
            "V": V, "ndec": ndec, "seed": seed, "calibration": calibration,
            "version": 1,
        }, sort_keys=True)
        return hashlib.sha256(recipe.encode()).hexdigest()[:16]

    def _path(self, key) -> Path:
        return self.directory / f"wm_{key}.csv"

    def get_pair(self, space: ModelSpace, true_label: str, sigma: float,
                 correlation: float, n: int, V: int, ndec: int, seed: int,
                 statistics=(Statistic.AIC, Statistic.SC),
                 calibration: str = "expectation-ratio") -> dict[Statistic, WinMatrix]:
        """Load or estimate win matrices for the given statistics.

        Estimation shares replicate datasets across statistics; per-replicate
        seeding makes the result identical to estimating each alone.
        """
        truth = GroundTruth(
            true_model=space[space.find(true_label)], sigma_level=sigma,
            correlation=correlation, n=n, calibration=calibration,
        )
        out, missing = {}, []
        for statistic in statistics:
            key = self._key(space, true_label, sigma, correlation, n, statistic, V,
                            ndec, seed, calibration)
            path = self._path(key)
            if path.exists():
                out[statistic] = self._load(path, truth, statistic, V, ndec, space)
            else:
                missing.append((statistic, path))
        if missing:
            estimated = estimate_win_matrices(
                truth, space, [s for s, _ in missing], V, ndec,
                seeding.labeled(seed, "win-matrix", true_label, _fmt(sigma),
                                _fmt(correlation), n, V, ndec, calibration),
            )
            for statistic, path in missing:
                self._save(path, estimated[statistic])
                out[statistic] = estimated[statistic]
        return out

    @staticmethod
    def _save(path: Path, wm: WinMatrix) -> None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["proposed\\incumbent"] + list(wm.labels))
        for label, row in zip(wm.labels, wm.w):
            writer.writerow([label] + [_fmt(v) for v in row])
        path.write_text(buf.getvalue())

    @staticmethod
    def _load(path: Path, truth, statistic, V, ndec, space) -> WinMatrix:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            labels = tuple(header[1:])
            w = np.array([[float(v) for v in row[1:]] for row in reader])
        if labels != space.labels() or w.shape != (space.L, space.L):
            raise ConfigurationError(f"cached win matrix {path} does not match the space")
        return WinMatrix(w=w, V=V, truth=truth, statistic=statistic, ndec=ndec,
                         labels=labels)


CHAIN_PRESETS = ("tess-dominant", "mave-dominant", "bo-dominant", "all-equal")


@dataclass(frozen=True)
class ChainConfig:
    """Replication-free analysis grid (soft strategies enforced)."""

    k: int = 3
    sigma: float = 0.2
    statistics: tuple[str, ...] = ("AIC", "SC")
    presets: tuple[str, ...] = CHAIN_PRESETS
    true_models: tuple[str, ...] | None = None  # None = every model in the space
    sample_size: int = 100
    correlation: float = 0.2
    win_samples: int = 10000
    ndec: int = 4
    seed: int = 42
    calibration: str = "expectation-ratio"

    def __post_init__(self):
        for name in self.presets:
            Population.preset(name, replicator=False)  # validates; rejects rey presets


def analyze_chain(config: ChainConfig, store: WinMatrixStore):
    """Chain summaries for every (true model x preset x statistic) cell.

    Returns {(true_label, preset, statistic): ChainSummary} plus the shared
    win matrices, keyed {(true_label, statistic): WinMatrix}.
    """
    space = enumerate_models(config.k)
    true_labels = config.true_models or space.labels()
    statistics = tuple(parse_statistic(s) for s in config.statistics)
    wins: dict[tuple, WinMatrix] = {}
    summaries: dict[tuple, ChainSummary] = {}
    populations = {
        name: Population.preset(name, replicator=False, mode=Mode.SOFT)
        for name in config.presets
    }
    for label in true_labels:
        pair = store.get_pair(space, label, config.sigma, config.correlation,
                              config.sample_size, config.win_samples, config.ndec,
                              config.seed, statistics, config.calibration)
        true_index = space.find(label)
        for statistic in statistics:
            wins[(label, statistic.value)] = pair[statistic]
            for name, population in populations.items():
                summaries[(label, name, statistic.value)] = summarize_chain(
                    pair[statistic], population, space, true_index
                )
    return summaries, wins


def write_chain_reports(out_dir, config: ChainConfig, summaries, wins) -> None:
    """CSV reports: occupancy and stickiness tables (true model x preset),
    per-preset MFPT matrices (initial x true), and full occupancy vectors."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    space = enumerate_models(config.k)
    labels = space.labels()
    true_labels = config.true_models or labels
    stats = tuple(parse_statistic(s).value for s in config.statistics)

    def _table(path, value_fn):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["true_model"] + list(config.presets))
            for label in true_labels:
                writer.writerow([label] + [_fmt(value_fn(label, p)) for p in config.presets])

    for stat in stats:
        _table(out_dir / f"occupancy_true_{stat}.csv",
               lambda lbl, p: summaries[(lbl, p, stat)].occupancy_of_truth)
        _table(out_dir / f"stickiness_true_{stat}.csv",
               lambda lbl, p: summaries[(lbl, p, stat)].stickiness[space.find(lbl)])
        for preset in config.presets:
            with open(out_dir / f"mfpt_{stat}_{preset}.csv", "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["initial\\true"] + list(true_labels))
                mfpt_cols = {lbl: summaries[(lbl, preset, stat)].mfpt for lbl in true_labels}
                for i, initial in enumerate(labels):
                    writer.writerow([initial] + [_fmt(mfpt_cols[lbl][i]) for lbl in true_labels])
            with open(out_dir / f"occupancy_all_{stat}_{preset}.csv", "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["true_model\\model"] + list(labels))
                for lbl in true_labels:
                    pi = summaries[(lbl, preset, stat)].stationary
                    writer.writerow([lbl] + [_fmt(v) for v in pi])
    meta = {
        "tool_version": __version__,
        "config": dataclasses.asdict(config),
        "win_matrices": sorted(f"{lbl}|{stat}" for lbl, stat in wins),
    }
    (out_dir / "chain_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
