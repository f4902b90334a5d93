"""Shared fixtures for the acceptance suite.

The expensive artifacts (win matrices, factorial sweeps) are cached on disk
under the repository root (.wmcache/, .sweeps/) through the toolkit's own
cache/resume machinery, so repeated acceptance runs only pay the cost once.
"""

import time
from pathlib import Path

import pytest

from discoverysim.harness import (
    ChainConfig,
    RunConfig,
    WinMatrixStore,
    analyze_chain,
    run_factorial,
)

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def wm_store():
    return WinMatrixStore(REPO_ROOT / ".wmcache")


@pytest.fixture(scope="session")
def chain_suite(wm_store):
    """Chain summaries for all 14 true models x 4 presets x 2 statistics at
    sigma 0.2, V=10000 (the criterion-2 grid, reused by criteria 5 and 6)."""
    config = ChainConfig(k=3, sigma=0.2, win_samples=10_000, seed=42)
    t0 = time.perf_counter()
    summaries, wins = analyze_chain(config, wm_store)
    return {
        "config": config,
        "summaries": summaries,
        "wins": wins,
        "elapsed": time.perf_counter() - t0,
    }


@pytest.fixture(scope="session")
def hard_sweep():
    """Criterion 7/9 grid: the reference design at 25 replications, hard mode."""
    config = RunConfig(replications=25, mode="hard", seed=42, workers=2)
    out = REPO_ROOT / ".sweeps" / "hard_results.csv"
    return run_factorial(config, out)


@pytest.fixture(scope="session")
def soft_sweep():
    """Criterion 8 grid: the same design with soft strategies, 10 replications."""
    config = RunConfig(replications=10, mode="soft", seed=42, workers=2)
    out = REPO_ROOT / ".sweeps" / "soft_results.csv"
    return run_factorial(config, out)
