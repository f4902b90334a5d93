"""Command-line front end.

Subcommands: ``enumerate`` (print a model space), ``chain`` (replication-free
analysis), ``abm`` (factorial simulation sweep), ``summarize`` (statistics
from a results file), ``verify`` (run the acceptance test suite).
Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigurationError, DiscoverySimError
from .harness import (
    ChainConfig,
    WinMatrixStore,
    analyze_chain,
    make_run_config,
    read_results,
    run_factorial,
    summarize,
    write_chain_reports,
    write_summary,
)
from .modelspace import enumerate_models


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="discoverysim",
        description="Simulate and analyze model-centric scientific discovery.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_enum = sub.add_parser("enumerate", help="print the model space for k factors")
    p_enum.add_argument("--k", type=int, default=3)

    p_chain = sub.add_parser("chain", help="replication-free chain analysis")
    p_chain.add_argument("--k", type=int, default=3)
    p_chain.add_argument("--sigma", type=float, default=0.2)
    p_chain.add_argument("--statistics", default="AIC,SC",
                         help="comma-separated (AIC, SC; BIC is an alias for SC)")
    p_chain.add_argument("--presets", default="tess-dominant,mave-dominant,bo-dominant,all-equal")
    p_chain.add_argument("--true-models", default=None,
                         help="comma-separated model strings (default: all)")
    p_chain.add_argument("--sample-size", type=int, default=100)
    p_chain.add_argument("--correlation", type=float, default=0.2)
    p_chain.add_argument("--win-samples", type=int, default=10000)
    p_chain.add_argument("--ndec", type=int, default=4)
    p_chain.add_argument("--seed", type=int, default=42)
    p_chain.add_argument("--calibration", choices=("expectation-ratio", "unit-mean"),
                         default="expectation-ratio")
    p_chain.add_argument("--out", default="chain_out")
    p_chain.add_argument("--cache", default=None,
                         help="win-matrix cache directory (default: <out>/cache)")

    p_abm = sub.add_parser("abm", help="factorial simulation sweep")
    p_abm.add_argument("--config", default=None, help="flat key = value config file")
    p_abm.add_argument("--out", default="results.csv")
    p_abm.add_argument("--replications", type=int, default=None)
    p_abm.add_argument("--timesteps", type=int, default=None)
    p_abm.add_argument("--k", type=int, default=None)
    p_abm.add_argument("--sigma", default=None, help="comma-separated noise fractions")
    p_abm.add_argument("--sample-size", type=int, default=None)
    p_abm.add_argument("--true-models", default=None, help="comma-separated model strings")
    p_abm.add_argument("--correlation", type=float, default=None)
    p_abm.add_argument("--populations", default=None, help="comma-separated preset names")
    p_abm.add_argument("--statistics", default=None, help="comma-separated (AIC, SC/BIC)")
    p_abm.add_argument("--ndec", type=int, default=None)
    p_abm.add_argument("--mode", choices=("hard", "soft"), default=None)
    p_abm.add_argument("--burn-in", type=int, default=None)
    p_abm.add_argument("--seed", type=int, default=None)
    p_abm.add_argument("--calibration", choices=("expectation-ratio", "unit-mean"),
                       default=None)
    p_abm.add_argument("--workers", type=int, default=None)
    p_abm.add_argument("--progress", action="store_true")

    p_sum = sub.add_parser("summarize", help="summary statistics from a results file")
    p_sum.add_argument("--input", required=True)
    p_sum.add_argument("--group-by", default="population",
                       help="comma-separated result columns")
    p_sum.add_argument("--out", default=None, help="summary CSV (default: stdout)")

    p_verify = sub.add_parser("verify", help="run the acceptance test suite")
    p_verify.add_argument("--tests-dir", default="tests")
    p_verify.add_argument("--quick", action="store_true",
                          help="skip the long simulation-sweep criteria")
    return parser


def _split(text):
    return tuple(part.strip() for part in text.split(",") if part.strip()) if text else None


def _cmd_enumerate(args) -> int:
    space = enumerate_models(args.k)
    print(f"k={args.k}: {space.L} models")
    for i, model in enumerate(space):
        print(f"{i:3d}  p={model.p}  {model}")
    return 0


def _cmd_chain(args) -> int:
    config = ChainConfig(
        k=args.k, sigma=args.sigma, statistics=_split(args.statistics),
        presets=_split(args.presets), true_models=_split(args.true_models),
        sample_size=args.sample_size, correlation=args.correlation,
        win_samples=args.win_samples, ndec=args.ndec, seed=args.seed,
        calibration=args.calibration,
    )
    cache = Path(args.cache) if args.cache else Path(args.out) / "cache"
    store = WinMatrixStore(cache)
    summaries, wins = analyze_chain(config, store)
    write_chain_reports(args.out, config, summaries, wins)
    print(f"wrote {len(summaries)} chain summaries to {args.out}")
    return 0


def _cmd_abm(args) -> int:
    config = make_run_config(
        file_path=args.config,
        replications=args.replications,
        timesteps=args.timesteps,
        k=args.k,
        sigma=tuple(float(v) for v in _split(args.sigma)) if args.sigma else None,
        sample_size=args.sample_size,
        true_models=_split(args.true_models),
        correlation=args.correlation,
        populations=_split(args.populations),
        statistics=_split(args.statistics),
        ndec=args.ndec,
        mode=args.mode,
        burn_in=args.burn_in,
        seed=args.seed,
        calibration=args.calibration,
        workers=args.workers,
    )
    rows = run_factorial(config, args.out, progress=args.progress)
    print(f"{len(rows)} result rows in {args.out}")
    return 0


def _cmd_summarize(args) -> int:
    rows = read_results(args.input)
    group_by = _split(args.group_by)
    table = summarize(rows, group_by)
    if args.out:
        write_summary(args.out, table, group_by)
        print(f"wrote {len(table)} summary rows to {args.out}")
    else:
        for entry in table:
            print(entry)
    return 0


def _cmd_verify(args) -> int:
    import pytest

    target = Path(args.tests_dir) / "test_acceptance.py"
    if not target.exists():
        print(f"acceptance tests not found at {target}", file=sys.stderr)
        return 1
    pytest_args = ["-v", "-s", str(target)]
    if args.quick:
        pytest_args += ["-m", "not sweep"]
    rc = pytest.main(pytest_args)
    return 0 if rc == 0 else 2


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "enumerate": _cmd_enumerate,
        "chain": _cmd_chain,
        "abm": _cmd_abm,
        "summarize": _cmd_summarize,
        "verify": _cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DiscoverySimError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
