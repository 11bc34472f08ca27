"""
Command handlers behind the polaron-qhm subcommands.

Exit codes: 0 success, 1 configuration or I/O problem, 2 numerical failure
(of every grid point for `sweep`), 3 invariant violation in `check`.
"""

import logging
import sys

import pandas as pd
from scipy.linalg import LinAlgError

from polaron_qhm.bath_model import weak_spectrum
from polaron_qhm.floquet_lindblad import NoSteadyStateError, NonUniqueKernelError
from polaron_qhm.output_writers import (
    decomposition_frame,
    frame_to_csv,
    spectrum_frame,
    write_csv,
)
from polaron_qhm.point_runner import evaluate_pipeline, load_G1
from polaron_qhm.polaron import ConvergenceError, spectrum_G2
from polaron_qhm.run_config import ConfigError, RunConfig, load_config
from polaron_qhm.sweep_orchestrator import run_check, run_sweep

logger = logging.getLogger("polaron_qhm.main")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_INVARIANT = 3

NUMERICAL_ERRORS = (
    ConvergenceError,
    NonUniqueKernelError,
    NoSteadyStateError,
    LinAlgError,
    FloatingPointError,
)


def emit(frame: pd.DataFrame, output=None) -> None:
    """Write a table to `output`, or to stdout when no path is given."""
    if output:
        write_csv(frame, output)
    else:
        sys.stdout.write(frame_to_csv(frame))
        sys.stdout.flush()


def spectrum_table(cfg: RunConfig, which: str) -> pd.DataFrame:
    n = cfg.numerics
    params = cfg.machine_params()
    if which == "g1":
        return spectrum_frame(load_G1(cfg, params))
    if which in ("weak-cold", "weak-hot"):
        bath = params.cold if which == "weak-cold" else params.hot
        return spectrum_frame(weak_spectrum(bath, n.broadening_eta, n.merge_tol))
    G2, decomposition = spectrum_G2(
        params.cold,
        params.hot,
        n.broadening_eta,
        n.bessel_tol,
        n.bessel_cap,
        n.weight_floor,
        n.merge_tol,
    )
    if which == "g2":
        return spectrum_frame(G2)
    return decomposition_frame(decomposition)


def steady_table(cfg: RunConfig) -> pd.DataFrame:
    """Dressed-basis steady state, its residual and the rate of every component."""
    result = evaluate_pipeline(cfg)
    if result.rho is None:
        raise NoSteadyStateError("every dissipation rate is zero")
    records = []
    labels = ("+", "-")
    for a in range(2):
        for b in range(2):
            value = complex(result.rho[a, b])
            records.append(
                {"quantity": f"rho[{labels[a]}{labels[b]}]", "real": value.real, "imag": value.imag}
            )
    records.append({"quantity": "residual", "real": result.diagnostics.residual, "imag": 0.0})
    for term in result.liouvillian.terms:
        c = term.component
        records.append(
            {
                "quantity": "rate",
                "channel": c.channel,
                "q": c.q,
                "omega": c.omega,
                "rate_frequency": c.rate_frequency,
                "beta": term.beta,
                "real": term.rate,
                "imag": 0.0,
            }
        )
    columns = ["quantity", "channel", "q", "omega", "rate_frequency", "beta", "real", "imag"]
    frame = pd.DataFrame.from_records(records, columns=columns)
    frame["channel"] = frame["channel"].astype("Int64")
    frame["q"] = frame["q"].astype("Int64")
    return frame


def cmd_spectrum(args) -> int:
    cfg = load_config(args.config, args.overrides)
    try:
        frame = spectrum_table(cfg, args.which)
    except ConvergenceError as error:
        logger.error(f"Could not build the {args.which} spectrum: {error}")
        return EXIT_NUMERICAL
    emit(frame, args.output)
    return EXIT_OK


def cmd_steady(args) -> int:
    cfg = load_config(args.config, args.overrides)
    try:
        frame = steady_table(cfg)
    except NUMERICAL_ERRORS as error:
        logger.error(f"No steady state: {error}")
        return EXIT_NUMERICAL
    emit(frame, args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.overrides)
    if cfg.sweep is None:
        raise ConfigError("sweep", "the sweep command needs a sweep section")
    outcome = run_sweep(cfg, args.output, args.svg)
    if outcome.all_failed:
        logger.error("Every grid point failed")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = load_config(args.config, args.overrides)
    report = run_check(cfg)
    if report.checks:
        emit(report.frame(), args.output)
    if report.numerical_failure:
        return EXIT_NUMERICAL
    if not report.passed:
        names = ", ".join(check.name for check in report.failures())
        logger.error(f"Invariant check(s) failed: {names}")
        return EXIT_INVARIANT
    logger.info(f"All {len(report.checks)} invariant checks passed")
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "steady": cmd_steady,
    "sweep": cmd_sweep,
    "check": cmd_check,
}


def run_command(args) -> int:
    """Dispatch a parsed command line and map failures to exit codes."""
    try:
        return COMMANDS[args.command](args)
    except ConfigError as error:
        logger.error(f"Configuration error: {error}")
        return EXIT_CONFIG
    except OSError as error:
        logger.error(f"I/O error: {error}")
        return EXIT_CONFIG


# Copyright (c) 2025 AMD
