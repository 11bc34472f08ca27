import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError

from polaron_qhm.floquet_lindblad import SIGMA_X, NoSteadyStateError, NonUniqueKernelError
from polaron_qhm.kms_thermometry import check_kms_G1, generalized_kms_check
from polaron_qhm.output_writers import sweep_frame, write_sweep_csv, write_sweep_svg
from polaron_qhm.point_runner import (
    PipelineResult,
    SweepRow,
    evaluate_pipeline,
    run_point,
)
from polaron_qhm.polaron import ConvergenceError, cold_harmonics
from polaron_qhm.run_config import RunConfig, SWEEP_COLUMNS
from polaron_qhm.thermo import recompute_currents

logger = logging.getLogger("polaron_qhm.main")

SUM_RULE_TOL = 1e-9
KMS_TOL = 1e-9
COMPLETENESS_TOL = 1e-12
TRACE_TOL = 1e-12
RESIDUAL_TOL = 1e-10
POSITIVITY_TOL = 1e-12
FIRST_LAW_TOL = 1e-12
CARNOT_TOL = 1e-9
SINGLE_TEMPERATURE_TOL = 1e-12


@dataclass(frozen=True)
class InvariantCheck:
    name: str
    violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.violation <= self.tolerance)


@dataclass(frozen=True)
class CheckReport:
    checks: Tuple[InvariantCheck, ...] = ()
    numerical_failure: bool = False

    @property
    def passed(self) -> bool:
        return not self.numerical_failure and all(check.passed for check in self.checks)

    def failures(self) -> List[InvariantCheck]:
        return [check for check in self.checks if not check.passed]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "invariant": [c.name for c in self.checks],
                "violation": [c.violation for c in self.checks],
                "tolerance": [c.tolerance for c in self.checks],
                "passed": ["pass" if c.passed else "fail" for c in self.checks],
            },
            columns=["invariant", "violation", "tolerance", "passed"],
        )


@dataclass(frozen=True)
class SweepOutcome:
    rows: Tuple[SweepRow, ...]
    csv_path: Optional[Path] = None
    svg_path: Optional[Path] = None

    @property
    def all_failed(self) -> bool:
        return bool(self.rows) and all(row.failed for row in self.rows)


def _evaluate_grid_point(task: Tuple[RunConfig, float]) -> SweepRow:
    cfg, value = task
    return run_point(cfg, value)


def _relative(difference: float, scale: float) -> float:
    return abs(difference) / scale if scale > 0 else abs(difference)


class SweepOrchestrator:
    """Evaluates sweep grids and the invariant suite for one configuration."""

    def __init__(self, config: RunConfig, workers: Optional[int] = None) -> None:
        self.config = config
        self.workers = workers or config.numerics.workers

    def evaluate_grid(self) -> List[SweepRow]:
        """One row per grid value, in grid order whatever the worker count."""
        grid = self.config.grid()
        tasks = [(self.config, float(value)) for value in grid]
        logger.info(
            f"Sweeping {self.config.sweep.parameter} over {len(tasks)} point(s) "
            f"with {self.workers} worker(s)"
        )
        if self.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                rows = list(pool.map(_evaluate_grid_point, tasks))
        else:
            rows = [_evaluate_grid_point(task) for task in tasks]
        failed = sum(row.failed for row in rows)
        if failed:
            logger.warning(f"{failed} of {len(rows)} grid point(s) failed")
        return rows

    def run_sweep(self, csv_path=None, svg_path=None) -> SweepOutcome:
        rows = self.evaluate_grid()
        output = self.config.output
        csv_target = write_sweep_csv(rows, csv_path or output.csv_path, output.columns)
        svg_target = None
        svg_path = svg_path or output.svg_path
        if svg_path:
            svg_target = write_sweep_svg(
                sweep_frame(rows, SWEEP_COLUMNS),
                svg_path,
                output.svg_column,
                log_x=self.config.sweep.scale == "log",
                log_y=output.svg_log_y,
            )
        return SweepOutcome(tuple(rows), csv_target, svg_target)

    def point_checks(self, result: PipelineResult) -> List[InvariantCheck]:
        cfg, params = result.config, result.params
        n = cfg.numerics
        beta_C, beta_H = params.cold.beta, params.hot.beta
        checks = []

        expected_g1 = 2.0 * math.pi * (params.Omega / 2.0) ** 2 * (1.0 - params.A**2)
        checks.append(
            InvariantCheck(
                "g1_sum_rule",
                _relative(result.G1.total_weight - expected_g1, expected_g1),
                SUM_RULE_TOL,
            )
        )
        harmonics = cold_harmonics(
            params.cold, True, n.bessel_tol, n.bessel_cap, n.weight_floor, n.merge_tol
        )
        checks.append(
            InvariantCheck("cold_harmonic_sum_rule", abs(harmonics.total_weight - 1.0), SUM_RULE_TOL)
        )

        g1_kms = check_kms_G1(result.G1, beta_C, n.weight_floor, n.merge_tol)
        g2_kms = generalized_kms_check(
            result.G2, result.decomposition, beta_C, beta_H, n.weight_floor, n.merge_tol
        )
        checks.append(InvariantCheck("kms_g1", g1_kms.worst, KMS_TOL))
        checks.append(InvariantCheck("kms_g2_lines", g2_kms.max_violation, KMS_TOL))
        checks.append(InvariantCheck("kms_g2_terms", g2_kms.max_term_violation, KMS_TOL))

        completeness = 0.0
        for channel in (1, 2):
            total = sum(
                (c.op for c in result.components if c.channel == channel),
                np.zeros((2, 2), dtype=complex),
            )
            gap = np.max(np.abs(result.basis.to_bare(total) - SIGMA_X))
            completeness = max(completeness, float(gap))
        checks.append(InvariantCheck("fourier_completeness", completeness, COMPLETENESS_TOL))

        L = result.liouvillian
        norm = L.norm
        checks.append(
            InvariantCheck("trace_preservation", _relative(L.trace_residual(), norm), TRACE_TOL)
        )

        report = result.report
        current_scale = norm * max(params.omega0, params.omega_l)
        if result.diagnostics is not None:
            d = result.diagnostics
            checks.append(InvariantCheck("steady_residual", d.residual, RESIDUAL_TOL))
            checks.append(InvariantCheck("trace_error", d.trace_error, TRACE_TOL))
            checks.append(
                InvariantCheck(
                    "positivity",
                    max(0.0, -d.min_eigenvalue, d.hermiticity),
                    POSITIVITY_TOL,
                )
            )
            J1_again, J2_again = recompute_currents(L, result.rho)
            recomputed = max(abs(J1_again - report.J1), abs(J2_again - report.J2))
            checks.append(
                InvariantCheck(
                    "first_law_recomputed",
                    _relative(recomputed, current_scale),
                    FIRST_LAW_TOL,
                )
            )
        checks.append(
            InvariantCheck(
                "first_law",
                _relative(report.P + report.J1 + report.J2, current_scale),
                FIRST_LAW_TOL,
            )
        )
        checks.extend(self._bound_checks([report_row(report)], beta_C == beta_H, ""))
        return checks

    def _bound_checks(
        self, rows: List[dict], single_temperature: bool, prefix: str
    ) -> List[InvariantCheck]:
        engine = [
            r["eta"] - r["eta_carnot"]
            for r in rows
            if r["regime"] == "engine" and math.isfinite(r["eta"])
        ]
        fridge = [
            r["cop"] - r["cop_carnot"]
            for r in rows
            if r["regime"] == "refrigerator" and math.isfinite(r["cop"])
        ]
        checks = [
            InvariantCheck(f"{prefix}carnot_engine", max([0.0] + engine), CARNOT_TOL),
            InvariantCheck(f"{prefix}carnot_refrigerator", max([0.0] + fridge), CARNOT_TOL),
        ]
        if single_temperature:
            worst = max([0.0] + [-r["P"] for r in rows if math.isfinite(r["P"])])
            checks.append(
                InvariantCheck(f"{prefix}single_temperature", worst, SINGLE_TEMPERATURE_TOL)
            )
        return checks

    def run_check(self) -> CheckReport:
        """Invariant suite at the configured point, plus grid-wide bounds when a sweep is set."""
        try:
            result = evaluate_pipeline(self.config)
        except (
            ConvergenceError,
            NonUniqueKernelError,
            NoSteadyStateError,
            LinAlgError,
            FloatingPointError,
        ) as error:
            logger.error(f"The configured point could not be solved: {error}")
            return CheckReport((), numerical_failure=True)
        checks = self.point_checks(result)

        if self.config.sweep is not None:
            rows = self.evaluate_grid()
            solved = [row.as_dict() for row in rows if not row.failed]
            if not solved:
                return CheckReport(tuple(checks), numerical_failure=True)
            single_temperature = (
                self.config.cold.beta == self.config.hot.beta
                and self.config.sweep.parameter not in ("beta_C", "beta_H")
            )
            checks.extend(self._bound_checks(solved, single_temperature, "sweep_"))

        for check in checks:
            level = logging.DEBUG if check.passed else logging.WARNING
            logger.log(level, f"{check.name}: {check.violation:.3g} (tolerance {check.tolerance:g})")
        return CheckReport(tuple(checks))


def report_row(report) -> dict:
    return {
        "regime": report.regime,
        "eta": report.eta,
        "eta_carnot": report.eta_carnot,
        "cop": report.cop,
        "cop_carnot": report.cop_carnot,
        "P": report.P,
    }


def run_sweep(cfg: RunConfig, csv_path=None, svg_path=None) -> SweepOutcome:
    return SweepOrchestrator(cfg).run_sweep(csv_path, svg_path)


def run_check(cfg: RunConfig) -> CheckReport:
    return SweepOrchestrator(cfg).run_check()


# Copyright (c) 2025 AMD
