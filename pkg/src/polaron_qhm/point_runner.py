"""
The full pipeline at one parameter point: spectra, local temperature,
Liouvillian, steady state and thermodynamics.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError

from polaron_qhm.bath_model import weak_coupling_diagnostic, weak_spectrum
from polaron_qhm.floquet_lindblad import (
    DressedBasis,
    HarmonicComponent,
    Liouvillian,
    MachineParams,
    NoSteadyStateError,
    NonUniqueKernelError,
    SteadyStateDiagnostics,
    build_liouvillian,
    dressed_basis,
    fourier_decompose,
    steady_state,
    steady_state_diagnostics,
)
from polaron_qhm.kms_thermometry import (
    BroadenedTemperatures,
    SpectralDecomposition,
    temperatures_degenerate,
)
from polaron_qhm.output_writers import read_spectrum_csv
from polaron_qhm.polaron import ConvergenceError, spectrum_G1, spectrum_G2
from polaron_qhm.run_config import ConfigError, RunConfig, SWEEP_COLUMNS
from polaron_qhm.spectra import LineSpectrum, evaluate_spectrum
from polaron_qhm.thermo import (
    ThermoReport,
    analytic_weak_driving,
    currents_and_power,
    heat_cold_fraction,
    thermo_report,
)

logger = logging.getLogger("polaron_qhm.main")

CURRENT_NOISE = 1e-12


@dataclass(frozen=True)
class LocalTemperatureChoice:
    beta_eff: float
    lam: float
    flags: Tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class PipelineResult:
    config: RunConfig
    params: MachineParams
    G1: LineSpectrum
    G2: LineSpectrum
    decomposition: SpectralDecomposition
    temperatures: BroadenedTemperatures
    basis: DressedBasis
    components: Tuple[HarmonicComponent, ...]
    liouvillian: Liouvillian
    rho: Optional[np.ndarray]
    diagnostics: Optional[SteadyStateDiagnostics]
    report: ThermoReport
    local: LocalTemperatureChoice
    flags: Tuple[str, ...]


@dataclass(frozen=True)
class SweepRow:
    value: float
    A: float = math.nan
    Omega_r: float = math.nan
    G1_delta: float = math.nan
    G2_omega0: float = math.nan
    beta_eff: float = math.nan
    lam: float = math.nan
    lam_heat: float = math.nan
    J1: float = math.nan
    J2: float = math.nan
    P: float = math.nan
    J_C: float = math.nan
    eta: float = math.nan
    eta_naive: float = math.nan
    eta_carnot: float = math.nan
    cop: float = math.nan
    cop_carnot: float = math.nan
    regime: str = ""
    residual: float = math.nan
    P_weak: float = math.nan
    G1_weak_delta: float = math.nan
    weak_coupling: float = math.nan
    flags: str = ""

    @property
    def failed(self) -> bool:
        return "failed" in self.flags.split(";")

    def as_dict(self) -> dict:
        record = asdict(self)
        record["lambda"] = record.pop("lam")
        record["lambda_heat"] = record.pop("lam_heat")
        return {name: record[name] for name in SWEEP_COLUMNS}


def select_local_temperature(
    temperatures: BroadenedTemperatures,
    omega0: float,
    eta: float,
) -> LocalTemperatureChoice:
    """
    beta(omega0) and lambda(omega0) of the broadened hot-channel spectrum, the
    same inverse temperature that pairs the channel-2 rates at +-omega0.
    """
    flags: List[str] = []
    if not temperatures.has_hot_lines:
        return LocalTemperatureChoice(math.nan, math.nan, ("no-hot-lines",))
    if not np.any(np.abs(temperatures.frequencies - omega0) <= eta):
        flags.append("off-resonant-beta")
    beta_eff = temperatures.hot_channel_beta(omega0, eta)
    if temperatures_degenerate(temperatures.beta_C, temperatures.beta_H):
        flags.append("degenerate-temperatures")
    return LocalTemperatureChoice(
        beta_eff, temperatures.cold_fraction(beta_eff), tuple(flags)
    )


def load_G1(cfg: RunConfig, params: MachineParams) -> LineSpectrum:
    n = cfg.numerics
    if cfg.inputs.g1_csv:
        logger.debug(f"Using the channel-1 spectrum from {cfg.inputs.g1_csv}")
        try:
            return read_spectrum_csv(cfg.inputs.g1_csv, n.broadening_eta)
        except ValueError as error:
            raise ConfigError("inputs.g1_csv", str(error)) from error
    return spectrum_G1(
        params.cold,
        params.Omega,
        n.broadening_eta,
        n.bessel_tol,
        n.bessel_cap,
        n.weight_floor,
        n.merge_tol,
    )


def evaluate_pipeline(cfg: RunConfig) -> PipelineResult:
    """Run every stage at one point; domain errors propagate to the caller."""
    n = cfg.numerics
    params = cfg.machine_params()
    G1 = load_G1(cfg, params)
    G2, decomposition = spectrum_G2(
        params.cold,
        params.hot,
        n.broadening_eta,
        n.bessel_tol,
        n.bessel_cap,
        n.weight_floor,
        n.merge_tol,
    )
    basis = dressed_basis(params)
    components = tuple(fourier_decompose(params, basis, n.merge_tol))
    temperatures = BroadenedTemperatures.from_decomposition(
        decomposition, params.cold.beta, params.hot.beta
    )
    liouvillian = build_liouvillian(components, G1, G2, temperatures, n.broadening_eta)

    flags: List[str] = []
    if basis.degenerate:
        flags.append("degenerate-basis")
    if liouvillian.all_rates_zero:
        flags.append("all-rates-zero")
        rho, diagnostics = None, None
        J1 = J2 = P = 0.0
        lam_heat = math.nan
    else:
        rho = steady_state(liouvillian, n.rank_tol)
        diagnostics = steady_state_diagnostics(liouvillian, rho)
        J1, J2, P = currents_and_power(liouvillian, rho)
        lam_heat = heat_cold_fraction(liouvillian, rho, temperatures)

    local = select_local_temperature(temperatures, params.omega0, n.broadening_eta)
    flags.extend(local.flags)
    # currents carry rounding of order eps * |L| * frequency
    noise_floor = CURRENT_NOISE * liouvillian.norm * max(params.omega0, params.omega_l)
    report = thermo_report(
        J1,
        J2,
        P,
        local.beta_eff,
        local.lam,
        params.cold.beta,
        params.hot.beta,
        noise_floor,
        lam_heat,
    )
    flags.extend(report.flags)
    return PipelineResult(
        config=cfg,
        params=params,
        G1=G1,
        G2=G2,
        decomposition=decomposition,
        temperatures=temperatures,
        basis=basis,
        components=components,
        liouvillian=liouvillian,
        rho=rho,
        diagnostics=diagnostics,
        report=report,
        local=local,
        flags=tuple(flags),
    )


def weak_driving_power(result: PipelineResult) -> float:
    """Closed-form power with the solver's own rates at the dressed resonances."""
    params = result.params
    if not params.weak_driving or params.delta <= 0 or result.basis.degenerate:
        return math.nan
    if not math.isfinite(result.local.beta_eff):
        return math.nan
    eta = result.config.numerics.broadening_eta
    Omega_prime = result.basis.Omega_prime
    G1_rate = evaluate_spectrum(result.G1, Omega_prime, eta)
    G2_rate = evaluate_spectrum(result.G2, Omega_prime + params.omega_l, eta)
    return analytic_weak_driving(params, G1_rate, G2_rate, result.local.beta_eff)[2]


def _row_from_result(value: float, result: PipelineResult) -> SweepRow:
    params, report = result.params, result.report
    eta = result.config.numerics.broadening_eta
    weak_G1 = weak_spectrum(params.cold, eta, result.config.numerics.merge_tol)
    return SweepRow(
        value=value,
        A=params.A,
        Omega_r=params.Omega_r,
        G1_delta=evaluate_spectrum(result.G1, params.delta, eta),
        G2_omega0=evaluate_spectrum(result.G2, params.omega0, eta),
        beta_eff=report.beta_eff,
        lam=report.lam,
        lam_heat=report.lam_heat,
        J1=report.J1,
        J2=report.J2,
        P=report.P,
        J_C=report.J_C,
        eta=report.eta,
        eta_naive=report.eta_naive,
        eta_carnot=report.eta_carnot,
        cop=report.cop,
        cop_carnot=report.cop_carnot,
        regime=report.regime,
        residual=result.diagnostics.residual if result.diagnostics else 0.0,
        P_weak=weak_driving_power(result),
        G1_weak_delta=evaluate_spectrum(weak_G1, params.delta, eta),
        weak_coupling=weak_coupling_diagnostic(params.cold, params.omega0, eta),
        flags=";".join(result.flags),
    )


def run_point(cfg: RunConfig, value: Optional[float] = None) -> SweepRow:
    """
    One sweep row. Numerical failures never escape: they come back as a
    row flagged `failed` plus the reason.
    """
    point_cfg = cfg if value is None else cfg.with_sweep_value(value)
    label = math.nan if value is None else float(value)
    try:
        result = evaluate_pipeline(point_cfg)
    except ConvergenceError as error:
        reason, detail = "bessel-truncation", str(error)
    except NonUniqueKernelError as error:
        reason, detail = "kernel-degenerate", str(error)
    except (NoSteadyStateError, LinAlgError, FloatingPointError) as error:
        reason, detail = "solver-failure", str(error)
    else:
        return _row_from_result(label, result)
    logger.error(f"Point {label} failed ({reason}): {detail}")
    return SweepRow(value=label, flags=f"failed;{reason}")


# Copyright (c) 2025 AMD
