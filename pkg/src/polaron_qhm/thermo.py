"""
Heat currents, power and figures of merit of the steady-state machine.

Sign convention: J_i > 0 is energy flowing into the TLS through channel i,
P < 0 is work extracted, and P = -J1 - J2.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Tuple

import numpy as np

from polaron_qhm.bath_model import BathSpec, thermal_coth
from polaron_qhm.floquet_lindblad import DissipatorTerm, Liouvillian, MachineParams
from polaron_qhm.kms_thermometry import BroadenedTemperatures, boltzmann

logger = logging.getLogger("polaron_qhm.main")

REGIMES = ("engine", "refrigerator", "dissipator")

# dressed-basis sigma_z / 2; its change under a jump counts the transitions
HALF_SIGMA_Z = np.diag([0.5, -0.5]).astype(complex)


class RegimeError(ValueError):
    """Raised when an engine figure of merit is asked for outside the engine regime."""


class UnphysicalFractionError(ValueError):
    """Raised when lambda(omega0) >= 1 leaves no hot-bath share of the heat input."""


def _term_currents(L: Liouvillian, rho: np.ndarray) -> Iterator[Tuple[DissipatorTerm, float]]:
    vec = np.asarray(rho, dtype=complex).ravel()
    for term in L.terms:
        if term.rate == 0:
            continue
        change = (term.matrix @ vec).reshape(2, 2)
        trace = float(np.trace(HALF_SIGMA_Z @ change).real)
        component = term.component
        yield term, component.sign * component.rate_frequency * trace


def currents_and_power(L: Liouvillian, rho: np.ndarray) -> Tuple[float, float, float]:
    """J_i = sum sgn(w) (w + q w_l) Tr[sigma_z/2 D_{i,q,w}(rho)] for both channels."""
    currents = {1: 0.0, 2: 0.0}
    for term, current in _term_currents(L, rho):
        currents[term.component.channel] += current
    J1, J2 = currents[1], currents[2]
    return J1, J2, -J1 - J2


def heat_cold_fraction(
    L: Liouvillian, rho: np.ndarray, temperatures: BroadenedTemperatures
) -> float:
    """
    Cold share of J2: every channel-2 component's current weighted by the
    lambda of the inverse temperature its rates were paired with.

    NaN when J2 vanishes or a carrying component has no defined lambda.
    """
    total = weighted = 0.0
    for term, current in _term_currents(L, rho):
        if term.component.channel != 2 or current == 0:
            continue
        lam = temperatures.cold_fraction(term.beta)
        if not math.isfinite(lam):
            return math.nan
        total += current
        weighted += lam * current
    if total == 0:
        return math.nan
    return weighted / total


def recompute_currents(L: Liouvillian, rho: np.ndarray) -> Tuple[float, float]:
    """
    Same currents through the adjoint generator acting on sigma_z/2, built
    from the stored operators and rates only.
    """
    currents = {1: 0.0, 2: 0.0}
    for term in L.terms:
        S = term.component.op
        Sd = S.conj().T
        adjoint = Sd @ HALF_SIGMA_Z @ S - 0.5 * (
            Sd @ S @ HALF_SIGMA_Z + HALF_SIGMA_Z @ Sd @ S
        )
        trace = term.rate * float(np.trace(adjoint @ rho).real)
        component = term.component
        currents[component.channel] += component.sign * component.rate_frequency * trace
    return currents[1], currents[2]


def analytic_weak_driving(
    params: MachineParams, G1_delta: float, G2_omega0: float, beta_eff: float
) -> Tuple[float, float, float]:
    """
    Closed-form currents for weak driving at positive detuning:
    (delta, -omega0, omega_l) * G1 G2 / (G1 + G2) * (e^{-beta_C delta} - e^{-beta(omega0) omega0}).
    """
    delta = params.delta
    if delta <= 0:
        raise ValueError(f"The weak-driving forms need positive detuning, got delta = {delta}")
    if G1_delta < 0 or G2_omega0 < 0:
        raise ValueError("Rates must be nonnegative")
    total = G1_delta + G2_omega0
    if total == 0:
        return 0.0, 0.0, 0.0
    bracket = boltzmann(params.cold.beta, delta) - boltzmann(beta_eff, params.omega0)
    common = G1_delta * G2_omega0 / total * bracket
    return delta * common, -params.omega0 * common, params.omega_l * common


def extraction_condition(
    omega_l: float, omega0: float, beta_eff: float, beta_C: float
) -> bool:
    """omega_l / omega0 < 1 - beta(omega0) / beta_C; the boundary does not extract."""
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    return omega_l / omega0 < 1.0 - beta_eff / beta_C


def efficiency(P: float, J2: float, lambda0: float) -> Tuple[float, float]:
    """(eta, eta_naive) with eta = -P / (J2 (1 - lambda0))."""
    if P >= 0 or J2 <= 0:
        raise RegimeError(f"Not an engine: P = {P}, J2 = {J2}")
    if lambda0 >= 1:
        raise UnphysicalFractionError(
            f"lambda(omega0) = {lambda0} leaves no hot-bath share of J2"
        )
    eta_naive = -P / J2
    return eta_naive / (1.0 - lambda0), eta_naive


def cooling_power(J1: float, J2: float, lambda0: float) -> float:
    """
    Heat drawn from the cold bath: J1 plus the cold share of J2.

    In refrigerator operation J2 < 0, so this is J1 - lambda0 |J2|.
    """
    return J1 + lambda0 * J2


def classify_regime(P: float, J_C: float) -> str:
    if P < 0:
        return "engine"
    if P > 0 and J_C > 0:
        return "refrigerator"
    return "dissipator"


def carnot_efficiency(beta_C: float, beta_H: float) -> float:
    return 1.0 - beta_H / beta_C


def carnot_cop(beta_C: float, beta_H: float) -> float:
    gap = beta_C - beta_H
    if gap == 0:
        return math.inf
    return beta_H / gap


@dataclass(frozen=True)
class ThermoReport:
    J1: float
    J2: float
    P: float
    J_C: float
    beta_eff: float
    lam: float
    eta: float
    eta_naive: float
    eta_carnot: float
    cop: float
    cop_carnot: float
    regime: str
    flags: Tuple[str, ...] = ()
    # cold share of J2 that splits the heat in eta and J_C
    lam_heat: float = math.nan


def thermo_report(
    J1: float,
    J2: float,
    P: float,
    beta_eff: float,
    lam: float,
    beta_C: float,
    beta_H: float,
    noise_floor: float = 0.0,
    lam_heat: Optional[float] = None,
) -> ThermoReport:
    """
    Collect the figures of merit; the gated ones are NaN outside their regime.

    `lam_heat` is the cold share of J2 used in eta and J_C; it defaults to
    lambda(omega0). Power and cooling power within `noise_floor` of zero count
    as zero when the regime is decided.
    """
    flags = []
    if lam_heat is None:
        lam_heat = lam
    J_C = cooling_power(J1, J2, lam_heat) if math.isfinite(lam_heat) else J1
    regime = classify_regime(
        0.0 if abs(P) <= noise_floor else P, 0.0 if abs(J_C) <= noise_floor else J_C
    )
    eta = eta_naive = cop = math.nan
    if regime == "engine":
        try:
            eta, eta_naive = efficiency(P, J2, lam_heat)
        except RegimeError:
            eta_naive = -P / J2 if J2 != 0 else math.nan
            flags.append("engine-without-hot-input")
        except UnphysicalFractionError:
            eta_naive = -P / J2
            flags.append("unphysical-lambda")
    elif regime == "refrigerator":
        cop = J_C / P
    return ThermoReport(
        J1=J1,
        J2=J2,
        P=P,
        J_C=J_C,
        beta_eff=beta_eff,
        lam=lam,
        eta=eta,
        eta_naive=eta_naive,
        eta_carnot=carnot_efficiency(beta_C, beta_H),
        cop=cop,
        cop_carnot=carnot_cop(beta_C, beta_H),
        regime=regime,
        flags=tuple(flags),
        lam_heat=lam_heat,
    )


def envelope_exponent(cold: BathSpec) -> float:
    """sum_k |g_k / w_k|^2 coth(beta_C w_k / 2)."""
    ratios = cold.couplings / cold.frequencies
    return float(np.sum(ratios**2 * thermal_coth(cold.beta, cold.frequencies)))


def asymptotic_power_envelope(xi_grid: Iterable[float], cold: BathSpec) -> np.ndarray:
    """E(xi) = e^{-4 xi^2 S} / xi^2, the strong-coupling shape of |P| up to a constant."""
    xi = np.asarray(list(xi_grid), dtype=float)
    if np.any(xi <= 0):
        raise ValueError("xi values must be positive")
    return np.exp(-4.0 * xi**2 * envelope_exponent(cold)) / xi**2


def fit_envelope_scale(power, envelope) -> float:
    """Single constant c minimizing the log-distance between |P| and c E."""
    power = np.abs(np.asarray(power, dtype=float))
    envelope = np.asarray(envelope, dtype=float)
    usable = (power > 0) & (envelope > 0) & np.isfinite(power) & np.isfinite(envelope)
    if not np.any(usable):
        raise ValueError("No positive finite samples to fit the envelope to")
    return float(np.exp(np.mean(np.log(power[usable]) - np.log(envelope[usable]))))


def envelope_spread(xi_grid, power, cold: BathSpec) -> float:
    """max / min of |P| / E(xi) over the largest-xi decade of the grid."""
    xi = np.asarray(list(xi_grid), dtype=float)
    power = np.abs(np.asarray(power, dtype=float))
    if xi.shape != power.shape:
        raise ValueError("xi_grid and power must have the same length")
    top = xi >= np.max(xi) / 10.0
    with np.errstate(divide="ignore", over="ignore"):
        ratio = power[top] / asymptotic_power_envelope(xi[top], cold)
    ratio = ratio[np.isfinite(ratio) & (ratio > 0)]
    if ratio.size < 2:
        raise ValueError("Need two usable samples in the largest decade")
    return float(np.max(ratio) / np.min(ratio))


# Copyright (c) 2025 AMD
