"""
KMS checks and frequency-local temperatures of the polaron-frame spectra.

The hot-channel spectrum mixes hot emission/absorption with cold-bath
harmonics. Each of its lines keeps the (omega_H, omega_C, weight) triples it
was built from, which is all that is needed for beta(omega) and lambda(omega).
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from polaron_qhm.spectra import DEFAULT_MERGE_TOL, LineSpectrum

logger = logging.getLogger("polaron_qhm.main")

DEFAULT_WEIGHT_FLOOR = 1e-14
DEGENERATE_BETA_GAP = 1e-12


class MissingFrequencyError(LookupError):
    """Raised when a frequency has no line (above the weight floor) in a decomposition."""


class DegenerateTemperaturesError(ValueError):
    """Raised when beta_C == beta_H, so lambda(omega) is undefined."""

    def __init__(self, message: str, beta_eff: float):
        super().__init__(message)
        self.beta_eff = beta_eff


def beta_energy(beta: float, energy):
    """beta*energy with 0*inf taken as 0."""
    energy_arr = np.asarray(energy, dtype=float)
    out = np.zeros_like(energy_arr)
    np.multiply(beta, energy_arr, out=out, where=energy_arr != 0)
    return out


def boltzmann(beta: float, energy: float) -> float:
    """exp(-beta*energy) with the zero-temperature limit handled."""
    return float(np.exp(-beta_energy(beta, energy)))


def temperatures_degenerate(beta_C: float, beta_H: float) -> bool:
    if math.isinf(beta_C) and math.isinf(beta_H):
        return True
    return abs(beta_C - beta_H) < DEGENERATE_BETA_GAP


def cold_fraction(beta: float, beta_C: float, beta_H: float) -> float:
    """lambda = (beta - beta_H) / (beta_C - beta_H), NaN for degenerate or undefined inputs."""
    if temperatures_degenerate(beta_C, beta_H) or math.isnan(beta):
        return math.nan
    if beta == beta_C:
        return 1.0
    if beta == beta_H:
        return 0.0
    return (beta - beta_H) / (beta_C - beta_H)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Origin triples of every line of the mixed-bath spectrum."""

    frequencies: np.ndarray
    line_index: np.ndarray
    omega_H: np.ndarray
    omega_C: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("frequencies", "omega_H", "omega_C", "weights"):
            arrays[name] = np.array(getattr(self, name), dtype=float).ravel()
        arrays["line_index"] = np.array(self.line_index, dtype=int).ravel()
        size = arrays["weights"].size
        for name in ("line_index", "omega_H", "omega_C"):
            if arrays[name].size != size:
                raise ValueError(f"{name} must have one entry per term")
        if size and (
            arrays["line_index"].min() < 0
            or arrays["line_index"].max() >= arrays["frequencies"].size
        ):
            raise ValueError("line_index out of range")
        if np.any(arrays["weights"] < 0):
            raise ValueError("Term weights must be nonnegative")
        for name, value in arrays.items():
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def empty(cls) -> "SpectralDecomposition":
        return cls(np.zeros(0), np.zeros(0, dtype=int), np.zeros(0), np.zeros(0), np.zeros(0))

    @property
    def line_weights(self) -> np.ndarray:
        return np.bincount(
            self.line_index, weights=self.weights, minlength=self.frequencies.size
        )

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def line_of(self, omega: float, tol: float = DEFAULT_MERGE_TOL) -> int:
        if self.frequencies.size:
            idx = int(np.argmin(np.abs(self.frequencies - omega)))
            if abs(self.frequencies[idx] - omega) <= tol:
                return idx
        raise MissingFrequencyError(f"No decomposed line at omega = {omega}")

    def terms_at(
        self, omega: float, tol: float = DEFAULT_MERGE_TOL
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        mask = self.line_index == self.line_of(omega, tol)
        return self.omega_H[mask], self.omega_C[mask], self.weights[mask]


@dataclass(frozen=True)
class LocalTemperature:
    omega: float
    beta_eff: float
    lam: float

    def reconstructed_beta(self, beta_C: float, beta_H: float) -> float:
        return beta_C * self.lam + beta_H * (1.0 - self.lam)


@dataclass(frozen=True)
class KmsLineCheck:
    omega: float
    weight_positive: float
    weight_negative: float
    violation: float


@dataclass(frozen=True)
class KmsReport:
    """Per-line detailed-balance violations; lines without a partner are listed separately."""

    max_violation: float
    lines: Tuple[KmsLineCheck, ...] = ()
    unpaired: Tuple[float, ...] = ()
    max_term_violation: float = 0.0

    @property
    def worst(self) -> float:
        return max(self.max_violation, self.max_term_violation)


def _relative_gap(actual: float, expected: float, floor: float) -> float:
    return abs(actual - expected) / max(expected, floor)


def _pair_lines(
    s: LineSpectrum,
    expected_partner,
    floor: float,
    tol: float,
) -> Tuple[List[KmsLineCheck], List[float]]:
    checks: List[KmsLineCheck] = []
    unpaired: List[float] = []
    for i, (omega, weight) in enumerate(zip(s.frequencies, s.weights)):
        if omega <= 0:
            continue
        j = s.find_line(-omega, tol)
        partner = 0.0 if j is None else float(s.weights[j])
        if weight <= floor and partner <= floor:
            continue
        expected = expected_partner(i, omega, weight)
        if j is None:
            if expected <= floor:
                continue
            unpaired.append(float(omega))
            checks.append(KmsLineCheck(float(omega), float(weight), partner, 1.0))
            continue
        checks.append(
            KmsLineCheck(
                float(omega),
                float(weight),
                partner,
                _relative_gap(partner, expected, floor),
            )
        )
    # absorption lines with no emission partner cannot satisfy detailed balance
    for omega, weight in zip(s.frequencies, s.weights):
        if omega < 0 and weight > floor and s.find_line(-omega, tol) is None:
            unpaired.append(float(omega))
            checks.append(KmsLineCheck(float(-omega), 0.0, float(weight), 1.0))
    return checks, unpaired


def check_kms_G1(
    s: LineSpectrum,
    beta_C: float,
    weight_floor: float = DEFAULT_WEIGHT_FLOOR,
    tol: float = DEFAULT_MERGE_TOL,
) -> KmsReport:
    """Standard KMS on the raw line weights: W(-w) = e^{-beta_C w} W(w)."""
    total = s.total_weight
    if total == 0:
        return KmsReport(0.0)
    floor = weight_floor * total
    checks, unpaired = _pair_lines(
        s, lambda _i, omega, weight: weight * boltzmann(beta_C, omega), floor, tol
    )
    if unpaired:
        logger.debug(f"KMS: {len(unpaired)} line(s) without a partner above the floor")
    worst = max((c.violation for c in checks), default=0.0)
    return KmsReport(worst, tuple(checks), tuple(unpaired))


def local_temperature_beta(
    d: SpectralDecomposition,
    omega: float,
    beta_C: float,
    beta_H: float,
    weight_floor: float = DEFAULT_WEIGHT_FLOOR,
    tol: float = DEFAULT_MERGE_TOL,
) -> LocalTemperature:
    """
    beta(omega) from e^{-beta(omega) omega} = sum K e^{-beta_H omega_H - beta_C omega_C}.

    K is each origin term's share of the line weight at omega. lambda(omega)
    is not clamped.
    """
    if omega <= 0:
        raise ValueError("local temperatures are defined for omega > 0")
    omega_H, omega_C, weights = d.terms_at(omega, tol)
    line_weight = float(np.sum(weights))
    if line_weight <= weight_floor * d.total_weight or line_weight == 0:
        raise MissingFrequencyError(f"Line at omega = {omega} is below the weight floor")
    shares = weights / line_weight
    exponents = -(beta_energy(beta_H, omega_H) + beta_energy(beta_C, omega_C))
    beta_eff = float(-logsumexp(exponents, b=shares) / omega)

    if temperatures_degenerate(beta_C, beta_H):
        raise DegenerateTemperaturesError(
            f"beta_C = {beta_C} and beta_H = {beta_H} coincide; lambda is undefined",
            beta_eff,
        )
    lam = (beta_eff - beta_H) / (beta_C - beta_H)
    return LocalTemperature(float(omega), beta_eff, float(lam))


def _effective_beta(d, omega, beta_C, beta_H, weight_floor, tol) -> Optional[float]:
    try:
        return local_temperature_beta(d, omega, beta_C, beta_H, weight_floor, tol).beta_eff
    except DegenerateTemperaturesError as error:
        return error.beta_eff
    except MissingFrequencyError:
        return None


def line_betas(d: SpectralDecomposition, beta_C: float, beta_H: float) -> np.ndarray:
    """
    beta(omega_k) of every decomposed line from its own origin terms.

    NaN for lines without weight or at zero frequency, +inf when every term
    of the line is frozen out.
    """
    n = d.frequencies.size
    betas = np.full(n, np.nan)
    if n == 0:
        return betas
    live = d.weights > 0
    line = d.line_index[live]
    exponents = -(beta_energy(beta_H, d.omega_H[live]) + beta_energy(beta_C, d.omega_C[live]))
    peak = np.full(n, -np.inf)
    np.maximum.at(peak, line, exponents)
    shift = np.where(np.isfinite(peak), peak, 0.0)
    scaled = np.bincount(
        line, weights=d.weights[live] * np.exp(exponents - shift[line]), minlength=n
    )
    line_weights = d.line_weights
    usable = (line_weights > 0) & (d.frequencies != 0)
    with np.errstate(divide="ignore"):
        log_mean = np.log(scaled[usable] / line_weights[usable]) + shift[usable]
    betas[usable] = -log_mean / d.frequencies[usable]
    return betas


@dataclass(frozen=True, eq=False)
class BroadenedTemperatures:
    """
    Inverse temperatures that pair every broadened emission rate with its
    absorption rate, G(-w) = e^{-beta(w) w} G(w).

    Channel 1 is thermal at beta_C. On channel 2 each positive line keeps its
    own beta_k and contributes in proportion to its Lorentzian at w:
    e^{-beta(w) w} = sum_k s_k(w) e^{-beta_k w}.
    """

    beta_C: float
    beta_H: float
    frequencies: np.ndarray
    weights: np.ndarray
    betas: np.ndarray

    @classmethod
    def from_decomposition(
        cls, d: SpectralDecomposition, beta_C: float, beta_H: float
    ) -> "BroadenedTemperatures":
        betas = line_betas(d, beta_C, beta_H)
        keep = (d.frequencies > 0) & ~np.isnan(betas)
        return cls(beta_C, beta_H, d.frequencies[keep], d.line_weights[keep], betas[keep])

    @property
    def has_hot_lines(self) -> bool:
        return self.frequencies.size > 0

    def hot_channel_beta(self, omega: float, eta: float) -> float:
        if omega <= 0:
            raise ValueError("local temperatures are defined for omega > 0")
        if not eta > 0:
            raise ValueError("eta must be positive")
        if not self.has_hot_lines:
            return math.inf
        shares = self.weights / ((omega - self.frequencies) ** 2 + eta**2)
        shares = shares / np.sum(shares)
        with np.errstate(divide="ignore"):
            return float(-logsumexp(-self.betas * omega, b=shares) / omega)

    def channel_beta(self, channel: int, omega: float, eta: float) -> float:
        """beta pairing the rates at +-omega; NaN at zero frequency on channel 2."""
        if channel == 1:
            return self.beta_C
        if omega <= 0:
            return math.nan
        return self.hot_channel_beta(omega, eta)

    def cold_fraction(self, beta: float) -> float:
        return cold_fraction(beta, self.beta_C, self.beta_H)


def _term_key(omega_H: float, omega_C: float, tol: float) -> Tuple[int, int]:
    return int(np.rint(omega_H / tol)), int(np.rint(omega_C / tol))


def generalized_kms_check(
    s: LineSpectrum,
    d: SpectralDecomposition,
    beta_C: float,
    beta_H: float,
    weight_floor: float = DEFAULT_WEIGHT_FLOOR,
    tol: float = DEFAULT_MERGE_TOL,
) -> KmsReport:
    """
    Modified KMS of the mixed-bath spectrum, per line with beta(omega) and per
    origin term with (beta_H, beta_C) separately.
    """
    total = s.total_weight
    if total == 0:
        return KmsReport(0.0)
    floor = weight_floor * total

    def expected_partner(_i, omega, weight):
        beta_eff = _effective_beta(d, omega, beta_C, beta_H, 0.0, tol)
        if beta_eff is None:
            return 0.0
        return weight * boltzmann(beta_eff, omega)

    checks, unpaired = _pair_lines(s, expected_partner, floor, tol)

    terms_by_line: Dict[int, Dict[Tuple[int, int], float]] = {}
    for line, h, c, w in zip(d.line_index, d.omega_H, d.omega_C, d.weights):
        terms_by_line.setdefault(int(line), {})[_term_key(h, c, tol)] = float(w)

    worst_term = 0.0
    for line, omega in enumerate(d.frequencies):
        if omega <= 0:
            continue
        try:
            mirror_line = d.line_of(-omega, tol)
            mirror_terms = terms_by_line.get(mirror_line, {})
        except MissingFrequencyError:
            mirror_terms = {}
        mask = d.line_index == line
        for h, c, w in zip(d.omega_H[mask], d.omega_C[mask], d.weights[mask]):
            if w <= floor:
                continue
            expected = w * float(np.exp(-(beta_energy(beta_H, h) + beta_energy(beta_C, c))))
            mirrored = mirror_terms.get(_term_key(-h, -c, tol))
            if mirrored is None:
                if expected > floor:
                    worst_term = max(worst_term, 1.0)
                continue
            if mirrored <= floor and expected <= floor:
                continue
            worst_term = max(worst_term, _relative_gap(mirrored, expected, floor))

    worst = max((c.violation for c in checks), default=0.0)
    return KmsReport(worst, tuple(checks), tuple(unpaired), worst_term)


# Copyright (c) 2025 AMD
