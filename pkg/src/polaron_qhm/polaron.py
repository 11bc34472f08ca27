"""
Polaron-frame quantities: Franck-Condon factor, renormalized drive, the
transformed correlation functions and their exact line spectra.

The cold-bath factor A^2 exp(phi(t)) of a single mode, with
phi(t) = a[(n+1) e^{-i w t} + n e^{i w t}] and a = 4 xi^2 |g|^2 / w^2, is the
generating function of the difference of two Poisson variables. Its Fourier
weights are therefore

    W_n = sum_m Pois(n + m; a(n+1)) Pois(m; a n),

equal to e^{n beta w / 2 - a tanh(beta w / 4)} I_n(a / sinh(beta w / 2)).
Several modes are combined by convolution.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy.special import gammaln, ive, xlogy

from polaron_qhm.bath_model import (
    BathMode,
    BathSpec,
    thermal_coth,
    thermal_occupation,
    weak_correlation,
    weak_spectrum,
)
from polaron_qhm.kms_thermometry import (
    DEFAULT_WEIGHT_FLOOR,
    SpectralDecomposition,
    beta_energy,
)
from polaron_qhm.spectra import (
    DEFAULT_ETA,
    DEFAULT_MERGE_TOL,
    LineSpectrum,
    evaluate_spectrum,
    merge_lines,
)

logger = logging.getLogger("polaron_qhm.main")

DEFAULT_BESSEL_TOL = 1e-12
DEFAULT_BESSEL_CAP = 400
HARMONIC_METHODS = ("series", "bessel")
ORACLE_MIN_SAMPLES = 2**14

__all__ = [
    "ConvergenceError",
    "PolaronParams",
    "HarmonicWeights",
    "SampledSpectrum",
    "franck_condon_A",
    "renormalized_rabi",
    "polaron_params",
    "transformed_correlation_1",
    "transformed_correlation_2",
    "harmonic_weights",
    "cold_harmonics",
    "convolve_weights",
    "spectrum_G1",
    "spectrum_G2",
    "fft_spectrum_oracle",
    "evaluate_spectrum",
]


class ConvergenceError(RuntimeError):
    """Raised when a harmonic series needs more orders than the configured cap."""


@dataclass(frozen=True)
class PolaronParams:
    alphas: Tuple[float, ...]
    A: float
    Omega_r: float

    def __post_init__(self):
        if not 0 < self.A <= 1:
            raise ValueError(f"Franck-Condon factor must lie in (0, 1], got {self.A}")


def _require_label(bath: BathSpec, label: str) -> None:
    if bath.label != label:
        raise ValueError(f"Expected the {label} bath, got the {bath.label} bath")


def _displacement_exponent(cold: BathSpec) -> float:
    """phi(0) = 4 xi^2 sum |g/w|^2 coth(beta w / 2) = -2 ln A."""
    ratios = cold.couplings / cold.frequencies
    return float(4.0 * cold.xi**2 * np.sum(ratios**2 * thermal_coth(cold.beta, cold.frequencies)))


def franck_condon_A(cold: BathSpec) -> float:
    _require_label(cold, "cold")
    return math.exp(-0.5 * _displacement_exponent(cold))


def renormalized_rabi(Omega: float, A: float) -> float:
    if Omega < 0:
        raise ValueError("Omega must be nonnegative")
    return Omega * A


def polaron_params(cold: BathSpec, Omega: float) -> PolaronParams:
    A = franck_condon_A(cold)
    alphas = tuple(float(a) for a in cold.xi * cold.couplings / cold.frequencies)
    return PolaronParams(alphas, A, renormalized_rabi(Omega, A))


def _polaron_phase(cold: BathSpec, t) -> np.ndarray:
    """phi(t) = 4 xi^2 sum |g/w|^2 (cos(w t) coth - i sin(w t))."""
    t_arr = np.asarray(t, dtype=float)
    amplitudes = 4.0 * cold.xi**2 * (cold.couplings / cold.frequencies) ** 2
    coth = thermal_coth(cold.beta, cold.frequencies)
    phase = np.multiply.outer(t_arr, cold.frequencies)
    return np.sum(amplitudes * (np.cos(phase) * coth - 1j * np.sin(phase)), axis=-1)


def transformed_correlation_1(cold: BathSpec, Omega: float, t):
    """(Omega/2)^2 (A^2 e^{phi(t)} - A^2), the channel-1 correlation."""
    _require_label(cold, "cold")
    phi0 = _displacement_exponent(cold)
    value = (Omega / 2.0) ** 2 * (
        np.exp(_polaron_phase(cold, t) - phi0) - math.exp(-phi0)
    )
    return complex(value) if np.ndim(value) == 0 else value


def transformed_correlation_2(cold: BathSpec, hot: BathSpec, t):
    """Hot weak correlation times the full cold factor A^2 e^{phi(t)}, elastic part kept."""
    _require_label(cold, "cold")
    _require_label(hot, "hot")
    cold_factor = np.exp(_polaron_phase(cold, t) - _displacement_exponent(cold))
    value = weak_correlation(hot, t) * cold_factor
    return complex(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True, eq=False)
class HarmonicWeights:
    """
    Fourier weights of a (product of) cold displacement correlation factor(s).

    Row i of `orders` holds the harmonic order of every mode, so the line sits
    at orders[i] @ mode_frequencies. `constant_term` is the weight of the
    time-independent A^2 piece while it is still included.
    """

    mode_frequencies: Tuple[float, ...]
    orders: np.ndarray
    weights: np.ndarray
    elastic: bool = True
    constant_term: float = 0.0

    def __post_init__(self):
        mode_frequencies = tuple(float(f) for f in self.mode_frequencies)
        weights = np.array(self.weights, dtype=float).ravel()
        orders = np.array(self.orders, dtype=int).reshape(weights.size, len(mode_frequencies))
        if np.any(weights < 0):
            raise ValueError("Harmonic weights must be nonnegative")
        orders.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "mode_frequencies", mode_frequencies)
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def identity(cls) -> "HarmonicWeights":
        return cls((), np.zeros((1, 0), dtype=int), np.ones(1), True, 1.0)

    @property
    def frequencies(self) -> np.ndarray:
        if not self.mode_frequencies:
            return np.zeros(self.weights.size)
        return self.orders @ np.asarray(self.mode_frequencies)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self) -> int:
        return int(self.weights.size)

    def as_map(self) -> Dict[int, float]:
        if len(self.mode_frequencies) != 1:
            raise ValueError("as_map is only defined for a single mode")
        return {int(n): float(w) for n, w in zip(self.orders[:, 0], self.weights)}

    def without_elastic(self, tol: float = DEFAULT_MERGE_TOL) -> "HarmonicWeights":
        """Remove the constant A^2 piece from the zero-frequency line."""
        if not self.elastic:
            return self
        weights = np.array(self.weights)
        zero = np.nonzero(np.abs(self.frequencies) <= tol)[0]
        if zero.size:
            idx = zero[0]
            weights[idx] = max(weights[idx] - self.constant_term, 0.0)
        keep = weights > 0
        return HarmonicWeights(
            self.mode_frequencies, self.orders[keep], weights[keep], False, 0.0
        )


def _poisson_pmf(mean: float, size: int) -> np.ndarray:
    k = np.arange(size)
    return np.exp(xlogy(k, mean) - mean - gammaln(k + 1))


def _single_mode_weights(
    mode: BathMode,
    xi: float,
    beta: float,
    include_elastic: bool,
    tol: float,
    cap: int,
    method: str,
) -> HarmonicWeights:
    if method not in HARMONIC_METHODS:
        raise ValueError(f"method must be one of {HARMONIC_METHODS}, got {method!r}")
    omega = mode.frequency
    a = 4.0 * xi**2 * mode.strength**2 / omega**2
    if a == 0.0:
        if include_elastic:
            return HarmonicWeights((omega,), [[0]], [1.0], True, 1.0)
        return HarmonicWeights((omega,), np.zeros((0, 1), dtype=int), [], False, 0.0)

    occupation = thermal_occupation(beta, omega)
    emission = a * (occupation + 1.0)
    absorption = a * occupation
    if emission > 4 * cap:
        raise ConvergenceError(
            f"Harmonic series for mode w={omega} (a={a:.3g}) cannot converge within {cap} orders"
        )
    # padding well past the retained range so the edge orders are exact
    size = int(math.ceil(emission + 12.0 * math.sqrt(emission) + 30.0)) + 1
    orders = np.arange(-(size - 1), size)

    if method == "series":
        p_emit = _poisson_pmf(emission, size)
        p_absorb = _poisson_pmf(absorption, size)
        weights = np.convolve(p_emit, p_absorb[::-1])
        constant = float(p_emit[0] * p_absorb[0])
        if not include_elastic:
            weights[size - 1] = float(np.dot(p_emit[1:], p_absorb[1:]))
    else:
        if math.isinf(beta):
            raise ValueError("The modified-Bessel route needs a finite temperature")
        x = beta * omega
        argument = a / math.sinh(0.5 * x)
        with np.errstate(divide="ignore"):
            log_w = np.log(ive(np.abs(orders), argument)) + 0.5 * x * orders
        weights = np.exp(log_w - a * math.tanh(0.25 * x))
        constant = math.exp(-a * thermal_coth(beta, omega))
        if not include_elastic:
            weights[size - 1] = max(weights[size - 1] - constant, 0.0)

    # smallest symmetric window whose omitted weight is below tolerance
    inelastic = -math.expm1(-a * thermal_coth(beta, omega))
    budget = tol * min(1.0, inelastic)
    magnitude = np.abs(orders)
    by_order = np.bincount(magnitude, weights=weights)
    omitted = np.sum(weights) - np.cumsum(by_order)
    reached = np.nonzero(omitted < budget)[0]
    n_max = int(reached[0]) if reached.size else len(by_order)
    if n_max > cap:
        raise ConvergenceError(
            f"Harmonic series for mode w={omega} needs {n_max} orders, cap is {cap}"
        )
    keep = (magnitude <= n_max) & (weights > 0)
    logger.debug(f"Harmonic series for mode w={omega}: a={a:.4g}, N_max={n_max}")
    return HarmonicWeights(
        (omega,),
        orders[keep].reshape(-1, 1),
        weights[keep],
        include_elastic,
        constant if include_elastic else 0.0,
    )


def harmonic_weights(
    cold: BathSpec,
    include_elastic: bool = True,
    tol: float = DEFAULT_BESSEL_TOL,
    cap: int = DEFAULT_BESSEL_CAP,
    method: str = "series",
) -> HarmonicWeights:
    """Fourier weights of A^2 e^{phi(t)} for a single-mode cold bath."""
    if len(cold.modes) != 1:
        raise ValueError("harmonic_weights takes a single mode; use cold_harmonics")
    return _single_mode_weights(
        cold.modes[0], cold.xi, cold.beta, include_elastic, tol, cap, method
    )


def _floor_mask(weights: np.ndarray, exponents: np.ndarray, floor: float) -> np.ndarray:
    """
    Keep a term when it or its detailed-balance partner, of weight
    w e^{-exponent}, is above `floor` times the total. A pair is then kept or
    dropped together.
    """
    threshold = floor * np.sum(weights)
    with np.errstate(over="ignore"):
        partner = weights * np.exp(-exponents)
    return (weights > threshold) | (partner > threshold)


def convolve_weights(
    a: HarmonicWeights,
    b: HarmonicWeights,
    floor: float = 0.0,
    merge_tol: float = DEFAULT_MERGE_TOL,
    beta: float = None,
) -> HarmonicWeights:
    """
    Weights of the product of two independent factors.

    Lines lighter than `floor` times the total are pruned (together with
    their mirror line when `beta` is given), and lines landing on the same
    composite frequency are merged, keeping the orders of the heaviest
    contributor.
    """
    if a.elastic != b.elastic:
        raise ValueError("Cannot convolve weights with and without the elastic term")
    n_a, n_b = len(a), len(b)
    orders = np.hstack(
        (np.repeat(a.orders, n_b, axis=0), np.tile(b.orders, (n_a, 1)))
    )
    weights = np.outer(a.weights, b.weights).ravel()
    mode_frequencies = a.mode_frequencies + b.mode_frequencies

    def composite(rows: np.ndarray) -> np.ndarray:
        if not mode_frequencies:
            return np.zeros(rows.shape[0])
        return rows @ np.asarray(mode_frequencies)

    if floor > 0 and weights.size:
        if beta is None:
            keep = weights > floor * np.sum(weights)
        else:
            keep = _floor_mask(weights, beta_energy(beta, composite(orders)), floor)
        orders, weights = orders[keep], weights[keep]

    frequencies = composite(orders)
    _, merged, group = merge_lines(frequencies, weights, merge_tol)
    if merged.size < weights.size:
        valid = group >= 0
        rank = np.lexsort((-weights[valid], group[valid]))
        first = np.unique(group[valid][rank], return_index=True)[1]
        representative = np.nonzero(valid)[0][rank[first]]
        orders = orders[representative]
        weights = merged
    return HarmonicWeights(
        mode_frequencies, orders, weights, a.elastic, a.constant_term * b.constant_term
    )


def cold_harmonics(
    cold: BathSpec,
    include_elastic: bool = True,
    tol: float = DEFAULT_BESSEL_TOL,
    cap: int = DEFAULT_BESSEL_CAP,
    floor: float = DEFAULT_WEIGHT_FLOOR,
    merge_tol: float = DEFAULT_MERGE_TOL,
    method: str = "series",
) -> HarmonicWeights:
    """Harmonic weights of the full cold factor, any number of modes."""
    _require_label(cold, "cold")
    if len(cold.modes) == 1:
        return harmonic_weights(cold, include_elastic, tol, cap, method)
    combined = HarmonicWeights.identity()
    for mode in cold.modes:
        single = _single_mode_weights(mode, cold.xi, cold.beta, True, tol, cap, method)
        combined = convolve_weights(combined, single, floor, merge_tol, cold.beta)
    return combined if include_elastic else combined.without_elastic(merge_tol)


def spectrum_G1(
    cold: BathSpec,
    Omega: float,
    eta: float = DEFAULT_ETA,
    tol: float = DEFAULT_BESSEL_TOL,
    cap: int = DEFAULT_BESSEL_CAP,
    floor: float = DEFAULT_WEIGHT_FLOOR,
    merge_tol: float = DEFAULT_MERGE_TOL,
) -> LineSpectrum:
    """Channel-1 spectrum: 2 pi (Omega/2)^2 times the inelastic cold harmonics."""
    _require_label(cold, "cold")
    if Omega < 0:
        raise ValueError("Omega must be nonnegative")
    if Omega == 0 or cold.xi == 0:
        return LineSpectrum.empty(eta)
    inelastic = cold_harmonics(cold, False, tol, cap, floor, merge_tol)
    scale = 2.0 * np.pi * (Omega / 2.0) ** 2
    return LineSpectrum.from_lines(
        inelastic.frequencies, scale * inelastic.weights, eta, merge_tol
    )


def spectrum_G2(
    cold: BathSpec,
    hot: BathSpec,
    eta: float = DEFAULT_ETA,
    tol: float = DEFAULT_BESSEL_TOL,
    cap: int = DEFAULT_BESSEL_CAP,
    floor: float = DEFAULT_WEIGHT_FLOOR,
    merge_tol: float = DEFAULT_MERGE_TOL,
) -> Tuple[LineSpectrum, SpectralDecomposition]:
    """
    Channel-2 spectrum: hot weak lines convolved with the full cold harmonics
    (elastic term kept), plus the origin decomposition of every line.
    """
    _require_label(cold, "cold")
    _require_label(hot, "hot")
    hot_lines = weak_spectrum(hot, eta, merge_tol)
    if hot_lines.is_empty():
        return LineSpectrum.empty(eta), SpectralDecomposition.empty()
    cold_lines = cold_harmonics(cold, True, tol, cap, floor, merge_tol)

    n_cold = len(cold_lines)
    omega_H = np.repeat(hot_lines.frequencies, n_cold)
    omega_C = np.tile(cold_lines.frequencies, len(hot_lines))
    weights = np.outer(hot_lines.weights, cold_lines.weights).ravel()
    exponents = beta_energy(hot.beta, omega_H) + beta_energy(cold.beta, omega_C)
    keep = _floor_mask(weights, exponents, floor)
    omega_H, omega_C, weights = omega_H[keep], omega_C[keep], weights[keep]

    frequencies, merged, group = merge_lines(omega_H + omega_C, weights, merge_tol)
    valid = group >= 0
    spectrum = LineSpectrum(frequencies, merged, eta)
    decomposition = SpectralDecomposition(
        frequencies, group[valid], omega_H[valid], omega_C[valid], weights[valid]
    )
    return spectrum, decomposition


@dataclass(frozen=True, eq=False)
class SampledSpectrum:
    """Discrete approximation of the Fourier integral on the FFT frequency grid."""

    frequencies: np.ndarray
    values: np.ndarray
    resolution: float

    def line_weight(self, omega: float) -> float:
        """Area of the bin nearest `omega`."""
        idx = int(np.argmin(np.abs(self.frequencies - omega)))
        return float(self.values[idx] * self.resolution)

    @property
    def peak_frequency(self) -> float:
        return float(self.frequencies[int(np.argmax(np.abs(self.values)))])


def fft_spectrum_oracle(
    correlation, dt: float, n: int = None, max_frequency: float = None
) -> SampledSpectrum:
    """
    dt * sum_j C(j dt) e^{i w j dt} on the FFT grid.

    Sampled over an integer number of periods, a line of weight W lands in a
    single bin with area W.
    """
    samples = np.asarray(correlation, dtype=complex).ravel()
    n = samples.size if n is None else int(n)
    if samples.size != n:
        raise ValueError(f"Expected {n} samples, got {samples.size}")
    if n < ORACLE_MIN_SAMPLES or n & (n - 1):
        raise ValueError(f"n must be a power of two >= {ORACLE_MIN_SAMPLES}, got {n}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    nyquist = np.pi / dt
    if max_frequency is not None and max_frequency >= nyquist:
        logger.warning(
            f"Retained harmonics reach {max_frequency:.4g}, above the Nyquist "
            f"frequency {nyquist:.4g}; the oracle spectrum is aliased"
        )
    values = dt * n * np.fft.ifft(samples)
    frequencies = 2.0 * np.pi * np.fft.fftfreq(n, d=dt)
    return SampledSpectrum(
        np.fft.fftshift(frequencies),
        np.fft.fftshift(values.real),
        2.0 * np.pi / (n * dt),
    )


# Copyright (c) 2025 AMD
