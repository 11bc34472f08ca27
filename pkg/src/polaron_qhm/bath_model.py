"""
Discrete bosonic baths and their weak-coupling correlation functions.

Units: hbar = k_B = 1. Frequencies are plain reals, usually in units of the
TLS splitting. beta = inf stands for zero temperature.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from polaron_qhm.spectra import (
    DEFAULT_ETA,
    DEFAULT_MERGE_TOL,
    LineSpectrum,
    evaluate_spectrum,
)

logger = logging.getLogger("polaron_qhm.main")

MAX_MODES = 8
BATH_LABELS = ("cold", "hot")


@dataclass(frozen=True)
class BathMode:
    """One oscillator of a bath. Only the modulus of the coupling enters."""

    frequency: float
    coupling: complex = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.frequency) and self.frequency > 0):
            raise ValueError(f"Mode frequency must be positive, got {self.frequency}")
        strength = abs(self.coupling)
        if not (math.isfinite(strength) and strength > 0):
            raise ValueError(f"Mode coupling must be finite and nonzero, got {self.coupling}")

    @property
    def strength(self) -> float:
        return float(abs(self.coupling))


@dataclass(frozen=True)
class BathSpec:
    """A thermal bath made of 1 to MAX_MODES discrete modes."""

    modes: Tuple[BathMode, ...]
    xi: float
    beta: float
    label: str = "cold"

    def __post_init__(self):
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)
        if not modes:
            raise ValueError("A bath needs at least one mode")
        if len(modes) > MAX_MODES:
            raise ValueError(f"At most {MAX_MODES} modes are supported, got {len(modes)}")
        if not (math.isfinite(self.xi) and self.xi >= 0):
            raise ValueError(f"xi must be finite and nonnegative, got {self.xi}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive (inf allowed), got {self.beta}")
        if self.label not in BATH_LABELS:
            raise ValueError(f"label must be one of {BATH_LABELS}, got {self.label!r}")
        freqs = sorted(mode.frequency for mode in modes)
        for lower, upper in zip(freqs, freqs[1:]):
            if upper - lower <= 1e-12 * upper:
                raise ValueError(f"Mode frequencies must be distinct, got {lower} twice")

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([mode.frequency for mode in self.modes])

    @property
    def couplings(self) -> np.ndarray:
        return np.array([mode.strength for mode in self.modes])

    def with_xi(self, xi: float) -> "BathSpec":
        return replace(self, xi=xi)

    def with_beta(self, beta: float) -> "BathSpec":
        return replace(self, beta=beta)


def thermal_coth(beta: float, omega):
    """coth(beta*omega/2), exactly 1 at zero temperature."""
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr <= 0):
        raise ValueError("thermal_coth needs omega > 0")
    if math.isinf(beta):
        result = np.ones_like(omega_arr)
    else:
        result = 1.0 / np.tanh(0.5 * beta * omega_arr)
    return float(result) if result.ndim == 0 else result


def thermal_occupation(beta: float, omega):
    """Bose-Einstein occupation 1/(e^{beta*omega} - 1)."""
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr <= 0):
        raise ValueError("thermal_occupation needs omega > 0")
    if math.isinf(beta):
        result = np.zeros_like(omega_arr)
    else:
        with np.errstate(over="ignore"):
            result = 1.0 / np.expm1(beta * omega_arr)
    return float(result) if result.ndim == 0 else result


def weak_correlation(bath: BathSpec, t):
    """xi^2 sum_k |g_k|^2 (cos(w_k t) coth(beta w_k/2) - i sin(w_k t))."""
    t_arr = np.asarray(t, dtype=float)
    amplitudes = bath.xi**2 * bath.couplings**2
    coth = thermal_coth(bath.beta, bath.frequencies)
    phase = np.multiply.outer(t_arr, bath.frequencies)
    value = np.sum(amplitudes * (np.cos(phase) * coth - 1j * np.sin(phase)), axis=-1)
    return complex(value) if value.ndim == 0 else value


def weak_spectrum(
    bath: BathSpec,
    eta: float = DEFAULT_ETA,
    merge_tol: float = DEFAULT_MERGE_TOL,
) -> LineSpectrum:
    """Original-basis spectrum: emission lines at +w_k, absorption lines at -w_k."""
    amplitudes = 2.0 * np.pi * bath.xi**2 * bath.couplings**2
    occupation = np.atleast_1d(thermal_occupation(bath.beta, bath.frequencies))
    freqs = np.concatenate((bath.frequencies, -bath.frequencies))
    weights = np.concatenate((amplitudes * (occupation + 1.0), amplitudes * occupation))
    return LineSpectrum.from_lines(freqs, weights, eta, merge_tol)


def correlation_decay_time(bath: BathSpec, min_samples: int = 4096) -> float:
    """
    1/e decay time of the envelope of |C(t)|.

    The envelope at t is the largest |C(s)| for s >= t inside a window of half
    the slowest beat period, so any revival inside the window keeps the
    envelope up. A single mode never decays.
    """
    freqs = np.unique(bath.frequencies)
    if freqs.size < 2:
        return math.inf
    spacing = float(np.min(np.diff(freqs)))
    t_max = np.pi / spacing
    samples = int(min(max(min_samples, np.ceil(16 * t_max * freqs[-1])), 2**20))
    t = np.linspace(0.0, t_max, samples)
    magnitude = np.abs(weak_correlation(bath, t))
    if magnitude[0] == 0:
        return 0.0
    envelope = np.maximum.accumulate(magnitude[::-1])[::-1]
    below = np.nonzero(envelope <= magnitude[0] / math.e)[0]
    if below.size == 0:
        return math.inf
    return float(t[below[0]])


def weak_coupling_diagnostic(
    bath: BathSpec, omega0: float, broadening: float = DEFAULT_ETA
) -> float:
    """gamma * tau_cor with gamma the broadened weak spectrum at omega0; reporting only."""
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    if bath.xi == 0:
        return 0.0
    tau = correlation_decay_time(bath)
    if math.isinf(tau):
        # a single mode never decays, so only warn for multi-mode baths
        level = logging.DEBUG if len(bath.modes) == 1 else logging.WARNING
        logger.log(
            level,
            f"non-decaying correlation for the {bath.label} bath "
            f"({len(bath.modes)} mode(s)); weak-coupling figure is +inf",
        )
        return math.inf
    gamma = evaluate_spectrum(weak_spectrum(bath, eta=broadening), omega0)
    return float(gamma * tau)


# Copyright (c) 2025 AMD
