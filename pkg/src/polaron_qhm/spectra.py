"""
Delta-line coupling spectra and their Lorentzian point evaluation.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

logger = logging.getLogger("polaron_qhm.main")

# Both in units of the TLS frequency
DEFAULT_ETA = 1e-2
DEFAULT_MERGE_TOL = 1e-9


def merge_lines(
    frequencies, weights, tol: float = DEFAULT_MERGE_TOL
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Merge lines closer than `tol` by summing their weights.

    Returns the sorted merged frequencies, the merged weights and, for every
    input line, the index of the merged line it went into (-1 when the merged
    line carried no weight and was dropped). The representative frequency of
    a group is the midpoint of its extreme members, so a mirrored line set
    merges into exactly mirrored frequencies.
    """
    freqs = np.asarray(frequencies, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if freqs.shape != w.shape:
        raise ValueError("frequencies and weights must have the same length")
    if freqs.size == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0, dtype=int)

    order = np.argsort(freqs, kind="stable")
    sorted_freqs = freqs[order]
    group_sorted = np.concatenate(([0], np.cumsum(np.diff(sorted_freqs) > tol)))
    n_groups = int(group_sorted[-1]) + 1

    merged_weights = np.bincount(group_sorted, weights=w[order], minlength=n_groups)
    starts = np.searchsorted(group_sorted, np.arange(n_groups), side="left")
    ends = np.searchsorted(group_sorted, np.arange(n_groups), side="right") - 1
    merged_freqs = 0.5 * (sorted_freqs[starts] + sorted_freqs[ends])

    keep = merged_weights > 0.0
    new_index = np.full(n_groups, -1, dtype=int)
    new_index[keep] = np.arange(int(np.count_nonzero(keep)))

    group_of_input = np.empty(freqs.size, dtype=int)
    group_of_input[order] = new_index[group_sorted]
    return merged_freqs[keep], merged_weights[keep], group_of_input


@dataclass(frozen=True, eq=False)
class LineSpectrum:
    """
    A coupling spectrum stored as exact delta lines.

    Broadening is only applied when the spectrum is evaluated at a point;
    every algebraic check (sum rules, KMS) runs on the raw line weights.
    """

    frequencies: np.ndarray
    weights: np.ndarray
    broadening_eta: float = DEFAULT_ETA

    def __post_init__(self):
        freqs = np.array(self.frequencies, dtype=float).ravel()
        weights = np.array(self.weights, dtype=float).ravel()
        if freqs.shape != weights.shape:
            raise ValueError("frequencies and weights must have the same length")
        if not self.broadening_eta > 0:
            raise ValueError("broadening_eta must be positive")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("Line weights must be finite and nonnegative")
        if np.any(np.diff(freqs) <= 0):
            raise ValueError("Line frequencies must be strictly increasing")
        freqs.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_lines(
        cls,
        frequencies,
        weights,
        broadening_eta: float = DEFAULT_ETA,
        merge_tol: float = DEFAULT_MERGE_TOL,
    ) -> "LineSpectrum":
        freqs, merged, _ = merge_lines(frequencies, weights, merge_tol)
        return cls(freqs, merged, broadening_eta)

    @classmethod
    def empty(cls, broadening_eta: float = DEFAULT_ETA) -> "LineSpectrum":
        return cls(np.zeros(0), np.zeros(0), broadening_eta)

    def __len__(self) -> int:
        return int(self.frequencies.size)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def is_empty(self) -> bool:
        return self.frequencies.size == 0

    def find_line(self, omega: float, tol: float = DEFAULT_MERGE_TOL) -> Optional[int]:
        """Index of the line nearest `omega` if it lies within `tol`, else None."""
        if self.is_empty():
            return None
        idx = int(np.searchsorted(self.frequencies, omega))
        best = None
        for candidate in (idx - 1, idx):
            if 0 <= candidate < len(self):
                distance = abs(self.frequencies[candidate] - omega)
                if distance <= tol and (
                    best is None or distance < abs(self.frequencies[best] - omega)
                ):
                    best = candidate
        return best

    def weight_at(self, omega: float, tol: float = DEFAULT_MERGE_TOL) -> float:
        idx = self.find_line(omega, tol)
        return 0.0 if idx is None else float(self.weights[idx])


def evaluate_spectrum(s: LineSpectrum, omega, eta: Optional[float] = None):
    """Lorentzian-broadened value of the line spectrum at `omega` (scalar or array)."""
    width = s.broadening_eta if eta is None else float(eta)
    if width <= 0:
        raise ValueError("eta must be positive")
    omega_arr = np.asarray(omega, dtype=float)
    if s.is_empty():
        result = np.zeros_like(omega_arr)
    else:
        detuning = omega_arr[..., np.newaxis] - s.frequencies
        lorentz = (width / np.pi) / (detuning**2 + width**2)
        result = np.sum(s.weights * lorentz, axis=-1)
    return float(result) if result.ndim == 0 else result


# Copyright (c) 2025 AMD
