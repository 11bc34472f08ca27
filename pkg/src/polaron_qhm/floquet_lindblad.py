"""
Secular Floquet-Lindblad generator of the driven TLS in the polaron frame.

Everything lives in the dressed basis of the rotating-frame Hamiltonian
(delta/2) sigma_z + (Omega_r/2) sigma_x, index 0 being the upper state.
Density matrices are vectorized row-major: vec(A rho B) = kron(A, B.T) vec(rho).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve, svdvals

from polaron_qhm.bath_model import BathSpec
from polaron_qhm.kms_thermometry import BroadenedTemperatures, boltzmann
from polaron_qhm.polaron import PolaronParams, polaron_params
from polaron_qhm.spectra import DEFAULT_MERGE_TOL, LineSpectrum, evaluate_spectrum

logger = logging.getLogger("polaron_qhm.main")

DEFAULT_RANK_TOL = 1e-10
WEAK_DRIVING_RATIO = 0.05
OPERATOR_FLOOR = 1e-14

# |e> = (1, 0), |g> = (0, 1)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
IDENTITY = np.eye(2, dtype=complex)
TRACE_ROW = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)

# operator, harmonic index of the explicit e^{-i q w_l t} factor
CHANNEL_TERMS = {
    1: ((SIGMA_MINUS, 0), (SIGMA_PLUS, 0)),
    2: ((SIGMA_MINUS, 1), (SIGMA_PLUS, -1)),
}


class NoSteadyStateError(RuntimeError):
    """Raised when the generator vanishes and every state is stationary."""


class NonUniqueKernelError(RuntimeError):
    """Raised when the generator has more than one stationary state."""

    def __init__(self, message: str, kernel_dimension: int):
        super().__init__(message)
        self.kernel_dimension = kernel_dimension


@dataclass(frozen=True)
class MachineParams:
    omega0: float
    omega_l: float
    Omega: float
    cold: BathSpec
    hot: BathSpec
    polaron: PolaronParams = field(init=False, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.omega0) and self.omega0 > 0):
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if not (math.isfinite(self.omega_l) and self.omega_l > 0):
            raise ValueError(f"omega_l must be positive, got {self.omega_l}")
        if not (math.isfinite(self.Omega) and self.Omega >= 0):
            raise ValueError(f"Omega must be nonnegative, got {self.Omega}")
        if self.cold.label != "cold" or self.hot.label != "hot":
            raise ValueError("MachineParams needs a cold bath and a hot bath")
        object.__setattr__(self, "polaron", polaron_params(self.cold, self.Omega))

    @property
    def delta(self) -> float:
        return self.omega0 - self.omega_l

    @property
    def Omega_r(self) -> float:
        return self.polaron.Omega_r

    @property
    def A(self) -> float:
        return self.polaron.A

    @property
    def weak_driving(self) -> bool:
        if self.delta == 0:
            return self.Omega_r == 0
        return self.Omega_r / abs(self.delta) <= WEAK_DRIVING_RATIO


@dataclass(frozen=True, eq=False)
class DressedBasis:
    Omega_prime: float
    theta: float
    vectors: np.ndarray
    energies: Tuple[float, float]
    degenerate: bool = False

    def to_dressed(self, op: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ op @ self.vectors

    def to_bare(self, op: np.ndarray) -> np.ndarray:
        return self.vectors @ op @ self.vectors.conj().T

    @property
    def hamiltonian(self) -> np.ndarray:
        return np.diag(self.energies).astype(complex)


@dataclass(frozen=True, eq=False)
class HarmonicComponent:
    channel: int
    q: int
    omega: float
    op: np.ndarray
    rate_frequency: float

    @property
    def sign(self) -> float:
        # zero quasi-frequency counts as positive
        return -1.0 if self.omega < 0 else 1.0


@dataclass(frozen=True, eq=False)
class DissipatorTerm:
    component: HarmonicComponent
    rate: float
    matrix: np.ndarray
    # inverse temperature tying this rate to the one at the mirrored frequency
    beta: float = math.nan


@dataclass(frozen=True, eq=False)
class Liouvillian:
    matrix: np.ndarray
    terms: Tuple[DissipatorTerm, ...] = ()

    @property
    def all_rates_zero(self) -> bool:
        return all(term.rate == 0 for term in self.terms)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def trace_residual(self) -> float:
        return float(np.max(np.abs(TRACE_ROW @ self.matrix)))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.asarray(rho, dtype=complex).ravel()).reshape(2, 2)


@dataclass(frozen=True)
class SteadyStateDiagnostics:
    residual: float
    trace_error: float
    min_eigenvalue: float
    hermiticity: float


def dressed_basis(params: MachineParams) -> DressedBasis:
    delta, Omega_r = params.delta, params.Omega_r
    Omega_prime = math.hypot(delta, Omega_r)
    degenerate = Omega_prime == 0
    if degenerate:
        logger.warning("delta = Omega_r = 0: the dressed basis is degenerate, using the bare one")
    theta = math.atan2(Omega_r, delta)
    c, s = math.cos(0.5 * theta), math.sin(0.5 * theta)
    vectors = np.array([[c, -s], [s, c]], dtype=complex)
    energies = (0.5 * Omega_prime, -0.5 * Omega_prime)
    return DressedBasis(Omega_prime, theta, vectors, energies, degenerate)


def fourier_decompose(
    params: MachineParams, basis: DressedBasis, tol: float = DEFAULT_MERGE_TOL
) -> List[HarmonicComponent]:
    """
    Split both coupling operators into e^{-i(w + q w_l)t} harmonics.

    Components of one channel sharing a rate frequency are summed into a
    single operator; the quasi-frequency kept is the one of the largest part.
    """
    components: List[HarmonicComponent] = []
    E = basis.energies
    for channel, terms in CHANNEL_TERMS.items():
        pieces = []
        for bare_op, q in terms:
            dressed = basis.to_dressed(bare_op)
            for a in range(2):
                for b in range(2):
                    if abs(dressed[a, b]) < OPERATOR_FLOOR:
                        continue
                    op = np.zeros((2, 2), dtype=complex)
                    op[a, b] = dressed[a, b]
                    omega = E[b] - E[a]
                    if abs(omega) < tol:
                        omega = 0.0
                    pieces.append((omega + q * params.omega_l, q, omega, op))

        pieces.sort(key=lambda piece: piece[0])
        groups: List[list] = []
        for piece in pieces:
            if groups and abs(piece[0] - groups[-1][0][0]) <= tol:
                groups[-1].append(piece)
            else:
                groups.append([piece])

        for group in groups:
            op = sum(piece[3] for piece in group)
            op[np.abs(op) < OPERATOR_FLOOR] = 0.0
            if not np.any(op):
                continue
            rate_frequency, q, omega, _ = max(
                group, key=lambda piece: np.linalg.norm(piece[3])
            )
            components.append(HarmonicComponent(channel, q, omega, op, rate_frequency))
    return components


def lindblad_dissipator(op: np.ndarray, rate: float) -> np.ndarray:
    """rate * (S rho S^+ - {S^+ S, rho}/2) as a 4x4 superoperator."""
    S = np.asarray(op, dtype=complex)
    SdS = S.conj().T @ S
    return rate * (
        np.kron(S, S.conj())
        - 0.5 * np.kron(SdS, IDENTITY)
        - 0.5 * np.kron(IDENTITY, SdS.T)
    )


def component_rate(
    component: HarmonicComponent,
    G1: LineSpectrum,
    G2: LineSpectrum,
    temperatures: BroadenedTemperatures,
    eta: float = None,
) -> Tuple[float, float]:
    """
    (rate, beta) at the component's rate frequency.

    Emission rates are the broadened spectrum at |w|; absorption rates are
    e^{-beta |w|} times the emission rate at |w|, so every mirrored pair
    obeys detailed balance exactly.
    """
    spectrum = G1 if component.channel == 1 else G2
    width = spectrum.broadening_eta if eta is None else float(eta)
    magnitude = abs(component.rate_frequency)
    beta = temperatures.channel_beta(component.channel, magnitude, width)
    emission = evaluate_spectrum(spectrum, magnitude, width)
    if component.rate_frequency >= 0:
        return emission, beta
    return emission * boltzmann(beta, magnitude), beta


def build_liouvillian(
    components: List[HarmonicComponent],
    G1: LineSpectrum,
    G2: LineSpectrum,
    temperatures: BroadenedTemperatures,
    eta: float = None,
) -> Liouvillian:
    matrix = np.zeros((4, 4), dtype=complex)
    terms = []
    for component in components:
        rate, beta = component_rate(component, G1, G2, temperatures, eta)
        piece = lindblad_dissipator(component.op, rate)
        matrix += piece
        terms.append(DissipatorTerm(component, rate, piece, beta))
    liouvillian = Liouvillian(matrix, tuple(terms))
    if liouvillian.all_rates_zero:
        logger.debug("Every dissipation rate is zero")
    return liouvillian


def steady_state(L: Liouvillian, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Normalized kernel of L, with the trace condition replacing one row."""
    singular_values = svdvals(L.matrix)
    if singular_values[0] == 0:
        raise NoSteadyStateError("The generator is zero; the steady state is undefined")
    kernel = int(np.count_nonzero(singular_values <= rank_tol * singular_values[0]))
    if kernel > 1:
        raise NonUniqueKernelError(
            f"The generator has a {kernel}-dimensional kernel", kernel
        )

    system = L.matrix.copy()
    system[0, :] = TRACE_ROW
    rhs = np.zeros(4, dtype=complex)
    rhs[0] = 1.0
    try:
        vec = solve(system, rhs)
    except LinAlgError as error:
        raise NoSteadyStateError(f"Steady-state system is singular: {error}") from error
    rho = vec.reshape(2, 2)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def steady_state_diagnostics(L: Liouvillian, rho: np.ndarray) -> SteadyStateDiagnostics:
    norm = L.norm
    residual = float(np.linalg.norm(L.apply(rho)))
    return SteadyStateDiagnostics(
        residual=residual / norm if norm > 0 else residual,
        trace_error=abs(complex(np.trace(rho)) - 1.0),
        min_eigenvalue=float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)))),
        hermiticity=float(np.max(np.abs(rho - rho.conj().T))),
    )


# Copyright (c) 2025 AMD
