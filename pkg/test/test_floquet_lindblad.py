import math
import os
import sys
import unittest

import numpy as np

# Add the src directory to the path for module imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
from polaron_qhm.bath_model import BathMode, BathSpec
from polaron_qhm.floquet_lindblad import (
    CHANNEL_TERMS,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Z,
    TRACE_ROW,
    Liouvillian,
    MachineParams,
    NoSteadyStateError,
    NonUniqueKernelError,
    build_liouvillian,
    dressed_basis,
    fourier_decompose,
    lindblad_dissipator,
    steady_state,
    steady_state_diagnostics,
)
from polaron_qhm.kms_thermometry import (
    BroadenedTemperatures,
    SpectralDecomposition,
    local_temperature_beta,
)
from polaron_qhm.polaron import spectrum_G1, spectrum_G2
from polaron_qhm.spectra import LineSpectrum


def machine(omega0=1.0, omega_l=0.5, Omega=0.1, xi_C=0.3, xi_H=0.5, beta_C=4.0, beta_H=1.0,
            cold_frequency=0.5, hot_frequency=1.0):
    cold = BathSpec((BathMode(cold_frequency, 1.0),), xi_C, beta_C, "cold")
    hot = BathSpec((BathMode(hot_frequency, 1.0),), xi_H, beta_H, "hot")
    return MachineParams(omega0, omega_l, Omega, cold, hot)


def liouvillian_for(params, eta):
    G1 = spectrum_G1(params.cold, params.Omega, eta)
    G2, decomposition = spectrum_G2(params.cold, params.hot, eta)
    basis = dressed_basis(params)
    components = fourier_decompose(params, basis)
    temperatures = BroadenedTemperatures.from_decomposition(
        decomposition, params.cold.beta, params.hot.beta
    )
    L = build_liouvillian(components, G1, G2, temperatures, eta)
    return L, G2, decomposition, components


class TestMachineParams(unittest.TestCase):
    def test_validation(self):
        """Test that frequencies must be positive and the baths labelled correctly."""
        with self.assertRaises(ValueError):
            machine(omega0=0.0)
        with self.assertRaises(ValueError):
            machine(omega_l=-1.0)
        with self.assertRaises(ValueError):
            machine(Omega=-0.1)
        cold = BathSpec((BathMode(1.0),), 0.1, 1.0, "cold")
        with self.assertRaises(ValueError):
            MachineParams(1.0, 0.5, 0.1, cold, cold)

    def test_derived_quantities(self):
        """Test detuning, renormalized drive and the weak-driving flag."""
        params = machine(omega0=1.0, omega_l=0.4, Omega=0.01, xi_C=0.0)
        self.assertAlmostEqual(params.delta, 0.6)
        self.assertEqual(params.A, 1.0)
        self.assertEqual(params.Omega_r, 0.01)
        self.assertTrue(params.weak_driving)
        self.assertFalse(machine(omega_l=0.9, Omega=0.5, xi_C=0.0).weak_driving)


class TestDressedBasis(unittest.TestCase):
    def test_undriven_basis_is_bare(self):
        """Test theta = 0 and identity vectors without drive."""
        basis = dressed_basis(machine(omega0=2.0, omega_l=1.0, Omega=0.0))
        self.assertEqual(basis.theta, 0.0)
        self.assertEqual(basis.Omega_prime, 1.0)
        np.testing.assert_allclose(basis.vectors, np.eye(2))

    def test_generalized_rabi_frequency(self):
        """Test Omega' = sqrt(delta^2 + Omega_r^2) and the diagonalization."""
        params = machine(omega0=4.0, omega_l=1.0, Omega=4.0, xi_C=0.0)
        basis = dressed_basis(params)
        self.assertAlmostEqual(basis.Omega_prime, 5.0, places=14)
        bare = 0.5 * 3.0 * SIGMA_Z + 0.5 * 4.0 * SIGMA_X
        np.testing.assert_allclose(basis.to_dressed(bare), np.diag([2.5, -2.5]), atol=1e-13)
        np.testing.assert_allclose(basis.to_bare(basis.hamiltonian), bare, atol=1e-13)

    def test_resonant_drive(self):
        """Test the equal superposition at zero detuning."""
        basis = dressed_basis(machine(omega0=1.0, omega_l=1.0, Omega=0.2, xi_C=0.0))
        self.assertAlmostEqual(basis.theta, 0.5 * math.pi, places=14)
        np.testing.assert_allclose(np.abs(basis.vectors), np.full((2, 2), math.sqrt(0.5)))

    def test_degenerate_basis_warns(self):
        """Test that delta = Omega_r = 0 falls back to the bare basis with a warning."""
        with self.assertLogs("polaron_qhm.main", level="WARNING"):
            basis = dressed_basis(machine(omega0=1.0, omega_l=1.0, Omega=0.0))
        self.assertTrue(basis.degenerate)
        np.testing.assert_allclose(basis.vectors, np.eye(2))


class TestFourierDecompose(unittest.TestCase):
    def test_undriven_components(self):
        """Test the four bare transitions when the drive is off."""
        params = machine(omega0=1.0, omega_l=0.4, Omega=0.0)
        components = fourier_decompose(params, dressed_basis(params))
        self.assertEqual(len(components), 4)
        rates = {(c.channel, round(c.rate_frequency, 12)) for c in components}
        self.assertEqual(rates, {(1, 0.6), (1, -0.6), (2, 1.0), (2, -1.0)})
        emission = [c for c in components if c.channel == 2 and c.rate_frequency > 0][0]
        np.testing.assert_allclose(emission.op, SIGMA_MINUS)
        self.assertEqual(emission.q, 1)
        self.assertEqual(emission.sign, 1.0)

    def test_components_recombine(self):
        """Test that the harmonics of each channel and order add back to the operator."""
        params = machine(omega0=2.0, omega_l=1.0, Omega=0.5, xi_C=0.0)
        basis = dressed_basis(params)
        components = fourier_decompose(params, basis)
        for channel, terms in CHANNEL_TERMS.items():
            for bare_op, q in terms:
                pieces = [c.op for c in components if c.channel == channel and c.q == q]
                self.assertGreater(len(pieces), 0)
                if channel == 1:
                    continue
                np.testing.assert_allclose(sum(pieces), basis.to_dressed(bare_op), atol=1e-14)
        channel_1 = sum(c.op for c in components if c.channel == 1)
        np.testing.assert_allclose(channel_1, basis.to_dressed(SIGMA_X), atol=1e-14)

    def test_zero_frequency_sign(self):
        """Test that dephasing pieces at zero quasi-frequency count as positive."""
        params = machine(omega0=2.0, omega_l=1.0, Omega=0.5, xi_C=0.0)
        components = fourier_decompose(params, dressed_basis(params))
        diagonal = [c for c in components if c.channel == 1 and c.omega == 0.0]
        self.assertEqual(len(diagonal), 1)
        self.assertEqual(diagonal[0].sign, 1.0)
        self.assertEqual(diagonal[0].rate_frequency, 0.0)


class TestDissipator(unittest.TestCase):
    def test_amplitude_damping(self):
        """Test D[sigma_-] on the excited state."""
        D = lindblad_dissipator(SIGMA_MINUS, 0.7)
        change = (D @ np.diag([1.0, 0.0]).astype(complex).ravel()).reshape(2, 2)
        np.testing.assert_allclose(change, np.diag([-0.7, 0.7]), atol=1e-15)

    def test_trace_preserving(self):
        """Test that any Lindblad term keeps the trace."""
        rng = np.random.default_rng(3)
        for _ in range(5):
            op = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            D = lindblad_dissipator(op, rng.uniform(0.1, 2.0))
            self.assertLess(np.max(np.abs(TRACE_ROW @ D)), 1e-13)

    def test_zero_spectra_give_zero_generator(self):
        """Test that empty spectra give all-zero rates."""
        params = machine()
        components = fourier_decompose(params, dressed_basis(params))
        temperatures = BroadenedTemperatures.from_decomposition(
            SpectralDecomposition.empty(), params.cold.beta, params.hot.beta
        )
        L = build_liouvillian(
            components, LineSpectrum.empty(), LineSpectrum.empty(), temperatures
        )
        self.assertTrue(L.all_rates_zero)
        self.assertEqual(L.norm, 0.0)


class TestSteadyState(unittest.TestCase):
    def test_decay_to_ground(self):
        """Test that pure emission relaxes to the lower state."""
        L = Liouvillian(lindblad_dissipator(SIGMA_MINUS, 1.0))
        np.testing.assert_allclose(steady_state(L), np.diag([0.0, 1.0]), atol=1e-14)

    def test_two_rate_balance(self):
        """Test p_e / p_g = up-rate / down-rate."""
        L = Liouvillian(lindblad_dissipator(SIGMA_MINUS, 2.0) + lindblad_dissipator(SIGMA_PLUS, 0.5))
        rho = steady_state(L)
        self.assertAlmostEqual(rho[0, 0].real / rho[1, 1].real, 0.25, places=13)
        self.assertAlmostEqual(np.trace(rho).real, 1.0, places=15)

    def test_zero_generator(self):
        """Test that a vanishing generator has no unique steady state."""
        with self.assertRaises(NoSteadyStateError):
            steady_state(Liouvillian(np.zeros((4, 4), dtype=complex)))

    def test_pure_dephasing_kernel(self):
        """Test that dephasing alone leaves a two-dimensional kernel."""
        with self.assertRaises(NonUniqueKernelError) as ctx:
            steady_state(Liouvillian(lindblad_dissipator(SIGMA_Z, 1.0)))
        self.assertEqual(ctx.exception.kernel_dimension, 2)

    def test_driven_generator_diagnostics(self):
        """Test trace preservation, residual and positivity of a driven machine."""
        L, _, _, _ = liouvillian_for(machine(Omega=0.2, xi_C=0.8), 1e-2)
        self.assertLess(L.trace_residual(), 1e-12 * L.norm)
        rho = steady_state(L)
        diagnostics = steady_state_diagnostics(L, rho)
        self.assertLess(diagnostics.residual, 1e-10)
        self.assertLess(diagnostics.trace_error, 1e-12)
        self.assertGreaterEqual(diagnostics.min_eigenvalue, -1e-12)
        self.assertLess(diagnostics.hermiticity, 1e-15)

    def test_undriven_detailed_balance(self):
        """Test that the undriven TLS sits exactly at the local temperature of the hot channel."""
        eta = 1e-3
        params = machine(omega0=1.0, omega_l=0.4, Omega=0.0, xi_C=0.3, beta_C=4.0, beta_H=2.0)
        L, _, decomposition, _ = liouvillian_for(params, eta)
        rho = steady_state(L)
        ratio = rho[0, 0].real / rho[1, 1].real
        temperatures = BroadenedTemperatures.from_decomposition(decomposition, 4.0, 2.0)
        beta_eff = temperatures.hot_channel_beta(1.0, eta)
        self.assertLess(abs(ratio / math.exp(-beta_eff) - 1.0), 1e-10)
        line_beta = local_temperature_beta(decomposition, 1.0, 4.0, 2.0).beta_eff
        self.assertLess(abs(beta_eff - line_beta), 1e-3)

    def test_mirrored_rates_obey_detailed_balance(self):
        """Test rate(-w) = e^{-beta w} rate(w) for every mirrored pair of a driven machine."""
        params = machine(omega_l=0.35, Omega=0.3, xi_C=0.8, beta_C=3.0, beta_H=0.5)
        L, _, _, _ = liouvillian_for(params, 2e-2)
        by_frequency = {(t.component.channel, round(t.component.rate_frequency, 9)): t for t in L.terms}
        pairs = 0
        for (channel, nu), term in by_frequency.items():
            if nu <= 0:
                continue
            mirror = by_frequency.get((channel, round(-nu, 9)))
            if mirror is None:
                continue
            self.assertEqual(mirror.beta, term.beta)
            if channel == 1:
                self.assertEqual(term.beta, 3.0)
            expected = term.rate * math.exp(-term.beta * term.component.rate_frequency)
            self.assertLessEqual(abs(mirror.rate - expected), 1e-12 * term.rate)
            pairs += 1
        self.assertGreaterEqual(pairs, 4)


if __name__ == "__main__":
    unittest.main()
