import math
import os
import sys
import tempfile
import unittest
from dataclasses import replace
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pandas as pd

# Add the src directory to the path for module imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
from polaron_qhm.bath_model import BathMode, BathSpec
from polaron_qhm.cli import SPECTRUM_CHOICES, main
from polaron_qhm.main import EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERICAL, EXIT_OK
from polaron_qhm.output_writers import (
    CSV_SCHEMA,
    read_spectrum_csv,
    render_sweep_svg,
    sweep_frame,
    write_spectrum_csv,
)
from polaron_qhm.point_runner import SweepRow, evaluate_pipeline, run_point
from polaron_qhm.polaron import franck_condon_A, spectrum_G1
from polaron_qhm.run_config import (
    MachineConfig,
    NumericsConfig,
    RunConfig,
    SWEEP_COLUMNS,
    SweepConfig,
    load_config,
)
from polaron_qhm.spectra import evaluate_spectrum
from polaron_qhm.sweep_orchestrator import (
    CheckReport,
    InvariantCheck,
    SweepOrchestrator,
    run_check,
)
from polaron_qhm.thermo import (
    analytic_weak_driving,
    asymptotic_power_envelope,
    envelope_spread,
    extraction_condition,
)

EXAMPLE = Path(__file__).resolve().parent.parent / "configs" / "engine_example.yaml"
THRESHOLD_SCAN = [
    "sweep.parameter=omega_l",
    "sweep.from=0.05",
    "sweep.to=0.95",
    "sweep.points=200",
    "sweep.scale=linear",
]


def bath(label, xi, beta, frequency, coupling=1.0):
    return BathSpec((BathMode(frequency, coupling),), xi, beta, label)


def run_config(
    omega0=1.0,
    omega_l=0.45,
    Omega=0.01,
    cold=None,
    hot=None,
    numerics=None,
    sweep=None,
):
    return RunConfig(
        machine=MachineConfig(omega0, omega_l, Omega),
        cold=cold or bath("cold", 0.5, 4.0, 0.55, 0.1),
        hot=hot or bath("hot", 0.5, 1.0, 1.0),
        numerics=numerics or NumericsConfig(),
        sweep=sweep,
    )


class TestRunPoint(unittest.TestCase):
    def test_row_columns(self):
        """Test that a row carries every sweep column in order."""
        row = run_point(run_config())
        self.assertEqual(tuple(row.as_dict()), SWEEP_COLUMNS)
        self.assertFalse(row.failed)
        self.assertTrue(math.isnan(row.value))
        self.assertEqual(row.regime, "engine")

    def test_uncoupled_machine(self):
        """Test that xi_C = xi_H = 0 reports zero currents instead of failing."""
        cfg = run_config(cold=bath("cold", 0.0, 4.0, 0.55), hot=bath("hot", 0.0, 1.0, 1.0))
        row = run_point(cfg)
        self.assertIn("all-rates-zero", row.flags.split(";"))
        self.assertEqual((row.J1, row.J2, row.P), (0.0, 0.0, 0.0))
        self.assertEqual(row.regime, "dissipator")
        self.assertTrue(math.isnan(row.P_weak))

    def test_single_temperature_gives_no_power(self):
        """Test that equal bath temperatures without drive extract nothing."""
        cfg = run_config(
            Omega=0.0,
            cold=bath("cold", 0.5, 1.0, 0.55, 0.1),
            hot=bath("hot", 0.5, 1.0, 1.0),
        )
        row = run_point(cfg)
        self.assertLessEqual(abs(row.P), 1e-12)
        self.assertIn("degenerate-temperatures", row.flags.split(";"))
        self.assertTrue(math.isnan(row.lam))
        self.assertEqual(row.regime, "dissipator")

    def test_naive_efficiency_above_carnot(self):
        """Test that cold absorption in the hot channel lifts the naive efficiency above Carnot."""
        cfg = run_config(
            omega_l=0.6,
            cold=bath("cold", 0.1, 2.0, 0.4),
            hot=bath("hot", 0.5, 1.0, 1.4),
        )
        row = run_point(cfg)
        self.assertEqual(row.regime, "engine")
        self.assertLess(row.lam, 0.0)
        self.assertAlmostEqual(row.eta_carnot, 0.5, places=15)
        self.assertGreater(row.eta_naive, row.eta_carnot)
        self.assertLessEqual(row.eta, row.eta_carnot)

    def test_truncation_failure_is_a_flagged_row(self):
        """Test that a series cut short by the order cap marks the row failed."""
        cfg = run_config(
            cold=bath("cold", 1.0, 4.0, 0.55),
            numerics=NumericsConfig(bessel_cap=1),
        )
        with self.assertLogs("polaron_qhm.main", level="ERROR"):
            row = run_point(cfg)
        self.assertTrue(row.failed)
        self.assertEqual(row.flags, "failed;bessel-truncation")
        self.assertTrue(math.isnan(row.P))

    def test_weak_driving_matches_closed_form(self):
        """
        Test the solver currents against the weak-driving closed form.

        The closed form leaves out the ground-population factor
        p_g = 1 / (1 + e^{-beta_H omega0}) of the exact two-level cycle, so it
        only holds where that factor is close to one: beta_H >= 5.5 here, with
        a cold bath at beta_C = 20. Ten engines at Omega_r / delta = 0.02 are
        held to 1%, one at 0.05 to 5%.
        """
        eta = 1e-4
        cases = [
            (omega_l, beta_H, 0.02)
            for omega_l in (0.4, 0.45, 0.5, 0.55, 0.6)
            for beta_H in (5.5, 7.0)
        ]
        cases.append((0.5, 6.0, 0.05))
        engines = 0
        for omega_l, beta_H, ratio in cases:
            delta = 1.0 - omega_l
            cold = bath("cold", 0.1, 20.0, delta)
            cfg = run_config(
                omega_l=omega_l,
                Omega=ratio * delta / franck_condon_A(cold),
                cold=cold,
                hot=bath("hot", 0.1, beta_H, 1.0),
                numerics=NumericsConfig(broadening_eta=eta),
            )
            result = evaluate_pipeline(cfg)
            params = result.params
            self.assertTrue(params.weak_driving)
            self.assertAlmostEqual(params.Omega_r / params.delta, ratio, places=12)
            Omega_prime = result.basis.Omega_prime
            expected = analytic_weak_driving(
                params,
                evaluate_spectrum(result.G1, Omega_prime, eta),
                evaluate_spectrum(result.G2, Omega_prime + params.omega_l, eta),
                result.local.beta_eff,
            )
            report = result.report
            tolerance = 1e-2 if ratio == 0.02 else 5e-2
            for got, want in zip((report.J1, report.J2, report.P), expected):
                self.assertLess(abs(got - want) / abs(want), tolerance, (omega_l, beta_H, ratio))
            engines += report.regime == "engine"
            row = run_point(cfg)
            self.assertAlmostEqual(row.P_weak / expected[2], 1.0, places=12)
        self.assertEqual(engines, 11)


class TestSweepOrchestrator(unittest.TestCase):
    def small_sweep(self, workers=1):
        sweep = SweepConfig("xi_both", 0.05, 2.0, 5, "log")
        cfg = run_config(sweep=sweep, numerics=NumericsConfig(workers=workers))
        return cfg

    def test_deterministic_output(self):
        """Test that repeated and parallel sweeps write identical files."""
        with tempfile.TemporaryDirectory() as tmp:
            first = Path(tmp) / "first.csv"
            second = Path(tmp) / "second.csv"
            parallel = Path(tmp) / "parallel.csv"
            svg = Path(tmp) / "sweep.svg"
            outcome = SweepOrchestrator(self.small_sweep()).run_sweep(first, svg)
            SweepOrchestrator(self.small_sweep()).run_sweep(second)
            SweepOrchestrator(self.small_sweep(workers=2)).run_sweep(parallel)
            self.assertEqual(first.read_bytes(), second.read_bytes())
            self.assertEqual(first.read_bytes(), parallel.read_bytes())

            self.assertEqual(len(outcome.rows), 5)
            self.assertFalse(outcome.all_failed)
            lines = first.read_text(encoding="utf-8").splitlines()
            self.assertEqual(lines[0], CSV_SCHEMA)
            self.assertEqual(tuple(lines[1].split(",")), SWEEP_COLUMNS)
            self.assertEqual(len(lines), 7)
            self.assertIn("<polyline", svg.read_text(encoding="utf-8"))

    def test_regime_boundary_follows_local_temperature(self):
        """Test that work is extracted exactly where the extraction condition holds across omega_l."""
        cfg = load_config(EXAMPLE, THRESHOLD_SCAN)
        rows = SweepOrchestrator(cfg).evaluate_grid()
        self.assertEqual(len(rows), 200)
        step = 0.9 / 199
        regimes = set()
        checked = 0
        for row in rows:
            self.assertFalse(row.failed)
            regimes.add(row.regime)
            if math.isfinite(row.eta):
                self.assertLessEqual(row.eta, row.eta_carnot + 1e-9, row.value)
            if math.isfinite(row.cop):
                self.assertLessEqual(row.cop, row.cop_carnot + 1e-9, row.value)
            threshold = 1.0 - row.beta_eff / 4.0
            weak = row.Omega_r / (1.0 - row.value) <= 0.05
            if not weak or abs(row.value - threshold) <= step:
                continue
            self.assertEqual(
                row.P < 0,
                extraction_condition(row.value, 1.0, row.beta_eff, 4.0),
                row.value,
            )
            checked += 1
        self.assertGreater(checked, 150)
        self.assertIn("engine", regimes)
        self.assertIn("refrigerator", regimes)

    def test_power_turnover_with_coupling(self):
        """Test quadratic growth at small coupling and a single interior maximum."""
        cfg = load_config(EXAMPLE, ["sweep.points=200"])
        rows = SweepOrchestrator(cfg).evaluate_grid()
        self.assertFalse(any(row.failed for row in rows))
        xi = np.array([row.value for row in rows])
        P = np.array([row.P for row in rows])
        self.assertTrue(np.all(P < 0))
        power = -P

        peak = int(np.argmax(power))
        self.assertGreater(peak, 0)
        self.assertLess(peak, len(power) - 1)
        steps = np.diff(power)
        self.assertTrue(np.all(steps[:peak] > 0))
        self.assertTrue(np.all(steps[peak:] < 0))
        self.assertLess(power[-1], 0.1 * power[peak])

        i = int(np.argmin(np.abs(np.log(xi / 0.1))))
        slope = math.log(power[i] / power[0]) / math.log(xi[i] / xi[0])
        self.assertAlmostEqual(slope, 2.0, delta=0.05)

    def test_power_decays_slower_than_closed_form_envelope(self):
        """
        Test |P| xi^2 e^{4 xi^2 S} over the largest-xi decade of the example.

        Lorentzian tails of lines far from delta and omega0 fall off as a
        power of xi, while e^{-4 xi^2 S} / xi^2 falls off as a Gaussian, so the
        exact power outlives the envelope by orders of magnitude.
        """
        cfg = load_config(EXAMPLE, ["sweep.points=200"])
        rows = SweepOrchestrator(cfg).evaluate_grid()
        xi = np.array([row.value for row in rows])
        P = np.array([row.P for row in rows])
        spread = envelope_spread(xi, P, cfg.cold)
        self.assertGreater(spread, 1e3)
        top = xi >= 1.0
        ratio = -P[top] / asymptotic_power_envelope(xi[top], cfg.cold)
        self.assertGreater(ratio[-1], ratio[0])

    def test_carnot_bounds_over_drive_frequencies(self):
        """Test eta <= eta_C and COP <= COP_C over couplings and the full omega_l range."""
        base = load_config(EXAMPLE, ["sweep.points=30"])
        count = 0
        regimes = set()
        for omega_l in np.linspace(0.05, 0.95, 10):
            cfg = replace(base, machine=replace(base.machine, omega_l=float(omega_l)))
            for row in SweepOrchestrator(cfg).evaluate_grid():
                self.assertFalse(row.failed)
                self.assertNotIn("unphysical-lambda", row.flags)
                regimes.add(row.regime)
                if row.regime == "engine" and math.isfinite(row.eta):
                    self.assertLessEqual(row.eta, row.eta_carnot + 1e-9, (omega_l, row.value))
                if row.regime == "refrigerator" and math.isfinite(row.cop):
                    self.assertLessEqual(row.cop, row.cop_carnot + 1e-9, (omega_l, row.value))
                count += 1
        self.assertEqual(count, 300)
        self.assertIn("engine", regimes)
        self.assertIn("refrigerator", regimes)


class TestInvariantCheck(unittest.TestCase):
    def test_example_passes(self):
        """Test that the shipped example passes every invariant."""
        report = run_check(load_config(EXAMPLE))
        self.assertTrue(report.passed, [c.name for c in report.failures()])
        names = {check.name for check in report.checks}
        for name in ("g1_sum_rule", "kms_g1", "kms_g2_terms", "first_law", "sweep_carnot_engine"):
            self.assertIn(name, names)

    def test_external_spectrum_fault_injection(self):
        """Test that a supplied spectrum passes intact and fails once corrupted."""
        cfg = load_config(EXAMPLE, ["sweep=null"])
        n = cfg.numerics
        G1 = spectrum_G1(
            cfg.cold, cfg.machine.Omega, n.broadening_eta, n.bessel_tol, n.bessel_cap,
            n.weight_floor, n.merge_tol,
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = write_spectrum_csv(G1, Path(tmp) / "g1.csv")
            loaded = read_spectrum_csv(path, n.broadening_eta)
            np.testing.assert_array_equal(loaded.weights, G1.weights)
            report = run_check(load_config(EXAMPLE, ["sweep=null", f"inputs.g1_csv={path}"]))
            self.assertTrue(report.passed, [c.name for c in report.failures()])

            frame = pd.read_csv(path, comment="#")
            largest = int(frame["weight"].idxmax())
            frame.loc[largest, "weight"] *= 1.5
            corrupted = Path(tmp) / "corrupted.csv"
            corrupted.write_text(CSV_SCHEMA + "\n" + frame.to_csv(index=False), encoding="utf-8")
            report = run_check(load_config(EXAMPLE, ["sweep=null", f"inputs.g1_csv={corrupted}"]))
            self.assertFalse(report.passed)
            self.assertIn("kms_g1", [c.name for c in report.failures()])

    def test_malformed_spectrum_file(self):
        """Test that a file without the schema line is rejected."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "g1.csv"
            path.write_text("frequency,weight\n1.0,1.0\n", encoding="utf-8")
            with self.assertRaises(ValueError):
                read_spectrum_csv(path)


class TestOutputWriters(unittest.TestCase):
    def test_failed_rows_in_frame_and_plot(self):
        """Test that failed rows stay in the table and drop out of the plot."""
        rows = [
            SweepRow(value=0.1, P=-1e-6, regime="engine"),
            SweepRow(value=0.2, flags="failed;solver-failure"),
            SweepRow(value=0.4, P=-4e-6, regime="engine"),
        ]
        frame = sweep_frame(rows, SWEEP_COLUMNS)
        self.assertEqual(len(frame), 3)
        self.assertEqual(frame.loc[1, "flags"], "failed;solver-failure")
        self.assertTrue(math.isnan(frame.loc[1, "P"]))
        svg = render_sweep_svg(frame["value"], frame["P"], "value", "P", log_x=True, log_y=True)
        self.assertTrue(svg.startswith("<svg"))
        self.assertEqual(svg.count(","), 2)
        self.assertIn("|P|", svg)
        empty = render_sweep_svg([0.1], [math.nan], "value", "P")
        self.assertNotIn("<polyline", empty)


class TestCommandLine(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)
        self.svg = f"output.svg_path={self.dir / 'plot.svg'}"

    def run_cli(self, *argv):
        return main(["--log-level", "error", *argv])

    def test_check_example(self):
        """Test a clean check run."""
        out = self.dir / "check.csv"
        code = self.run_cli("check", "--config", str(EXAMPLE), "--set", "sweep.points=5", "--output", str(out))
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out.read_text(encoding="utf-8").splitlines()[0], CSV_SCHEMA)

    def test_configuration_errors(self):
        """Test that a missing file or a sweep without a sweep section exits 1."""
        missing = str(self.dir / "missing.yaml")
        self.assertEqual(self.run_cli("steady", "--config", missing), EXIT_CONFIG)
        code = self.run_cli(
            "sweep", "--config", str(EXAMPLE), "--set", "sweep=null", "--output", str(self.dir / "s.csv")
        )
        self.assertEqual(code, EXIT_CONFIG)

    def test_numerical_failures(self):
        """Test exit 2 when every grid point fails or the check point cannot be solved."""
        code = self.run_cli(
            "sweep",
            "--config", str(EXAMPLE),
            "--set", "numerics.bessel_cap=1",
            "--set", "sweep.points=3",
            "--set", self.svg,
            "--output", str(self.dir / "sweep.csv"),
        )
        self.assertEqual(code, EXIT_NUMERICAL)
        code = self.run_cli(
            "check", "--config", str(EXAMPLE), "--set", "numerics.bessel_cap=1",
            "--output", str(self.dir / "check.csv"),
        )
        self.assertEqual(code, EXIT_NUMERICAL)

    def test_invariant_violation(self):
        """Test exit 3 when an invariant fails."""
        report = CheckReport((InvariantCheck("kms_g1", 0.3, 1e-9),))
        with patch("polaron_qhm.main.run_check", return_value=report):
            code = self.run_cli("check", "--config", str(EXAMPLE), "--output", str(self.dir / "c.csv"))
        self.assertEqual(code, EXIT_INVARIANT)

    def test_sweep_writes_files(self):
        """Test the sweep command writes the CSV and the plot."""
        out = self.dir / "sweep.csv"
        code = self.run_cli(
            "sweep", "--config", str(EXAMPLE), "--set", "sweep.points=4", "--set", self.svg,
            "--output", str(out),
        )
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(out.read_text(encoding="utf-8").splitlines()), 6)
        self.assertTrue((self.dir / "plot.svg").exists())

    def test_spectrum_and_steady_tables(self):
        """Test the spectrum and steady-state tables."""
        terms = self.dir / "terms.csv"
        code = self.run_cli("spectrum", "--config", str(EXAMPLE), "--which", "g2-terms", "--output", str(terms))
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(terms, comment="#")
        for column in ("frequency", "omega_H", "omega_C", "weight"):
            self.assertIn(column, frame.columns)

        steady = self.dir / "steady.csv"
        self.assertEqual(self.run_cli("steady", "--config", str(EXAMPLE), "--output", str(steady)), EXIT_OK)
        frame = pd.read_csv(steady, comment="#")
        populations = frame[frame["quantity"].isin(["rho[++]", "rho[--]"])]["real"]
        self.assertAlmostEqual(populations.sum(), 1.0, places=12)
        self.assertIn("rate", set(frame["quantity"]))

    def test_check_across_extraction_threshold(self):
        """Test that the check passes on an omega_l sweep through the engine threshold."""
        overrides = [arg for item in THRESHOLD_SCAN for arg in ("--set", item)]
        code = self.run_cli(
            "check", "--config", str(EXAMPLE), *overrides, "--output", str(self.dir / "threshold.csv")
        )
        self.assertEqual(code, EXIT_OK)

    def test_every_spectrum_choice(self):
        """Test that each spectrum table is written with the file schema."""
        for which in SPECTRUM_CHOICES:
            out = self.dir / f"{which}.csv"
            code = self.run_cli("spectrum", "--config", str(EXAMPLE), "--which", which, "--output", str(out))
            self.assertEqual(code, EXIT_OK, which)
            self.assertEqual(out.read_text(encoding="utf-8").splitlines()[0], CSV_SCHEMA, which)
            frame = pd.read_csv(out, comment="#")
            self.assertGreater(len(frame), 0, which)


if __name__ == "__main__":
    unittest.main()
