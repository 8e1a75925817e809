import numpy as np
import pytest

from dptsim import calib, engine, model, observables
from dptsim.errors import ConfigError, ParameterError

from conftest import uniform_model


class TestCrosstalkMatrix:
    def test_unit_diagonal_required(self):
        m = np.eye(3, dtype=complex)
        m[0, 0] = 0.9
        with pytest.raises(ParameterError):
            calib.CrosstalkMatrix(m)
        with pytest.raises(ParameterError):
            calib.CrosstalkMatrix(np.ones((2, 3)))

    def test_from_amplitude_phase_forces_diagonal(self):
        amp = np.full((3, 3), 0.1)
        m = calib.CrosstalkMatrix.from_amplitude_phase(amp, np.zeros((3, 3)))
        np.testing.assert_allclose(np.diag(m.entries), 1.0)

    def test_file_roundtrip(self, tmp_path):
        m = calib.random_crosstalk(5, seed=1)
        path = tmp_path / "xtalk.json"
        m.to_file(path)
        loaded = calib.CrosstalkMatrix.from_file(path)
        np.testing.assert_allclose(loaded.entries, m.entries, atol=1e-12)

    def test_bad_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{}")
        with pytest.raises(ConfigError):
            calib.CrosstalkMatrix.from_file(path)

    def test_random_seeded(self):
        m1 = calib.random_crosstalk(6, a_max=0.03, seed=2)
        m2 = calib.random_crosstalk(6, a_max=0.03, seed=2)
        np.testing.assert_array_equal(m1.entries, m2.entries)
        off = np.abs(m1.entries[~np.eye(6, dtype=bool)])
        assert np.all(off <= 0.03)


class TestDriveCorrection:
    def test_solve_residual(self):
        m = calib.random_crosstalk(16, seed=3)
        rng = np.random.Generator(np.random.PCG64(4))
        desired = rng.normal(size=16) + 1j * rng.normal(size=16)
        applied = calib.correct_drive(m, desired)
        residual = np.linalg.norm(calib.effective_drive(m, applied) - desired)
        assert residual <= 1e-10 * np.linalg.norm(desired)

    def test_no_crosstalk_is_identity(self):
        m = calib.CrosstalkMatrix(np.eye(4, dtype=complex))
        desired = np.arange(1.0, 5.0).astype(complex)
        np.testing.assert_allclose(calib.correct_drive(m, desired), desired)

    def test_length_mismatch(self):
        m = calib.random_crosstalk(4, seed=5)
        with pytest.raises(ParameterError):
            calib.correct_drive(m, np.ones(3))
        with pytest.raises(ParameterError):
            calib.effective_drive(m, np.ones(5))

    def test_ill_conditioned_refused(self):
        entries = np.ones((4, 4), dtype=complex)  # rank one: singular
        m = calib.CrosstalkMatrix(entries)
        with pytest.raises(ParameterError):
            calib.correct_drive(m, np.ones(4, dtype=complex))


class TestUniformity:
    def test_uniform_passes(self):
        drive = np.full(8, 2.0 * np.exp(0.3j))
        report = calib.uniformity_check(drive)
        assert report.passed
        assert report.max_amplitude_deviation < 1e-12
        assert report.max_phase_spread < 1e-12

    def test_detects_worst_qubit(self):
        drive = np.full(8, 1.0 + 0.0j)
        drive[5] = 1.2
        report = calib.uniformity_check(drive, amplitude_tol=0.05)
        assert not report.passed
        assert report.worst_qubit == 5

    def test_phase_spread(self):
        drive = np.exp(1j * np.array([0.0, 0.0, 0.1, 0.0]))
        assert not calib.uniformity_check(drive, phase_tol=0.02).passed
        assert calib.uniformity_check(drive, phase_tol=0.2).passed

    def test_json_report(self):
        report = calib.uniformity_check(np.ones(4, dtype=complex))
        assert '"passed": true' in report.to_json()


class TestEndToEnd:
    def test_correction_collapses_per_qubit_trajectories(self):
        # simulate the drive actually seen through the crosstalk matrix:
        # uncorrected input spreads the per-qubit <sigma^z> trajectories,
        # the corrected input restores a uniform transverse field
        n, hx = 6, 0.04
        m = calib.random_crosstalk(n, a_max=0.15, seed=8)
        desired = np.full(n, hx, dtype=complex)

        def spread(applied):
            eff = calib.effective_drive(m, applied)
            mod = uniform_model(n, -0.01, hx)
            mod = model.HamiltonianModel(
                lam=mod.lam, hx=hx,
                per_qubit_hx=np.abs(eff), phases=np.angle(eff),
            )
            H = model.build_full_hamiltonian(mod)
            worst = 0.0
            plan = engine.EvolutionPlan(t_grid=np.arange(0.0, 80.0, 8.0))
            for _, sv in engine.propagate(engine.initial_state("full", n), H, plan):
                z = observables.per_qubit_z(sv)
                worst = max(worst, float(z.max() - z.min()))
            return worst

        uncorrected = spread(desired)
        corrected = spread(calib.correct_drive(m, desired))
        assert corrected < 1e-9
        assert uncorrected > 100 * max(corrected, 1e-12)
