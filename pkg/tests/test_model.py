import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dptsim import model
from dptsim.errors import CapacityError, ConfigError, ParameterError

from conftest import random_model, uniform_model


@given(st.floats(min_value=1e-6, max_value=1e6))
def test_unit_conversion_roundtrip(f):
    assert np.isclose(model.radns_to_mhz(model.mhz_to_radns(f)), f, rtol=1e-12)


def test_unit_conversion_value():
    # 1 MHz is 2*pi/1000 rad/ns
    assert np.isclose(model.mhz_to_radns(1.0), 2.0 * np.pi / 1000.0)


class TestDeviceSpec:
    def test_default_device(self):
        dev = model.default_device()
        assert dev.n_qubits == 16
        assert np.isclose(model.radns_to_mhz(dev.delta), -450.0)
        assert dev.labels[0] == "Q1" and dev.labels[-1] == "Q16"
        assert np.all(dev.f0 > dev.f1)  # |0> reads out better on this device

    def test_default_device_couplings(self):
        dev = model.default_device()
        lam = model.build_coupling_matrix(dev)
        # lambda_12 = g1 g2 / delta, in MHz: 27.6 * 27.4 / -450
        expected = model.mhz_to_radns(27.6) * model.mhz_to_radns(27.4) / dev.delta
        assert np.isclose(lam[0, 1], expected, rtol=1e-12)
        assert np.allclose(lam, lam.T)
        assert np.all(np.diag(lam) == 0)
        assert np.all(lam[~np.eye(16, dtype=bool)] < 0)  # delta < 0

    def test_file_roundtrip(self, tmp_path, device8):
        path = tmp_path / "dev.cfg"
        device8.to_file(path)
        loaded = model.DeviceSpec.from_file(path)
        assert loaded.n_qubits == device8.n_qubits
        np.testing.assert_allclose(loaded.g, device8.g, rtol=1e-12)
        np.testing.assert_allclose(loaded.f0, device8.f0)
        assert loaded.labels == device8.labels

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            model.DeviceSpec.from_file(path)
        path.write_text(json.dumps({"n_qubits": 4}))
        with pytest.raises(ConfigError):
            model.DeviceSpec.from_file(path)

    def test_validation(self):
        with pytest.raises(ParameterError):
            model.DeviceSpec(n_qubits=1, g=[1.0], delta=-1.0, f0=[0.9], f1=[0.9])
        with pytest.raises(ParameterError):
            model.DeviceSpec(n_qubits=2, g=[1.0, -1.0], delta=-1.0,
                             f0=[0.9, 0.9], f1=[0.9, 0.9])
        with pytest.raises(ParameterError):
            model.DeviceSpec(n_qubits=2, g=[1.0, 1.0], delta=-1.0,
                             f0=[0.9, 1.1], f1=[0.9, 0.9])


class TestHamiltonianModel:
    def test_symmetry_required(self):
        lam = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(ParameterError):
            model.HamiltonianModel(lam=lam, hx=0.0)

    def test_zero_diagonal_required(self):
        lam = np.array([[1.0, 1.0], [1.0, 0.0]])
        with pytest.raises(ParameterError):
            model.HamiltonianModel(lam=lam, hx=0.0)

    def test_drive_defaults(self):
        m = uniform_model(3, 0.1, 0.2)
        np.testing.assert_allclose(m.drive_amplitudes(), 0.2)
        np.testing.assert_allclose(m.drive_phases(), 0.0)


class TestFullHamiltonian:
    def test_two_qubit_flipflop_spectrum(self):
        # single pair at coupling lambda, no drive: eigenvalues -l, 0, 0, +l
        lam = 0.35
        H = model.build_full_hamiltonian(uniform_model(2, lam, 0.0)).toarray()
        evals = np.sort(np.linalg.eigvalsh(H))
        np.testing.assert_allclose(evals, [-lam, 0.0, 0.0, lam], atol=1e-12)

    def test_against_kron_oracle(self):
        # explicit tensor-product construction for 3 qubits with phases
        m = random_model(3, seed=2, phases=True)
        n = 3
        I2 = np.eye(2)
        # basis bit j = qubit j, bit value 0 = |0>; qubit 0 is the *last*
        # Kronecker factor
        sm = np.array([[0.0, 0.0], [1.0, 0.0]])  # s- : |0> -> |1> (sets bit)
        sp = sm.T

        def op(mats):
            out = np.array([[1.0 + 0j]])
            for j in reversed(range(n)):
                out = np.kron(out, mats.get(j, I2))
            return out

        H = np.zeros((8, 8), dtype=complex)
        for i in range(n):
            for j in range(i + 1, n):
                H += m.lam[i, j] * (op({i: sp, j: sm}) + op({i: sm, j: sp}))
        for j in range(n):
            H += m.hx * (np.exp(1j * m.phases[j]) * op({j: sm})
                         + np.exp(-1j * m.phases[j]) * op({j: sp}))
        built = model.build_full_hamiltonian(m).toarray()
        np.testing.assert_allclose(built, H, atol=1e-14)

    def test_hermitian(self):
        H = model.build_full_hamiltonian(random_model(5, seed=3, phases=True))
        d = (H - H.getH()).tocoo()
        assert d.nnz == 0 or np.max(np.abs(d.data)) < 1e-14

    def test_capacity_cap(self):
        m = uniform_model(4, 0.1, 0.1)
        with pytest.raises(CapacityError):
            model.build_full_hamiltonian(m, cap=3)


class TestLmg:
    def test_critical_field(self):
        m = uniform_model(16, -0.01, 0.0)
        cp = model.predict_critical_field(m)
        assert np.isclose(cp.hx_c, 16 * 0.01 / 4.0)
        assert np.isclose(cp.mean_lambda, -0.01)

    def test_calibrated_mapping(self):
        m = uniform_model(10, 0.02, 0.07)
        lmg = model.lmg_from_model(m)
        assert lmg.n == 10
        assert np.isclose(lmg.j_coupling, 10 * 0.02)
        assert np.isclose(lmg.mu, 0.14)

    def test_lmg_matrix_structure(self):
        lmg = model.LmgModel(n=4, j_coupling=1.0, mu=0.3)
        H = model.build_lmg_hamiltonian(lmg)
        assert H.shape == (5, 5)
        np.testing.assert_allclose(H, H.T)
        # diagonal: -(J/n) m^2 with m = n/2 - k
        np.testing.assert_allclose(np.diag(H), -0.25 * np.array([4, 1, 0, 1, 4]))

    def test_mean_coupling(self):
        lam = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]])
        assert np.isclose(model.mean_coupling(lam), 2.0)
