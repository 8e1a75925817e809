"""Device parameters and Hamiltonian construction.

Conventions used throughout the package:

* Angular frequencies are stored in rad/ns, times in ns.  File formats and
  the CLI expose linear frequencies in MHz (value / 2pi).
* Full-space basis index ``b`` encodes qubit ``j`` at bit ``j``; bit value 0
  is the qubit ground state ``|0>`` with ``sigma^z |0> = +|0>``.  The initial
  all-ground state therefore sits at index 0 and has magnetisation +1.
* The pair interaction counts each unordered pair once:
  ``H = sum_{i<j} lambda_ij (s+_i s-_j + s-_i s+_j) + field terms``.
* Symmetric-sector (Dicke) basis index ``k`` corresponds to the collective
  eigenstate ``|S = n/2, m = n/2 - k>``, so index 0 is the all-ground state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ConfigError, ParameterError

TWO_PI = 2.0 * np.pi

# Hilbert-space dimension cap for full-space operators (2^20 ~ 1M states).
FULL_SPACE_QUBIT_CAP = 20


def mhz_to_radns(f):
    """Linear frequency in MHz -> angular frequency in rad/ns."""
    return TWO_PI * np.asarray(f, dtype=float) / 1000.0


def radns_to_mhz(w):
    """Angular frequency in rad/ns -> linear frequency in MHz."""
    return np.asarray(w, dtype=float) * 1000.0 / TWO_PI


@dataclass
class DeviceSpec:
    """Physical parameters of the simulated device.

    g, delta and lambda_c are angular frequencies in rad/ns; delta is the
    common qubit-bus detuning (negative in the experiments); f0/f1 are the
    per-qubit probabilities of reading |0> / |1> correctly.
    """

    n_qubits: int
    g: np.ndarray
    delta: float
    f0: np.ndarray
    f1: np.ndarray
    lambda_c: np.ndarray | None = None
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ParameterError("need at least 2 qubits")
        self.g = np.asarray(self.g, dtype=float)
        self.f0 = np.asarray(self.f0, dtype=float)
        self.f1 = np.asarray(self.f1, dtype=float)
        n = self.n_qubits
        for name, arr in (("g", self.g), ("f0", self.f0), ("f1", self.f1)):
            if arr.shape != (n,):
                raise ParameterError(f"{name} must have length {n}")
        if np.any(self.g <= 0):
            raise ParameterError("bus couplings g_j must be positive")
        if np.any(self.f0 <= 0) or np.any(self.f0 > 1) or np.any(self.f1 <= 0) or np.any(self.f1 > 1):
            raise ParameterError("readout fidelities must lie in (0, 1]")
        if self.lambda_c is None:
            self.lambda_c = np.zeros((n, n))
        else:
            self.lambda_c = np.asarray(self.lambda_c, dtype=float)
            if self.lambda_c.shape != (n, n):
                raise ParameterError("lambda_c must be an n x n matrix")
            if not np.allclose(self.lambda_c, self.lambda_c.T):
                raise ParameterError("lambda_c must be symmetric")
            if np.any(np.diag(self.lambda_c) != 0):
                raise ParameterError("lambda_c must have zero diagonal")
        if not self.labels:
            self.labels = [f"Q{j + 1}" for j in range(n)]

    @classmethod
    def from_file(cls, path) -> "DeviceSpec":
        """Load a device file (JSON text, frequencies in MHz)."""
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read device file {path}: {exc}") from exc
        try:
            lam_c = raw.get("lambda_c_mhz")
            return cls(
                n_qubits=int(raw["n_qubits"]),
                g=mhz_to_radns(raw["g_mhz"]),
                delta=float(mhz_to_radns(raw["delta_mhz"])),
                f0=np.asarray(raw["f0"], dtype=float),
                f1=np.asarray(raw["f1"], dtype=float),
                lambda_c=None if lam_c is None else mhz_to_radns(lam_c),
                labels=list(raw.get("labels", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed device file {path}: {exc}") from exc

    def to_file(self, path):
        data = {
            "n_qubits": self.n_qubits,
            "delta_mhz": float(radns_to_mhz(self.delta)),
            "g_mhz": radns_to_mhz(self.g).tolist(),
            "f0": self.f0.tolist(),
            "f1": self.f1.tolist(),
            "labels": self.labels,
        }
        if np.any(self.lambda_c):
            data["lambda_c_mhz"] = radns_to_mhz(self.lambda_c).tolist()
        Path(path).write_text(json.dumps(data, indent=2) + "\n")


def default_device() -> DeviceSpec:
    """The packaged 16-qubit device transcribed from the hardware table."""
    with resources.as_file(resources.files("dptsim.data") / "device_16q.cfg") as p:
        return DeviceSpec.from_file(p)


def build_coupling_matrix(spec: DeviceSpec) -> np.ndarray:
    """Pairwise coupling lambda_ij = g_i g_j / delta + lambda^c_ij (rad/ns)."""
    if spec.delta == 0:
        raise ParameterError("detuning delta must be nonzero")
    lam = np.outer(spec.g, spec.g) / spec.delta + spec.lambda_c
    np.fill_diagonal(lam, 0.0)
    return lam


@dataclass
class HamiltonianModel:
    """Couplings and drive of the quenched system.

    lam is the symmetric coupling matrix (rad/ns, zero diagonal), hx the
    common transverse-field amplitude.  per_qubit_hx / phases override the
    uniform drive for crosstalk studies.
    """

    lam: np.ndarray
    hx: float
    phases: np.ndarray | None = None
    per_qubit_hx: np.ndarray | None = None

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        n = self.lam.shape[0]
        if self.lam.shape != (n, n):
            raise ParameterError("coupling matrix must be square")
        if not np.allclose(self.lam, self.lam.T):
            raise ParameterError("coupling matrix must be symmetric")
        if np.any(np.diag(self.lam) != 0):
            raise ParameterError("coupling matrix must have zero diagonal")
        if self.phases is not None:
            self.phases = np.asarray(self.phases, dtype=float)
            if self.phases.shape != (n,):
                raise ParameterError(f"phases must have length {n}")
        if self.per_qubit_hx is not None:
            self.per_qubit_hx = np.asarray(self.per_qubit_hx, dtype=float)
            if self.per_qubit_hx.shape != (n,):
                raise ParameterError(f"per_qubit_hx must have length {n}")

    @property
    def n_qubits(self) -> int:
        return self.lam.shape[0]

    def drive_amplitudes(self) -> np.ndarray:
        if self.per_qubit_hx is not None:
            return self.per_qubit_hx
        return np.full(self.n_qubits, self.hx)

    def drive_phases(self) -> np.ndarray:
        if self.phases is not None:
            return self.phases
        return np.zeros(self.n_qubits)


def model_from_device(spec: DeviceSpec, hx: float) -> HamiltonianModel:
    """Quench model for a device at transverse field hx (rad/ns)."""
    return HamiltonianModel(lam=build_coupling_matrix(spec), hx=hx)


@dataclass
class LmgModel:
    """Collective-spin model H = sign * (J/n) (S^z)^2 + mu * S^x.

    With sign = -1 (the default) and the calibrated mapping J = n * mean(lambda),
    mu = 2 * hx, the symmetric-sector dynamics matches the full-space model
    with uniform couplings up to a global phase.
    """

    n: int
    j_coupling: float
    mu: float

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("LMG model needs n >= 2")


@dataclass
class CriticalPoint:
    """Predicted dynamical critical field hx_c = n |mean lambda| / 4."""

    hx_c: float
    mean_lambda: float


def mean_coupling(lam: np.ndarray) -> float:
    """Mean of the off-diagonal entries of a coupling matrix."""
    n = lam.shape[0]
    return float((lam.sum() - np.trace(lam)) / (n * (n - 1)))


def predict_critical_field(model: HamiltonianModel) -> CriticalPoint:
    lam_bar = mean_coupling(model.lam)
    if lam_bar == 0:
        raise ParameterError("cannot predict a critical field for zero couplings")
    return CriticalPoint(hx_c=model.n_qubits * abs(lam_bar) / 4.0, mean_lambda=lam_bar)


def lmg_from_model(model: HamiltonianModel) -> LmgModel:
    """Calibrated symmetric-sector reduction: J = n*mean(lambda), mu = 2*hx."""
    n = model.n_qubits
    return LmgModel(n=n, j_coupling=n * mean_coupling(model.lam), mu=2.0 * model.hx)


def _check_cap(n: int, cap: int):
    if n > cap:
        raise CapacityError(f"{n} qubits exceeds the full-space cap of {cap}")


def build_full_hamiltonian(model: HamiltonianModel, cap: int = FULL_SPACE_QUBIT_CAP) -> sp.csr_matrix:
    """Sparse H/hbar on the 2^n computational basis.

    H = sum_{i<j} lam_ij (s+_i s-_j + h.c.)
        + sum_j hx_j (s-_j e^{i phi_j} + s+_j e^{-i phi_j}).

    With uniform phase 0 the drive term reduces to hx * sum_j sigma^x_j.
    """
    n = model.n_qubits
    _check_cap(n, cap)
    dim = 1 << n
    basis = np.arange(dim, dtype=np.int64)
    rows, cols, vals = [], [], []

    # Flip-flop terms.  s-_j lowers sigma^z, i.e. sets bit j; the term
    # s+_i s-_j connects |...1_i...0_j...> -> |...0_i...1_j...>.
    for i in range(n):
        for j in range(i + 1, n):
            if model.lam[i, j] == 0.0:
                continue
            src = basis[((basis >> i) & 1 == 1) & ((basis >> j) & 1 == 0)]
            dst = src - (1 << i) + (1 << j)
            rows.append(dst)
            cols.append(src)
            vals.append(np.full(src.size, model.lam[i, j], dtype=complex))
            rows.append(src)
            cols.append(dst)
            vals.append(np.full(src.size, model.lam[i, j], dtype=complex))

    # Drive terms.  s-_j sets bit j (matrix element e^{i phi_j} on 0 -> 1),
    # s+_j clears it (e^{-i phi_j} on 1 -> 0).
    amps = model.drive_amplitudes()
    phis = model.drive_phases()
    for j in range(n):
        if amps[j] == 0.0:
            continue
        bit = (basis >> j) & 1
        elem = np.where(bit == 0, np.exp(1j * phis[j]), np.exp(-1j * phis[j]))
        rows.append(basis ^ (1 << j))
        cols.append(basis)
        vals.append(amps[j] * elem)

    if not rows:
        return sp.csr_matrix((dim, dim), dtype=complex)
    H = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
        dtype=complex,
    )
    H.sum_duplicates()
    return H


def dicke_m_values(n: int) -> np.ndarray:
    """S^z eigenvalues m = n/2 - k for basis index k = 0..n."""
    return n / 2.0 - np.arange(n + 1)


def dicke_ladder(n: int) -> np.ndarray:
    """Off-diagonal S^x elements <k+1| S^x |k> in the Dicke basis."""
    s = n / 2.0
    m = dicke_m_values(n)
    return 0.5 * np.sqrt(s * (s + 1) - m[:-1] * (m[:-1] - 1))


def build_lmg_hamiltonian(lmg: LmgModel, sign: int = -1) -> np.ndarray:
    """Dense (n+1) x (n+1) LMG Hamiltonian in the Dicke basis."""
    if sign not in (-1, 1):
        raise ParameterError("sign must be +1 or -1")
    m = dicke_m_values(lmg.n)
    off = lmg.mu * dicke_ladder(lmg.n)
    H = np.diag(sign * (lmg.j_coupling / lmg.n) * m**2).astype(float)
    H += np.diag(off, 1) + np.diag(off, -1)
    return H
