"""XY-crosstalk correction linear algebra.

The crosstalk model is linear: the vector of effective complex drives equals
a unit-diagonal mixing matrix times the vector of applied drives.  Correcting
a desired drive therefore amounts to one well-conditioned linear solve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParameterError

CONDITION_LIMIT = 1e6


@dataclass
class CrosstalkMatrix:
    """Unit-diagonal complex mixing matrix M_jk = a_jk e^{i phi_jk}."""

    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        n = self.entries.shape[0]
        if self.entries.shape != (n, n):
            raise ParameterError("crosstalk matrix must be square")
        if not np.allclose(np.diag(self.entries), 1.0):
            raise ParameterError("crosstalk matrix must have unit diagonal")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.entries))

    @classmethod
    def from_amplitude_phase(cls, amplitude: np.ndarray, phase: np.ndarray) -> "CrosstalkMatrix":
        amplitude = np.asarray(amplitude, dtype=float)
        m = amplitude * np.exp(1j * np.asarray(phase, dtype=float))
        np.fill_diagonal(m, 1.0)
        return cls(m)

    @classmethod
    def from_file(cls, path) -> "CrosstalkMatrix":
        """Structured text file: JSON with 'amplitude' and 'phase' matrices."""
        try:
            raw = json.loads(Path(path).read_text())
            return cls.from_amplitude_phase(np.array(raw["amplitude"]), np.array(raw["phase"]))
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read crosstalk file {path}: {exc}") from exc

    def to_file(self, path):
        data = {
            "amplitude": np.abs(self.entries).tolist(),
            "phase": np.angle(self.entries).tolist(),
        }
        Path(path).write_text(json.dumps(data, indent=2) + "\n")


def random_crosstalk(n: int, a_max: float = 0.05, seed: int = 0) -> CrosstalkMatrix:
    """Synthetic matrix with amplitudes uniform in [0, a_max], phases in [0, 2pi)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    amp = rng.uniform(0.0, a_max, size=(n, n))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(n, n))
    return CrosstalkMatrix.from_amplitude_phase(amp, phase)


def effective_drive(m: CrosstalkMatrix, applied: np.ndarray) -> np.ndarray:
    """Complex drive vector each qubit actually experiences: M @ applied."""
    applied = np.asarray(applied, dtype=complex)
    if applied.shape != (m.n,):
        raise ParameterError("drive vector length does not match the matrix")
    return m.entries @ applied


def correct_drive(m: CrosstalkMatrix, desired: np.ndarray) -> np.ndarray:
    """Drive vector x with M @ x = desired, by a stable linear solve."""
    desired = np.asarray(desired, dtype=complex)
    if desired.shape != (m.n,):
        raise ParameterError("drive vector length does not match the matrix")
    cond = m.condition_number()
    if cond > CONDITION_LIMIT:
        raise ParameterError(
            f"crosstalk matrix condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}"
        )
    x = np.linalg.solve(m.entries, desired)
    residual = np.linalg.norm(m.entries @ x - desired)
    scale = np.linalg.norm(desired)
    if scale > 0 and residual > 1e-10 * scale:
        raise ParameterError(f"linear solve residual {residual:.3e} too large")
    return x


@dataclass
class UniformityReport:
    max_amplitude_deviation: float  # relative to the mean amplitude
    max_phase_spread: float  # rad, relative to the circular-mean phase
    amplitude_tol: float
    phase_tol: float
    passed: bool
    worst_qubit: int

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


def uniformity_check(effective: np.ndarray, amplitude_tol: float = 0.01,
                     phase_tol: float = 0.02) -> UniformityReport:
    """Check that a drive vector realises a uniform transverse field."""
    effective = np.asarray(effective, dtype=complex)
    amps = np.abs(effective)
    mean_amp = amps.mean()
    amp_dev = np.abs(amps - mean_amp) / mean_amp if mean_amp > 0 else np.zeros_like(amps)
    mean_phase = np.angle(np.sum(effective / np.where(amps > 0, amps, 1.0)))
    phase_dev = np.abs(np.angle(effective * np.exp(-1j * mean_phase)))
    worst = int(np.argmax(np.maximum(amp_dev / max(amplitude_tol, 1e-30),
                                     phase_dev / max(phase_tol, 1e-30))))
    passed = bool(np.all(amp_dev <= amplitude_tol) and np.all(phase_dev <= phase_tol))
    return UniformityReport(
        max_amplitude_deviation=float(amp_dev.max()),
        max_phase_spread=float(phase_dev.max()),
        amplitude_tol=amplitude_tol,
        phase_tol=phase_tol,
        passed=passed,
        worst_qubit=worst,
    )
