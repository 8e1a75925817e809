"""Readout-chain emulation and sampling-based correlator estimators.

The chain mirrors the experiment: per-qubit pre-readout rotations, joint
single-shot bitstring sampling, optional independent readout bit flips, and
confusion-matrix correction.  On top of it sits the random-bipartition
estimator for the anticommutator of two transverse collective spin
components, which feeds the sampled spin-squeezing parameter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import StateVector
from .errors import ParameterError
from .model import DeviceSpec
from .observables import SqueezingFrame, collective_ops

DEFAULT_SHOTS_PER_SETTING = 3000
DEFAULT_PARTITION_COUNT = 5


@dataclass
class RotationSetting:
    """Per-qubit rotation angles (theta_j, phi_j) applied before readout.

    R_j = exp[-i theta_j (cos(phi_j) sigma^x_j + sin(phi_j) sigma^y_j) / 2];
    it brings the Bloch axis (theta_j, phi_j + pi/2) to the z axis.
    """

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.theta.shape != self.phi.shape or self.theta.ndim != 1:
            raise ParameterError("theta and phi must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.phi))):
            raise ParameterError("rotation angles must be finite")

    @classmethod
    def identity(cls, n: int) -> "RotationSetting":
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def measure_axis(cls, n: int, axis, qubits=None) -> "RotationSetting":
        """Setting that maps measurement along the Bloch vector ``axis`` to a
        z measurement, for the listed qubits (all by default)."""
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        theta_a = float(np.arccos(np.clip(axis[2], -1.0, 1.0)))
        phi_a = float(np.arctan2(axis[1], axis[0]))
        setting = cls.identity(n)
        idx = range(n) if qubits is None else qubits
        for j in idx:
            setting.theta[j] = theta_a
            setting.phi[j] = phi_a - np.pi / 2.0
        return setting


def _rotation_matrix(theta: float, phi: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array(
        [[c, -1j * np.exp(-1j * phi) * s], [-1j * np.exp(1j * phi) * s, c]]
    )


def apply_rotations(state: StateVector, setting: RotationSetting) -> StateVector:
    """Apply the product of per-qubit rotations to a full-space state."""
    if state.space != "full":
        raise ParameterError("rotations act on full-space states (see symmetric_to_full)")
    n = state.n_qubits
    if setting.theta.shape != (n,):
        raise ParameterError(f"setting is for {setting.theta.size} qubits, state has {n}")
    psi = state.amplitudes.reshape((2,) * n)
    # axis q addresses qubit (n-1-q) because bit 0 is the last tensor index
    for j in range(n):
        if setting.theta[j] == 0.0:
            continue
        U = _rotation_matrix(setting.theta[j], setting.phi[j])
        ax = n - 1 - j
        psi = np.moveaxis(np.tensordot(U, psi, axes=([1], [ax])), 0, ax)
    return StateVector(np.ascontiguousarray(psi).reshape(-1), "full", state.time)


@dataclass
class ShotBatch:
    """Sampled readout bitstrings plus their provenance."""

    settings: RotationSetting
    bits: np.ndarray  # (n_shots, n) uint8; bit 1 means |1> was read
    seed: int
    error_applied: bool

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2:
            raise ParameterError("bits must be a (n_shots, n) array")

    @property
    def n_shots(self) -> int:
        return self.bits.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.bits.shape[1]

    def z_values(self) -> np.ndarray:
        """Shot matrix of sigma^z outcomes (+1 for bit 0)."""
        return 1.0 - 2.0 * self.bits.astype(float)

    def save(self, path, device_hash: str = ""):
        """JSON header line, then one bitstring per line (qubit 0 first)."""
        header = {
            "n_shots": self.n_shots,
            "n_qubits": self.n_qubits,
            "seed": self.seed,
            "error_applied": self.error_applied,
            "theta": self.settings.theta.tolist(),
            "phi": self.settings.phi.tolist(),
            "device_hash": device_hash,
        }
        lines = [json.dumps(header)]
        lines += ["".join(str(b) for b in row) for row in self.bits]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "ShotBatch":
        lines = Path(path).read_text().splitlines()
        header = json.loads(lines[0])
        bits = np.array([[int(c) for c in line] for line in lines[1:]], dtype=np.uint8)
        return cls(
            settings=RotationSetting(header["theta"], header["phi"]),
            bits=bits,
            seed=header["seed"],
            error_applied=header["error_applied"],
        )


def sample_shots(
    state: StateVector,
    n_shots: int,
    seed: int,
    device: DeviceSpec | None = None,
    with_error: bool = False,
    settings: RotationSetting | None = None,
) -> ShotBatch:
    """Draw i.i.d. bitstrings from |amplitudes|^2, optionally flipping each
    bit through the device's readout channel.  Deterministic under seed."""
    if n_shots < 1:
        raise ParameterError("need n_shots >= 1")
    if state.space != "full":
        raise ParameterError("sampling needs a full-space state")
    n = state.n_qubits
    if settings is None:
        settings = RotationSetting.identity(n)
    p = np.abs(state.amplitudes) ** 2
    p = p / p.sum()
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.choice(p.size, size=n_shots, p=p)
    bits = ((idx[:, None] >> np.arange(n)[None, :]) & 1).astype(np.uint8)
    if with_error:
        if device is None:
            raise ParameterError("readout error model needs a DeviceSpec")
        flip_p = np.where(bits == 0, 1.0 - device.f0[None, :], 1.0 - device.f1[None, :])
        bits = bits ^ (rng.random(bits.shape) < flip_p)
    return ShotBatch(settings=settings, bits=bits.astype(np.uint8), seed=seed,
                     error_applied=with_error)


# ---------------------------------------------------------------------------
# readout correction

def _channel_coeffs(device: DeviceSpec):
    """Per-qubit affine readout channel <z_obs> = a <z_true> + b."""
    a = device.f0 + device.f1 - 1.0
    if np.any(a <= 0):
        raise ParameterError("confusion matrix singular: F0 + F1 <= 1")
    return a, device.f0 - device.f1


def correct_readout(batch: ShotBatch, device: DeviceSpec) -> np.ndarray:
    """Per-qubit corrected marginal probabilities, shape (n, 2).

    Row j is (P_j(0), P_j(1)) after inverting the qubit's 2x2 confusion
    matrix; clipped to [0, 1] only in the return value, estimators use the
    unclipped moments.
    """
    a, b = _channel_coeffs(device)
    z_obs = batch.z_values().mean(axis=0)
    z_true = (z_obs - b) / a
    p1 = (1.0 - z_true) / 2.0
    return np.stack([1.0 - p1, p1], axis=1)


def corrected_z_moments(batch: ShotBatch, device: DeviceSpec | None = None):
    """First and second sigma^z moments from shots, readout-corrected when a
    device is given.  Returns (z, ZZ) with ZZ_ii = 1."""
    Z = batch.z_values()
    z = Z.mean(axis=0)
    ZZ = (Z.T @ Z) / batch.n_shots
    np.fill_diagonal(ZZ, 1.0)
    if device is not None:
        a, b = _channel_coeffs(device)
        z = (z - b) / a
        ZZ = (ZZ - np.outer(a * z, b) - np.outer(b, a * z) - np.outer(b, b)) / np.outer(a, a)
        np.fill_diagonal(ZZ, 1.0)
    return z, ZZ


def s2_from_moments(ZZ: np.ndarray) -> float:
    """<(S^z)^2> = (n + sum_{i != j} <z_i z_j>) / 4 from a moment matrix."""
    n = ZZ.shape[0]
    off = ZZ.sum() - np.trace(ZZ)
    return float((n + off) / 4.0)


# ---------------------------------------------------------------------------
# random bipartitions

@dataclass
class PartitionPlan:
    """Distinct equal-size bipartitions of the qubit register."""

    partitions: list[tuple[tuple[int, ...], tuple[int, ...]]]
    count: int = field(init=False)

    def __post_init__(self):
        seen = set()
        for g1, g2 in self.partitions:
            s1, s2 = frozenset(g1), frozenset(g2)
            if s1 & s2 or len(s1) != len(g1) or len(s2) != len(g2):
                raise ParameterError("groups must be disjoint without repeats")
            if len(s1) != len(s2):
                raise ParameterError("groups must have equal size")
            key = frozenset((s1, s2))
            if key in seen:
                raise ParameterError("partitions must be distinct")
            seen.add(key)
        self.count = len(self.partitions)


def random_partitions(n: int, count: int = DEFAULT_PARTITION_COUNT, seed: int = 0) -> PartitionPlan:
    """Uniformly drawn distinct equal bipartitions (seeded)."""
    if n % 2:
        raise ParameterError("need an even number of qubits")
    rng = np.random.Generator(np.random.PCG64(seed))
    parts = []
    seen = set()
    while len(parts) < count:
        perm = rng.permutation(n)
        g1, g2 = sorted(perm[: n // 2]), sorted(perm[n // 2:])
        if 0 not in g1:  # canonical orientation so distinctness is well defined
            g1, g2 = g2, g1
        key = tuple(g1)
        if key in seen:
            continue
        seen.add(key)
        parts.append((tuple(int(q) for q in g1), tuple(int(q) for q in g2)))
    return PartitionPlan(partitions=parts)


# ---------------------------------------------------------------------------
# estimators

def _group_pair_sum_exact(state: StateVector, setting: RotationSetting, g1, g2) -> float:
    """Exact sum_{i in G1, j in G2} <z_i z_j> after the rotation setting."""
    rotated = apply_rotations(state, setting)
    q = np.abs(rotated.amplitudes) ** 2
    ops = collective_ops("full", state.n_qubits)
    a1 = sum(1.0 - 2.0 * ops.bits[i] for i in g1)
    a2 = sum(1.0 - 2.0 * ops.bits[j] for j in g2)
    return float(np.sum(q * a1 * a2))


def _group_pair_sum_sampled(batch: ShotBatch, g1, g2,
                            device: DeviceSpec | None = None) -> float:
    if device is None:
        Z = batch.z_values()
        return float((Z[:, list(g1)].sum(axis=1) * Z[:, list(g2)].sum(axis=1)).mean())
    _, ZZ = corrected_z_moments(batch, device)
    return float(ZZ[np.ix_(list(g1), list(g2))].sum())


def _two_axis_setting(n: int, frame: SqueezingFrame, g1, g2, swap: bool) -> RotationSetting:
    ax1, ax2 = (frame.n2, frame.n1) if swap else (frame.n1, frame.n2)
    s = RotationSetting.measure_axis(n, ax1, qubits=g1)
    s2 = RotationSetting.measure_axis(n, ax2, qubits=g2)
    s.theta[list(g2)] = s2.theta[list(g2)]
    s.phi[list(g2)] = s2.phi[list(g2)]
    return s


def estimate_anticommutator(
    state: StateVector,
    frame: SqueezingFrame,
    plan: PartitionPlan,
    shots_per_setting: int = DEFAULT_SHOTS_PER_SETTING,
    seed: int = 0,
    device: DeviceSpec | None = None,
    with_error: bool = False,
    correct: bool = False,
    exact: bool = False,
    report: dict | None = None,
) -> float:
    """Bipartition estimate of <{S^n1, S^n2}>.

    Each partition is measured twice (group roles swapped); cross-group pair
    sums are rescaled from (n/2)^2 covered pairs to all n(n-1) ordered pairs
    and averaged over partitions.  The pair-sum scale n(n-1)/((n/2)^2 count)
    estimates sum_{i != j}(<s1 s2> + <s2 s1>), of which the anticommutator
    is one quarter.  With exact=True expectations replace sampling.
    """
    n = state.n_qubits
    if n % 2:
        raise ParameterError("need an even number of qubits")
    streams = np.random.SeedSequence(seed).spawn(2 * plan.count)
    total = 0.0
    for i, (g1, g2) in enumerate(plan.partitions):
        contrib = 0.0
        for k, swap in enumerate((False, True)):
            setting = _two_axis_setting(n, frame, g1, g2, swap)
            if exact:
                contrib += _group_pair_sum_exact(state, setting, g1, g2)
            else:
                rotated = apply_rotations(state, setting)
                batch = sample_shots(
                    rotated, shots_per_setting,
                    seed=int(streams[2 * i + k].generate_state(1)[0]),
                    device=device, with_error=with_error, settings=setting,
                )
                contrib += _group_pair_sum_sampled(
                    batch, g1, g2, device=device if correct else None
                )
        if report is not None:
            report.setdefault("partitions", []).append(
                {"g1": list(g1), "g2": list(g2), "pair_sum": contrib}
            )
        total += contrib
    pair_sum = total * (n * (n - 1)) / ((n / 2) ** 2 * plan.count)
    value = pair_sum / 4.0
    if report is not None:
        report["anticommutator"] = value
    return value


def _second_moment(state, frame_axis, n, shots, seed, device, with_error, correct, exact):
    setting = RotationSetting.measure_axis(n, frame_axis)
    rotated = apply_rotations(state, setting)
    if exact:
        q = np.abs(rotated.amplitudes) ** 2
        ops = collective_ops("full", n)
        return float(np.sum(q * ops.sz_diag**2))
    batch = sample_shots(rotated, shots, seed=seed, device=device,
                         with_error=with_error, settings=setting)
    _, ZZ = corrected_z_moments(batch, device if correct else None)
    return s2_from_moments(ZZ)


def estimate_xi2_from_shots(
    state: StateVector,
    frame: SqueezingFrame,
    plan: PartitionPlan,
    shots_per_setting: int = DEFAULT_SHOTS_PER_SETTING,
    seed: int = 0,
    device: DeviceSpec | None = None,
    with_error: bool = False,
    correct: bool = False,
    exact: bool = False,
) -> float:
    """Assemble xi^2 from sampled moments via the closed form.

    <(S^n1)^2> and <(S^n2)^2> come from uniform-rotation settings, the
    anticommutator from the bipartition estimator; converges to the exact
    xi^2 as shots -> infinity.
    """
    n = state.n_qubits
    ss = np.random.SeedSequence(seed).spawn(3)
    s11 = _second_moment(state, frame.n1, n, shots_per_setting,
                         int(ss[0].generate_state(1)[0]), device, with_error, correct, exact)
    s22 = _second_moment(state, frame.n2, n, shots_per_setting,
                         int(ss[1].generate_state(1)[0]), device, with_error, correct, exact)
    anti = estimate_anticommutator(
        state, frame, plan, shots_per_setting, seed=int(ss[2].generate_state(1)[0]),
        device=device, with_error=with_error, correct=correct, exact=exact,
    )
    return (2.0 / n) * ((s11 + s22) - float(np.hypot(s11 - s22, anti)))
