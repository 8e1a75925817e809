"""Collective observables computed from state trajectories.

Everything here is a pure function of immutable states or trajectory arrays:
magnetisation, non-equilibrium order parameter, two-spin correlations,
Loschmidt-minimum diagnostics, the Q-function on a spherical mesh, and the
spin-squeezing parameter in both its angle-scan and closed forms.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from . import model as _model
from .engine import StateVector, loschmidt_function
from .errors import ParameterError

DEGENERATE_SPIN_LENGTH = 1e-9


class DegenerateDirectionError(ParameterError):
    """Mean spin length below threshold: the squeezing frame is undefined."""


# ---------------------------------------------------------------------------
# collective spin operators (cached per representation)

class _CollectiveOps:
    def __init__(self, space: str, n: int):
        self.n = n
        if space == "full":
            dim = 1 << n
            basis = np.arange(dim, dtype=np.int64)
            rows_x, vals_y = [], []
            for j in range(n):
                rows_x.append(basis ^ (1 << j))
                bit = (basis >> j) & 1
                # sigma^y flips the bit with phase: <1|y|0> = i, <0|y|1> = -i
                vals_y.append(0.5j * np.where(bit == 0, 1.0, -1.0))
            rows = np.concatenate(rows_x)
            cols = np.tile(basis, n)
            self.sx = sp.csr_matrix(
                (np.full(rows.size, 0.5, dtype=complex), (rows, cols)), shape=(dim, dim)
            )
            self.sy = sp.csr_matrix(
                (np.concatenate(vals_y), (rows, cols)), shape=(dim, dim)
            )
            self.weights = np.bitwise_count(basis).astype(np.int64)
            self.sz_diag = (n - 2 * self.weights) / 2.0
            self.bits = [(basis >> j) & 1 for j in range(n)]
        else:
            m = _model.dicke_m_values(n)
            off = _model.dicke_ladder(n)
            # index k has m = n/2 - k, so S^- raises k: its elements sit on
            # the subdiagonal, giving S^y subdiagonal +i*off (as for sigma^y)
            self.sx = np.diag(off, 1) + np.diag(off, -1)
            self.sy = np.diag(-1j * off, 1) + np.diag(1j * off, -1)
            self.sz_diag = m
            self.weights = np.arange(n + 1)


_OPS_CACHE: dict[tuple[str, int], _CollectiveOps] = {}


def collective_ops(space: str, n: int) -> _CollectiveOps:
    key = (space, n)
    if key not in _OPS_CACHE:
        _OPS_CACHE[key] = _CollectiveOps(space, n)
    return _OPS_CACHE[key]


def spin_moments(state: StateVector):
    """First moments <S^a> and symmetrised second moments
    M_ab = Re<S^a S^b> of the collective spin."""
    ops = collective_ops(state.space, state.n_qubits)
    psi = state.amplitudes
    u = [ops.sx @ psi, ops.sy @ psi, ops.sz_diag * psi]
    svec = np.array([np.vdot(psi, ui).real for ui in u])
    M = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            M[a, b] = M[b, a] = np.vdot(u[a], u[b]).real
    return svec, M


def magnetization(state: StateVector, axis: str) -> float:
    """Averaged magnetisation <sigma^axis> = 2 <S^axis> / n in [-1, 1]."""
    ops = collective_ops(state.space, state.n_qubits)
    psi = state.amplitudes
    if axis == "z":
        # diagonal: bitwise expectation, no operator application needed
        val = float(np.real(np.vdot(psi, ops.sz_diag * psi)))
    elif axis == "x":
        val = float(np.real(np.vdot(psi, ops.sx @ psi)))
    elif axis == "y":
        val = float(np.real(np.vdot(psi, ops.sy @ psi)))
    else:
        raise ParameterError(f"unknown axis {axis!r}")
    return 2.0 * val / state.n_qubits


def bloch_vector(state: StateVector) -> np.ndarray:
    svec, _ = spin_moments(state)
    return 2.0 * svec / state.n_qubits


def per_qubit_z(state: StateVector) -> np.ndarray:
    """<sigma^z_j> for every qubit."""
    n = state.n_qubits
    ops = collective_ops(state.space, n)
    if state.space == "symmetric":
        psi = state.amplitudes
        mz = float(np.real(np.vdot(psi, ops.sz_diag * psi)))
        return np.full(n, 2.0 * mz / n)
    p = np.abs(state.amplitudes) ** 2
    return np.array([np.sum(p * (1 - 2 * bits)) for bits in ops.bits])


def czz(state: StateVector, include_diagonal: bool = True) -> float:
    """sum_ij <sigma^z_i sigma^z_j> / n^2; both bases give 4<(S^z)^2>/n^2.

    With include_diagonal=False the i = j terms (exactly 1/n) are removed.
    """
    n = state.n_qubits
    ops = collective_ops(state.space, n)
    p = np.abs(state.amplitudes) ** 2
    val = 4.0 * float(np.sum(p * ops.sz_diag**2)) / n**2
    if not include_diagonal:
        val -= 1.0 / n
    return val


# ---------------------------------------------------------------------------
# trajectory record and time averages

@dataclass
class TrajectoryRecord:
    """Time series of observables for one (hx, delta) point.

    hx and delta are stored in rad/ns; persisted files use MHz.
    Observable arrays may be None when a run toggles them off.
    """

    hx: float
    delta: float
    t: np.ndarray
    n_qubits: int = 16
    space: str = "full"
    sigma_x: np.ndarray | None = None
    sigma_y: np.ndarray | None = None
    sigma_z: np.ndarray | None = None
    bloch_len: np.ndarray | None = None
    czz: np.ndarray | None = None
    loschmidt: np.ndarray | None = None
    xi2: np.ndarray | None = None
    per_qubit_z: np.ndarray | None = None  # (n_qubits, T)
    meta: dict = field(default_factory=dict)

    _COLUMNS = ("sigma_x", "sigma_y", "sigma_z", "bloch_len", "czz", "loschmidt", "xi2")

    def save(self, csv_path):
        """CSV (one row per sample) plus a JSON parameter sidecar."""
        csv_path = Path(csv_path)
        cols = ["t_ns"] + [c for c in self._COLUMNS if getattr(self, c) is not None]
        pq = self.per_qubit_z
        qcols = [f"z_q{j:02d}" for j in range(self.n_qubits)] if pq is not None else []
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols + qcols)
            for i, ti in enumerate(self.t):
                row = [f"{ti:.10g}"] + [
                    f"{getattr(self, c)[i]:.12g}" for c in cols[1:]
                ]
                if pq is not None:
                    row += [f"{pq[j, i]:.12g}" for j in range(self.n_qubits)]
                w.writerow(row)
        sidecar = {
            "hx_mhz": float(_model.radns_to_mhz(self.hx)),
            "delta_mhz": float(_model.radns_to_mhz(self.delta)),
            "n_qubits": self.n_qubits,
            "space": self.space,
            "columns": cols + qcols,
            **self.meta,
        }
        csv_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")

    @classmethod
    def load(cls, csv_path) -> "TrajectoryRecord":
        csv_path = Path(csv_path)
        sidecar = json.loads(csv_path.with_suffix(".json").read_text())
        with open(csv_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = np.array([[float(x) for x in row] for row in reader]).T
        by_name = dict(zip(header, data))
        n = int(sidecar["n_qubits"])
        qcols = [h for h in header if h.startswith("z_q")]
        rec = cls(
            hx=float(_model.mhz_to_radns(sidecar["hx_mhz"])),
            delta=float(_model.mhz_to_radns(sidecar["delta_mhz"])),
            t=by_name["t_ns"],
            n_qubits=n,
            space=sidecar.get("space", "full"),
            per_qubit_z=np.array([by_name[c] for c in qcols]) if qcols else None,
            meta={k: v for k, v in sidecar.items()
                  if k not in ("hx_mhz", "delta_mhz", "n_qubits", "space", "columns")},
        )
        for c in cls._COLUMNS:
            if c in by_name:
                setattr(rec, c, by_name[c])
        return rec


def _time_average(t: np.ndarray, y: np.ndarray, t_f: float) -> float:
    if t_f > t[-1] + 1e-9:
        raise ParameterError(f"t_f={t_f} exceeds the trajectory window {t[-1]}")
    mask = t <= t_f + 1e-12
    tt, yy = t[mask], y[mask]
    if tt[-1] < t_f - 1e-12:  # interpolate the endpoint onto the window edge
        y_end = np.interp(t_f, t, y)
        tt = np.append(tt, t_f)
        yy = np.append(yy, y_end)
    return float(np.trapezoid(yy, tt) / (tt[-1] - tt[0]))


def order_parameter(traj: TrajectoryRecord, t_f: float = 600.0) -> float:
    """Non-equilibrium order parameter: time average of <sigma^z> to t_f."""
    if traj.sigma_z is None:
        raise ParameterError("trajectory carries no sigma_z series")
    return _time_average(traj.t, traj.sigma_z, t_f)


def averaged_czz(traj: TrajectoryRecord, t_f: float = 600.0) -> float:
    """Time average of sum_ij <sigma^z_i sigma^z_j> / n^2 to t_f."""
    if traj.czz is None:
        raise ParameterError("trajectory carries no czz series")
    return _time_average(traj.t, traj.czz, t_f)


# ---------------------------------------------------------------------------
# Loschmidt diagnostics

@dataclass
class LoschmidtDiagnostics:
    l_min_first: float
    t_min_first: float
    l_min_global: float
    t_min_global: float
    no_dip: bool = False


def _golden_min(f, a, b, xatol=0.1):
    """Golden-section minimum of f on [a, b] to absolute x tolerance."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > xatol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def loschmidt_diagnostics(t, L, refine=None, xatol=0.1,
                          dip_rtol=1e-9) -> LoschmidtDiagnostics:
    """First and global Loschmidt minima over the sampled window.

    refine, when given, is a callable t -> L(t) used to sharpen each
    grid-local minimum by golden-section search (default 0.1 ns).
    Dips shallower than a relative depth dip_rtol are treated as numerical
    noise; the guard is relative so that genuinely deep minima (echo values
    near the double-precision floor, where neighbouring samples differ by
    less than any fixed absolute amount) are still resolved.  A series with
    no interior local minimum is flagged no_dip and reports the window-end
    values.
    """
    t = np.asarray(t, dtype=float)
    L = np.asarray(L, dtype=float)
    minima = [
        k
        for k in range(1, len(t) - 1)
        if L[k] < L[k - 1] * (1.0 - dip_rtol) and L[k] <= L[k + 1] * (1.0 + dip_rtol)
    ]
    if not minima:
        return LoschmidtDiagnostics(
            l_min_first=float(L[-1]), t_min_first=float(t[-1]),
            l_min_global=float(L[-1]), t_min_global=float(t[-1]), no_dip=True,
        )

    def refined(k):
        if refine is None:
            return float(t[k]), float(L[k])
        x, fx = _golden_min(refine, t[k - 1], t[k + 1], xatol=xatol)
        return (x, fx) if fx <= L[k] else (float(t[k]), float(L[k]))

    t1, l1 = refined(minima[0])
    kg = minima[int(np.argmin([L[k] for k in minima]))]
    tg, lg = refined(kg)
    if L[-1] < lg:  # window-end value can undercut every interior dip
        tg, lg = float(t[-1]), float(L[-1])
    if lg > l1:
        tg, lg = t1, l1
    return LoschmidtDiagnostics(
        l_min_first=l1, t_min_first=t1, l_min_global=lg, t_min_global=tg
    )


# ---------------------------------------------------------------------------
# Q-function

@dataclass
class SphericalMesh:
    theta: np.ndarray  # (n_theta,), in [0, pi]
    phi: np.ndarray  # (n_phi,), in [0, 2pi)
    weights: np.ndarray  # (n_theta, n_phi) quadrature weights incl. sin(theta)


def spherical_mesh(n_theta: int = 64, n_phi: int = 128, quadrature: str = "uniform") -> SphericalMesh:
    """Mesh over the sphere.  'uniform' spaces theta evenly (plotting);
    'gauss' uses Gauss-Legendre nodes in cos(theta), exact for states with
    up to ~n_theta excitations (integration tests)."""
    if n_theta < 1 or n_phi < 1:
        raise ParameterError("mesh must be nonempty")
    dphi = 2.0 * np.pi / n_phi
    phi = np.arange(n_phi) * dphi
    if quadrature == "uniform":
        theta = np.linspace(0.0, np.pi, n_theta)
        w_theta = np.gradient(theta) * np.sin(theta)
    elif quadrature == "gauss":
        x, wx = np.polynomial.legendre.leggauss(n_theta)
        theta = np.arccos(x[::-1])
        w_theta = wx[::-1]
    else:
        raise ParameterError(f"unknown quadrature {quadrature!r}")
    return SphericalMesh(theta=theta, phi=phi, weights=np.outer(w_theta, np.full(n_phi, dphi)))


def _weight_sums(state: StateVector) -> np.ndarray:
    """W_k = sum of amplitudes over hamming-weight-k basis states."""
    n = state.n_qubits
    if state.space == "symmetric":
        k = np.arange(n + 1)
        log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        return state.amplitudes * np.exp(0.5 * log_binom)
    ops = collective_ops("full", n)
    re = np.bincount(ops.weights, weights=state.amplitudes.real, minlength=n + 1)
    im = np.bincount(ops.weights, weights=state.amplitudes.imag, minlength=n + 1)
    return re + 1j * im


def q_function(state: StateVector, mesh: SphericalMesh | None = None, normalize: bool = True) -> np.ndarray:
    """Q(theta, phi) = |<theta,phi|psi>|^2 on the mesh.

    The product coherent state |theta,phi> has per-qubit amplitudes
    cos(theta/2)|0> + sin(theta/2) e^{i phi}|1>.  With normalize=True the
    mesh maximum is scaled to 1; normalize=False returns the raw overlap.
    """
    if mesh is None:
        mesh = spherical_mesh()
    if mesh.theta.size == 0 or mesh.phi.size == 0:
        raise ParameterError("empty mesh")
    n = state.n_qubits
    W = _weight_sums(state)
    k = np.arange(n + 1)
    half = mesh.theta[:, None] / 2.0
    amp_theta = np.cos(half) ** (n - k[None, :]) * np.sin(half) ** k[None, :]
    phase = np.exp(-1j * np.outer(k, mesh.phi))
    overlap = (amp_theta * W[None, :]) @ phase
    Q = np.abs(overlap) ** 2
    if normalize:
        peak = Q.max()
        if peak > 0:
            Q = Q / peak
    return Q


def q_integral(Q: np.ndarray, mesh: SphericalMesh) -> float:
    """Integral of Q over the sphere with the mesh's sin(theta) measure."""
    return float(np.sum(Q * mesh.weights))


# ---------------------------------------------------------------------------
# mean-spin frame and squeezing

def mean_spin_direction(state: StateVector) -> tuple[float, float]:
    """Polar angles (theta, phi) of the mean collective spin; phi in [0, 2pi)."""
    svec, _ = spin_moments(state)
    return _direction_from_svec(svec)


def _direction_from_svec(svec: np.ndarray) -> tuple[float, float]:
    r = float(np.linalg.norm(svec))
    if r < DEGENERATE_SPIN_LENGTH:
        raise DegenerateDirectionError("mean spin length below threshold")
    theta = float(np.arccos(np.clip(svec[2] / r, -1.0, 1.0)))
    if np.hypot(svec[0], svec[1]) < DEGENERATE_SPIN_LENGTH * r:
        return theta, 0.0  # tie-break: transverse component vanishes
    phi = float(np.arctan2(svec[1], svec[0]) % (2.0 * np.pi))
    return theta, phi


def frame_axes(theta: float, phi: float):
    """Orthonormal triad (n0, n1, n2) with n0 the mean-spin direction."""
    n0 = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    n1 = np.array([-np.sin(phi), np.cos(phi), 0.0])
    n2 = np.array([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)])
    return n0, n1, n2


@dataclass
class SqueezingFrame:
    theta: float
    phi: float
    n0: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    xi2_closed: float
    xi2_scan: float
    vartheta_opt: float


def squeezing_from_moments(svec: np.ndarray, M: np.ndarray, n: int) -> SqueezingFrame:
    """Squeezing frame from collective first/second moments."""
    theta, phi = _direction_from_svec(svec)
    n0, n1, n2 = frame_axes(theta, phi)
    a = float(n1 @ M @ n1) - float(svec @ n1) ** 2
    b = float(n2 @ M @ n2) - float(svec @ n2) ** 2
    c = float(n1 @ M @ n2) - float(svec @ n1) * float(svec @ n2)
    # variance along n1 cos(v) + n2 sin(v) is a 2x2 quadratic form; its
    # smallest eigenvalue is the scan minimum
    root = math.hypot(a - b, 2.0 * c)
    xi2_scan = (4.0 / n) * 0.5 * ((a + b) - root)
    vartheta_opt = 0.5 * math.atan2(-2.0 * c, b - a) % (2.0 * np.pi)
    # closed form in terms of raw second moments along n1/n2 (their first
    # moments vanish by construction of the frame); the square root enters
    # with a MINUS sign -- the printed "+" variant maximises the variance
    s11 = float(n1 @ M @ n1)
    s22 = float(n2 @ M @ n2)
    anti = 2.0 * float(n1 @ M @ n2)
    xi2_closed = (2.0 / n) * ((s11 + s22) - math.hypot(s11 - s22, anti))
    return SqueezingFrame(
        theta=theta, phi=phi, n0=n0, n1=n1, n2=n2,
        xi2_closed=xi2_closed, xi2_scan=xi2_scan, vartheta_opt=vartheta_opt,
    )


def squeezing_parameter(state: StateVector) -> SqueezingFrame:
    """Spin-squeezing parameter xi^2 of a state, with its frame."""
    svec, M = spin_moments(state)
    return squeezing_from_moments(svec, M, state.n_qubits)


def xi2_series(states) -> np.ndarray:
    """xi^2 along a trajectory; NaN where the frame is degenerate."""
    out = []
    for sv in states:
        try:
            out.append(squeezing_parameter(sv).xi2_closed)
        except DegenerateDirectionError:
            out.append(np.nan)
    return np.array(out)


# ---------------------------------------------------------------------------
# sweeps and scaling fits

@dataclass
class SqueezingSweep:
    hx: np.ndarray  # rad/ns
    xi2_min: np.ndarray
    t_opt: np.ndarray
    breakpoint_hx: float | None = None
    fit_left: tuple[float, float] | None = None  # slope, intercept
    fit_right: tuple[float, float] | None = None


def squeezing_sweep(records: list[TrajectoryRecord]) -> SqueezingSweep:
    """Per-field minimum of xi^2 over time, with the two-segment linear fit
    whose breakpoint is the argmin field."""
    recs = sorted(records, key=lambda r: r.hx)
    hx = np.array([r.hx for r in recs])
    xi2_min = np.empty(len(recs))
    t_opt = np.empty(len(recs))
    for i, r in enumerate(recs):
        if r.xi2 is None:
            raise ParameterError("trajectory carries no xi2 series")
        k = int(np.nanargmin(r.xi2))
        xi2_min[i] = r.xi2[k]
        t_opt[i] = r.t[k]
    sweep = SqueezingSweep(hx=hx, xi2_min=xi2_min, t_opt=t_opt)
    if len(recs) >= 3:
        kb = int(np.argmin(xi2_min))
        sweep.breakpoint_hx = float(hx[kb])
        if kb >= 1:
            sweep.fit_left = tuple(np.polyfit(hx[: kb + 1], xi2_min[: kb + 1], 1))
        if kb <= len(recs) - 2:
            sweep.fit_right = tuple(np.polyfit(hx[kb:], xi2_min[kb:], 1))
    return sweep


def xi2_function_lmg(n: int, g: float, j: float = 1.0, sign: int = -1):
    """Continuous-time xi^2(t) for the collective model, from one
    eigendecomposition; +inf where the frame is degenerate."""
    H = _model.build_lmg_hamiltonian(_model.LmgModel(n=n, j_coupling=j, mu=g), sign=sign)
    evals, evecs = np.linalg.eigh(H)
    c0 = evecs.conj().T[:, 0]

    def f(t: float) -> float:
        psi = evecs @ (np.exp(-1j * evals * t) * c0)
        try:
            return squeezing_parameter(StateVector(psi, "symmetric", t)).xi2_closed
        except DegenerateDirectionError:
            return np.inf

    return f


def xi2_min_lmg(n: int, g: float, j: float = 1.0, sign: int = -1,
                t_max: float | None = None, n_grid: int = 1500) -> tuple[float, float]:
    """Global (xi^2_min, t_opt) of the collective model, grid scan plus
    golden-section refinement on the continuous evaluator."""
    f = xi2_function_lmg(n, g, j=j, sign=sign)
    if t_max is None:
        t_max = 150.0 / abs(j)
    ts = np.linspace(1e-6, t_max, n_grid)
    ys = np.array([f(t) for t in ts])
    k = int(np.argmin(ys))
    t_ref, y_ref = _golden_min(f, ts[max(k - 1, 0)], ts[min(k + 1, n_grid - 1)],
                               xatol=1e-5 * t_max)
    if y_ref <= ys[k]:
        return float(y_ref), float(t_ref)
    return float(ys[k]), float(ts[k])


@dataclass
class Xi2ScalingFit:
    alpha: float
    r_squared: float
    sizes: np.ndarray
    xi2_min: np.ndarray
    field_fracs: np.ndarray  # chosen g / g_c per size


def xi2_scaling_fit(sizes, frac_grid=(1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0),
                    j: float = 1.0, sign: int = -1) -> Xi2ScalingFit:
    """Power-law fit xi^2_min(N) ~ N^(-alpha) with the quench strength
    optimised per size over multiples of the critical field g_c = j/2."""
    sizes = np.asarray(sorted(sizes), dtype=int)
    if sizes.size < 3:
        raise ParameterError("need at least 3 system sizes")
    g_c = abs(j) / 2.0
    best_x = np.empty(sizes.size)
    best_f = np.empty(sizes.size)
    for i, n in enumerate(sizes):
        vals = {frac: xi2_min_lmg(int(n), frac * g_c, j=j, sign=sign)[0]
                for frac in frac_grid}
        frac = min(vals, key=vals.get)
        best_x[i], best_f[i] = vals[frac], frac
    y = np.log(best_x)
    slope, intercept = np.polyfit(np.log(sizes), y, 1)
    pred = slope * np.log(sizes) + intercept
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot if ss_tot > 0 else 0.0
    return Xi2ScalingFit(alpha=float(-slope), r_squared=r2, sizes=sizes,
                         xi2_min=best_x, field_fracs=best_f)


@dataclass
class PerimeterLawFit:
    alpha: float  # decay rate of L_min^(1) ~ exp(-alpha N)
    intercept: float
    r_squared: float
    ok: bool
    note: str = ""
    sizes: np.ndarray | None = None
    l_min: np.ndarray | None = None


def first_loschmidt_minimum_lmg(n: int, g: float, j: float = 1.0, sign: int = -1,
                                t_max: float | None = None) -> LoschmidtDiagnostics:
    """First Loschmidt minimum of the (n+1)-dim collective model, refined on
    the exact continuous echo."""
    H = _model.build_lmg_hamiltonian(_model.LmgModel(n=n, j_coupling=j, mu=g), sign=sign)
    L = loschmidt_function(H)
    if t_max is None:
        t_max = 30.0 / abs(j)
    t = np.linspace(0.0, t_max, 3000)
    Ls = np.array([L(ti) for ti in t])
    return loschmidt_diagnostics(t, Ls, refine=L, xatol=1e-4 * t_max)


# Echo values below this are dominated by cancellation noise of the double-
# precision eigendecomposition (amplitude error ~1e-14 squares to ~1e-28)
# and cannot enter a meaningful exponential fit.
ECHO_PRECISION_FLOOR = 1e-24


def perimeter_law_fit(sizes, g: float, j: float = 1.0, sign: int = -1) -> PerimeterLawFit:
    """Least-squares slope of -log L_min^(1) versus system size.

    Sizes whose first minimum falls below the double-precision resolution
    floor are dropped from the fit (and noted); at least 4 resolvable sizes
    must remain."""
    sizes = np.asarray(sorted(sizes), dtype=int)
    if sizes.size < 4:
        raise ParameterError("need at least 4 system sizes")
    lmins = []
    for n in sizes:
        d = first_loschmidt_minimum_lmg(int(n), g, j=j, sign=sign)
        if d.no_dip:
            return PerimeterLawFit(
                alpha=0.0, intercept=0.0, r_squared=0.0, ok=False, note="no-dip",
                sizes=sizes, l_min=None,
            )
        lmins.append(d.l_min_first)
    lmins = np.array(lmins)
    resolvable = lmins >= ECHO_PRECISION_FLOOR
    note = ""
    if not np.all(resolvable):
        dropped = sizes[~resolvable]
        note = f"sizes below precision floor dropped: {dropped.tolist()}"
        sizes, lmins = sizes[resolvable], lmins[resolvable]
        if sizes.size < 4:
            return PerimeterLawFit(
                alpha=0.0, intercept=0.0, r_squared=0.0, ok=False,
                note=note + "; fewer than 4 resolvable sizes",
                sizes=sizes, l_min=lmins,
            )
    y = -np.log(lmins)
    slope, intercept = np.polyfit(sizes, y, 1)
    resid = y - (slope * sizes + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    monotone = bool(np.all(np.diff(y) > 0))
    if not monotone:
        note = (note + "; " if note else "") + "non-monotone"
    return PerimeterLawFit(
        alpha=float(slope), intercept=float(intercept), r_squared=r2,
        ok=monotone and r2 > 0.98, note=note,
        sizes=sizes, l_min=lmins,
    )
