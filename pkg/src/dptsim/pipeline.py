"""Reproduction driver: scenario configuration, trajectory runs, parameter
sweeps, scaling studies, and the sampling experiment, with persistent CSV/JSON
output and a result manifest per run."""

from __future__ import annotations

import hashlib
import json
import os
import time as _time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import engine, measure, model, observables
from .errors import ConfigError

VERSION = "0.1.0"

ALL_OBSERVABLES = ("bloch", "czz", "xi2", "per_qubit_z")


@dataclass
class ScenarioSpec:
    """Everything needed to reproduce one CLI run."""

    device: str | None = None  # path; None = packaged 16-qubit device
    engine: str = "full"  # "full" | "dicke"
    hx_mhz: list[float] = field(default_factory=lambda: [6.0])
    delta_mhz: list[float] | None = None  # None = device value
    t_max: float = 600.0
    t_step: float = 4.0
    tolerance: float = 1e-10
    observables: tuple[str, ...] = ALL_OBSERVABLES
    uniform_lambda: bool = False
    shots: int = measure.DEFAULT_SHOTS_PER_SETTING
    seed: int = 0
    outdir: str = "out"

    def __post_init__(self):
        if not self.hx_mhz:
            raise ConfigError("need at least one transverse-field point")
        if self.t_step <= 0:
            raise ConfigError("time step must be positive")
        if self.engine not in ("full", "dicke"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.engine == "dicke" and not self.uniform_lambda:
            raise ConfigError("the dicke engine requires the uniform-lambda flag")
        unknown = set(self.observables) - set(ALL_OBSERVABLES)
        if unknown:
            raise ConfigError(f"unknown observables {sorted(unknown)}")

    def load_device(self) -> model.DeviceSpec:
        if self.device is None:
            return model.default_device()
        return model.DeviceSpec.from_file(self.device)

    def plan(self) -> engine.EvolutionPlan:
        grid = np.arange(0.0, self.t_max + self.t_step / 2, self.t_step)
        return engine.EvolutionPlan(t_grid=grid, tolerance=self.tolerance)

    def canonical(self) -> dict:
        d = asdict(self)
        d["observables"] = list(self.observables)
        return d

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.canonical(), sort_keys=True).encode()
        ).hexdigest()[:16]


# ---------------------------------------------------------------------------
# single quench

@dataclass
class QuenchResult:
    record: observables.TrajectoryRecord
    diagnostics: observables.LoschmidtDiagnostics
    states: list | None = None  # retained only on request
    xi2_min: float = float("nan")  # sub-grid refined, when xi2 is recorded
    t_xi2_min: float = float("nan")


def _hamiltonian_for(spec: ScenarioSpec, device, hx: float, delta: float):
    lam = np.outer(device.g, device.g) / delta + device.lambda_c
    np.fill_diagonal(lam, 0.0)
    hmodel = model.HamiltonianModel(lam=lam, hx=hx)
    if spec.engine == "dicke":
        lmg = model.lmg_from_model(hmodel)
        return model.build_lmg_hamiltonian(lmg), "symmetric", hmodel
    return model.build_full_hamiltonian(hmodel), "full", hmodel


def run_single_quench(spec: ScenarioSpec, device, hx: float, delta: float,
                      keep_states: bool = False) -> QuenchResult:
    """Evolve one (hx, delta) point and collect the toggled observables.

    The Loschmidt echo is always recorded; its grid minima are refined on a
    continuous-time echo (exact for the dicke engine, short re-propagation
    for the full engine)."""
    H, space, hmodel = _hamiltonian_for(spec, device, hx, delta)
    n = hmodel.n_qubits
    plan = spec.plan()
    psi0 = engine.initial_state(space, n)

    want_moments = "bloch" in spec.observables or "xi2" in spec.observables
    cols: dict[str, list] = {k: [] for k in
                             ("sx", "sy", "sz", "bl", "czz", "L", "xi2")}
    pqz = [] if "per_qubit_z" in spec.observables else None
    states = []
    for _, sv in engine.propagate(psi0, H, plan):
        states.append(sv)
        cols["L"].append(abs(sv.amplitudes[0]) ** 2)
        if want_moments:
            svec, M = observables.spin_moments(sv)
            bloch = 2.0 * svec / n
            cols["sx"].append(bloch[0])
            cols["sy"].append(bloch[1])
            cols["sz"].append(bloch[2])
            cols["bl"].append(float(np.linalg.norm(bloch)))
            if "xi2" in spec.observables:
                try:
                    cols["xi2"].append(
                        observables.squeezing_from_moments(svec, M, n).xi2_closed
                    )
                except observables.DegenerateDirectionError:
                    cols["xi2"].append(np.nan)
        if "czz" in spec.observables:
            cols["czz"].append(observables.czz(sv))
        if pqz is not None:
            pqz.append(observables.per_qubit_z(sv))

    record = observables.TrajectoryRecord(
        hx=hx, delta=delta, t=plan.t_grid.copy(), n_qubits=n, space=space,
        loschmidt=np.array(cols["L"]),
        meta={"engine": spec.engine, "tolerance": spec.tolerance},
    )
    if want_moments:
        record.sigma_x = np.array(cols["sx"])
        record.sigma_y = np.array(cols["sy"])
        record.sigma_z = np.array(cols["sz"])
        record.bloch_len = np.array(cols["bl"])
    if "xi2" in spec.observables:
        record.xi2 = np.array(cols["xi2"])
    if "czz" in spec.observables:
        record.czz = np.array(cols["czz"])
    if pqz is not None:
        record.per_qubit_z = np.array(pqz).T

    refine = _loschmidt_refiner(H, space, plan, states, spec.tolerance)
    diags = observables.loschmidt_diagnostics(plan.t_grid, record.loschmidt, refine=refine)
    x2, tx2 = _refine_xi2_min(H, space, plan, states, spec.tolerance, record)
    return QuenchResult(record=record, diagnostics=diags,
                        states=states if keep_states else None,
                        xi2_min=x2, t_xi2_min=tx2)


def _loschmidt_refiner(H, space: str, plan, states, tol):
    if space == "symmetric":
        return engine.loschmidt_function(H)
    grid = plan.t_grid

    def refine(t: float) -> float:
        k = int(np.searchsorted(grid, t + 1e-12) - 1)
        k = max(0, min(k, len(states) - 1))
        sv = engine.expm_apply(H, states[k], t - grid[k], tol=tol)
        return float(abs(sv.amplitudes[0]) ** 2)

    return refine


def _refine_xi2_min(H, space: str, plan, states, tol, record):
    """Sub-grid minimum of the squeezing parameter: golden-section search on a
    continuous-time evaluator around the grid optimum (re-propagated from the
    nearest cached state)."""
    if record.xi2 is None or not np.any(np.isfinite(record.xi2)):
        return float("nan"), float("nan")
    grid = plan.t_grid
    k = int(np.nanargmin(record.xi2))
    x2_grid, t_grid_opt = float(record.xi2[k]), float(grid[k])

    def xi2_at(t: float) -> float:
        m = int(np.searchsorted(grid, t + 1e-12) - 1)
        m = max(0, min(m, len(states) - 1))
        sv = engine.expm_apply(H, states[m], t - grid[m], tol=tol)
        try:
            svec, M = observables.spin_moments(sv)
            return observables.squeezing_from_moments(svec, M, record.n_qubits).xi2_closed
        except observables.DegenerateDirectionError:
            return float("inf")

    a = float(grid[max(k - 1, 0)])
    b = float(grid[min(k + 1, len(grid) - 1)])
    if b <= a:
        return x2_grid, t_grid_opt
    t_ref, x2_ref = observables._golden_min(xi2_at, a, b, xatol=0.1)
    if np.isfinite(x2_ref) and x2_ref <= x2_grid:
        return float(x2_ref), float(t_ref)
    return x2_grid, t_grid_opt


# ---------------------------------------------------------------------------
# output helpers

def _atomic_write(path: Path, text: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_csv(path, header, rows):
    path = Path(path)
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(
            x if isinstance(x, str) else f"{x:.12g}" for x in row
        ))
    _atomic_write(path, "\n".join(out) + "\n")


@dataclass
class ResultManifest:
    scenario_hash: str
    scenario: dict
    files: list[str]
    version: str = VERSION
    wall_clock_s: float = 0.0

    def save(self, path):
        _atomic_write(Path(path), json.dumps(asdict(self), indent=2) + "\n")


class _ManifestWriter:
    def __init__(self, spec: ScenarioSpec, outdir: Path):
        self.spec = spec
        self.outdir = outdir
        self.files: list[str] = []
        self.t0 = _time.time()
        outdir.mkdir(parents=True, exist_ok=True)

    def add(self, path) -> Path:
        self.files.append(str(Path(path).name))
        return Path(path)

    def finish(self) -> Path:
        manifest = ResultManifest(
            scenario_hash=self.spec.digest(),
            scenario=self.spec.canonical(),
            files=sorted(set(self.files)),
            wall_clock_s=round(_time.time() - self.t0, 3),
        )
        path = self.outdir / "manifest.json"
        manifest.save(path)
        return path


# ---------------------------------------------------------------------------
# CLI-facing runs

def run_quench(spec: ScenarioSpec) -> Path:
    """One TrajectoryRecord (CSV + JSON sidecar) per (hx, delta) point."""
    device = spec.load_device()
    deltas = spec.delta_mhz if spec.delta_mhz else [float(model.radns_to_mhz(device.delta))]
    out = Path(spec.outdir)
    mw = _ManifestWriter(spec, out)
    for d_mhz in deltas:
        for hx_mhz in spec.hx_mhz:
            res = run_single_quench(
                spec, device, float(model.mhz_to_radns(hx_mhz)),
                float(model.mhz_to_radns(d_mhz)),
            )
            stem = f"quench_hx{hx_mhz:g}mhz_delta{d_mhz:g}mhz"
            res.record.save(mw.add(out / f"{stem}.csv"))
            mw.files.append(f"{stem}.json")
    return mw.finish()


@dataclass
class SweepResult:
    """In-memory sweep tables (one row per (delta, hx) point)."""

    delta_mhz: np.ndarray
    hx_mhz: np.ndarray
    hx_over_hxc: np.ndarray
    hxc_mhz: np.ndarray
    order_parameter: np.ndarray
    czz_bar: np.ndarray
    czz_bar_offdiag: np.ndarray
    l_min_first: np.ndarray
    t_min_first: np.ndarray
    l_min_global: np.ndarray
    t_min_global: np.ndarray
    no_dip: np.ndarray
    xi2_min: np.ndarray
    t_opt: np.ndarray
    records: list = field(default_factory=list)


def compute_sweep(spec: ScenarioSpec, progress=None) -> SweepResult:
    device = spec.load_device()
    deltas = spec.delta_mhz if spec.delta_mhz else [float(model.radns_to_mhz(device.delta))]
    rows = {k: [] for k in ("delta", "hx", "hxc", "op", "czz", "czzo",
                            "l1", "t1", "lg", "tg", "nd", "x2", "to")}
    records = []
    for d_mhz in deltas:
        delta = float(model.mhz_to_radns(d_mhz))
        lam = np.outer(device.g, device.g) / delta + device.lambda_c
        np.fill_diagonal(lam, 0.0)
        hxc_mhz = float(model.radns_to_mhz(
            model.predict_critical_field(model.HamiltonianModel(lam=lam, hx=0.0)).hx_c
        ))
        for hx_mhz in spec.hx_mhz:
            res = run_single_quench(
                spec, device, float(model.mhz_to_radns(hx_mhz)), delta
            )
            rec, d = res.record, res.diagnostics
            rows["delta"].append(d_mhz)
            rows["hx"].append(hx_mhz)
            rows["hxc"].append(hxc_mhz)
            if rec.sigma_z is not None:
                rows["op"].append(observables.order_parameter(rec, min(spec.t_max, rec.t[-1])))
            else:
                rows["op"].append(np.nan)
            if rec.czz is not None:
                rows["czz"].append(observables.averaged_czz(rec, min(spec.t_max, rec.t[-1])))
                rows["czzo"].append(rows["czz"][-1] - 1.0 / rec.n_qubits)
            else:
                rows["czz"].append(np.nan)
                rows["czzo"].append(np.nan)
            rows["l1"].append(d.l_min_first)
            rows["t1"].append(d.t_min_first)
            rows["lg"].append(d.l_min_global)
            rows["tg"].append(d.t_min_global)
            rows["nd"].append(d.no_dip)
            rows["x2"].append(res.xi2_min)
            rows["to"].append(res.t_xi2_min)
            records.append(rec)
            if progress:
                progress(d_mhz, hx_mhz)
    hx = np.array(rows["hx"])
    hxc = np.array(rows["hxc"])
    return SweepResult(
        delta_mhz=np.array(rows["delta"]), hx_mhz=hx, hx_over_hxc=hx / hxc,
        hxc_mhz=hxc, order_parameter=np.array(rows["op"]),
        czz_bar=np.array(rows["czz"]), czz_bar_offdiag=np.array(rows["czzo"]),
        l_min_first=np.array(rows["l1"]), t_min_first=np.array(rows["t1"]),
        l_min_global=np.array(rows["lg"]), t_min_global=np.array(rows["tg"]),
        no_dip=np.array(rows["nd"], dtype=bool),
        xi2_min=np.array(rows["x2"]), t_opt=np.array(rows["to"]),
        records=records,
    )


def save_sweep(sweep: SweepResult, spec: ScenarioSpec,
               save_trajectories: bool = False) -> Path:
    out = Path(spec.outdir)
    mw = _ManifestWriter(spec, out)
    z = zip(sweep.delta_mhz, sweep.hx_mhz, sweep.hx_over_hxc, sweep.order_parameter)
    write_csv(mw.add(out / "order_parameter.csv"),
              ["delta_mhz", "hx_mhz", "hx_over_hxc", "order_parameter"], z)
    write_csv(mw.add(out / "czz.csv"),
              ["delta_mhz", "hx_mhz", "czz_bar", "czz_bar_offdiag"],
              zip(sweep.delta_mhz, sweep.hx_mhz, sweep.czz_bar, sweep.czz_bar_offdiag))
    write_csv(mw.add(out / "loschmidt_min.csv"),
              ["delta_mhz", "hx_mhz", "l_min_first", "t_min_first_ns",
               "l_min_global", "t_min_global_ns", "no_dip"],
              zip(sweep.delta_mhz, sweep.hx_mhz, sweep.l_min_first, sweep.t_min_first,
                  sweep.l_min_global, sweep.t_min_global,
                  ["1" if x else "0" for x in sweep.no_dip]))
    write_csv(mw.add(out / "squeezing_min.csv"),
              ["delta_mhz", "hx_mhz", "xi2_min", "t_opt_ns"],
              zip(sweep.delta_mhz, sweep.hx_mhz, sweep.xi2_min, sweep.t_opt))
    if save_trajectories:
        for rec in sweep.records:
            hx_mhz = float(model.radns_to_mhz(rec.hx))
            d_mhz = float(model.radns_to_mhz(rec.delta))
            stem = f"quench_hx{hx_mhz:g}mhz_delta{d_mhz:g}mhz"
            rec.save(mw.add(out / f"{stem}.csv"))
            mw.files.append(f"{stem}.json")
    mw.finish()
    return out


def run_sweep(spec: ScenarioSpec, save_trajectories: bool = False, progress=None) -> SweepResult:
    sweep = compute_sweep(spec, progress=progress)
    save_sweep(sweep, spec, save_trajectories=save_trajectories)
    return sweep


# ---------------------------------------------------------------------------
# scaling (perimeter law)

def run_scaling(spec: ScenarioSpec, sizes, g_over_j, j: float = 1.0) -> dict:
    """L_min^(1) versus system size for each quench strength, plus the
    perimeter-law fits.  Uses the collective-spin (dicke) engine."""
    sizes = list(sizes)
    if len(sizes) != len(set(sizes)):
        raise ConfigError("duplicate system sizes")
    if len(sizes) < 4:
        raise ConfigError("need at least 4 system sizes")
    out = Path(spec.outdir)
    mw = _ManifestWriter(spec, out)
    rows = []
    fits = {}
    for g_rel in g_over_j:
        g = g_rel * j
        for n in sorted(sizes):
            d = observables.first_loschmidt_minimum_lmg(int(n), g, j=j)
            rows.append((g_rel, n, d.l_min_first, d.t_min_first,
                         "1" if d.no_dip else "0"))
        fit = observables.perimeter_law_fit(sizes, g, j=j)
        fits[f"{g_rel:g}"] = {
            "alpha": fit.alpha, "intercept": fit.intercept,
            "r_squared": fit.r_squared, "ok": fit.ok, "note": fit.note,
        }
    write_csv(mw.add(out / "perimeter_law.csv"),
              ["g_over_j", "n", "l_min_first", "t_min_first", "no_dip"], rows)
    _atomic_write(mw.add(out / "perimeter_law_fits.json"),
                  json.dumps(fits, indent=2) + "\n")
    mw.finish()
    return fits


# ---------------------------------------------------------------------------
# sampling experiment (estimated vs exact xi^2)

def run_sampling_experiment(spec: ScenarioSpec, times=None, n_repeats: int = 5,
                            with_error: bool = False, correct: bool = False,
                            exact: bool = False) -> list[dict]:
    """Estimated versus exact xi^2 at each (t, hx) point, with the standard
    error over seed repetitions of the full estimator chain."""
    device = spec.load_device()
    if device.n_qubits % 2:
        raise ConfigError("sampling experiment needs an even qubit count")
    if spec.engine != "full":
        raise ConfigError("sampling experiment needs the full engine")
    out = Path(spec.outdir)
    mw = _ManifestWriter(spec, out)
    delta = float(model.mhz_to_radns(
        (spec.delta_mhz or [float(model.radns_to_mhz(device.delta))])[0]
    ))
    rows = []
    for hx_mhz in spec.hx_mhz:
        hx = float(model.mhz_to_radns(hx_mhz))
        hmodel = model.HamiltonianModel(
            lam=_coupling(device, delta), hx=hx
        )
        H = model.build_full_hamiltonian(hmodel)
        t_list = times if times is not None else [8.0 * k for k in range(1, 6)]
        plan = engine.EvolutionPlan(t_grid=np.asarray(t_list, dtype=float),
                                    tolerance=spec.tolerance)
        psi0 = engine.initial_state("full", device.n_qubits)
        for t, sv in engine.propagate(psi0, H, plan):
            frame = observables.squeezing_parameter(sv)
            estimates = []
            for rep in range(n_repeats):
                pseed = spec.seed + 1000 * rep
                plan_parts = measure.random_partitions(device.n_qubits, seed=pseed)
                estimates.append(measure.estimate_xi2_from_shots(
                    sv, frame, plan_parts, shots_per_setting=spec.shots,
                    seed=pseed + 1, device=device if (with_error or correct) else None,
                    with_error=with_error, correct=correct, exact=exact,
                ))
            estimates = np.array(estimates)
            se = float(estimates.std(ddof=1) / np.sqrt(n_repeats)) if n_repeats > 1 else 0.0
            rows.append({
                "hx_mhz": hx_mhz, "t_ns": float(t),
                "xi2_exact": frame.xi2_closed,
                "xi2_est_mean": float(estimates.mean()),
                "xi2_est_se": se, "n_repeats": n_repeats,
            })
    write_csv(mw.add(out / "sampling_xi2.csv"),
              ["hx_mhz", "t_ns", "xi2_exact", "xi2_est_mean", "xi2_est_se", "n_repeats"],
              [(r["hx_mhz"], r["t_ns"], r["xi2_exact"], r["xi2_est_mean"],
                r["xi2_est_se"], r["n_repeats"]) for r in rows])
    mw.finish()
    return rows


def _coupling(device, delta):
    lam = np.outer(device.g, device.g) / delta + device.lambda_c
    np.fill_diagonal(lam, 0.0)
    return lam


# ---------------------------------------------------------------------------
# Q-function dumps

def run_qfunction(spec: ScenarioSpec, times, n_theta: int = 64, n_phi: int = 128) -> list[Path]:
    device = spec.load_device()
    delta = float(model.mhz_to_radns(
        (spec.delta_mhz or [float(model.radns_to_mhz(device.delta))])[0]
    ))
    out = Path(spec.outdir)
    mw = _ManifestWriter(spec, out)
    mesh = observables.spherical_mesh(n_theta, n_phi)
    paths = []
    for hx_mhz in spec.hx_mhz:
        hmodel = model.HamiltonianModel(lam=_coupling(device, delta),
                                        hx=float(model.mhz_to_radns(hx_mhz)))
        if spec.engine == "dicke":
            H = model.build_lmg_hamiltonian(model.lmg_from_model(hmodel))
            space = "symmetric"
        else:
            H = model.build_full_hamiltonian(hmodel)
            space = "full"
        plan = engine.EvolutionPlan(t_grid=np.asarray(times, dtype=float),
                                    tolerance=spec.tolerance)
        psi0 = engine.initial_state(space, device.n_qubits)
        for t, sv in engine.propagate(psi0, H, plan):
            Q = observables.q_function(sv, mesh)
            rows = []
            for it, th in enumerate(mesh.theta):
                for ip, ph in enumerate(mesh.phi):
                    rows.append((th, ph, Q[it, ip]))
            p = mw.add(out / f"qfunc_hx{hx_mhz:g}mhz_t{t:g}ns.csv")
            write_csv(p, ["theta_rad", "phi_rad", "q"], rows)
            paths.append(p)
    mw.finish()
    return paths
