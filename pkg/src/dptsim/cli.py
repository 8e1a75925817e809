"""Command-line entry point.

Subcommands map one-to-one onto the report paths: quench trajectories,
parameter sweeps, Loschmidt and squeezing studies, Q-function dumps, the
sampling experiment, the size-scaling study, and the crosstalk calibration
check.  Every report path writes delimited data plus rendered figures
(``--no-plot`` suppresses the figures) and a run manifest.

Precedence of settings: built-in defaults < command-line flags < values from
``--config FILE`` (a JSON object of flag names, or a previous run's
``manifest.json``).  The device file defaults to ``$DPTSIM_DEVICE`` if set,
else the packaged 16-qubit device.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import calib, model, pipeline, plotting
from .errors import CapacityError, ConfigError, DptsimError, NumericalFailure
from .observables import TrajectoryRecord

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_NUMERICAL = 4


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}") from exc


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--device", default=None,
                   help="device file (default: $DPTSIM_DEVICE or the packaged device)")
    p.add_argument("--engine", choices=("full", "dicke"), default="full")
    p.add_argument("--uniform-lambda", action="store_true",
                   help="assert uniform couplings (required by --engine dicke)")
    p.add_argument("--hx", type=_float_list, default=[6.0],
                   help="transverse-field points, MHz (comma-separated)")
    p.add_argument("--delta", type=_float_list, default=None,
                   help="detuning points, MHz (default: device value)")
    p.add_argument("--t-max", type=float, default=600.0, help="window end, ns")
    p.add_argument("--t-step", type=float, default=4.0, help="sample spacing, ns")
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--observables", default=",".join(pipeline.ALL_OBSERVABLES),
                   help="comma list from bloch,czz,xi2,per_qubit_z; 'none' for echo only")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shots", type=int, default=3000)
    p.add_argument("--outdir", default="out")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.add_argument("--config", default=None,
                   help="JSON settings file; its values override flags")


def _apply_config(args: argparse.Namespace):
    if not args.config:
        return
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
    if "scenario" in raw:  # a previous run's manifest.json
        raw = _scenario_to_flags(raw["scenario"])
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ConfigError(f"unknown config key {key!r}")
        setattr(args, dest, value)


def _scenario_to_flags(sc: dict) -> dict:
    out = {
        "device": sc.get("device"),
        "engine": sc.get("engine", "full"),
        "uniform_lambda": sc.get("uniform_lambda", False),
        "hx": sc.get("hx_mhz", [6.0]),
        "delta": sc.get("delta_mhz"),
        "t_max": sc.get("t_max", 600.0),
        "t_step": sc.get("t_step", 4.0),
        "tolerance": sc.get("tolerance", 1e-10),
        "observables": ",".join(sc.get("observables", [])) or "none",
        "seed": sc.get("seed", 0),
        "shots": sc.get("shots", 3000),
        "outdir": sc.get("outdir", "out"),
    }
    return {k: v for k, v in out.items() if v is not None}


def _spec_from_args(args: argparse.Namespace, observables=None) -> pipeline.ScenarioSpec:
    device = args.device or os.environ.get("DPTSIM_DEVICE") or None
    if observables is None:
        text = args.observables
        if isinstance(text, (list, tuple)):
            observables = tuple(text)
        elif text.strip().lower() in ("", "none"):
            observables = ()
        else:
            observables = tuple(x.strip() for x in text.split(",") if x.strip())
    return pipeline.ScenarioSpec(
        device=device,
        engine=args.engine,
        uniform_lambda=args.uniform_lambda,
        hx_mhz=list(args.hx),
        delta_mhz=list(args.delta) if args.delta else None,
        t_max=args.t_max,
        t_step=args.t_step,
        tolerance=args.tolerance,
        observables=observables,
        shots=args.shots,
        seed=args.seed,
        outdir=args.outdir,
    )


def _plot_saved_trajectories(outdir: Path):
    for p in sorted(outdir.glob("quench_*.csv")):
        rec = TrajectoryRecord.load(p)
        try:
            plotting.plot_trajectory(rec, p.with_suffix(".png"))
        except ValueError:
            pass


# ---------------------------------------------------------------------------
# subcommand handlers

def _cmd_quench(args):
    spec = _spec_from_args(args)
    pipeline.run_quench(spec)
    if not args.no_plot:
        _plot_saved_trajectories(Path(spec.outdir))
    print(f"wrote trajectories to {spec.outdir}/")


def _cmd_sweep(args):
    spec = _spec_from_args(args)
    sweep = pipeline.run_sweep(spec, save_trajectories=args.save_trajectories,
                               progress=_progress)
    if not args.no_plot:
        plotting.plot_sweep(sweep, spec.outdir)
        if args.save_trajectories:
            _plot_saved_trajectories(Path(spec.outdir))
    print(f"wrote sweep tables for {len(sweep.hx_mhz)} points to {spec.outdir}/")


def _cmd_loschmidt(args):
    spec = _spec_from_args(args, observables=())
    sweep = pipeline.run_sweep(spec, save_trajectories=True, progress=_progress)
    if not args.no_plot:
        plotting.plot_sweep(sweep, spec.outdir)
        _plot_saved_trajectories(Path(spec.outdir))
    print(f"wrote Loschmidt study ({len(sweep.hx_mhz)} points) to {spec.outdir}/")


def _cmd_squeeze(args):
    spec = _spec_from_args(args, observables=("bloch", "xi2"))
    sweep = pipeline.run_sweep(spec, save_trajectories=True, progress=_progress)
    if not args.no_plot:
        plotting.plot_sweep(sweep, spec.outdir)
        _plot_saved_trajectories(Path(spec.outdir))
    print(f"wrote squeezing study ({len(sweep.hx_mhz)} points) to {spec.outdir}/")


def _cmd_qfunc(args):
    spec = _spec_from_args(args, observables=())
    paths = pipeline.run_qfunction(spec, times=args.times,
                                   n_theta=args.n_theta, n_phi=args.n_phi)
    if not args.no_plot:
        for p in paths:
            with open(p, newline="") as fh:
                rows = list(csv.reader(fh))[1:]
            theta = np.unique([float(r[0]) for r in rows])
            phi = np.unique([float(r[1]) for r in rows])
            Q = np.array([float(r[2]) for r in rows]).reshape(theta.size, phi.size)
            plotting.plot_qfunction(theta, phi, Q, p.with_suffix(".png"), title=p.stem)
    print(f"wrote {len(paths)} Q-function grids to {spec.outdir}/")


def _cmd_sample(args):
    spec = _spec_from_args(args, observables=())
    rows = pipeline.run_sampling_experiment(
        spec, times=args.times, n_repeats=args.repeats,
        with_error=args.with_readout_error, correct=args.correct_readout,
        exact=args.exact,
    )
    if not args.no_plot:
        plotting.plot_sampling(rows, Path(spec.outdir) / "sampling_xi2.png")
    print(f"wrote sampling comparison ({len(rows)} points) to {spec.outdir}/")


def _cmd_scaling(args):
    spec = _spec_from_args(args, observables=())
    fits = pipeline.run_scaling(spec, sizes=args.sizes, g_over_j=args.g_over_j)
    outdir = Path(spec.outdir)
    if not args.no_plot:
        with open(outdir / "perimeter_law.csv", newline="") as fh:
            rows = [(float(r[0]), int(r[1]), float(r[2]), float(r[3]), r[4])
                    for r in list(csv.reader(fh))[1:]]
        plotting.plot_scaling(rows, fits, outdir / "perimeter_law.png")
    for g_key, fit in fits.items():
        status = "ok" if fit["ok"] else f"rejected ({fit['note'] or 'poor fit'})"
        print(f"g/J = {g_key}: alpha = {fit['alpha']:.4f}, "
              f"R^2 = {fit['r_squared']:.4f} [{status}]")


def _cmd_calib_check(args):
    if args.crosstalk_file:
        m = calib.CrosstalkMatrix.from_file(args.crosstalk_file)
    else:
        m = calib.random_crosstalk(args.n, a_max=args.a_max, seed=args.seed)
    desired = np.full(m.n, 1.0 + 0.0j)
    naive = calib.uniformity_check(calib.effective_drive(m, desired),
                                   amplitude_tol=args.amplitude_tol,
                                   phase_tol=args.phase_tol)
    corrected_input = calib.correct_drive(m, desired)
    corrected = calib.uniformity_check(calib.effective_drive(m, corrected_input),
                                       amplitude_tol=args.amplitude_tol,
                                       phase_tol=args.phase_tol)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    report = {
        "n": m.n,
        "condition_number": m.condition_number(),
        "uncorrected": json.loads(naive.to_json()),
        "corrected": json.loads(corrected.to_json()),
        "corrected_drive_re": corrected_input.real.tolist(),
        "corrected_drive_im": corrected_input.imag.tolist(),
    }
    path = outdir / "calib_report.json"
    path.write_text(json.dumps(report, indent=2) + "\n")
    print(f"uncorrected drive uniform: {naive.passed}; "
          f"corrected drive uniform: {corrected.passed} (report: {path})")


def _progress(delta_mhz, hx_mhz):
    print(f"  done delta = {delta_mhz:g} MHz, hx = {hx_mhz:g} MHz", file=sys.stderr)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dptsim",
        description="Quench-dynamics simulator for an all-to-all coupled qubit array",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quench", help="evolve and record trajectories")
    _add_common(p)
    p.set_defaults(handler=_cmd_quench)

    p = sub.add_parser("sweep", help="field/detuning sweep with summary tables")
    _add_common(p)
    p.add_argument("--save-trajectories", action="store_true")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("loschmidt", help="Loschmidt-echo study (echo only)")
    _add_common(p)
    p.set_defaults(handler=_cmd_loschmidt)

    p = sub.add_parser("squeeze", help="spin-squeezing study")
    _add_common(p)
    p.set_defaults(handler=_cmd_squeeze)

    p = sub.add_parser("qfunc", help="Q-function snapshots")
    _add_common(p)
    p.add_argument("--times", type=_float_list, default=[0.0, 25.0, 50.0],
                   help="snapshot times, ns")
    p.add_argument("--n-theta", type=int, default=64)
    p.add_argument("--n-phi", type=int, default=128)
    p.set_defaults(handler=_cmd_qfunc)

    p = sub.add_parser("sample", help="sampled vs exact squeezing parameter")
    _add_common(p)
    p.add_argument("--times", type=_float_list, default=None,
                   help="evaluation times, ns (default: 8..40)")
    p.add_argument("--repeats", type=int, default=5, help="seed repetitions")
    p.add_argument("--with-readout-error", action="store_true")
    p.add_argument("--correct-readout", action="store_true")
    p.add_argument("--exact", action="store_true",
                   help="exact expectations instead of finite shots")
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("scaling", help="Loschmidt-minimum size scaling")
    _add_common(p)
    p.add_argument("--sizes", type=_int_list, default=[8, 10, 12, 14, 16, 18, 20])
    p.add_argument("--g-over-j", type=_float_list, default=[0.2, 0.35])
    p.set_defaults(handler=_cmd_scaling)

    p = sub.add_parser("calib-check", help="XY-crosstalk correction check")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--a-max", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--crosstalk-file", default=None)
    p.add_argument("--amplitude-tol", type=float, default=0.01)
    p.add_argument("--phase-tol", type=float, default=0.02)
    p.add_argument("--outdir", default="out")
    p.set_defaults(handler=_cmd_calib_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "config"):
            _apply_config(args)
        args.handler(args)
    except (ConfigError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DptsimError as exc:
        # remaining parameter errors are configuration mistakes at CLI level
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
