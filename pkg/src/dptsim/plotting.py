"""Figure rendering for the CLI report paths.

Every function writes a PNG next to the delimited data it visualises and
returns the path.  The Agg backend is forced so the CLI works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import model

_DPI = 150


def _finish(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_trajectory(record, path) -> Path:
    """Stacked time-series panels for whichever observables the record has."""
    panels = [
        ("loschmidt", "L(t)", "log"),
        ("sigma_z", r"$\langle\sigma^z\rangle$", "linear"),
        ("czz", r"$C^{zz}$", "linear"),
        ("xi2", r"$\xi^2$", "log"),
    ]
    panels = [p for p in panels if getattr(record, p[0]) is not None]
    if not panels:
        raise ValueError("record has no plottable series")
    fig, axes = plt.subplots(len(panels), 1, sharex=True,
                             figsize=(6.0, 1.8 * len(panels)))
    axes = np.atleast_1d(axes)
    for ax, (name, label, scale) in zip(axes, panels):
        y = getattr(record, name)
        ax.plot(record.t, y, lw=1.0)
        ax.set_ylabel(label)
        if scale == "log" and np.nanmin(y[np.isfinite(y)]) > 0:
            ax.set_yscale("log")
        if name == "xi2":
            ax.axhline(1.0, color="gray", lw=0.6, ls="--")
    axes[-1].set_xlabel("t (ns)")
    hx_mhz = float(model.radns_to_mhz(record.hx))
    axes[0].set_title(f"$h^x/2\\pi$ = {hx_mhz:g} MHz")
    return _finish(fig, path)


def plot_sweep(sweep, outdir) -> list[Path]:
    """One figure per sweep table, split by detuning value."""
    outdir = Path(outdir)
    paths = []
    series = [
        ("order_parameter", sweep.order_parameter,
         r"$\overline{\langle\sigma^z\rangle}$", "linear"),
        ("czz", sweep.czz_bar, r"$\overline{C^{zz}}$", "linear"),
        ("loschmidt_min", sweep.l_min_first, r"$L_{\min}^{(1)}$", "log"),
        ("squeezing_min", sweep.xi2_min, r"$\xi^2_{\min}$", "linear"),
    ]
    for stem, y, label, scale in series:
        if np.all(np.isnan(y)):
            continue
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for d in np.unique(sweep.delta_mhz):
            m = sweep.delta_mhz == d
            ax.plot(sweep.hx_mhz[m], y[m], "o-", ms=4,
                    label=f"$\\Delta/2\\pi$ = {d:g} MHz")
        ax.set_xlabel(r"$h^x/2\pi$ (MHz)")
        ax.set_ylabel(label)
        if scale == "log" and np.nanmin(y[y > 0] if np.any(y > 0) else [1]) > 0:
            ax.set_yscale("log")
        if stem == "squeezing_min":
            ax.axhline(1.0, color="gray", lw=0.6, ls="--")
        if np.unique(sweep.delta_mhz).size > 1:
            ax.legend(fontsize=8)
        paths.append(_finish(fig, outdir / f"{stem}.png"))
    return paths


def plot_qfunction(theta, phi, Q, path, title: str = "") -> Path:
    """Heat map of Q(theta, phi)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    im = ax.pcolormesh(phi, theta, Q, shading="auto", cmap="viridis")
    ax.set_xlabel(r"$\phi$ (rad)")
    ax.set_ylabel(r"$\theta$ (rad)")
    ax.invert_yaxis()
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="Q")
    return _finish(fig, path)


def plot_scaling(rows, fits, path) -> Path:
    """-log L_min^(1) versus system size with the fitted lines."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    rows = list(rows)
    for g_key, fit in fits.items():
        pts = [(r[1], r[2]) for r in rows if f"{r[0]:g}" == g_key and r[4] == "0"]
        if not pts:
            continue
        ns = np.array([p[0] for p in pts], dtype=float)
        y = -np.log([p[1] for p in pts])
        ax.plot(ns, y, "o", ms=4, label=f"g/J = {g_key}")
        if fit["ok"]:
            xs = np.linspace(ns.min(), ns.max(), 50)
            ax.plot(xs, fit["alpha"] * xs + fit["intercept"], "-", lw=0.8,
                    color=ax.lines[-1].get_color())
    ax.set_xlabel("N")
    ax.set_ylabel(r"$-\log L_{\min}^{(1)}$")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_sampling(rows, path) -> Path:
    """Estimated xi^2 with error bars against the exact values."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for hx in sorted({r["hx_mhz"] for r in rows}):
        sub = [r for r in rows if r["hx_mhz"] == hx]
        t = [r["t_ns"] for r in sub]
        ax.errorbar(t, [r["xi2_est_mean"] for r in sub],
                    yerr=[r["xi2_est_se"] for r in sub], fmt="o", ms=4,
                    capsize=2, label=f"$h^x/2\\pi$ = {hx:g} MHz (sampled)")
        ax.plot(t, [r["xi2_exact"] for r in sub], "-", lw=0.8,
                color=ax.lines[-1].get_color())
    ax.axhline(1.0, color="gray", lw=0.6, ls="--")
    ax.set_xlabel("t (ns)")
    ax.set_ylabel(r"$\xi^2$")
    ax.legend(fontsize=8)
    return _finish(fig, path)
