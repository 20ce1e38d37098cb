"""Matplotlib rendering of sweep results and loss-ratio traces.

The CLI writes these figures next to each CSV it emits.  Everything renders
through the Agg backend so headless runs work.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .channel import SYMBOL_RATE_28GBAUD  # noqa: E402
from .sim import SweepResult  # noqa: E402

__all__ = ["plot_sweep", "plot_traces"]

_STYLE = {
    "ml": dict(color="k", marker="o", ls="--"),
    "ml-pilot": dict(color="k", marker="o", ls="--"),
    "mcma": dict(color="tab:blue", marker="s", ls="-"),
    "ddlms": dict(color="tab:cyan", marker="p", ls="-"),
    "dd-kabsch": dict(color="tab:orange", marker="^", ls="-"),
    "sw-kabsch": dict(color="tab:red", marker="v", ls="-"),
    "sw-ls": dict(color="tab:green", marker="d", ls="-"),
    "ls-sw-kabsch": dict(color="tab:purple", marker="x", ls="-"),
    "ls-ddlms": dict(color="tab:brown", marker="+", ls="-"),
}


def plot_sweep(result: SweepResult, path: str, x_axis: str = "drift") -> None:
    """SER curves with 95% confidence bars, one line per tracker.

    ``x_axis`` selects the sweep variable: 'drift' (log x) or 'snr'.
    Zero-error cells are drawn at the resolution floor 1/counted as open
    markers.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for tracker in result.spec.tracker_ids:
        rows = [r for r in result.rows if r.tracker == tracker]
        if x_axis == "drift":
            x = np.array([r.dp_tot_t for r in rows])
        else:
            x = np.array([r.snr_db for r in rows])
        ser = np.array([r.ser for r in rows])
        lo = np.array([r.ci95_low for r in rows])
        hi = np.array([r.ci95_high for r in rows])
        floor = np.array([1.0 / max(r.counted_symbols, 1) for r in rows])
        shown = np.where(ser > 0, ser, floor)
        yerr = np.vstack(
            [np.clip(shown - np.maximum(lo, floor / 10), 0, None), np.clip(hi - shown, 0, None)]
        )
        style = _STYLE.get(tracker, {})
        ax.errorbar(x, shown, yerr=yerr, label=tracker, capsize=2.5,
                    markerfacecolor="none", **style)
    ax.set_yscale("log")
    if x_axis == "drift":
        ax.set_xscale("log")
        ax.set_xlabel(r"$\Delta p_\mathrm{tot} \cdot T$")
    else:
        ax.set_xlabel("SNR per polarization [dB]")
    ax.set_ylabel("SER")
    sp = result.spec
    bits = []
    if len(sp.snr_db_grid) == 1:
        bits.append(f"SNR={sp.snr_db_grid[0]:g} dB")
    if len(sp.drift_grid) == 1:
        bits.append(rf"$\Delta p_\mathrm{{tot}} T$={sp.drift_grid[0]:g}")
    if len(sp.phi_db_grid) == 1:
        bits.append(rf"$\varphi$={sp.phi_db_grid[0]:g} dB/segment")
    bits.append(f"N={sp.n_segments}")
    ax.set_title(", ".join(bits), fontsize=10)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_traces(traces: list[tuple[str, np.ndarray, np.ndarray]], path: str) -> None:
    """Aggregated-loss traces (label, k, rho_db), one panel each.

    The time axis assumes the 28 Gbaud symbol rate.
    """
    n = len(traces)
    fig, axes = plt.subplots(1, n, figsize=(4.0 * n, 3.2), sharey=True, squeeze=False)
    for ax, (label, k, rho_db) in zip(axes[0], traces):
        t_us = np.asarray(k) / SYMBOL_RATE_28GBAUD * 1e6
        ax.plot(t_us, rho_db, lw=0.8)
        ax.set_xlabel(r"time [$\mu$s]")
        ax.set_title(label, fontsize=10)
        ax.grid(True, alpha=0.3)
    axes[0][0].set_ylabel(r"$\rho_k$ [dB]")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
