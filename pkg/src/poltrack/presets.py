"""Bundled experiment presets for the standard benchmark scenarios.

The ``fig*`` names are one-command recipes for the simulator's reference
experiments: loss-ratio evolution traces (fig2), drift-tolerance sweeps at
fixed SNR (fig4, fig5a-c), and SNR sweeps at fixed drift (fig4a-c, fig6a-c).
All run at desk scale by default (tens of trials); raise ``--trials`` /
``--symbols`` for smoother curves.
"""

from __future__ import annotations

import numpy as np

from .sim import ExperimentSpec

__all__ = ["PRESETS", "TRACE_DRIFTS", "get_preset", "drift_grid_11"]

# reference drift speeds (dp_tot * T): quasi-static, moderate, fast
TRACE_DRIFTS = (1e-8, 3.57e-6, 3.57e-5)

BLIND_SET = ("ml", "mcma", "dd-kabsch", "sw-kabsch")
PILOT_SET = ("ml-pilot", "sw-ls", "ls-sw-kabsch", "ls-ddlms")

# SNR (dB) at which the known-channel ML benchmark reaches SER ~ 1e-3 for
# each per-segment loss level, measured with this package's own calibration
# sweep (tests/test_acceptance.py re-derives it at run time).
SNR_FOR_ML_1E3 = {0.0: 18.0, 0.25: 18.25, 0.70: 19.0, 1.10: 20.0}


def drift_grid_11() -> tuple[float, ...]:
    """11 log-spaced drift points covering 1e-8 .. 1e-3."""
    return tuple(float(v) for v in np.logspace(-8, -3, 11))


def _drift_sweep(trackers, snr, phi) -> ExperimentSpec:
    return ExperimentSpec(
        tracker_ids=trackers,
        snr_db_grid=(snr,),
        drift_grid=drift_grid_11(),
        phi_db_grid=(phi,),
    )


def _snr_sweep(trackers, drift, phi, lo=12.0, hi=22.0) -> ExperimentSpec:
    snrs = tuple(float(s) for s in np.arange(lo, hi + 0.5, 1.0))
    return ExperimentSpec(
        tracker_ids=trackers,
        snr_db_grid=snrs,
        drift_grid=(drift,),
        phi_db_grid=(phi,),
    )


PRESETS: dict[str, dict] = {
    # loss-ratio evolution over 1 microsecond at 28 Gbaud
    "fig2": {
        "kind": "trace",
        "n_segments": 20,
        "phi_db": 0.70,
        "symbols": 28_000,
        "drifts": TRACE_DRIFTS,
    },
    # blind trackers, drift tolerance at 18 dB, no PDL
    "fig4": {"kind": "drift", "spec": _drift_sweep(BLIND_SET, 18.0, 0.0)},
    # blind trackers, SNR sweeps at the three reference drifts, no PDL
    "fig4a": {"kind": "snr", "spec": _snr_sweep(BLIND_SET, TRACE_DRIFTS[0], 0.0)},
    "fig4b": {"kind": "snr", "spec": _snr_sweep(BLIND_SET, TRACE_DRIFTS[1], 0.0)},
    "fig4c": {"kind": "snr", "spec": _snr_sweep(BLIND_SET, TRACE_DRIFTS[2], 0.0)},
    # pilot-aided trackers, drift tolerance at three loss levels
    "fig5a": {"kind": "drift", "spec": _drift_sweep(PILOT_SET, SNR_FOR_ML_1E3[0.25], 0.25)},
    "fig5b": {"kind": "drift", "spec": _drift_sweep(PILOT_SET, SNR_FOR_ML_1E3[0.70], 0.70)},
    "fig5c": {"kind": "drift", "spec": _drift_sweep(PILOT_SET, SNR_FOR_ML_1E3[1.10], 1.10)},
    # pilot-aided trackers, SNR sweeps at 0.70 dB segment loss
    "fig6a": {"kind": "snr", "spec": _snr_sweep(PILOT_SET, TRACE_DRIFTS[0], 0.70, hi=24.0)},
    "fig6b": {"kind": "snr", "spec": _snr_sweep(PILOT_SET, TRACE_DRIFTS[1], 0.70, hi=24.0)},
    "fig6c": {"kind": "snr", "spec": _snr_sweep(PILOT_SET, TRACE_DRIFTS[2], 0.70, hi=24.0)},
}


def get_preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return PRESETS[name]
