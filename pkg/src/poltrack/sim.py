"""Monte Carlo experiment engine: trials, sweeps, SER pooling.

Every trial is a pure function of ``(master_seed, parameter-cell index,
trial index)``: the seed sequence is split into independent channel, noise,
and payload streams, so reruns are bit-identical regardless of worker count
or execution order.  Trackers evaluated at the same operating point share the
same channel/noise/payload realization (paired comparison), which tightens
the confidence intervals of tracker orderings.

Pipeline per trial: draw payload, differentially encode it (blind trackers)
or stamp pilot runs into it (pilot-aided trackers), push it through the
evolving channel with receiver noise, run the tracker, resolve the
polarization-swap ambiguity once per block against ground truth, undo the
differential coding, and count per-polarization symbol errors past the
convergence prefix.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import NormalDist

import numpy as np

from .channel import Channel, ChannelConfig
from .errors import TapBlowup
from .signal import (
    FramePlan,
    count_ser,
    diff_decode,
    diff_encode,
    draw_payload,
    make_constellation,
    make_frame_plan,
)
from .trackers import (
    DdKabsch,
    Ddlms,
    GenieMl,
    Hybrid,
    Mcma,
    SwKabsch,
    SwLs,
    genie_swap_resolve,
)

__all__ = [
    "ExperimentSpec",
    "TrialResult",
    "SweepRow",
    "SweepResult",
    "TRACKER_IDS",
    "GD_MU_GRID",
    "wilson_ci",
    "frame_plan",
    "run_trial",
    "run_sweep",
    "best_gd_step_sizes",
]

CSV_HEADER = (
    "tracker,snr_db,dp_tot_t,phi_db,n_segments,trials,"
    "counted_symbols,errors,ser,ci95_low,ci95_high,failed_trials"
)

# step-size grid swept for the gradient-descent benchmarks (stage1 >= stage2)
GD_MU_GRID = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)

_BLIND_DD = {"mcma", "ddlms", "dd-kabsch", "sw-kabsch"}
_PILOT = {"sw-ls", "ls-sw-kabsch", "ls-ddlms", "ml-pilot"}
TRACKER_IDS = ("ml", "ml-pilot", "mcma", "ddlms", "dd-kabsch", "sw-kabsch",
               "sw-ls", "ls-sw-kabsch", "ls-ddlms")


@dataclass(frozen=True)
class ExperimentSpec:
    """Full description of a sweep; every run is reproducible from this.

    ``skip = None`` applies the per-tracker defaults: 10^4 symbols for the
    blind / decision-directed trackers (their cold-start transient), 0 for
    pilot-aided trackers and the known-channel benchmarks.
    """

    tracker_ids: tuple[str, ...] = ("sw-kabsch",)
    snr_db_grid: tuple[float, ...] = (18.0,)
    drift_grid: tuple[float, ...] = (0.0,)
    phi_db_grid: tuple[float, ...] = (0.0,)
    n_segments: int = 20
    trials: int = 20
    symbols_per_trial: int = 100_000
    master_seed: int = 1
    skip: int | None = None
    k_p: int = 16
    k_s: int = 1016
    l: int = 24
    nu: int = 6
    kabsch_block: int = 16
    mu1: float = 1e-2
    mu2: float = 1e-3
    stage_len: int = 10_000

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for d in self.drift_grid:
            if d < 0:
                raise ValueError("drift values must be >= 0")
        for t in self.tracker_ids:
            if t not in TRACKER_IDS:
                raise ValueError(f"unknown tracker id {t!r}")
            if self.symbols_per_trial <= self.skip_for(t):
                raise ValueError(
                    f"symbols_per_trial {self.symbols_per_trial} must exceed "
                    f"the convergence skip {self.skip_for(t)} of {t!r}"
                )

    def skip_for(self, tracker_id: str) -> int:
        if self.skip is not None:
            return self.skip
        return 10_000 if tracker_id in _BLIND_DD else 0

    def param_cells(self) -> list[tuple[int, float, float, float]]:
        """(cell_index, snr, drift, phi) cross product, tracker-independent."""
        grid = itertools.product(self.snr_db_grid, self.drift_grid, self.phi_db_grid)
        return [(i, s, d, p) for i, (s, d, p) in enumerate(grid)]


@dataclass
class TrialResult:
    errors: int
    counted: int
    failed: bool = False
    swaps: int = 0


def frame_plan(spec: ExperimentSpec) -> FramePlan:
    """The sweep-wide pilot plan; drawn once from the master seed."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.master_seed]))
    return make_frame_plan(spec.k_p, spec.k_s, make_constellation(4), rng)


def _make_stream(
    spec: ExperimentSpec,
    tracker_id: str,
    snr_db: float,
    drift: float,
    phi_db: float,
    cell_index: int,
    trial_index: int,
    plan: FramePlan,
):
    """Build one trial's (x, h, payload, tx) deterministically from indices."""
    cset = make_constellation(16)
    ss = np.random.SeedSequence([spec.master_seed, cell_index, trial_index])
    chan_ss, noise_ss, data_ss = ss.spawn(3)

    chan = Channel(
        ChannelConfig(spec.n_segments, drift, phi_db),
        rng=np.random.default_rng(chan_ss),
    )
    k = spec.symbols_per_trial
    payload = draw_payload(np.random.default_rng(data_ss), cset, k)

    if tracker_id in _PILOT:
        tx = payload.copy()
        flags = plan.pilot_flags(0, k)
        idx = np.nonzero(flags)[0]
        tx[:, idx] = plan.pilot_matrix[:, idx % spec.k_s]
    else:
        tx = diff_encode(payload, cset)

    h = chan.evolve(k)
    x = np.einsum("kij,jk->ik", h, tx)
    if not math.isinf(snr_db):
        var = 1.0 / 10.0 ** (snr_db / 10.0)
        nrng = np.random.default_rng(noise_ss)
        x = x + (nrng.standard_normal((2, k)) + 1j * nrng.standard_normal((2, k))) \
            * math.sqrt(var / 2.0)
    return cset, x, h, payload, tx


def _build_tracker(spec: ExperimentSpec, tracker_id: str, cset, plan,
                   mu: tuple[float, float] | None = None):
    mu1, mu2 = mu if mu is not None else (spec.mu1, spec.mu2)
    if tracker_id == "sw-kabsch":
        return SwKabsch(cset, l=spec.l, nu=spec.nu)
    if tracker_id == "dd-kabsch":
        return DdKabsch(cset, block=spec.kabsch_block)
    if tracker_id == "mcma":
        return Mcma(cset, mu1=mu1, mu2=mu2, stage_len=spec.stage_len)
    if tracker_id == "ddlms":
        return Ddlms(cset, mu1=mu1, mu2=mu2, stage_len=spec.stage_len)
    if tracker_id == "sw-ls":
        return SwLs(cset, plan, l=spec.l, nu=spec.nu)
    if tracker_id == "ls-sw-kabsch":
        return Hybrid(cset, plan, inner="sw-kabsch", l=spec.l, nu=spec.nu)
    if tracker_id == "ls-ddlms":
        return Hybrid(cset, plan, inner="ddlms", mu1=mu1, mu2=mu2,
                      stage_len=spec.stage_len)
    raise ValueError(f"no tracker factory for {tracker_id!r}")


def _detect_count(spec, tracker_id, cset, plan, x, h, payload, tx,
                  mu=None) -> TrialResult:
    """Run the tracker on a prepared stream and count errors."""
    differential = tracker_id not in _PILOT
    try:
        if tracker_id in ("ml", "ml-pilot"):
            decided = GenieMl(cset).run(x, h)
        else:
            decided = _build_tracker(spec, tracker_id, cset, plan, mu).run(x)
    except TapBlowup:
        return TrialResult(0, 0, failed=True)

    # genie-aided polarization-swap resolution, once per block
    k = decided.shape[1]
    corrected = np.empty_like(decided)
    truth_cmp = payload if differential else tx
    prev = None
    swaps = 0
    for b in range(0, k, spec.k_s):
        e = min(b + spec.k_s, k)
        sw, corr = genie_swap_resolve(
            decided[:, b:e], truth_cmp[:, b:e], cset, differential, prev
        )
        corrected[:, b:e] = corr
        prev = corrected[:, e - 1]
        swaps += int(sw)

    skip = spec.skip_for(tracker_id)
    if differential:
        final = diff_decode(corrected, cset)
        errors, counted = count_ser(final, payload, skip)
    else:
        errors, counted = count_ser(corrected, tx, skip, plan=plan)
    return TrialResult(errors, counted, swaps=swaps)


def run_trial(
    spec: ExperimentSpec,
    tracker_id: str,
    snr_db: float,
    drift: float,
    phi_db: float,
    cell_index: int,
    trial_index: int,
    plan: FramePlan | None = None,
) -> TrialResult:
    """One deterministic trial of one tracker at one operating point."""
    if plan is None:
        plan = frame_plan(spec)
    cset, x, h, payload, tx = _make_stream(
        spec, tracker_id, snr_db, drift, phi_db, cell_index, trial_index, plan
    )
    return _detect_count(spec, tracker_id, cset, plan, x, h, payload, tx)


@dataclass
class SweepRow:
    tracker: str
    snr_db: float
    dp_tot_t: float
    phi_db: float
    n_segments: int
    trials: int
    counted_symbols: int
    errors: int
    ser: float
    ci95_low: float
    ci95_high: float
    failed_trials: int

    def to_csv_line(self) -> str:
        return ",".join(
            [
                self.tracker,
                repr(float(self.snr_db)),
                repr(float(self.dp_tot_t)),
                repr(float(self.phi_db)),
                str(self.n_segments),
                str(self.trials),
                str(self.counted_symbols),
                str(self.errors),
                repr(float(self.ser)),
                repr(float(self.ci95_low)),
                repr(float(self.ci95_high)),
                str(self.failed_trials),
            ]
        )


@dataclass
class SweepResult:
    spec: ExperimentSpec
    rows: list[SweepRow] = field(default_factory=list)

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [r.to_csv_line() for r in self.rows]) + "\n"

    def row(self, tracker: str, snr_db: float, dp_tot_t: float, phi_db: float) -> SweepRow:
        for r in self.rows:
            if (r.tracker, r.snr_db, r.dp_tot_t, r.phi_db) == (tracker, snr_db, dp_tot_t, phi_db):
                return r
        raise KeyError((tracker, snr_db, dp_tot_t, phi_db))


def wilson_ci(errors: int, counted: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if counted < 1:
        raise ValueError("counted must be >= 1")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    p = errors / counted
    z2n = z * z / counted
    denom = 1.0 + z2n
    center = (p + z2n / 2.0) / denom
    half = z * math.sqrt(p * (1.0 - p) / counted + z2n / (4.0 * counted)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _run_task(args) -> tuple[int, TrialResult]:
    task_index, spec, tracker_id, snr, drift, phi, cell, trial = args
    plan = frame_plan(spec)
    return task_index, run_trial(spec, tracker_id, snr, drift, phi, cell, trial, plan)


def expected_counted(spec: ExperimentSpec, tracker_id: str, plan: FramePlan) -> int:
    """Exact counted-symbol budget of one non-failed trial."""
    skip = spec.skip_for(tracker_id)
    n = spec.symbols_per_trial - skip
    if tracker_id in _PILOT:
        flags = plan.pilot_flags(skip, n)
        n -= int(flags.sum())
    return 2 * n


def run_sweep(spec: ExperimentSpec, workers: int = 1, progress=None) -> SweepResult:
    """Full cross-product sweep, deterministic for any worker count.

    Trials of failed (diverged) gradient-descent runs are excluded from the
    pooled SER and reported in ``failed_trials``.
    """
    plan = frame_plan(spec)
    cells = spec.param_cells()
    tasks = []
    for tracker_id in spec.tracker_ids:
        for cell, snr, drift, phi in cells:
            for trial in range(spec.trials):
                tasks.append(
                    (len(tasks), spec, tracker_id, snr, drift, phi, cell, trial)
                )

    results: dict[int, TrialResult] = {}
    if workers <= 1:
        for t in tasks:
            i, res = _run_task(t)
            results[i] = res
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in pool.map(_run_task, tasks, chunksize=1):
                results[i] = res

    out = SweepResult(spec)
    idx = 0
    for tracker_id in spec.tracker_ids:
        for cell, snr, drift, phi in cells:
            errors = counted = failed = swapped = 0
            for _ in range(spec.trials):
                r = results[idx]
                idx += 1
                if r.failed:
                    failed += 1
                    continue
                errors += r.errors
                counted += r.counted
            ok = spec.trials - failed
            if counted != ok * expected_counted(spec, tracker_id, plan):
                raise RuntimeError(
                    f"counted-symbol audit failed for {tracker_id} at cell {cell}"
                )
            if counted > 0:
                ser = errors / counted
                lo, hi = wilson_ci(errors, counted)
            else:
                ser, lo, hi = math.nan, math.nan, math.nan
            row = SweepRow(
                tracker_id, snr, drift, phi, spec.n_segments, spec.trials,
                counted, errors, ser, lo, hi, failed,
            )
            out.rows.append(row)
            if progress is not None:
                progress(row)
    return out


def best_gd_step_sizes(
    spec: ExperimentSpec,
    tracker_id: str,
    snr_db: float,
    drift: float,
    phi_db: float,
    cell_index: int = 0,
    grid: tuple[float, ...] = GD_MU_GRID,
) -> tuple[tuple[float, float], float]:
    """Sweep the two-stage step-size grid, return the best (mu1, mu2) and SER.

    Only combinations with ``mu1 >= mu2`` are tried.  Streams are generated
    once per trial and shared across all step-size combinations, so the
    comparison is paired.  Combinations whose every trial diverges are
    skipped; ties resolve to the first grid combination.
    """
    combos = [(m1, m2) for m1 in grid for m2 in grid if m1 >= m2]
    plan = frame_plan(spec)
    errors = np.zeros(len(combos), dtype=np.int64)
    counted = np.zeros(len(combos), dtype=np.int64)
    for trial in range(spec.trials):
        cset, x, h, payload, tx = _make_stream(
            spec, tracker_id, snr_db, drift, phi_db, cell_index, trial, plan
        )
        for ci, mu in enumerate(combos):
            res = _detect_count(spec, tracker_id, cset, plan, x, h, payload, tx, mu=mu)
            if not res.failed:
                errors[ci] += res.errors
                counted[ci] += res.counted
    with np.errstate(invalid="ignore"):
        ser = np.where(counted > 0, errors / np.maximum(counted, 1), np.inf)
    best = int(ser.argmin())
    return combos[best], float(ser[best])


def with_overrides(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    """Convenience for preset modification."""
    return replace(spec, **kw)
