"""Adaptive polarization trackers behind one streaming contract.

Every tracker consumes received symbols in order and, over a whole stream
(``process`` calls followed by ``finish``), emits exactly one decision per
consumed symbol, in order, with an initial latency bounded by its window
length.  Window trackers re-decide the entire window each stride but only the
symbols leaving the window are emitted as final.

Tracker families
----------------
* ``SwKabsch``  : decision-directed sliding window, unitary estimate updated
  by the orthogonal-Procrustes rotation each stride.  With ``nu == l`` it
  degenerates to the classic block tracker (``DdKabsch``).
* ``SwLs``      : pilot-aided sliding window, general complex estimate updated
  by the least-squares factor each stride.
* ``Mcma`` / ``Ddlms`` : per-symbol gradient-descent equalizers with two-stage
  step sizes (compiled inner loops).
* ``Hybrid``    : per-frame coarse pilot estimate, residual tracked by an
  inner SwKabsch or Ddlms on compensated symbols.
* ``GenieMl``   : known-channel maximum-likelihood detection (the metric is
  evaluated in the receive domain, which differs from inverse-and-slice when
  the channel is not unitary).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import SingularMatrix, TapBlowup
from .linalg2 import inv2, nearest_unitary, svd2
from .signal import Constellation, FramePlan, diff_decode

__all__ = [
    "kabsch_rotation",
    "sw_ls_update",
    "ls_coarse_estimate",
    "genie_ml_step",
    "genie_swap_resolve",
    "SwKabsch",
    "DdKabsch",
    "SwLs",
    "Mcma",
    "Ddlms",
    "Hybrid",
    "GenieMl",
]

_I2 = np.eye(2, dtype=np.complex128)
_EMPTY = np.empty((2, 0), dtype=np.complex128)

# Unitary estimates are products of exactly-unitary factors; project them back
# onto U(2) this often to stop rounding from accumulating over long runs.
REPROJECT_EVERY = 10_000


def kabsch_rotation(
    x_block: np.ndarray, s_hat_block: np.ndarray, h_hat: np.ndarray
) -> np.ndarray:
    """Unitary minimizer of ||X - R H S|| over R (orthogonal Procrustes).

    The polar factor U V^H of the cross matrix X S^H H^H.  Exactly unitary by
    construction; rank-deficient cross matrices resolve deterministically via
    the SVD's complement column.
    """
    m = (x_block @ s_hat_block.conj().T) @ np.asarray(h_hat).conj().T
    f = svd2(m)
    return f.u @ f.v.conj().T


def sw_ls_update(
    x_block: np.ndarray, s_hat_block: np.ndarray, h_hat: np.ndarray
) -> np.ndarray:
    """Least-squares minimizer of ||X - G H S|| over general complex G.

    G = X S^H H^H (H S S^H H^H)^-1.  Raises SingularMatrix when the Gram
    matrix is ill-conditioned (rank-deficient decisions); callers skip the
    update and keep their current estimate.
    """
    h_hat = np.asarray(h_hat)
    hs = h_hat @ s_hat_block
    gram = hs @ hs.conj().T
    return (x_block @ hs.conj().T) @ inv2(gram)


def ls_coarse_estimate(x_pilot_block: np.ndarray, plan: FramePlan) -> np.ndarray:
    """Coarse channel estimate (1/delta) X_p S_p^H from one pilot run.

    Exact in the noiseless static case because S_p S_p^H = delta I.
    """
    x_pilot_block = np.asarray(x_pilot_block)
    if x_pilot_block.shape[1] != plan.k_p:
        raise ValueError(f"pilot block must have {plan.k_p} columns")
    return (x_pilot_block @ plan.pilot_matrix.conj().T) / plan.delta


def genie_ml_step(h_true: np.ndarray, x: np.ndarray, cset: Constellation) -> np.ndarray:
    """Known-channel ML decision: argmin over all symbol pairs of |x - H c|^2."""
    m = cset.order
    c0 = np.repeat(cset.points, m)
    c1 = np.tile(cset.points, m)
    cand = np.vstack([c0, c1])
    d = np.abs(np.asarray(x)[:, None] - np.asarray(h_true) @ cand) ** 2
    return cand[:, d.sum(axis=0).argmin()].copy()


def genie_swap_resolve(
    decided: np.ndarray,
    truth: np.ndarray,
    cset: Constellation | None = None,
    differential: bool = False,
    prev: np.ndarray | None = None,
) -> tuple[bool, np.ndarray]:
    """Resolve the polarization-swap ambiguity of one evaluation block.

    Tries identity and the row swap on the tracker output block, counts
    symbol mismatches against ground truth (after differential decoding when
    ``differential``, so constant quadrant rotations do not bias the count),
    and returns ``(swapped, corrected_block)``.  Ties keep identity.  ``prev``
    is the last corrected symbol pair of the preceding block, used as the
    differential reference.
    """
    decided = np.asarray(decided)
    swapped = decided[::-1, :]
    if differential:
        if cset is None:
            raise ValueError("differential resolution needs the constellation")
        e_id = int((diff_decode(decided, cset, prev) != truth).sum())
        e_sw = int((diff_decode(swapped, cset, prev) != truth).sum())
    else:
        e_id = int((decided != truth).sum())
        e_sw = int((swapped != truth).sum())
    if e_sw < e_id:
        return True, swapped.copy()
    return False, decided


class _WindowTracker:
    """Shared sliding-window machinery: buffering, striding, emission."""

    def __init__(self, cset: Constellation, l: int, nu: int,
                 telemetry: bool = False):
        if not 1 <= nu <= l:
            raise ValueError(f"need 1 <= nu <= l, got nu={nu} l={l}")
        self.cset = cset
        self.l = l
        self.nu = nu
        self.h_hat = _I2.copy()
        self.k = 0          # symbols consumed
        self.emitted = 0
        self.updates = 0
        self.telemetry: list[tuple] | None = [] if telemetry else None
        self._buf = np.zeros((2, l), dtype=np.complex128)
        self._fill = 0
        self._buf_start = 0  # absolute index of the oldest buffered symbol

    def _decide(self, block: np.ndarray, start_k: int) -> np.ndarray:
        raise NotImplementedError

    def _update(self, s_hat: np.ndarray) -> None:
        raise NotImplementedError

    def _record(self) -> None:
        if self.telemetry is None:
            return
        f = svd2(self.h_hat)
        cond = f.sigma[0] / f.sigma[1] if f.sigma[1] > 0 else np.inf
        h = self.h_hat
        self.telemetry.append(
            (self._buf_start, h[0, 0].real, h[0, 0].imag, h[0, 1].real,
             h[0, 1].imag, h[1, 0].real, h[1, 0].imag, h[1, 1].real,
             h[1, 1].imag, float(cond))
        )

    def _stride(self) -> np.ndarray:
        s_hat = self._decide(self._buf, self._buf_start)
        self._update(s_hat)
        self.updates += 1
        self._record()
        out = s_hat[:, : self.nu].copy()
        keep = self.l - self.nu
        if keep:
            self._buf[:, :keep] = self._buf[:, self.nu :]
        self._fill = keep
        self._buf_start += self.nu
        self.emitted += self.nu
        return out

    def process(self, x: np.ndarray) -> np.ndarray:
        """Consume received symbols, emit finalized decisions (possibly fewer)."""
        x = np.asarray(x, dtype=np.complex128)
        n = x.shape[1]
        outs = []
        pos = 0
        while pos < n:
            take = min(self.l - self._fill, n - pos)
            self._buf[:, self._fill : self._fill + take] = x[:, pos : pos + take]
            self._fill += take
            pos += take
            self.k += take
            if self._fill == self.l:
                outs.append(self._stride())
        return np.concatenate(outs, axis=1) if outs else _EMPTY

    def finish(self) -> np.ndarray:
        """Flush buffered symbols: decide with the current estimate, no update."""
        if self._fill == 0:
            return _EMPTY
        out = self._decide(self._buf[:, : self._fill], self._buf_start)
        self._buf_start += self._fill
        self.emitted += self._fill
        self._fill = 0
        return out

    def run(self, x: np.ndarray) -> np.ndarray:
        """Process a whole stream; output length equals input length."""
        head = self.process(x)
        tail = self.finish()
        return np.concatenate([head, tail], axis=1)


class SwKabsch(_WindowTracker):
    """Decision-directed sliding-window tracker with a unitary estimate.

    Each stride: decide all ``l`` window symbols with the current estimate,
    solve the Procrustes problem for the best unitary rotation aligning the
    window, left-multiply it onto the estimate, emit the ``nu`` oldest
    decisions, slide by ``nu``.  The estimate stays unitary (it is a product
    of exactly-unitary factors, reprojected periodically).
    """

    def __init__(self, cset: Constellation, l: int = 24, nu: int = 6,
                 telemetry: bool = False):
        super().__init__(cset, l, nu, telemetry)

    def _decide(self, block: np.ndarray, start_k: int) -> np.ndarray:
        return self.cset.slice(inv2(self.h_hat) @ block)

    def _update(self, s_hat: np.ndarray) -> None:
        r = kabsch_rotation(self._buf, s_hat, self.h_hat)
        self.h_hat = r @ self.h_hat
        if (self.updates + 1) % REPROJECT_EVERY == 0:
            self.h_hat = nearest_unitary(self.h_hat)

    def reset_estimate(self) -> None:
        self.h_hat = _I2.copy()


class DdKabsch(SwKabsch):
    """Block-wise decision-directed tracker: the ``nu == l`` special case."""

    def __init__(self, cset: Constellation, block: int = 16, telemetry: bool = False):
        super().__init__(cset, l=block, nu=block, telemetry=telemetry)


class SwLs(_WindowTracker):
    """Pilot-aided sliding-window least-squares tracker.

    Window entries at pilot positions use the known pilot columns; payload
    entries are decision-directed.  The estimate is a general complex matrix
    updated by the LS factor; a singular Gram matrix skips the update (the
    estimate, and therefore the decisions, simply carry over to the next
    stride).
    """

    def __init__(self, cset: Constellation, plan: FramePlan, l: int = 24,
                 nu: int = 6, telemetry: bool = False):
        super().__init__(cset, l, nu, telemetry)
        self.plan = plan
        self.skipped_updates = 0
        self._inv_h = _I2.copy()

    def _pilot_override(self, s_hat: np.ndarray, start_k: int, count: int) -> np.ndarray:
        flags = self.plan.pilot_flags(start_k, count)
        if flags.any():
            idx = (start_k + np.nonzero(flags)[0]) % self.plan.k_s
            s_hat[:, flags] = self.plan.pilot_matrix[:, idx]
        return s_hat

    def _decide(self, block: np.ndarray, start_k: int) -> np.ndarray:
        try:
            self._inv_h = inv2(self.h_hat)
        except SingularMatrix:
            pass  # decide with the last invertible estimate
        s_hat = self.cset.slice(self._inv_h @ block)
        return self._pilot_override(s_hat, start_k, block.shape[1])

    def _update(self, s_hat: np.ndarray) -> None:
        try:
            g = sw_ls_update(self._buf, s_hat, self.h_hat)
        except SingularMatrix:
            self.skipped_updates += 1
            return
        self.h_hat = g @ self.h_hat


class _GdTracker:
    """Per-symbol gradient-descent equalizer (compiled loop), two-stage step.

    Estimates the equalizer taps W directly (y = W x); ``h_hat`` exposes the
    inverse for telemetry.  Raises TapBlowup at the end of the chunk in which
    the tap norm first crossed 1e6 (the chunk is still fully sliced, with
    frozen taps, so reruns are deterministic).
    """

    _mode = -1

    def __init__(self, cset: Constellation, mu1: float = 1e-2, mu2: float = 1e-3,
                 stage_len: int = 10_000, telemetry: bool = False):
        if not mu1 >= mu2 > 0:
            raise ValueError(f"need mu1 >= mu2 > 0, got {mu1}, {mu2}")
        self.cset = cset
        self.mu1 = float(mu1)
        self.mu2 = float(mu2)
        self.stage_len = int(stage_len)
        self.w = _I2.copy()
        self.k = 0
        self.emitted = 0
        self.blown_at: int | None = None
        self.telemetry: list[tuple] | None = [] if telemetry else None

    @property
    def h_hat(self) -> np.ndarray:
        return inv2(self.w)

    def process(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.complex128)
        n = x.shape[1]
        decided = np.empty((2, n), dtype=np.complex128)
        blown = _kernels.gd_chunk(
            x, self.w, self.k, self.mu1, self.mu2, self.stage_len,
            self.cset.radius_re, self.cset.radius_im, self.cset.points,
            decided, self._mode,
        )
        self.k += n
        self.emitted += n
        if self.telemetry is not None and n:
            try:
                h = self.h_hat
                f = svd2(h)
                cond = f.sigma[0] / f.sigma[1] if f.sigma[1] > 0 else np.inf
                self.telemetry.append(
                    (self.k, h[0, 0].real, h[0, 0].imag, h[0, 1].real, h[0, 1].imag,
                     h[1, 0].real, h[1, 0].imag, h[1, 1].real, h[1, 1].imag,
                     float(cond))
                )
            except SingularMatrix:
                pass
        if blown >= 0 and self.blown_at is None:
            self.blown_at = int(blown)
            raise TapBlowup(f"tap norm exceeded 1e6 at symbol {blown}")
        return decided

    def finish(self) -> np.ndarray:
        return _EMPTY

    def run(self, x: np.ndarray) -> np.ndarray:
        return self.process(x)

    def reset_estimate(self) -> None:
        self.w = _I2.copy()


class Mcma(_GdTracker):
    """Modified constant-modulus equalizer (per-quadrature dispersion)."""

    _mode = _kernels.MODE_MCMA


class Ddlms(_GdTracker):
    """Decision-directed least-mean-squares equalizer."""

    _mode = _kernels.MODE_DDLMS


class Hybrid:
    """Pilot-frame hybrid: coarse LS estimate, inner tracker on the residual.

    At every frame start the inner tracker is flushed and its estimate reset
    to identity; the pilot run then refreshes the coarse estimate, and payload
    symbols are compensated with its inverse before entering the inner
    tracker.  An ill-conditioned coarse estimate is discarded in favor of the
    previous frame's.  Decisions at pilot positions are the pilots themselves.
    """

    def __init__(self, cset: Constellation, plan: FramePlan, inner: str = "sw-kabsch",
                 l: int = 24, nu: int = 6, mu1: float = 1e-2, mu2: float = 1e-3,
                 stage_len: int = 10_000):
        self.cset = cset
        self.plan = plan
        if inner == "sw-kabsch":
            self.inner = SwKabsch(cset, l=l, nu=nu)
        elif inner == "ddlms":
            self.inner = Ddlms(cset, mu1=mu1, mu2=mu2, stage_len=stage_len)
        else:
            raise ValueError(f"unknown inner tracker {inner!r}")
        self.coarse = _I2.copy()
        self._inv_coarse = _I2.copy()
        self.k = 0
        self.emitted = 0
        self.refreshes = 0
        self._pilot_buf = np.zeros((2, plan.k_p), dtype=np.complex128)

    @property
    def h_hat(self) -> np.ndarray:
        return self.coarse @ self.inner.h_hat

    def _refresh(self) -> None:
        est = ls_coarse_estimate(self._pilot_buf, self.plan)
        try:
            self._inv_coarse = inv2(est)
            self.coarse = est
        except SingularMatrix:
            pass  # keep the previous frame's coarse estimate
        self.refreshes += 1

    def process(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        n = x.shape[1]
        outs = []
        pos = 0
        while pos < n:
            fpos = self.k % self.plan.k_s
            if fpos == 0 and self.k > 0:
                tail = self.inner.finish()
                if tail.shape[1]:
                    outs.append(tail)
                self.inner.reset_estimate()
            if fpos < self.plan.k_p:
                take = min(self.plan.k_p - fpos, n - pos)
                self._pilot_buf[:, fpos : fpos + take] = x[:, pos : pos + take]
                idx = (self.k + np.arange(take)) % self.plan.k_s
                outs.append(self.plan.pilot_matrix[:, idx].copy())
                self.emitted += take
                self.k += take
                pos += take
                if fpos + take == self.plan.k_p:
                    self._refresh()
            else:
                take = min(self.plan.k_s - fpos, n - pos)
                comp = self._inv_coarse @ x[:, pos : pos + take]
                out = self.inner.process(comp)
                if out.shape[1]:
                    outs.append(out)
                    self.emitted += out.shape[1]
                self.k += take
                pos += take
        return np.concatenate(outs, axis=1) if outs else _EMPTY

    def finish(self) -> np.ndarray:
        tail = self.inner.finish()
        self.emitted += tail.shape[1]
        return tail

    def run(self, x: np.ndarray) -> np.ndarray:
        head = self.process(x)
        tail = self.finish()
        return np.concatenate([head, tail], axis=1)


class GenieMl:
    """Known-channel maximum-likelihood detector (simulation benchmark)."""

    def __init__(self, cset: Constellation):
        self.cset = cset
        m = cset.order
        self._c0 = np.ascontiguousarray(np.repeat(cset.points, m))
        self._c1 = np.ascontiguousarray(np.tile(cset.points, m))

    def run(self, x: np.ndarray, h_seq: np.ndarray) -> np.ndarray:
        """Decide a whole stream given the true channel at every symbol."""
        x = np.ascontiguousarray(x, dtype=np.complex128)
        h_seq = np.ascontiguousarray(h_seq, dtype=np.complex128)
        n = x.shape[1]
        out0 = np.empty(n, dtype=np.complex128)
        out1 = np.empty(n, dtype=np.complex128)
        _kernels.ml_chunk(x, h_seq, self._c0, self._c1, out0, out1)
        return np.vstack([out0, out1])
