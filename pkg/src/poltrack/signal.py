"""Constellations, differential quadrant coding, pilot frames, SER counting.

Dual-polarization symbol streams are ``(2, K)`` complex arrays throughout
(one row per polarization tributary).  Constellation points are exact float
constants, and every transform applied to decided symbols (quadrant rotation
by powers of j, polarization swap) permutes or negates components without
rounding, so decisions can be compared to ground truth with exact equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidFrame, LengthMismatch
from .linalg2 import inv2

__all__ = [
    "Constellation",
    "FramePlan",
    "make_constellation",
    "detect",
    "diff_encode",
    "diff_decode",
    "make_frame_plan",
    "is_pilot",
    "count_ser",
    "draw_payload",
]

# powers of j; multiplying by these is exact in floating point
_JPOW = np.array([1.0 + 0.0j, 0.0 + 1.0j, -1.0 + 0.0j, 0.0 - 1.0j])


def _quadrant(values: np.ndarray) -> np.ndarray:
    """Counterclockwise quadrant index 0..3 (first quadrant = 0)."""
    neg_re = values.real < 0
    neg_im = values.imag < 0
    return neg_im * 2 + (neg_re ^ neg_im)


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy square QAM alphabet with quadrant structure.

    points    : the M alphabet points
    order     : M (4 or 16)
    quadrant  : quadrant index of each point
    residue   : index of the point's pattern within its quadrant; invariant
                under rotation by j, which is what makes quadrant-differential
                coding rotationally transparent
    base      : the M/4 first-quadrant patterns, indexed by residue
    """

    points: np.ndarray
    order: int
    quadrant: np.ndarray = field(repr=False)
    residue: np.ndarray = field(repr=False)
    base: np.ndarray = field(repr=False)

    def slice_to_index(self, values: np.ndarray) -> np.ndarray:
        """Nearest-point index for each entry of an arbitrary complex array."""
        flat = np.asarray(values).reshape(-1, 1)
        idx = np.abs(flat - self.points[None, :]).argmin(axis=1)
        return idx.reshape(np.shape(values))

    def slice(self, values: np.ndarray) -> np.ndarray:
        """Nearest constellation point for each entry."""
        return self.points[self.slice_to_index(values)]

    def from_quadrant_residue(self, q: np.ndarray, r: np.ndarray) -> np.ndarray:
        return self.base[r] * _JPOW[np.asarray(q) % 4]

    @property
    def radius_re(self) -> float:
        """Dispersion constant E[a_re^4]/E[a_re^2] of the real part."""
        re = self.points.real
        return float((re**4).mean() / (re**2).mean())

    @property
    def radius_im(self) -> float:
        im = self.points.imag
        return float((im**4).mean() / (im**2).mean())


def make_constellation(order: int) -> Constellation:
    """Square QAM on levels {-1, +1} (order 4) or {-3..3} (order 16),
    scaled to unit average energy per polarization."""
    if order == 4:
        levels = np.array([-1.0, 1.0])
    elif order == 16:
        levels = np.array([-3.0, -1.0, 1.0, 3.0])
    else:
        raise ValueError(f"unsupported constellation order {order}")
    re, im = np.meshgrid(levels, levels)
    points = (re + 1j * im).ravel()
    points = points / np.sqrt((np.abs(points) ** 2).mean())

    quadrant = _quadrant(points)
    base_vals = points * _JPOW[(-quadrant) % 4]
    base = np.unique(base_vals)  # sorted first-quadrant patterns
    residue = np.array([int(np.nonzero(base == v)[0][0]) for v in base_vals])
    return Constellation(points, order, quadrant, residue, base)


def detect(x: np.ndarray, h_hat: np.ndarray, cset: Constellation) -> np.ndarray:
    """Minimum-distance decision after equalizing with h_hat.

    Equalizes ``h_hat^-1 x`` and slices each polarization independently (the
    Euclidean metric separates per entry after equalization).  Propagates
    SingularMatrix from the inverse.
    """
    return cset.slice(inv2(h_hat) @ np.asarray(x, dtype=np.complex128))


def diff_encode(symbols: np.ndarray, cset: Constellation) -> np.ndarray:
    """Quadrant-differential encoding, per polarization.

    Transmitted quadrant accumulates the payload quadrant modulo 4 (initial
    reference 0); the intra-quadrant pattern is carried unchanged, so outputs
    stay in the alphabet.
    """
    symbols = np.asarray(symbols)
    q = _quadrant(symbols)
    q_tx = np.cumsum(q, axis=-1) % 4
    return symbols * _JPOW[(q_tx - q) % 4]


def diff_decode(
    symbols: np.ndarray, cset: Constellation, prev: np.ndarray | None = None
) -> np.ndarray:
    """Inverse of diff_encode: quadrant differences recover the payload.

    ``prev`` is the last symbol of the preceding decoded segment (reference
    quadrant 0 assumed when omitted).  A constant rotation by a power of j of
    the whole stream leaves all differences, hence every payload symbol after
    the first, unchanged.
    """
    symbols = np.asarray(symbols)
    q_rx = _quadrant(symbols)
    ref = np.zeros((symbols.shape[0], 1), dtype=q_rx.dtype)
    if prev is not None:
        ref[:, 0] = _quadrant(np.asarray(prev))
    q_prev = np.concatenate([ref, q_rx[..., :-1]], axis=-1)
    q = (q_rx - q_prev) % 4
    return symbols * _JPOW[(q - q_rx) % 4]


@dataclass(frozen=True)
class FramePlan:
    """Pilot/payload frame layout.

    A pilot sequence of length ``k_p`` opens every block of ``k_s`` symbols.
    The pilot matrix rows are orthogonal by construction:
    ``pilot_matrix @ pilot_matrix^H = delta I`` exactly.
    """

    k_p: int
    k_s: int
    pilot_matrix: np.ndarray
    delta: float

    def is_pilot(self, k: int) -> bool:
        return (k % self.k_s) <= self.k_p - 1

    def pilot_col(self, k: int) -> np.ndarray:
        """Known pilot value at absolute symbol index k (must be a pilot)."""
        return self.pilot_matrix[:, k % self.k_s]

    def pilot_flags(self, start_k: int, count: int) -> np.ndarray:
        idx = (start_k + np.arange(count)) % self.k_s
        return idx <= self.k_p - 1

    @property
    def overhead(self) -> float:
        return self.k_p / self.k_s


def make_frame_plan(
    k_p: int,
    k_s: int,
    cset_pilot: Constellation,
    rng: np.random.Generator,
    power: float = 1.0,
) -> FramePlan:
    """Build a frame plan with a random constant-modulus pilot matrix.

    A random run ``a`` of K_p/2 pilot symbols gives rows ``[a, a]`` and
    ``[a, -a]``; the sign split cancels the cross term exactly, so
    ``S S^H = (k_p * power) I``.
    """
    if k_p <= 2 or k_p % 2 != 0 or k_p > k_s:
        raise InvalidFrame(f"need even k_p with 2 < k_p <= k_s, got k_p={k_p} k_s={k_s}")
    a = cset_pilot.points[rng.integers(0, cset_pilot.order, size=k_p // 2)]
    a = a * np.sqrt(power)
    pilot = np.vstack([np.concatenate([a, a]), np.concatenate([a, -a])])
    return FramePlan(k_p, k_s, pilot, float(k_p * power))


def is_pilot(k: int, plan: FramePlan) -> bool:
    """True iff absolute symbol index k lands in a pilot run."""
    return plan.is_pilot(k)


def count_ser(
    decided: np.ndarray,
    truth: np.ndarray,
    skip: int = 0,
    plan: FramePlan | None = None,
    start_k: int = 0,
) -> tuple[int, int]:
    """Per-polarization symbol mismatches over indices >= skip.

    Returns ``(errors, total)`` with total counting both tributaries.  Pilot
    positions are excluded from both counts when a frame plan is supplied.
    """
    decided = np.asarray(decided)
    truth = np.asarray(truth)
    if decided.shape != truth.shape:
        raise LengthMismatch(f"shape {decided.shape} vs {truth.shape}")
    n = decided.shape[-1]
    if skip >= n:
        raise ValueError(f"skip {skip} >= sequence length {n}")
    keep = np.ones(n, dtype=bool)
    keep[:skip] = False
    if plan is not None:
        keep &= ~plan.pilot_flags(start_k, n)
    errors = int((decided[:, keep] != truth[:, keep]).sum())
    total = int(2 * keep.sum())
    return errors, total


def draw_payload(rng: np.random.Generator, cset: Constellation, count: int) -> np.ndarray:
    """Uniform i.i.d. dual-polarization payload of shape (2, count)."""
    return cset.points[rng.integers(0, cset.order, size=(2, count))]
