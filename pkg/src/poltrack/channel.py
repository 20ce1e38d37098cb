"""Dual-polarization channel with drifting SOP and concatenated PDL segments.

The channel is a cascade of ``N`` segments, each a fixed diagonal loss element
``diag(sqrt(1 + g_n), sqrt(1 - g_n))`` followed by a unitary Jones rotation
that performs an isotropic random walk: at every symbol each segment is
left-multiplied by ``pauli_exp(alpha)`` with ``alpha ~ N(0, sigma_p^2 I_3)``
and ``sigma_p^2 = 2 pi (dp_tot / N) T``.  The user-facing drift parameter is
the dimensionless product ``dp_tot * T`` (total polarization linewidth times
symbol duration).

The full matrix at symbol ``k`` is the left-product

    H_k = G_N J_{k,N} ... G_1 J_{k,1}

which is unitary when all ``g_n = 0`` and otherwise carries a time-varying
aggregated loss ratio ``rho_k = (sigma_max / sigma_min)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg2
from ._kernels import evolve_chunk
from .errors import DegeneratePDL

__all__ = [
    "ChannelConfig",
    "NoiseConfig",
    "Channel",
    "gamma_from_phi",
    "phi_from_gamma",
    "aggregated_pdl_series",
    "average_aggregated_pdl_db",
    "pdl_trace",
    "mean_sop_angle",
]

# Segment unitaries are projected back onto U(2) this often; closed-form
# rotations are unitary to machine precision but million-step products drift.
REUNITARIZE_EVERY = 10_000

SYMBOL_RATE_28GBAUD = 28e9


def gamma_from_phi(phi_db: float) -> float:
    """Per-segment loss ratio gamma from the segment loss in dB.

    Inverts ``phi = 10 log10((1 + gamma) / (1 - gamma))``; round-trips within
    1e-12 dB for any finite ``phi_db >= 0``.
    """
    if phi_db < 0:
        raise ValueError(f"phi_db must be >= 0, got {phi_db}")
    r = 10.0 ** (phi_db / 10.0)
    return (r - 1.0) / (r + 1.0)


def phi_from_gamma(gamma: float) -> float:
    """Segment loss in dB from the loss ratio (inverse of gamma_from_phi)."""
    return 10.0 * math.log10((1.0 + gamma) / (1.0 - gamma))


@dataclass(frozen=True)
class ChannelConfig:
    """Static channel parameters.

    n_segments      : number of cascaded segments N
    dp_tot_times_T  : total polarization linewidth times symbol duration
    phi_db          : per-segment loss in dB, identical for all segments
    seed            : RNG seed for the initial rotations and the random walk
    phi_db_segments : optional per-segment loss list overriding phi_db
    """

    n_segments: int = 20
    dp_tot_times_T: float = 0.0
    phi_db: float = 0.0
    seed: int = 0
    phi_db_segments: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_segments < 1:
            raise ValueError("n_segments must be >= 1")
        if not self.dp_tot_times_T >= 0.0:
            raise ValueError("dp_tot_times_T must be >= 0")
        if not 0.0 <= self.phi_db < math.inf:
            raise ValueError("phi_db must be finite and >= 0")
        if self.phi_db_segments is not None and len(self.phi_db_segments) != self.n_segments:
            raise ValueError("phi_db_segments length must equal n_segments")

    @property
    def sigma_p(self) -> float:
        """Per-segment innovation std dev sqrt(2 pi (dp_tot/N) T)."""
        return math.sqrt(2.0 * math.pi * self.dp_tot_times_T / self.n_segments)

    def gammas(self) -> np.ndarray:
        phis = self.phi_db_segments or (self.phi_db,) * self.n_segments
        return np.array([gamma_from_phi(p) for p in phis])


@dataclass(frozen=True)
class NoiseConfig:
    """Receiver noise level: per-polarization SNR = power / sigma_z^2.

    ``snr_db = math.inf`` disables noise.  ``power`` is the average launch
    power per polarization, 1.0 under the unit-energy constellations.
    """

    snr_db: float = math.inf
    power: float = 1.0

    @property
    def sigma_z_sq(self) -> float:
        """Total variance of each complex noise entry (real+imag parts)."""
        if math.isinf(self.snr_db):
            return 0.0
        return self.power / 10.0 ** (self.snr_db / 10.0)


def _mul2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Explicit 2x2 product, same operation order as the numba kernels."""
    return np.array(
        [
            [a[0, 0] * b[0, 0] + a[0, 1] * b[1, 0], a[0, 0] * b[0, 1] + a[0, 1] * b[1, 1]],
            [a[1, 0] * b[0, 0] + a[1, 1] * b[1, 0], a[1, 0] * b[0, 1] + a[1, 1] * b[1, 1]],
        ],
        dtype=np.complex128,
    )


class Channel:
    """Evolving channel state: per-segment rotations plus loss elements.

    The state owns its RNG stream; two channels built from equal configs
    (same seed) produce bit-identical matrix sequences.  ``step``/``matrix``
    give the one-symbol-at-a-time view, ``evolve`` runs a compiled batch that
    consumes the RNG stream in exactly the same order.
    """

    def __init__(self, cfg: ChannelConfig, rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.j = np.stack([linalg2.haar_unitary(self.rng) for _ in range(cfg.n_segments)])
        gammas = cfg.gammas()
        self.gp = np.sqrt(1.0 + gammas)
        self.gm = np.sqrt(1.0 - gammas)
        self.sigma_p = cfg.sigma_p
        self.k = 0

    @property
    def gamma_mats(self) -> np.ndarray:
        """(N, 2, 2) diagonal loss elements, for inspection."""
        n = self.cfg.n_segments
        out = np.zeros((n, 2, 2), dtype=np.complex128)
        out[:, 0, 0] = self.gp
        out[:, 1, 1] = self.gm
        return out

    def matrix(self) -> np.ndarray:
        """Channel matrix at the current symbol index."""
        h = np.eye(2, dtype=np.complex128)
        for m in range(self.cfg.n_segments):
            a = self.j[m].copy()
            a[0, :] *= self.gp[m]
            a[1, :] *= self.gm[m]
            h = _mul2(a, h)
        return h

    def _reunitarize(self) -> None:
        for m in range(self.cfg.n_segments):
            self.j[m] = linalg2.nearest_unitary(self.j[m])

    def step(self) -> None:
        """Advance every segment rotation by one symbol."""
        alphas = self.rng.normal(0.0, self.sigma_p, size=(self.cfg.n_segments, 3))
        for m in range(self.cfg.n_segments):
            self.j[m] = _mul2(linalg2.pauli_exp(alphas[m]), self.j[m])
        self.k += 1
        if self.k % REUNITARIZE_EVERY == 0:
            self._reunitarize()

    def evolve(self, count: int) -> np.ndarray:
        """Advance ``count`` symbols, returning the (count, 2, 2) matrix batch.

        ``out[i]`` is the channel at the symbol consumed at step ``k + i``,
        i.e. the matrix before that step's random-walk update, matching a
        ``matrix(); step()`` loop draw for draw.
        """
        out = np.empty((count, 2, 2), dtype=np.complex128)
        done = 0
        while done < count:
            boundary = (self.k // REUNITARIZE_EVERY + 1) * REUNITARIZE_EVERY
            chunk = min(count - done, boundary - self.k)
            alphas = self.rng.normal(
                0.0, self.sigma_p, size=(chunk, self.cfg.n_segments, 3)
            )
            evolve_chunk(self.j, self.gp, self.gm, alphas, out[done : done + chunk])
            self.k += chunk
            done += chunk
            if self.k % REUNITARIZE_EVERY == 0:
                self._reunitarize()
        return out

    def transmit(
        self, s: np.ndarray, noise: NoiseConfig, rng: np.random.Generator
    ) -> np.ndarray:
        """One received symbol x = H_k s + z at the current index (no step)."""
        h = self.matrix()
        x = h @ np.asarray(s, dtype=np.complex128)
        var = noise.sigma_z_sq
        if var > 0.0:
            z = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) * math.sqrt(var / 2.0)
            x = x + z
        return x

    def aggregated_pdl(self) -> float:
        """Instantaneous loss ratio rho_k = (sigma_max / sigma_min)^2."""
        f = linalg2.svd2(self.matrix())
        if f.sigma[1] < 1e-12 * f.sigma[0]:
            raise DegeneratePDL(f"singular value collapse: {f.sigma}")
        return float((f.sigma[0] / f.sigma[1]) ** 2)


def aggregated_pdl_series(h: np.ndarray) -> np.ndarray:
    """Loss ratio rho_k for a (K, 2, 2) batch of channel matrices.

    Same closed form as ``linalg2.svd2`` vectorized over the batch; the
    smaller eigenvalue comes from det(H)^2 / lam_max to avoid cancellation.
    """
    a = np.abs(h[:, 0, 0]) ** 2 + np.abs(h[:, 1, 0]) ** 2
    d = np.abs(h[:, 0, 1]) ** 2 + np.abs(h[:, 1, 1]) ** 2
    b = np.conj(h[:, 0, 0]) * h[:, 0, 1] + np.conj(h[:, 1, 0]) * h[:, 1, 1]
    lam_max = 0.5 * (a + d + np.hypot(a - d, 2.0 * np.abs(b)))
    det_sq = np.abs(h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] * h[:, 1, 0]) ** 2
    lam_min = det_sq / lam_max
    if np.any(lam_min < 1e-24 * lam_max):
        raise DegeneratePDL("singular value collapse in batch")
    return lam_max / lam_min


def average_aggregated_pdl_db(trials: int, symbols: int, cfg: ChannelConfig) -> float:
    """10 log10 of the mean (over trials and symbols) linear loss ratio.

    Trial ``t`` uses the independent seed sequence ``[cfg.seed, t]``.
    """
    if trials < 1 or symbols < 1:
        raise ValueError("trials and symbols must be >= 1")
    acc = 0.0
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, t]))
        chan = Channel(cfg, rng=rng)
        rho = aggregated_pdl_series(chan.evolve(symbols))
        acc += float(rho.mean())
    return 10.0 * math.log10(acc / trials)


def pdl_trace(
    cfg: ChannelConfig, duration_symbols: int, decimate: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Per-symbol aggregated-loss trace ``(k, rho_db)`` for one realization.

    28000 symbols at 28 Gbaud cover a one-microsecond observation window.
    """
    chan = Channel(cfg)
    rho = aggregated_pdl_series(chan.evolve(duration_symbols))
    k = np.arange(duration_symbols)
    if decimate > 1:
        k, rho = k[::decimate], rho[::decimate]
    return k, 10.0 * np.log10(rho)


def mean_sop_angle(cfg: ChannelConfig, steps: int) -> float:
    """Average per-symbol great-circle angle of the output polarization.

    Probes the channel with the fixed Jones vector (1, 0), maps the output to
    a unit Stokes vector, and averages the angle between consecutive symbols.
    Reported in rad/symbol.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    chan = Channel(cfg)
    h = chan.evolve(steps + 1)
    e0 = h[:, 0, 0]
    e1 = h[:, 1, 0]
    p0 = np.abs(e0) ** 2
    p1 = np.abs(e1) ** 2
    cross = e0 * np.conj(e1)
    s = np.stack([p0 - p1, 2.0 * cross.real, -2.0 * cross.imag])
    s = s / (p0 + p1)
    dots = np.clip((s[:, 1:] * s[:, :-1]).sum(axis=0), -1.0, 1.0)
    return float(np.arccos(dots).mean())
