"""Numba kernels for the per-symbol hot loops.

These mirror, operation for operation, the closed-form expressions in
``linalg2`` (Pauli exponential, explicit 2x2 products) so that the scalar
Python paths and the compiled batch paths stay numerically interchangeable.
All kernels are sequential and IEEE-strict (no fastmath) to keep runs
reproducible.
"""

import math

import numpy as np
from numba import njit

MODE_MCMA = 0
MODE_DDLMS = 1


@njit(cache=True)
def evolve_chunk(j, gp, gm, alphas, h_out):
    """Advance the N-segment channel over one chunk of symbols.

    j      : (N, 2, 2) complex128, segment unitaries, updated in place
    gp, gm : (N,) float64, sqrt(1 + gamma_n) and sqrt(1 - gamma_n)
    alphas : (Kc, N, 3) float64, rotation innovations for the chunk
    h_out  : (Kc, 2, 2) complex128, channel matrix at each symbol (pre-update)
    """
    kc = alphas.shape[0]
    n = j.shape[0]
    for k in range(kc):
        # product over segments, segment 1 applied first (rightmost factor)
        h00 = 1.0 + 0.0j
        h01 = 0.0 + 0.0j
        h10 = 0.0 + 0.0j
        h11 = 1.0 + 0.0j
        for m in range(n):
            a00 = gp[m] * j[m, 0, 0]
            a01 = gp[m] * j[m, 0, 1]
            a10 = gm[m] * j[m, 1, 0]
            a11 = gm[m] * j[m, 1, 1]
            t00 = a00 * h00 + a01 * h10
            t01 = a00 * h01 + a01 * h11
            t10 = a10 * h00 + a11 * h10
            t11 = a10 * h01 + a11 * h11
            h00, h01, h10, h11 = t00, t01, t10, t11
        h_out[k, 0, 0] = h00
        h_out[k, 0, 1] = h01
        h_out[k, 1, 0] = h10
        h_out[k, 1, 1] = h11

        # random-walk update of every segment unitary
        for m in range(n):
            a1 = alphas[k, m, 0]
            a2 = alphas[k, m, 1]
            a3 = alphas[k, m, 2]
            r = math.sqrt(a1 * a1 + a2 * a2 + a3 * a3)
            c = math.cos(r)
            s = math.sin(r) / r if r >= 1e-12 else 1.0
            e00 = complex(c, -s * a1)
            e01 = complex(-s * a3, -s * a2)
            e10 = complex(s * a3, -s * a2)
            e11 = complex(c, s * a1)
            j00 = j[m, 0, 0]
            j01 = j[m, 0, 1]
            j10 = j[m, 1, 0]
            j11 = j[m, 1, 1]
            j[m, 0, 0] = e00 * j00 + e01 * j10
            j[m, 0, 1] = e00 * j01 + e01 * j11
            j[m, 1, 0] = e10 * j00 + e11 * j10
            j[m, 1, 1] = e10 * j01 + e11 * j11


@njit(cache=True)
def gd_chunk(x, w, k0, mu1, mu2, stage_len, r_re, r_im, points, decided, mode):
    """One chunk of a per-symbol gradient-descent equalizer (MCMA or DDLMS).

    x       : (2, Kc) received symbols
    w       : (2, 2) complex128 equalizer taps, updated in place
    k0      : global index of the first symbol in the chunk (stage switching)
    decided : (2, Kc) output, nearest-point slicing of y = w @ x
    mode    : MODE_MCMA or MODE_DDLMS

    Returns the global index at which the tap norm first exceeded the blowup
    limit, or -1.  After a blowup the taps are frozen but slicing continues so
    the output stream keeps its length.
    """
    kc = x.shape[1]
    mp = points.shape[0]
    blown = -1
    limit_sq = 1e12  # frob(w)^2 for frob(w) > 1e6
    for k in range(kc):
        x0 = x[0, k]
        x1 = x[1, k]
        y0 = w[0, 0] * x0 + w[0, 1] * x1
        y1 = w[1, 0] * x0 + w[1, 1] * x1

        best0 = 1e300
        best1 = 1e300
        p0 = points[0]
        p1 = points[0]
        for p in range(mp):
            c = points[p]
            dr = y0.real - c.real
            di = y0.imag - c.imag
            d = dr * dr + di * di
            if d < best0:
                best0 = d
                p0 = c
            dr = y1.real - c.real
            di = y1.imag - c.imag
            d = dr * dr + di * di
            if d < best1:
                best1 = d
                p1 = c
        decided[0, k] = p0
        decided[1, k] = p1

        if blown >= 0:
            continue
        mu = mu1 if (k0 + k) < stage_len else mu2
        if mode == MODE_MCMA:
            e0 = complex(
                y0.real * (r_re - y0.real * y0.real),
                y0.imag * (r_im - y0.imag * y0.imag),
            )
            e1 = complex(
                y1.real * (r_re - y1.real * y1.real),
                y1.imag * (r_im - y1.imag * y1.imag),
            )
        else:
            e0 = p0 - y0
            e1 = p1 - y1
        cx0 = x0.conjugate()
        cx1 = x1.conjugate()
        w[0, 0] += mu * e0 * cx0
        w[0, 1] += mu * e0 * cx1
        w[1, 0] += mu * e1 * cx0
        w[1, 1] += mu * e1 * cx1
        nw = (
            w[0, 0].real ** 2 + w[0, 0].imag ** 2
            + w[0, 1].real ** 2 + w[0, 1].imag ** 2
            + w[1, 0].real ** 2 + w[1, 0].imag ** 2
            + w[1, 1].real ** 2 + w[1, 1].imag ** 2
        )
        if nw > limit_sq:
            blown = k0 + k
    return blown


@njit(cache=True)
def ml_chunk(x, h, cand0, cand1, out0, out1):
    """Known-channel ML detection: argmin over all symbol pairs of |x - H c|^2.

    x            : (2, K) received symbols
    h            : (K, 2, 2) true channel at each symbol
    cand0, cand1 : (P,) candidate pair components (P = M^2 pairs)
    out0, out1   : (K,) decided components
    """
    kk = x.shape[1]
    pp = cand0.shape[0]
    for k in range(kk):
        h00 = h[k, 0, 0]
        h01 = h[k, 0, 1]
        h10 = h[k, 1, 0]
        h11 = h[k, 1, 1]
        x0 = x[0, k]
        x1 = x[1, k]
        best = 1e300
        bi = 0
        for p in range(pp):
            v0 = x0 - (h00 * cand0[p] + h01 * cand1[p])
            v1 = x1 - (h10 * cand0[p] + h11 * cand1[p])
            d = v0.real * v0.real + v0.imag * v0.imag \
                + v1.real * v1.real + v1.imag * v1.imag
            if d < best:
                best = d
                bi = p
        out0[k] = cand0[bi]
        out1[k] = cand1[bi]
