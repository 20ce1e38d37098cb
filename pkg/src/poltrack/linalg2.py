"""Closed-form complex 2x2 linear algebra.

Every matrix in this package is a numpy ``(2, 2)`` complex128 array and every
dual-polarization symbol a ``(2,)`` complex128 vector, so the kernels below are
written exactly for that size: analytic SVD, adjugate inverse, Pauli-generator
matrix exponential, and Haar-uniform unitary sampling.  No iterative LAPACK
routines are involved, which keeps the per-call cost tiny and the results
deterministic across BLAS builds.

Conventions
-----------
* ``svd2(m)`` returns ``(u, sigma, v)`` with ``m = u @ diag(sigma) @ v.conj().T``
  and ``sigma[0] >= sigma[1] >= 0``.
* ``pauli_exp(alpha)`` evaluates ``exp(-1j * alpha . sigma_vec)`` for the
  generator basis ``sigma_1 = diag(1, -1)``, ``sigma_2 = [[0, 1], [1, 0]]``,
  ``sigma_3 = [[0, -1j], [1j, 0]]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrix

__all__ = [
    "Svd2",
    "frob_norm",
    "inv2",
    "svd2",
    "pauli_exp",
    "haar_unitary",
    "is_unitary",
    "nearest_unitary",
]

# Condition number beyond which a 2x2 inverse is numerically meaningless
# (roughly half the double-precision dynamic range).
COND_LIMIT = 1e12

# Below this fraction of sigma_max a singular direction is treated as null and
# the corresponding left singular vector is completed by orthogonal complement.
RANK_TOL = 1e-14

_I2 = np.eye(2, dtype=np.complex128)


@dataclass(frozen=True)
class Svd2:
    """SVD factors of a 2x2 complex matrix: ``u @ diag(sigma) @ v.conj().T``."""

    u: np.ndarray
    sigma: np.ndarray  # (2,) real, descending
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.conj().T


def frob_norm(m: np.ndarray) -> float:
    """Frobenius norm sqrt(sum |m_ij|^2)."""
    m = np.asarray(m)
    return float(np.sqrt((m.real**2 + m.imag**2).sum()))


def is_unitary(m: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff ||m^H m - I||_F <= tol."""
    m = np.asarray(m, dtype=np.complex128)
    return frob_norm(m.conj().T @ m - _I2) <= tol


def _gram_entries(m: np.ndarray) -> tuple[float, float, complex]:
    """Entries (a, d, b) of the Hermitian Gram matrix m^H m."""
    c0 = m[:, 0]
    c1 = m[:, 1]
    a = float(c0.real @ c0.real + c0.imag @ c0.imag)
    d = float(c1.real @ c1.real + c1.imag @ c1.imag)
    b = complex(np.conj(c0) @ c1)
    return a, d, b


def inv2(m: np.ndarray) -> np.ndarray:
    """Inverse of a well-conditioned 2x2 matrix.

    Raises
    ------
    SingularMatrix
        If ``|det m| <= 1e-300`` or the condition number estimate exceeds
        ``COND_LIMIT``.  Callers that can tolerate a stale estimate (the
        sliding-window LS tracker) catch this and skip their update.
    """
    m = np.asarray(m, dtype=np.complex128)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    absdet = abs(det)
    if absdet <= 1e-300:
        raise SingularMatrix(f"2x2 determinant magnitude {absdet:.3e}")
    a, d, b = _gram_entries(m)
    lam_max = 0.5 * (a + d + np.hypot(a - d, 2.0 * abs(b)))
    # cond = sigma0/sigma1 = sigma0^2 / (sigma0*sigma1) = lam_max / |det|
    if lam_max / absdet > COND_LIMIT:
        raise SingularMatrix(f"2x2 condition estimate {lam_max / absdet:.3e}")
    return np.array(
        [[m[1, 1] / det, -m[0, 1] / det], [-m[1, 0] / det, m[0, 0] / det]],
        dtype=np.complex128,
    )


def _complement(v: np.ndarray) -> np.ndarray:
    """Unit vector orthogonal to the unit vector v (deterministic choice)."""
    return np.array([-np.conj(v[1]), np.conj(v[0])], dtype=np.complex128)


def svd2(m: np.ndarray) -> Svd2:
    """Analytic SVD of a 2x2 complex matrix.

    The eigendecomposition of the Hermitian Gram matrix ``m^H m`` is solved in
    closed form (stable quadratic, no cancellation in either eigenvalue
    branch); right singular vectors come from that, left ones from ``m @ v_i``
    re-orthonormalized.  When the second singular value is below
    ``RANK_TOL * sigma_max`` the second left vector is completed by the
    deterministic orthogonal complement, which keeps downstream Procrustes
    solutions well-defined for rank-deficient cross matrices.
    """
    m = np.asarray(m, dtype=np.complex128)
    a, d, b = _gram_entries(m)
    absb = abs(b)
    h = np.hypot(a - d, 2.0 * absb)
    lam_max = 0.5 * (a + d + h)

    if lam_max <= 0.0:  # zero matrix
        return Svd2(_I2.copy(), np.zeros(2), _I2.copy())

    # Eigenvector of the dominant eigenvalue, cancellation-free in each branch.
    if a >= d:
        v0 = np.array([0.5 * ((a - d) + h), np.conj(b)], dtype=np.complex128)
    else:
        v0 = np.array([b, 0.5 * ((d - a) + h)], dtype=np.complex128)
    n0 = np.sqrt((v0.real**2 + v0.imag**2).sum())
    if n0 == 0.0:  # Gram matrix proportional to identity
        v0 = np.array([1.0, 0.0], dtype=np.complex128)
    else:
        v0 = v0 / n0
    v1 = _complement(v0)

    sigma0 = float(np.sqrt(lam_max))
    u0 = m @ v0 / sigma0
    u0 = u0 / np.sqrt((u0.real**2 + u0.imag**2).sum())
    uc = _complement(u0)

    # sigma1 and the phase of u1 from the residual column, exact orthogonality
    # by construction even when sigma1/sigma0 is tiny.
    z = complex(np.conj(uc) @ (m @ v1))
    sigma1 = abs(z)
    if sigma1 > RANK_TOL * sigma0:
        u1 = uc * (z / sigma1)
    else:
        u1 = uc
        sigma1 = 0.0 if sigma1 < 1e-300 else sigma1

    u = np.column_stack([u0, u1])
    v = np.column_stack([v0, v1])
    return Svd2(u, np.array([sigma0, sigma1]), v)


def nearest_unitary(m: np.ndarray) -> np.ndarray:
    """Unitary polar factor u @ v^H, the Frobenius-nearest unitary matrix."""
    f = svd2(m)
    return f.u @ f.v.conj().T


def pauli_exp(alpha: np.ndarray) -> np.ndarray:
    """exp(-1j * (a1*sigma_1 + a2*sigma_2 + a3*sigma_3)) in closed form.

    With ``r = ||alpha||`` the result is ``cos(r) I - 1j sinc'(r) (alpha . sigma)``
    where ``sinc'(r) = sin(r)/r`` (series limit 1 below r = 1e-12).  The output
    is unitary to machine precision for any finite alpha.
    """
    a1, a2, a3 = (float(x) for x in alpha)
    r = np.sqrt(a1 * a1 + a2 * a2 + a3 * a3)
    c = np.cos(r)
    s = np.sin(r) / r if r >= 1e-12 else 1.0
    return np.array(
        [
            [c - 1j * s * a1, -1j * s * (a2 - 1j * a3)],
            [-1j * s * (a2 + 1j * a3), c + 1j * s * a1],
        ],
        dtype=np.complex128,
    )


def haar_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform draw from U(2).

    Ginibre matrix orthonormalized by Gram-Schmidt; the triangular factor's
    diagonal (the two column norms) is real-positive by construction, which is
    the normalization that makes the QR construction exactly Haar.
    """
    while True:
        z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        q0 = z[:, 0]
        r00 = np.sqrt((q0.real**2 + q0.imag**2).sum())
        if r00 < 1e-12:
            continue
        q0 = q0 / r00
        q1 = z[:, 1] - (np.conj(q0) @ z[:, 1]) * q0
        r11 = np.sqrt((q1.real**2 + q1.imag**2).sum())
        if r11 < 1e-12:
            continue
        return np.column_stack([q0, q1 / r11])
