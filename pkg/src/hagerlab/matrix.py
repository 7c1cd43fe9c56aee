"""Dense linear algebra for the Fourier discretization of ``hD + g``.

Row ``r`` of an assembled matrix is the Fourier mode ``j = r - N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NoConvergence, TruncationTooSmall
from .symbol import FourierSymbol

NOISE_FLOOR = 1e-14
DENSE_SVD_LIMIT = 2049
INVERSE_ITER_TOL = 1e-10
INVERSE_ITER_MAX = 200


def assemble_operator(symbol: FourierSymbol | None, h: float, N: int) -> np.ndarray:
    """``H[j, k] = h j [j = k] + g_hat[j - k]`` for ``j, k`` in ``[-N, N]``."""
    order = 0 if symbol is None else symbol.order
    if N < order:
        raise TruncationTooSmall(f"N = {N} is below the symbol order {order}")
    dim = 2 * N + 1
    H = np.zeros((dim, dim), dtype=complex)
    H[np.diag_indices(dim)] = h * np.arange(-N, N + 1)
    if symbol is not None:
        for m, c in symbol.coeffs.items():
            # entries with j - k = m sit on the diagonal at offset k - j = -m
            idx = np.arange(max(0, m), min(dim, dim + m))
            H[idx, idx - m] += c
    return H


def sample_gaussian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """``dim x dim`` matrix of independent N_C(0, 1) entries (``E|a|^2 = scale^2``).

    Box-Muller: ``|a|^2 = -ln(1 - u1)`` is Exp(1) and the phase ``2 pi u2`` is
    uniform, so real and imaginary parts are independent N(0, 1/2).
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    u = rng.random((2, dim, dim))
    radius = np.sqrt(-np.log1p(-u[0]))
    angle = 2.0 * math.pi * u[1]
    out = radius * (np.cos(angle) + 1j * np.sin(angle))
    if scale != 1.0:
        out *= scale
    return out


def eigenvalues(A: np.ndarray) -> np.ndarray:
    """All eigenvalues of a dense complex matrix, with multiplicity.

    LAPACK ``zgeev``: balancing, Householder reduction to Hessenberg form and
    implicitly shifted QR.
    """
    A = np.asarray(A)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    try:
        return sla.eigvals(A, check_finite=False)
    except sla.LinAlgError as exc:
        raise NoConvergence(f"QR iteration failed: {exc}") from exc


@dataclass(frozen=True)
class SingularTriplet:
    sigma: float
    right: np.ndarray
    left: np.ndarray
    at_noise_floor: bool = False


def _bidiagonal_parts(B: np.ndarray):
    """Diagonal and superdiagonal if ``B`` is upper bidiagonal, else ``None``."""
    d = np.diagonal(B).copy()
    e = np.diagonal(B, 1).copy()
    if np.count_nonzero(np.tril(B, -1)) or np.count_nonzero(np.triu(B, 2)):
        return None
    return d, e


def _phases(vals: np.ndarray) -> np.ndarray:
    mag = np.abs(vals)
    out = np.ones_like(vals)
    nz = mag > 0
    out[nz] = vals[nz] / mag[nz]
    return out


def _bidiagonal_triplets(d: np.ndarray, e: np.ndarray, count: int):
    """Smallest singular triplets of the upper bidiagonal ``B = diag(d) + diag(e, 1)``.

    ``B = U R V*`` with diagonal unitaries ``U, V`` and real non-negative
    bidiagonal ``R``.  The singular values of ``R`` are the non-negative
    eigenvalues of the Golub-Kahan tridiagonal with zero diagonal and
    off-diagonal ``(r_1, s_1, r_2, s_2, ..., r_n)``; its eigenvector
    interleaves right and left singular vectors.
    """
    n = d.size
    u = np.empty(n, dtype=complex)
    v = np.empty(n, dtype=complex)
    pd, pe = _phases(d), _phases(e)
    v[0] = 1.0
    for j in range(n):
        u[j] = pd[j] * v[j]
        if j + 1 < n:
            v[j + 1] = u[j] * np.conj(pe[j])
    r, s = np.abs(d), np.abs(e)
    off = np.empty(2 * n - 1)
    off[0::2] = r
    off[1::2] = s
    zero = np.zeros(2 * n)
    top = sla.eigvalsh_tridiagonal(zero, off, select="i", select_range=(2 * n - 1, 2 * n - 1))[0]
    # pairs -sigma_0 and +sigma_0 sit at indices n-1 and n; both are computed
    # because inverse iteration may return any mix of them (or, when B is
    # exactly singular, a vector carrying only its left or its right half)
    vals, vecs = sla.eigh_tridiagonal(zero, off, select="i", select_range=(n - 1, n + count - 1))
    out = []
    for k in range(count):
        sigma = float(abs(vals[k + 1]))
        cols = [0, 1] if k == 0 else [k + 1]
        vr = max((vecs[0::2, c] for c in cols), key=np.linalg.norm)
        ul = max((vecs[1::2, c] for c in cols), key=np.linalg.norm)
        vr = vr / np.linalg.norm(vr)
        ul = ul / np.linalg.norm(ul)
        # both halves come from the eigenvector (accurate componentwise); R vr
        # itself loses relative accuracy when sigma is tiny, so it only fixes the sign
        Rv = r * vr
        Rv[:-1] += s * vr[1:]
        if np.dot(ul, Rv) < 0:
            ul = -ul
        out.append((sigma, v * vr, u * ul))
    return out, float(top)


def _dense_triplets(B: np.ndarray, count: int):
    try:
        U, s, Vh = sla.svd(B, check_finite=False)
    except sla.LinAlgError as exc:
        raise NoConvergence(f"SVD failed: {exc}") from exc
    n = s.size
    out = []
    for k in range(count):
        i = n - 1 - k
        out.append((float(s[i]), Vh[i].conj(), U[:, i]))
    return out, float(s[0])


def _inverse_iteration_triplets(B: np.ndarray, count: int):
    """Subspace inverse iteration on ``B* B`` using one LU factorization of ``B``."""
    n = B.shape[0]
    lu = sla.lu_factor(B, check_finite=False)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((n, count)) + 1j * rng.standard_normal((n, count))
    X, _ = np.linalg.qr(X)
    prev = None
    for _ in range(INVERSE_ITER_MAX):
        Y = sla.lu_solve(lu, sla.lu_solve(lu, X, trans=2, check_finite=False), check_finite=False)
        X, _ = np.linalg.qr(Y)
        BX = B @ X
        # Rayleigh-Ritz on span(X)
        Us, s, Vh = np.linalg.svd(BX, full_matrices=False)
        if prev is not None and np.all(np.abs(s - prev) <= INVERSE_ITER_TOL * np.maximum(s, 1e-300)):
            break
        prev = s
    else:
        raise NoConvergence("inverse iteration for the smallest singular values did not converge")
    order = np.argsort(s)
    right = X @ Vh.conj().T
    out = [(float(s[i]), right[:, i], Us[:, i]) for i in order]
    top = float(np.linalg.norm(B, 2)) if n <= DENSE_SVD_LIMIT else float(np.linalg.norm(B, "fro"))
    return out, top


def smallest_singular_triplets(A: np.ndarray, z: complex, count: int = 1) -> list[SingularTriplet]:
    """The ``count`` smallest singular triplets of ``A - z I``, ascending.

    Upper bidiagonal shifts (every first-order symbol ``c e^{-ix} + c0``) go
    through the Golub-Kahan tridiagonal; other matrices through a full SVD,
    or inverse iteration above 2049 rows.  ``right`` and ``left`` satisfy
    ``(A - z) right = sigma left``.
    """
    if count not in (1, 2):
        raise ValueError("count must be 1 or 2")
    A = np.asarray(A)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    B = A - complex(z) * np.eye(A.shape[0])
    parts = _bidiagonal_parts(B)
    if parts is not None and B.shape[0] > count:
        raw, top = _bidiagonal_triplets(*parts, count)
    elif B.shape[0] <= DENSE_SVD_LIMIT:
        raw, top = _dense_triplets(B, count)
    else:
        raw, top = _inverse_iteration_triplets(B, count)
    floor = NOISE_FLOOR * top
    return [SingularTriplet(sigma=s, right=r, left=l, at_noise_floor=s < floor) for s, r, l in raw]


def operator_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A, 2))
