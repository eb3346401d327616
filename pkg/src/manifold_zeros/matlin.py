"""Dense matrix kernel: sign-fixed QR, sym/skew split, Cholesky log-det and SPD solves.

Matrices are plain ``numpy.ndarray`` values; nothing here keeps state.
"""

import numpy as np
import scipy.linalg

from .errors import NonSquare, NotPositiveDefinite, RankDeficient, ShapeMismatch

PIVOT_FLOOR = 1e-13


def qf(M):
    """Thin QR of a full-column-rank matrix with a positive-diagonal R.

    Householder QR (LAPACK) followed by a column sign fix, so the factors
    are unique.

    Returns
    -------
    Q : (m, p) ndarray with orthonormal columns
    R : (p, p) upper-triangular ndarray, ``diag(R) > 0``
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ShapeMismatch(f"qf expects a matrix, got shape {M.shape}")
    m, p = M.shape
    if p > m:
        raise RankDeficient(f"qf needs cols <= rows, got {m}x{p}")
    Q, R = np.linalg.qr(M, mode="reduced")
    d = np.diagonal(R)
    scale = np.linalg.norm(M)
    if scale == 0.0 or np.min(np.abs(d)) <= PIVOT_FLOOR * scale:
        raise RankDeficient("matrix is numerically rank deficient")
    s = np.where(d < 0.0, -1.0, 1.0)
    return Q * s, R * s[:, None]


def sym(A):
    A = np.asarray(A)
    return 0.5 * (A + A.T)


def skew(A):
    A = np.asarray(A)
    return 0.5 * (A - A.T)


def sym_skew_split(A):
    """Split a square matrix into its symmetric and antisymmetric parts."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {A.shape}")
    return sym(A), skew(A)


def cholesky(X):
    """Lower Cholesky factor; raises NotPositiveDefinite on a non-positive pivot."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {X.shape}")
    try:
        L = scipy.linalg.cholesky(X, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if np.any(np.diagonal(L) <= 0.0):
        raise NotPositiveDefinite("non-positive Cholesky pivot")
    return L


def chol_logdet(X):
    """Return ``(ln det X, L)`` with ``L @ L.T == X``."""
    L = cholesky(X)
    return 2.0 * float(np.sum(np.log(np.diagonal(L)))), L


def spd_solve(X, B, factor=None):
    """Solve ``X @ Y = B`` for SPD ``X``. A precomputed lower factor may be passed."""
    L = cholesky(X) if factor is None else factor
    B = np.asarray(B, dtype=float)
    if B.shape[0] != L.shape[0]:
        raise ShapeMismatch(f"cannot solve {L.shape} system with rhs {B.shape}")
    return scipy.linalg.cho_solve((L, True), B, check_finite=False)
