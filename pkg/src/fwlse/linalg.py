"""Dense least-squares primitives built on a Householder QR factorization.

Matrices and vectors are plain ``numpy.ndarray`` values of dtype float64.
``as_matrix`` and ``as_vector`` validate shape and finiteness at the entry
points; everything downstream assumes validated input.

All solves go through ``numpy.linalg.qr`` (LAPACK ``geqrf``, Householder
reflections). ``X'X`` is never formed explicitly.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NonFiniteValue, RankDeficient

#: Relative threshold on ``|R_jj|`` below which a column counts as dependent.
RANK_TOL = 1e-12


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float array; 1-D input becomes a column."""
    arr = np.array(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains NaN or infinite entries")
    return arr


def as_vector(a, name="vector"):
    arr = np.array(a, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains NaN or infinite entries")
    return arr


def _collinear_with(X, j):
    # Columns before j are full rank by construction, so this solve is safe.
    if j == 0:
        return ()
    coef = np.linalg.lstsq(X[:, :j], X[:, j], rcond=None)[0]
    scale = np.max(np.abs(coef))
    if scale == 0.0:
        return ()
    return tuple(int(i) for i in np.flatnonzero(np.abs(coef) > 1e-8 * scale))


def qr_factor(X):
    """Reduced QR of a full-column-rank ``X``.

    Returns
    -------
    Q : ndarray, shape (n, p)
    R : ndarray, shape (p, p), upper triangular

    Raises
    ------
    RankDeficient
        If some ``|R_jj|`` falls below ``RANK_TOL`` times the largest one, or
        if ``p > n``.
    """
    n, p = X.shape
    if p == 0:
        raise DimensionMismatch("design has no columns")
    if p > n:
        raise RankDeficient(n, tuple(range(n)))
    Q, R = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(R))
    cutoff = RANK_TOL * diag.max()
    bad = np.flatnonzero(diag <= cutoff)
    if bad.size:
        j = int(bad[0])
        raise RankDeficient(j, _collinear_with(X, j))
    return Q, R


def _check_rows(X, M, what):
    if X.shape[0] != M.shape[0]:
        raise DimensionMismatch(
            f"{what}: row counts differ ({X.shape[0]} vs {M.shape[0]})"
        )


def least_squares_solve(X, y):
    """Minimize ``||y - X beta||_2`` for a full-column-rank ``X``.

    Parameters
    ----------
    X : array_like, shape (n, p)
    y : array_like, shape (n,)

    Returns
    -------
    beta : ndarray, shape (p,)
    residuals : ndarray, shape (n,)
    """
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    _check_rows(X, y, "least_squares_solve")
    Q, R = qr_factor(X)
    beta = solve_triangular(R, Q.T @ y)
    return beta, y - X @ beta


def residualize(X1, M):
    """Return ``(I - H1) M`` where ``H1`` projects onto the columns of ``X1``.

    An empty ``X1`` (zero columns) leaves ``M`` unchanged.
    """
    X1 = as_matrix(X1, "X1") if np.size(X1) else np.zeros((np.shape(M)[0], 0))
    M_arr = np.array(M, dtype=float)
    vector_in = M_arr.ndim == 1
    M_arr = as_matrix(M_arr, "M")
    _check_rows(X1, M_arr, "residualize")
    if X1.shape[1] == 0:
        out = M_arr.copy()
    else:
        Q, _ = qr_factor(X1)
        out = M_arr - Q @ (Q.T @ M_arr)
    return out[:, 0] if vector_in else out


def leverages(X):
    """Diagonal of the hat matrix ``X (X'X)^{-1} X'``."""
    Q, _ = qr_factor(as_matrix(X, "X"))
    return np.einsum("ij,ij->i", Q, Q)


def hat_matrix(X):
    """Orthogonal projector onto the column span of ``X`` (n by n)."""
    X = as_matrix(X, "X")
    if X.shape[1] == 0:
        return np.zeros((X.shape[0], X.shape[0]))
    Q, _ = qr_factor(X)
    return Q @ Q.T


def xtx_inverse_from_r(R):
    """``(R'R)^{-1} = R^{-1} R^{-T}``, symmetrized."""
    Rinv = solve_triangular(R, np.eye(R.shape[0]))
    out = Rinv @ Rinv.T
    return (out + out.T) / 2


def xtx_inverse(X):
    """Inverse of ``X'X`` computed from the triangular QR factor."""
    _, R = qr_factor(as_matrix(X, "X"))
    return xtx_inverse_from_r(R)
