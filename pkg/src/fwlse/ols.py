"""Full OLS regression of ``y`` on ``(X1 | X2)``.

Coefficients are ordered with the nuisance block ``X1`` first and the focal
block ``X2`` second; the focal coefficients are ``beta[K:K+L]``. No intercept
is added implicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import linalg
from .errors import (
    DimensionMismatch,
    InputError,
    RankDeficient,
    TooFewRows,
    UnorderedTime,
)


@dataclass(frozen=True)
class DesignSpec:
    """Response, nuisance block, focal block and optional annotations.

    ``x1`` may have zero columns. ``names`` optionally labels the columns of
    ``(x1 | x2)`` for error messages and output tables.
    """

    y: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    cluster_ids: Optional[Sequence] = None
    time_index: Optional[Sequence[int]] = None
    names: Optional[Sequence[str]] = None

    def __post_init__(self):
        y = linalg.as_vector(self.y, "y")
        n = y.shape[0]
        x2 = linalg.as_matrix(self.x2, "x2")
        if np.size(self.x1) == 0:
            x1 = np.zeros((n, 0))
        else:
            x1 = linalg.as_matrix(self.x1, "x1")
        for name, block in (("x1", x1), ("x2", x2)):
            if block.shape[0] != n:
                raise DimensionMismatch(
                    f"{name} has {block.shape[0]} rows, y has {n}"
                )
        if x2.shape[1] < 1:
            raise DimensionMismatch("focal block x2 needs at least one column")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)

        if self.cluster_ids is not None:
            ids = tuple(self.cluster_ids)
            if len(ids) != n:
                raise DimensionMismatch(f"{len(ids)} cluster ids for {n} rows")
            if len(set(ids)) < 2:
                raise InputError("cluster_ids must contain at least 2 labels")
            object.__setattr__(self, "cluster_ids", ids)
        if self.time_index is not None:
            t = np.asarray(self.time_index)
            if t.shape != (n,):
                raise DimensionMismatch(f"time_index must have {n} entries")
            if np.any(np.diff(t) <= 0):
                raise UnorderedTime("time_index must be strictly increasing")
            object.__setattr__(self, "time_index", tuple(int(v) for v in t))
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != self.p:
                raise DimensionMismatch(f"{len(names)} names for {self.p} columns")
            object.__setattr__(self, "names", names)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def K(self):
        return self.x1.shape[1]

    @property
    def L(self):
        return self.x2.shape[1]

    @property
    def p(self):
        return self.K + self.L

    @property
    def design(self):
        return np.hstack([self.x1, self.x2])


@dataclass(frozen=True)
class OlsFit:
    beta: np.ndarray
    residuals: np.ndarray
    leverages: np.ndarray
    xtx_inv: np.ndarray
    n: int
    p: int
    focal_offset: int
    focal_len: int
    sigma2_hat: float
    names: Optional[tuple] = field(default=None, compare=False)

    @property
    def focal_slice(self):
        return slice(self.focal_offset, self.focal_offset + self.focal_len)

    @property
    def focal_beta(self):
        return self.beta[self.focal_slice]

    @property
    def df_resid(self):
        return self.n - self.p


def fit_matrix(X, y, focal_offset=0, focal_len=None, names=None):
    """Fit ``y`` on an explicit design ``X`` and flag a block as focal.

    ``sigma2_hat`` always uses the denominator ``n - X.shape[1]``.
    """
    X = linalg.as_matrix(X, "X")
    y = linalg.as_vector(y, "y")
    n, p = X.shape
    if y.shape[0] != n:
        raise DimensionMismatch(f"X has {n} rows, y has {y.shape[0]}")
    if focal_len is None:
        focal_len = p - focal_offset
    if not (0 <= focal_offset and focal_len >= 1 and focal_offset + focal_len <= p):
        raise DimensionMismatch("focal block does not fit inside the design")
    if n <= p:
        raise TooFewRows(f"need more rows than columns (n={n}, p={p})")
    try:
        Q, R = linalg.qr_factor(X)
    except RankDeficient as exc:
        raise exc.with_names(names) if names is not None else exc
    beta = solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    return OlsFit(
        beta=beta,
        residuals=resid,
        leverages=np.einsum("ij,ij->i", Q, Q),
        xtx_inv=linalg.xtx_inverse_from_r(R),
        n=n,
        p=p,
        focal_offset=focal_offset,
        focal_len=focal_len,
        sigma2_hat=float(resid @ resid) / (n - p),
        names=tuple(names) if names is not None else None,
    )


def fit(spec: DesignSpec) -> OlsFit:
    """Full regression of ``spec.y`` on ``(spec.x1 | spec.x2)``."""
    return fit_matrix(
        spec.design, spec.y, focal_offset=spec.K, focal_len=spec.L, names=spec.names
    )


def focal_block(fit: OlsFit, cov):
    """Extract the ``L x L`` block of a ``p x p`` matrix that belongs to ``X2``."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (fit.p, fit.p):
        raise DimensionMismatch(
            f"covariance is {cov.shape}, expected ({fit.p}, {fit.p})"
        )
    s = fit.focal_slice
    return cov[s, s].copy()
