"""Partial regressions and numerical checks of full/partial equivalence.

The partial regression residualizes ``y`` and ``X2`` on ``X1`` and fits
``y_tilde`` on ``x2_tilde``. In exact arithmetic it reproduces the focal
coefficients and the residual vector of the full fit, and therefore every
sandwich covariance whose meat is a function of the residuals alone
(HC0, Liang-Zeger, fixed-weight HAC). Estimators scaled by ``n / (n - p)``
or ``1 / (n - p)`` agree after multiplying each side by its own ``n - p``.
Leverage-weighted HC2..HC4 have no such relation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import linalg, vcov
from .errors import DimensionMismatch, RankDeficient, UnsupportedKind
from .ols import DesignSpec, OlsFit, fit, fit_matrix

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class PartialFit:
    """Result of the residualize-then-fit procedure.

    ``design`` is the matrix the inner fit actually used: ``x2_tilde``, or
    ``x2_tilde`` with a trailing ones column when ``stata_compat`` is set.
    The focal coefficients are always the first ``L`` entries.
    """

    y_tilde: np.ndarray
    x2_tilde: np.ndarray
    fit: OlsFit
    design: np.ndarray
    stata_compat: bool = False

    @property
    def beta(self):
        return self.fit.focal_beta

    @property
    def residuals(self):
        return self.fit.residuals


def _names(spec, start, stop, suffix=""):
    if spec.names is None:
        return None
    return tuple(f"{nm}{suffix}" for nm in spec.names[start:stop])


def partial_fit(spec: DesignSpec, stata_compat=False) -> PartialFit:
    """Residualize on ``spec.x1`` and fit ``y_tilde`` on ``x2_tilde``.

    With ``stata_compat`` an intercept column is appended to the inner
    design, so ``sigma2_hat`` uses ``n - L - 1`` as Stata's
    ``regress y_res x_res`` does; otherwise the denominator is ``n - L``.
    """
    if spec.K:
        try:
            linalg.qr_factor(spec.x1)
        except RankDeficient as exc:
            raise exc.with_names(_names(spec, 0, spec.K)) from None
        y_tilde = linalg.residualize(spec.x1, spec.y)
        x2_tilde = linalg.residualize(spec.x1, spec.x2)
    else:
        y_tilde = spec.y.copy()
        x2_tilde = spec.x2.copy()
    names = _names(spec, spec.K, spec.p, "_res")
    design = x2_tilde
    if stata_compat:
        design = np.hstack([x2_tilde, np.ones((spec.n, 1))])
        names = None if names is None else names + ("_cons",)
    inner = fit_matrix(design, y_tilde, focal_offset=0, focal_len=spec.L, names=names)
    return PartialFit(y_tilde, x2_tilde, inner, design, stata_compat)


def alternate_form_fit(spec: DesignSpec):
    """Fit the raw ``y`` on ``x2_tilde``.

    The coefficients equal the full-fit focal coefficients, but the
    residuals are ``y - x2_tilde beta`` and in general differ from the
    full-fit residuals by the projection of ``y`` onto ``X1``.
    """
    x2_tilde = linalg.residualize(spec.x1, spec.x2) if spec.K else spec.x2
    return linalg.least_squares_solve(x2_tilde, spec.y)


@dataclass(frozen=True)
class Check:
    max_abs_diff: float
    passed: bool


def _max_abs(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _check_same_design(full: OlsFit, partial: PartialFit):
    if full.focal_len != partial.fit.focal_len or full.n != partial.fit.n:
        raise DimensionMismatch("full and partial fits come from different designs")


def coefficient_equivalence(full: OlsFit, partial: PartialFit, tol=DEFAULT_TOL):
    """Compare focal coefficients; passes iff every component satisfies
    ``|b_full - b_partial| <= tol * (1 + |b_full|)``."""
    _check_same_design(full, partial)
    diff = np.abs(full.focal_beta - partial.beta)
    ok = bool(np.all(diff <= tol * (1.0 + np.abs(full.focal_beta))))
    return Check(_max_abs(diff), ok)


def residual_equivalence(full: OlsFit, partial: PartialFit, tol=DEFAULT_TOL):
    """Compare residual vectors; scale is ``1 + max|e_full|``.

    In ``stata_compat`` mode the partial residuals also absorb the fitted
    intercept, which is zero up to rounding whenever ``X1`` spans the
    constant.
    """
    _check_same_design(full, partial)
    diff = _max_abs(full.residuals - partial.residuals)
    return Check(diff, diff <= tol * (1.0 + _max_abs(full.residuals)))


class Status(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    NO_RELATION = "no relation asserted"


@dataclass(frozen=True)
class EstimatorComparison:
    """Full vs partial focal covariance for one estimator kind.

    ``scale_full`` and ``scale_partial`` are the multipliers applied before
    comparing: both 1 for raw comparisons, ``n - p`` of each fit for the
    degrees-of-freedom scaled ones.
    """

    kind: vcov.VcovKind
    full: vcov.CovEstimate
    partial: vcov.CovEstimate
    scale_full: float
    scale_partial: float
    max_abs_diff: float
    status: Status

    @property
    def passed(self):
        return self.status is not Status.FAIL


@dataclass(frozen=True)
class EquivalenceReport:
    full_fit: OlsFit
    partial: PartialFit
    coefficients: Check
    residuals: Check
    records: List[EstimatorComparison]
    tolerance: float

    @property
    def coef_max_abs_diff(self):
        return self.coefficients.max_abs_diff

    @property
    def residual_max_abs_diff(self):
        return self.residuals.max_abs_diff

    @property
    def passed(self):
        checks = [self.coefficients.passed, self.residuals.passed]
        return all(checks) and all(r.passed for r in self.records)


def _df_scaled(kind):
    if isinstance(kind, vcov.Homoskedastic):
        return True
    if isinstance(kind, vcov.HC):
        return kind.variant == 1
    if isinstance(kind, vcov.Cluster):
        return kind.correction is vcov.ClusterCorrection.G_DF
    if isinstance(kind, vcov.Hac):
        return kind.df_adjust
    return False


def _compare(spec, full_fit, partial, kind, tol, allow_unasserted):
    unasserted = isinstance(kind, vcov.HC) and kind.variant >= 2
    if unasserted and not allow_unasserted:
        raise UnsupportedKind(
            f"{kind.label} has no full/partial equivalence; nothing to certify"
        )
    est_full = vcov.estimate(
        full_fit, spec.design, kind, spec.cluster_ids, spec.time_index
    )
    est_part = vcov.estimate(
        partial.fit, partial.design, kind, spec.cluster_ids, spec.time_index
    )
    if _df_scaled(kind):
        s_full, s_part = float(full_fit.df_resid), float(partial.fit.df_resid)
    else:
        s_full = s_part = 1.0
    a = s_full * est_full.matrix
    b = s_part * est_part.matrix
    diff = _max_abs(a - b)
    if unasserted:
        status = Status.NO_RELATION
    elif diff <= tol * (1.0 + _max_abs(a)):
        status = Status.PASS
    else:
        status = Status.FAIL
    return EstimatorComparison(kind, est_full, est_part, s_full, s_part, diff, status)


def covariance_equivalence(
    spec: DesignSpec,
    kinds: Sequence[vcov.VcovKind],
    tol=DEFAULT_TOL,
    stata_compat=False,
    allow_unasserted=True,
) -> EquivalenceReport:
    """Fit both regressions and compare coefficients, residuals and covariances.

    ``kinds`` is evaluated in order. HC2..HC4 are computed on both sides and
    recorded with status ``NO_RELATION``; pass ``allow_unasserted=False`` to
    reject them with :class:`UnsupportedKind` instead.
    """
    full_fit = fit(spec)
    partial = partial_fit(spec, stata_compat=stata_compat)
    records = [
        _compare(spec, full_fit, partial, kind, tol, allow_unasserted)
        for kind in kinds
    ]
    return EquivalenceReport(
        full_fit=full_fit,
        partial=partial,
        coefficients=coefficient_equivalence(full_fit, partial, tol),
        residuals=residual_equivalence(full_fit, partial, tol),
        records=records,
        tolerance=tol,
    )


@dataclass(frozen=True)
class ProjectionCheck:
    """Deviations in the block-inverse and hat-matrix identities.

    ``block_inverse_rel``: ``max|S22 - (X2t'X2t)^{-1}| / max|S22|`` where
    ``S22`` is the focal block of ``(X'X)^{-1}``. ``hat_decomposition``:
    ``max|H - H1 - H2t|``. ``hat_orthogonality``: ``max|H1 H2t|``.
    """

    block_inverse_rel: float
    hat_decomposition: float
    hat_orthogonality: float


def projection_identities(spec: DesignSpec) -> ProjectionCheck:
    """Evaluate the block-inverse and hat-matrix identities (forms n x n matrices)."""
    X = spec.design
    x2_tilde = linalg.residualize(spec.x1, spec.x2) if spec.K else spec.x2
    s22 = linalg.xtx_inverse(X)[spec.K :, spec.K :]
    direct = linalg.xtx_inverse(x2_tilde)
    H = linalg.hat_matrix(X)
    H1 = linalg.hat_matrix(spec.x1)
    H2 = linalg.hat_matrix(x2_tilde)
    return ProjectionCheck(
        block_inverse_rel=_max_abs(s22 - direct) / _max_abs(s22),
        hat_decomposition=_max_abs(H - H1 - H2),
        hat_orthogonality=_max_abs(H1 @ H2),
    )
