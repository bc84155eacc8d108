"""Sandwich covariance estimators for an :class:`~fwlse.ols.OlsFit`.

Every estimator has the form ``bread @ meat @ bread`` with
``bread = (X'X)^{-1}`` taken from the fit; they differ only in the meat:

* homoskedastic: ``sigma2_hat * (X'X)^{-1}`` (no meat)
* HC0..HC4: ``X' diag(a_i e_i^2) X`` with leverage-based ``a_i``
* cluster (Liang-Zeger): ``sum_g (X_g' e_g)(X_g' e_g)'``
* HAC: ``sum_{|i-j|<=B} w_{|i-j|} e_i e_j x_i x_j'``
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    InputError,
    InvalidWeights,
    LeverageOne,
    MissingClusterId,
    SingleClusterWithCorrection,
    UnorderedTime,
    WeightsTooLong,
)
from .ols import OlsFit, focal_block

LEVERAGE_TOL = 1e-12


class ClusterCorrection(enum.Enum):
    NONE = "none"
    G = "g"  # G / (G - 1)
    G_DF = "g-df"  # G / (G - 1) * (n - 1) / (n - p), the Stata default

    def factor(self, G, n, p):
        if self is ClusterCorrection.NONE:
            return 1.0
        if G < 2:
            raise SingleClusterWithCorrection(
                f"correction {self.value!r} needs at least 2 clusters, got {G}"
            )
        f = G / (G - 1)
        if self is ClusterCorrection.G_DF:
            f *= (n - 1) / (n - p)
        return f


@dataclass(frozen=True)
class Homoskedastic:
    @property
    def label(self):
        return "homoskedastic"


@dataclass(frozen=True)
class HC:
    variant: int = 0

    def __post_init__(self):
        if self.variant not in (0, 1, 2, 3, 4):
            raise InputError(f"HC variant must be 0..4, got {self.variant!r}")

    @property
    def label(self):
        return f"HC{self.variant}"


@dataclass(frozen=True)
class Cluster:
    correction: ClusterCorrection = ClusterCorrection.NONE

    @property
    def label(self):
        return f"cluster[{self.correction.value}]"


@dataclass(frozen=True)
class Hac:
    weights: Tuple[float, ...]
    df_adjust: bool = False

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        check_weights(self.weights)

    @classmethod
    def bartlett(cls, lag, df_adjust=False):
        return cls(tuple(bartlett_weights(lag)), df_adjust)

    @property
    def lag(self):
        return len(self.weights) - 1

    @property
    def label(self):
        return f"HAC[lag={self.lag}{', df-adjusted' if self.df_adjust else ''}]"


VcovKind = Union[Homoskedastic, HC, Cluster, Hac]


@dataclass(frozen=True)
class CovEstimate:
    """A covariance estimate: focal block plus the full ``p x p`` matrix.

    ``negative_diagonal`` is set when some diagonal entry of ``full_matrix``
    is below ``-1e-12``; this can happen for HAC meats built from arbitrary
    weights and is reported as-is, never clamped.
    """

    kind: VcovKind
    matrix: np.ndarray
    full_matrix: np.ndarray
    negative_diagonal: bool = False

    @property
    def std_errors(self):
        return np.sqrt(np.clip(np.diag(self.matrix), 0.0, None))


def _package(fit, kind, full):
    full = (full + full.T) / 2
    return CovEstimate(
        kind=kind,
        matrix=focal_block(fit, full),
        full_matrix=full,
        negative_diagonal=bool(np.any(np.diag(full) < -1e-12)),
    )


def _check_design(fit, design):
    X = np.asarray(design, dtype=float)
    if X.shape != (fit.n, fit.p):
        raise DimensionMismatch(
            f"design is {X.shape}, fit expects ({fit.n}, {fit.p})"
        )
    return X


def _sandwich(fit, meat):
    B = fit.xtx_inv
    return B @ meat @ B


def homoskedastic_cov(fit: OlsFit) -> CovEstimate:
    return _package(fit, Homoskedastic(), fit.sigma2_hat * fit.xtx_inv)


def hc_weights(fit: OlsFit, variant):
    """Per-observation meat multipliers ``a_i`` for HC0..HC4.

    HC1 uses ``a_i = 1`` here; its ``n / (n - p)`` factor is applied to the
    whole matrix by :func:`hc_cov`.
    """
    if variant in (0, 1):
        return np.ones(fit.n)
    h = fit.leverages
    if np.any(h >= 1.0 - LEVERAGE_TOL):
        i = int(np.argmax(h))
        raise LeverageOne(
            f"HC{variant} undefined: observation {i} has leverage {h[i]:.17g}"
        )
    if variant == 2:
        return 1.0 / (1.0 - h)
    if variant == 3:
        return 1.0 / (1.0 - h) ** 2
    delta = np.minimum(4.0, fit.n * h / fit.p)
    return 1.0 / (1.0 - h) ** delta


def hc_cov(fit: OlsFit, design, variant=0) -> CovEstimate:
    """Heteroskedasticity-robust covariance, HC0 through HC4."""
    kind = HC(variant)
    X = _check_design(fit, design)
    a = hc_weights(fit, variant)
    # Same score cross-product as the cluster and HAC paths, so HC0 agrees
    # with singleton clusters and lag-0 HAC bit for bit.
    s = X * (np.sqrt(a) * fit.residuals)[:, None]
    full = _sandwich(fit, s.T @ s)
    full = (full + full.T) / 2
    if variant == 1:
        full = full * (fit.n / (fit.n - fit.p))
    return _package(fit, kind, full)


def cluster_codes(cluster_ids):
    """Map labels to ``0..G-1`` in order of first appearance."""
    codes = {}
    out = np.empty(len(cluster_ids), dtype=np.intp)
    for i, label in enumerate(cluster_ids):
        if label is None or (isinstance(label, float) and np.isnan(label)):
            raise MissingClusterId(f"row {i} has no cluster id")
        out[i] = codes.setdefault(label, len(codes))
    return out, len(codes)


def cluster_cov(
    fit: OlsFit,
    design,
    cluster_ids: Sequence,
    correction: ClusterCorrection = ClusterCorrection.NONE,
) -> CovEstimate:
    """Liang-Zeger cluster-robust covariance.

    Grouping is by label; rows need not be sorted by cluster.
    """
    correction = ClusterCorrection(correction)
    X = _check_design(fit, design)
    if len(cluster_ids) != fit.n:
        raise DimensionMismatch(f"{len(cluster_ids)} cluster ids for {fit.n} rows")
    codes, G = cluster_codes(cluster_ids)
    factor = correction.factor(G, fit.n, fit.p)
    scores = X * fit.residuals[:, None]
    sums = np.zeros((G, fit.p))
    np.add.at(sums, codes, scores)
    full = _sandwich(fit, sums.T @ sums)
    full = (full + full.T) / 2 * factor
    return _package(fit, Cluster(correction), full)


def bartlett_weights(lag):
    """Bartlett kernel weights ``1 - m / (lag + 1)`` for ``m = 0..lag``."""
    lag = int(lag)
    if lag < 0:
        raise InputError(f"lag must be >= 0, got {lag}")
    return 1.0 - np.arange(lag + 1) / (lag + 1)


def check_weights(weights):
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InvalidWeights("HAC weights must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(w)):
        raise InvalidWeights("HAC weights must be finite")
    if w[0] != 1.0:
        raise InvalidWeights(f"HAC weight w_0 must equal 1, got {w[0]!r}")
    if np.any(np.abs(w) > 1.0):
        raise InvalidWeights("HAC weights must satisfy |w_m| <= 1")
    return w


def hac_cov(
    fit: OlsFit, design, weights, df_adjust=False, time_index=None
) -> CovEstimate:
    """Heteroskedasticity and autocorrelation robust covariance.

    Rows must already be in time order; ``time_index``, when given, is only
    checked for that. ``weights[m]`` multiplies lag-``m`` cross products.
    """
    w = check_weights(weights)
    X = _check_design(fit, design)
    if time_index is not None and np.any(np.diff(np.asarray(time_index)) <= 0):
        raise UnorderedTime("rows are not in strictly increasing time order")
    if w.size > fit.n:
        raise WeightsTooLong(f"{w.size} weights for {fit.n} observations")
    s = X * fit.residuals[:, None]
    meat = w[0] * (s.T @ s)
    for m in range(1, w.size):
        if w[m] == 0.0:
            continue
        gamma = s[m:].T @ s[:-m]
        meat += w[m] * (gamma + gamma.T)
    full = _sandwich(fit, meat)
    full = (full + full.T) / 2
    if df_adjust:
        full = full * (fit.n / (fit.n - fit.p))
    return _package(fit, Hac(tuple(w), df_adjust), full)


def estimate(fit: OlsFit, design, kind: VcovKind, cluster_ids=None, time_index=None):
    """Dispatch to the estimator named by ``kind``."""
    if isinstance(kind, Homoskedastic):
        return homoskedastic_cov(fit)
    if isinstance(kind, HC):
        return hc_cov(fit, design, kind.variant)
    if isinstance(kind, Cluster):
        if cluster_ids is None:
            raise MissingClusterId("cluster estimator requested without cluster ids")
        return cluster_cov(fit, design, cluster_ids, kind.correction)
    if isinstance(kind, Hac):
        return hac_cov(fit, design, kind.weights, kind.df_adjust, time_index)
    raise TypeError(f"unknown covariance kind {kind!r}")
