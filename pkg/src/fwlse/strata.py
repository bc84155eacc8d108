"""Stratified experiments: closed forms for the stratum-dummy regression.

The regression is ``y ~ z + 1[stratum 1] + ... + 1[stratum K]`` with no
intercept. Its treatment coefficient is a weighted average of within-stratum
differences in means, with weights proportional to ``pi_k e_k (1 - e_k)``,
and its homoskedastic and EHW variances have closed forms in per-stratum
summaries. :func:`via_regression` fits the regression directly and serves
as the independent check on those closed forms.

Within-arm sample variances divide by the arm size (``n_k1``, ``n_k0``), not
by the arm size minus one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, List, NamedTuple, Sequence

import numpy as np

from . import linalg, ols, vcov
from .errors import DegenerateStratum, DimensionMismatch, InputError, TooFewRows

CROSS_CHECK_TOL = 1e-9


@dataclass(frozen=True)
class StratifiedData:
    """Outcome, binary treatment and stratum label for each unit.

    Stratum labels may be any hashable values; strata are indexed in order
    of first appearance.
    """

    y: np.ndarray
    z: np.ndarray
    stratum: Sequence[Hashable]

    def __post_init__(self):
        y = linalg.as_vector(self.y, "y")
        z = linalg.as_vector(self.z, "z")
        labels = tuple(self.stratum)
        if not (y.shape[0] == z.shape[0] == len(labels)):
            raise DimensionMismatch(
                f"y, z and stratum lengths differ ({y.shape[0]}, {z.shape[0]}, "
                f"{len(labels)})"
            )
        if not np.all((z == 0.0) | (z == 1.0)):
            bad = int(np.flatnonzero((z != 0.0) & (z != 1.0))[0])
            raise InputError(f"treatment must be 0/1; row {bad} has {z[bad]!r}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "stratum", labels)

    @property
    def n(self):
        return self.y.shape[0]

    def stratum_codes(self):
        """``(codes, labels)`` with ``labels[codes[i]] == stratum[i]``."""
        index = {}
        codes = np.array(
            [index.setdefault(s, len(index)) for s in self.stratum], dtype=np.intp
        )
        return codes, list(index)


@dataclass(frozen=True)
class StratumSummary:
    label: Hashable
    n_k: int
    n_k1: int
    n_k0: int
    e_k: float
    pi_k: float
    omega_k: float
    ybar_k1: float
    ybar_k0: float
    tau_k: float
    s2_k1: float
    s2_k0: float
    V_k: float
    Lambda_k: float
    Delta_k: float


def summarize(data: StratifiedData) -> List[StratumSummary]:
    """Per-stratum sizes, propensity scores, weights, means and variances."""
    codes, labels = data.stratum_codes()
    n = data.n
    groups = []
    for k, label in enumerate(labels):
        mask = codes == k
        yk, zk = data.y[mask], data.z[mask]
        n_k1 = int(zk.sum())
        n_k0 = yk.size - n_k1
        if yk.size < 2 or n_k1 == 0 or n_k0 == 0:
            raise DegenerateStratum(
                f"stratum {label!r} needs treated and control units "
                f"(n={yk.size}, treated={n_k1})"
            )
        groups.append((label, yk[zk == 1.0], yk[zk == 0.0]))

    pi = np.array([(y1.size + y0.size) / n for _, y1, y0 in groups])
    e = np.array([y1.size / (y1.size + y0.size) for _, y1, y0 in groups])
    raw = pi * e * (1.0 - e)
    omega = raw / raw.sum()

    out = []
    for k, (label, y1, y0) in enumerate(groups):
        m1, m0 = float(y1.mean()), float(y0.mean())
        s1 = float(np.mean((y1 - m1) ** 2))
        s0 = float(np.mean((y0 - m0) ** 2))
        ek = float(e[k])
        out.append(
            StratumSummary(
                label=label,
                n_k=y1.size + y0.size,
                n_k1=y1.size,
                n_k0=y0.size,
                e_k=ek,
                pi_k=float(pi[k]),
                omega_k=float(omega[k]),
                ybar_k1=m1,
                ybar_k0=m0,
                tau_k=m1 - m0,
                s2_k1=s1,
                s2_k0=s0,
                V_k=s1 / y1.size + s0 / y0.size,
                Lambda_k=s1 / y0.size + s0 / y1.size,
                Delta_k=1.0 / (ek * (1.0 - ek)) - 3.0,
            )
        )
    return out


def tau_weighted(summaries: Sequence[StratumSummary]) -> float:
    return float(sum(s.omega_k * s.tau_k for s in summaries))


def v_zero(summaries: Sequence[StratumSummary], unbiased=False) -> float:
    """Design-based variance ``sum_k omega_k^2 V_k``.

    ``unbiased=True`` rescales the within-arm variances to the usual
    ``n - 1`` denominators. That variant is not what the closed-form
    regression identities use.
    """
    total = 0.0
    for s in summaries:
        if unbiased:
            if s.n_k1 < 2 or s.n_k0 < 2:
                raise DegenerateStratum(
                    f"stratum {s.label!r}: unbiased variances need 2 units per arm"
                )
            vk = s.s2_k1 / (s.n_k1 - 1) + s.s2_k0 / (s.n_k0 - 1)
        else:
            vk = s.V_k
        total += s.omega_k**2 * vk
    return float(total)


def v_homo_closed(summaries, tau_ols, n, K_strata) -> float:
    """Homoskedastic regression variance of the treatment coefficient."""
    if n <= K_strata + 1:
        raise TooFewRows(f"need n > K + 1 (n={n}, K={K_strata})")
    acc = sum(
        s.omega_k * s.pi_k * (s.Lambda_k + (s.tau_k - tau_ols) ** 2 / s.n_k)
        for s in summaries
    )
    return float(n / (n - K_strata - 1) * acc)


def heterogeneity_terms(summaries, tau_ols):
    """``omega_k^2 Delta_k (tau_k - tau_ols)^2 / n_k`` for each stratum."""
    return np.array(
        [s.omega_k**2 * s.Delta_k * (s.tau_k - tau_ols) ** 2 / s.n_k for s in summaries]
    )


def v_ehw_closed(summaries, tau_ols) -> float:
    """EHW (HC0) regression variance of the treatment coefficient."""
    return float(
        sum(
            s.omega_k**2 * (s.V_k + s.Delta_k * (s.tau_k - tau_ols) ** 2 / s.n_k)
            for s in summaries
        )
    )


def regression_spec(data: StratifiedData) -> ols.DesignSpec:
    """Treatment as the focal column, one indicator per stratum as ``x1``."""
    codes, labels = data.stratum_codes()
    dummies = (codes[:, None] == np.arange(len(labels))[None, :]).astype(float)
    names = tuple(f"stratum[{lab}]" for lab in labels) + ("z",)
    return ols.DesignSpec(data.y, dummies, data.z, names=names)


class RegressionResult(NamedTuple):
    tau: float
    v_homo: float
    v_ehw: float


def via_regression(data: StratifiedData) -> RegressionResult:
    """Fit the stratum-dummy regression and read off the focal scalars."""
    spec = regression_spec(data)
    f = ols.fit(spec)
    homo = vcov.homoskedastic_cov(f)
    ehw = vcov.hc_cov(f, spec.design, 0)
    return RegressionResult(
        float(f.focal_beta[0]), float(homo.matrix[0, 0]), float(ehw.matrix[0, 0])
    )


def closed_form_residuals(data: StratifiedData, summaries, tau_ols):
    """Regression residuals written in per-stratum quantities."""
    codes, _ = data.stratum_codes()
    out = np.empty(data.n)
    for k, s in enumerate(summaries):
        mask = codes == k
        gap = s.tau_k - tau_ols
        treated = data.z[mask] == 1.0
        out[mask] = np.where(
            treated,
            data.y[mask] - s.ybar_k1 + (1.0 - s.e_k) * gap,
            data.y[mask] - s.ybar_k0 - s.e_k * gap,
        )
    return out


@dataclass(frozen=True)
class CrossCheck:
    regression: RegressionResult
    tau_diff: float
    v_homo_rel_diff: float
    v_ehw_rel_diff: float
    tolerance: float

    @property
    def passed(self):
        return max(self.tau_diff, self.v_homo_rel_diff, self.v_ehw_rel_diff) <= (
            self.tolerance
        )


@dataclass(frozen=True)
class StratifiedEstimate:
    tau_ols: float
    v0: float
    v_homo: float
    v_ehw: float
    summaries: List[StratumSummary]
    cross_check: CrossCheck

    @property
    def conservativeness_gap(self):
        """``v_ehw - v0``; equals the summed heterogeneity terms."""
        return self.v_ehw - self.v0


def _rel(a, b, floor):
    return abs(a - b) / max(abs(a), abs(b), floor)


def analyze(data: StratifiedData, tol=CROSS_CHECK_TOL) -> StratifiedEstimate:
    """Closed-form estimates plus the regression cross-check.

    ``tau_diff`` is ``|tau_closed - tau_reg| / (1 + |tau_closed|)``; the
    variance differences are relative to the larger of the two values.
    """
    ss = summarize(data)
    tau = tau_weighted(ss)
    v_homo = v_homo_closed(ss, tau, data.n, len(ss))
    v_ehw = v_ehw_closed(ss, tau)
    reg = via_regression(data)
    # Floor keeps exact-zero variances (constant outcomes) from reading as
    # a 100% relative error against rounding-level regression output.
    floor = 1e-15 * (1.0 + float(np.var(data.y)))
    check = CrossCheck(
        regression=reg,
        tau_diff=abs(tau - reg.tau) / (1.0 + abs(tau)),
        v_homo_rel_diff=_rel(v_homo, reg.v_homo, floor),
        v_ehw_rel_diff=_rel(v_ehw, reg.v_ehw, floor),
        tolerance=tol,
    )
    return StratifiedEstimate(tau, v_zero(ss), v_homo, v_ehw, ss, check)
