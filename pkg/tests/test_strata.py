from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fwlse import ols, strata
from fwlse.errors import DegenerateStratum, InputError, TooFewRows

from conftest import random_stratified as random_data

TOY = strata.StratifiedData([3.0, 1.0, 2.0, 0.0], [1, 1, 0, 0], ["a"] * 4)

class TestSummarize:
    def test_balanced_single_stratum(self):
        (s,) = strata.summarize(TOY)
        assert (s.e_k, s.pi_k, s.omega_k, s.Delta_k) == (0.5, 1.0, 1.0, 1.0)

    def test_toy_values(self):
        # treated (3, 1): mean 2, s2 = 1; control (2, 0): mean 1, s2 = 1
        (s,) = strata.summarize(TOY)
        assert (s.tau_k, s.s2_k1, s.s2_k0, s.V_k, s.Lambda_k) == (1.0, 1.0, 1.0, 1.0, 1.0)
        assert (s.n_k, s.n_k1, s.n_k0) == (4, 2, 2)

    def test_constant_propensity_weights_are_shares(self):
        y = np.arange(12.0)
        z = [1, 0, 1, 0] + [1, 0] * 4
        data = strata.StratifiedData(y, z, ["a"] * 4 + ["b"] * 8)
        ss = strata.summarize(data)
        np.testing.assert_allclose([s.omega_k for s in ss], [1 / 3, 2 / 3])
        np.testing.assert_allclose([s.pi_k for s in ss], [1 / 3, 2 / 3])

    def test_labels_in_first_appearance_order(self):
        data = strata.StratifiedData(np.arange(8.0), [1, 0] * 4, ["q", "q", 7, 7, "q", "q", 7, 7])
        assert [s.label for s in strata.summarize(data)] == ["q", 7]

    @pytest.mark.parametrize("z", [[1, 1, 1, 1], [0, 0, 0, 0]])
    def test_degenerate(self, z):
        data = strata.StratifiedData([1.0, 2, 3, 4, 5, 6], z + [1, 0], ["a"] * 4 + ["b"] * 2)
        with pytest.raises(DegenerateStratum, match="'a'"):
            strata.summarize(data)

    def test_singleton_stratum(self):
        data = strata.StratifiedData([1.0, 2, 3], [1, 0, 1], ["a", "a", "b"])
        with pytest.raises(DegenerateStratum, match="'b'"):
            strata.summarize(data)

    def test_non_binary_treatment(self):
        with pytest.raises(InputError):
            strata.StratifiedData([1.0, 2.0], [1, 2], ["a", "a"])

    @given(st.integers(0, 2**32 - 1))
    def test_invariants(self, seed):
        ss = strata.summarize(random_data(np.random.default_rng(seed)))
        assert sum(s.pi_k for s in ss) == pytest.approx(1.0, abs=1e-12)
        assert sum(s.omega_k for s in ss) == pytest.approx(1.0, abs=1e-12)
        for s in ss:
            assert s.Delta_k >= 1.0 - 1e-12
            assert (abs(s.Delta_k - 1.0) < 1e-12) == (s.e_k == 0.5)
            assert s.V_k >= 0 and s.Lambda_k >= 0


class TestTauWeighted:
    def _summary(self, pi, e, tau):
        n_k = 12
        return strata.StratumSummary(
            label=None, n_k=n_k, n_k1=int(n_k * e), n_k0=n_k - int(n_k * e), e_k=e,
            pi_k=pi, omega_k=0.0, ybar_k1=tau, ybar_k0=0.0, tau_k=tau, s2_k1=0.0,
            s2_k0=0.0, V_k=0.0, Lambda_k=0.0, Delta_k=1 / (e * (1 - e)) - 3,
        )

    def _with_omega(self, rows):
        raw = np.array([r.pi_k * r.e_k * (1 - r.e_k) for r in rows])
        return [replace(r, omega_k=w) for r, w in zip(rows, raw / raw.sum())]

    def test_single_stratum(self):
        (s,) = strata.summarize(TOY)
        assert strata.tau_weighted([s]) == s.tau_k

    def test_equal_propensity_plain_average(self):
        ss = self._with_omega([self._summary(0.5, 0.5, 1.0), self._summary(0.5, 0.5, 3.0)])
        assert strata.tau_weighted(ss) == pytest.approx(2.0)

    def test_unequal_propensity(self):
        # weights proportional to 3/32 and 4/32
        ss = self._with_omega([self._summary(0.5, 0.25, 1.0), self._summary(0.5, 0.5, 3.0)])
        np.testing.assert_allclose([s.omega_k for s in ss], [3 / 7, 4 / 7])
        assert strata.tau_weighted(ss) == pytest.approx(15 / 7, rel=1e-15)


class TestVariances:
    def test_toy(self):
        ss = strata.summarize(TOY)
        tau = strata.tau_weighted(ss)
        assert strata.v_zero(ss) == 1.0
        assert strata.v_homo_closed(ss, tau, 4, 1) == pytest.approx(2.0)
        assert strata.v_ehw_closed(ss, tau) == pytest.approx(1.0)

    def test_single_stratum_ehw_equals_neyman(self):
        data = random_data(np.random.default_rng(3), K=1)
        ss = strata.summarize(data)
        tau = strata.tau_weighted(ss)
        assert strata.v_ehw_closed(ss, tau) == pytest.approx(ss[0].V_k, rel=1e-15)
        assert strata.v_zero(ss) == ss[0].V_k

    def test_constant_outcomes_within_arms(self):
        y = [5.0, 5.0, 1.0, 1.0, 7.0, 7.0, 3.0, 3.0]
        data = strata.StratifiedData(y, [1, 1, 0, 0] * 2, ["a"] * 4 + ["b"] * 4)
        ss = strata.summarize(data)
        tau = strata.tau_weighted(ss)
        assert strata.v_zero(ss) == 0.0
        assert strata.v_homo_closed(ss, tau, 8, 2) == 0.0
        est = strata.analyze(data)
        assert est.cross_check.passed

    def test_too_few_rows(self):
        ss = strata.summarize(TOY)
        with pytest.raises(TooFewRows):
            strata.v_homo_closed(ss, 1.0, 2, 1)

    def test_unbiased_v0(self):
        (s,) = strata.summarize(TOY)
        # s2 with n-1 denominators: 2 per arm, so V = 2/2 + 2/2
        assert strata.v_zero([s], unbiased=True) == pytest.approx(2.0)


class TestViaRegression:
    def test_toy(self):
        reg = strata.via_regression(TOY)
        # brute force normal equations on (z, 1)
        X = np.column_stack([[1, 1, 0, 0], np.ones(4)]).astype(float)
        beta = np.linalg.solve(X.T @ X, X.T @ TOY.y)
        assert reg.tau == pytest.approx(beta[0]) == pytest.approx(1.0)
        assert reg.v_homo == pytest.approx(2.0)
        assert reg.v_ehw == pytest.approx(1.0)

    def test_design_has_no_intercept(self):
        spec = strata.regression_spec(random_data(np.random.default_rng(4), K=3))
        assert spec.K == 3 and spec.L == 1
        np.testing.assert_array_equal(spec.x1.sum(axis=1), 1.0)

    @given(st.integers(0, 2**32 - 1))
    def test_residual_identity(self, seed):
        data = random_data(np.random.default_rng(seed))
        ss = strata.summarize(data)
        tau = strata.tau_weighted(ss)
        f = ols.fit(strata.regression_spec(data))
        closed = strata.closed_form_residuals(data, ss, tau)
        np.testing.assert_allclose(f.residuals, closed, rtol=0, atol=1e-10)

    @given(st.integers(0, 2**32 - 1))
    def test_denominator_identity(self, seed):
        data = random_data(np.random.default_rng(seed))
        ss = strata.summarize(data)
        codes, _ = data.stratum_codes()
        e = np.array([s.e_k for s in ss])[codes]
        lhs = np.sum((data.z - e) ** 2)
        rhs = data.n * sum(s.pi_k * s.e_k * (1 - s.e_k) for s in ss)
        assert abs(lhs - rhs) <= 1e-10


class TestAnalyze:
    def test_toy(self):
        est = strata.analyze(TOY)
        assert est.tau_ols == 1.0 and est.v0 == 1.0
        assert est.v_ehw == pytest.approx(1.0)
        assert est.cross_check.passed

    def test_single_stratum_no_gap(self):
        est = strata.analyze(random_data(np.random.default_rng(5), K=1))
        assert est.conservativeness_gap == pytest.approx(0.0, abs=1e-15)

    def test_heterogeneity_makes_ehw_conservative(self):
        y = [4.0, 2.0, 1.0, 0.0, 1.0, 0.5, 0.0, 0.2, 0.9, 0.1]
        z = [1, 1, 0, 0, 1, 0, 1, 0, 1, 0]
        est = strata.analyze(strata.StratifiedData(y, z, ["a"] * 4 + ["b"] * 6))
        assert est.v_ehw > est.v0
        terms = strata.heterogeneity_terms(est.summaries, est.tau_ols)
        assert est.conservativeness_gap == pytest.approx(terms.sum(), abs=1e-12)

    def test_constant_propensity_gives_share_weighted_estimator(self):
        data = random_data(np.random.default_rng(6), K=1)
        y = np.concatenate([data.y, data.y + 3.0])
        z = np.concatenate([data.z, data.z])
        s = ["a"] * data.n + ["b"] * data.n
        est = strata.analyze(strata.StratifiedData(y, z, s))
        by_share = sum(ss.pi_k * ss.tau_k for ss in est.summaries)
        assert est.tau_ols == pytest.approx(by_share, rel=1e-14)

    @given(st.integers(0, 2**32 - 1))
    def test_random_cross_check(self, seed):
        est = strata.analyze(random_data(np.random.default_rng(seed)))
        assert est.cross_check.passed
        assert est.v0 >= 0 and est.v_ehw >= 0
        assert est.conservativeness_gap >= -1e-15
