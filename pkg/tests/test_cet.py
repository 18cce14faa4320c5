import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from choicetime.analysis import conditional_rt_test, population_stats
from choicetime.cet import (
    DegeneratePairError,
    EpsilonDist,
    ItemUtilities,
    Observation,
    TrialPlan,
    UnboundedMeanError,
    UserParams,
    bt_posterior_mean,
    cet_choice_prob,
    cet_mean_response_time,
    cet_no_purchase_prob,
    cet_simulate,
    engagement_bias,
)

SWEEP_USER = UserParams(A=1.0, tau=2.0, rho=0.4, epsilon=0.1, gamma=1.0)
pos = st.floats(1e-6, 1.0)
eps_st = st.floats(0.0, 50.0)


class TestChoiceProb:
    def test_bradley_terry_reduction(self):
        assert cet_choice_prob(0.3, 0.1, 0.0) == pytest.approx(0.75, abs=1e-15)

    def test_hand_value(self):
        assert cet_choice_prob(0.6, 0.2, 0.25) == pytest.approx(2 / 3, abs=1e-15)

    def test_disengaged_limit(self):
        assert cet_choice_prob(0.9, 0.1, 1e9) == pytest.approx(0.5, abs=1e-9)
        assert cet_choice_prob(0.9, 0.1, math.inf) == 0.5

    def test_degenerate(self):
        with pytest.raises(DegeneratePairError):
            cet_choice_prob(0.0, 0.0, 0.1)

    @given(pos, pos, eps_st)
    def test_complement_and_bounds(self, wi, wj, eps):
        p = cet_choice_prob(wi, wj, eps)
        q = cet_choice_prob(wj, wi, eps)
        assert p + q == pytest.approx(1.0, abs=1e-15)
        assert eps / (1 + 2 * eps) - 1e-15 <= p <= (1 + eps) / (1 + 2 * eps) + 1e-15

    @given(pos, pos, pos, eps_st)
    def test_monotone_in_wi(self, a, b, wj, eps):
        lo, hi = sorted((a, b))
        assert cet_choice_prob(lo, wj, eps) <= cet_choice_prob(hi, wj, eps) + 1e-15

    @given(pos, pos, eps_st, eps_st)
    def test_epsilon_flattens_toward_half(self, wi, wj, e1, e2):
        assume(wi / (wi + wj) > 0.5)
        lo, hi = sorted((e1, e2))
        p_lo, p_hi = cet_choice_prob(wi, wj, lo), cet_choice_prob(wi, wj, hi)
        assert p_hi <= p_lo + 1e-15
        assert p_hi >= 0.5 - 1e-15


class TestMeanResponseTime:
    def test_equal_items(self):
        pred = cet_mean_response_time(0.3, 0.3, SWEEP_USER)
        assert pred.mu == pytest.approx(4.0, rel=1e-15)
        assert pred.delta == pytest.approx(2.0, rel=1e-15)
        assert pred.p == 0.5

    @pytest.mark.parametrize("gamma", [0.3, 1.0, 2.5])
    def test_boundary_minimum(self, gamma):
        params = UserParams(1.0, 2.0, 0.4, 0.1, gamma)
        assert cet_mean_response_time(0.7, 0.0, params).mu == pytest.approx(2 + 1 / 1.5, rel=1e-15)

    def test_zero_gamma_equal_items(self):
        params = UserParams(1.0, 2.0, 0.4, 0.1, 0.0)
        assert cet_mean_response_time(0.2, 0.2, params).delta == pytest.approx(1 / 0.5)

    def test_unbounded(self):
        with pytest.raises(UnboundedMeanError):
            cet_mean_response_time(0.5, 0.5, UserParams(1.0, 1.0, 0.0, 0.0, 1.0))

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            UserParams(0.0, 1.0, 0.1, 0.1, 1.0)
        with pytest.raises(ValueError):
            UserParams(1.0, 1.0, -0.1, 0.1, 1.0)

    @given(pos, pos, st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.0, 3), st.floats(0.0, 3), st.floats(0.0, 4))
    def test_bounds_and_symmetry(self, wi, wj, A, tau, rho, eps, gamma):
        assume(rho + eps > 1e-3)
        up = UserParams(A, tau, rho, eps, gamma)
        pred = cet_mean_response_time(wi, wj, up)
        assert pred.mu == pytest.approx(cet_mean_response_time(wj, wi, up).mu, rel=1e-14)
        assert tau + A / (1 + eps + rho) * (1 - 1e-12) <= pred.mu <= tau + A / (eps + rho) * (1 + 1e-12)

    def test_max_at_equal_grid(self):
        x = np.linspace(0.0, 1.0, 101)
        mus = [cet_mean_response_time(v, 1 - v, SWEEP_USER).mu for v in x]
        assert x[int(np.argmax(mus))] == pytest.approx(0.5)
        assert min(mus) == pytest.approx(2 + 1 / 1.5)


class TestNoPurchase:
    @pytest.mark.parametrize("mode", ["favor_items", "favor_no_purchase"])
    def test_no_slack(self, mode):
        assert cet_no_purchase_prob(0.3, 0.1, 0.0, mode) == pytest.approx(0.75)

    def test_hand_value(self):
        assert cet_no_purchase_prob(0.4, 0.4, 1.0, "favor_items") == pytest.approx(0.75)

    def test_limits(self):
        assert cet_no_purchase_prob(0.1, 0.9, 1e9, "favor_items") == pytest.approx(1.0, abs=1e-8)
        assert cet_no_purchase_prob(0.9, 0.1, 1e9, "favor_no_purchase") == pytest.approx(0.0, abs=1e-8)

    @given(pos, pos, eps_st)
    def test_range_and_order(self, wi, w0, eps):
        a = cet_no_purchase_prob(wi, w0, eps, "favor_items")
        b = cet_no_purchase_prob(wi, w0, eps, "favor_no_purchase")
        assert 0 <= b <= a <= 1 + 1e-15

    def test_errors(self):
        with pytest.raises(DegeneratePairError):
            cet_no_purchase_prob(0.0, 0.0, 0.1)
        with pytest.raises(ValueError):
            cet_no_purchase_prob(0.1, 0.2, 0.1, "other")


class TestSimulation:
    def _single_pair(self, n, up, w=(0.7, 0.3), seed=0):
        util = [ItemUtilities("p", np.array(w), ("x", "y"))]
        trials = cet_simulate(util, {"u": up}, TrialPlan(trials_per_pair=n, shuffle_sides=False), np.random.default_rng(seed))
        chose_x = np.array([t.observation.chosen == "i" for t in trials])
        times = np.array([t.observation.response_time for t in trials])
        return trials, chose_x, times

    def test_choice_and_time_moments(self):
        up = UserParams(1.37, 0.85, 0.41, 0.2, 1.04)
        n = 100_000
        trials, chose_x, times = self._single_pair(n, up)
        pred = cet_mean_response_time(0.7, 0.3, up)
        assert abs(chose_x.mean() - pred.p) < 3 * math.sqrt(pred.p * (1 - pred.p) / n)
        assert abs(times.mean() - pred.mu) < 3 * times.std() / math.sqrt(n)

    def test_latent_components(self):
        trials, _, _ = self._single_pair(50, SWEEP_USER)
        for t in trials:
            assert t.observation.response_time == pytest.approx(t.latent_latency + t.latent_decision, rel=1e-15)
            assert t.latent_latency > 0 and t.latent_decision > 0

    def test_times_independent_of_choice(self):
        _, chose_x, times = self._single_pair(40_000, SWEEP_USER, w=(0.55, 0.45), seed=3)
        a, b = times[chose_x], times[~chose_x]
        se = math.sqrt(a.var() / a.size + b.var() / b.size)
        assert abs(a.mean() - b.mean()) < 4 * se

    def test_design_shape_and_determinism(self):
        util = [ItemUtilities(f"s{k}", np.full(5, 0.2)) for k in range(6)]
        users = {f"u{k}": SWEEP_USER for k in range(50)}
        a = cet_simulate(util, users, TrialPlan(), np.random.default_rng(9))
        b = cet_simulate(util, users, TrialPlan(), np.random.default_rng(9))
        assert len(a) == 6 * 10 * 50
        assert [t.observation for t in a] == [t.observation for t in b]
        assert len({t.observation.key for t in a}) == len(a)

    def test_explicit_counts(self):
        util = [ItemUtilities("s", np.array([0.5, 0.3, 0.2]))]
        plan = TrialPlan(counts={("s", "u", 0, 2): 3})
        trials = cet_simulate(util, {"u": SWEEP_USER}, plan, np.random.default_rng(0))
        assert len(trials) == 3
        assert {t.observation.trial_k for t in trials} == {1, 2, 3}

    def test_rank_sum_mostly_fails_to_reject(self):
        util = [ItemUtilities(f"s{k}", np.random.default_rng(k).dirichlet(np.ones(5))) for k in range(6)]
        users = {f"u{k:02d}": UserParams(1.37, 0.85, 0.41, 0.2, 1.04) for k in range(60)}
        trials = cet_simulate(util, users, TrialPlan(), np.random.default_rng(1))
        res = conditional_rt_test(trials, alpha=0.05)
        raw_rejections = sum(r.p_value < 0.05 for r in res)
        assert raw_rejections <= 0.05 * len(res) + 3 * math.sqrt(0.05 * 0.95 * len(res))

    def test_engaged_population_correlation_positive(self):
        rng = np.random.default_rng(4)
        util = [ItemUtilities(f"s{k}", rng.dirichlet(np.ones(5))) for k in range(6)]
        users = {f"u{k:03d}": UserParams(1.4, 0.5, 0.1, 0.02, 1.5) for k in range(150)}
        trials = cet_simulate(util, users, TrialPlan(), rng)
        stats = population_stats(trials)
        assert stats.pearson_r > 0.3
        assert stats.pearson_p < 0.05


class TestBias:
    def test_posterior_mean(self):
        assert bt_posterior_mean(0, 0) == 0.5
        assert bt_posterior_mean(10, 10) == pytest.approx(11 / 12)
        assert bt_posterior_mean(5, 10) == 0.5
        with pytest.raises(ValueError):
            bt_posterior_mean(11, 10)

    @pytest.mark.parametrize("dist", [EpsilonDist("deterministic", 0.3), EpsilonDist("exponential", 0.2),
                                      EpsilonDist("truncated_normal", 0.2, 0.28)])
    def test_unbiased_at_half(self, dist):
        r = engagement_bias(0.5, dist, 1000, 50, np.random.default_rng(0), b_samples=10_000)
        assert r.asymptotic_estimate == 0.5
        assert r.finite_N_estimate == pytest.approx(0.5, abs=4 * r.mc_std_error)

    def test_deterministic_half_at_zero(self):
        r = engagement_bias(0.0, EpsilonDist("deterministic", 0.5), 100_000, 20, np.random.default_rng(1))
        assert r.B == 0.25
        assert r.asymptotic_estimate == 0.25
        assert r.finite_N_estimate == pytest.approx(0.25, abs=0.005)

    @pytest.mark.parametrize("w", [0.0, 0.2, 0.8, 1.0])
    def test_converges_to_asymptote(self, w):
        r = engagement_bias(w, EpsilonDist("exponential", 0.2), 100_000, 200, np.random.default_rng(2))
        assert abs(r.finite_N_estimate - r.asymptotic_estimate) < 0.01
        assert 0 <= r.B < 0.5

    def test_exponential_bias_factor_by_quadrature(self):
        from scipy import integrate

        m = 0.2
        exact, _ = integrate.quad(lambda e: e / (1 + 2 * e) * math.exp(-e / m) / m, 0, np.inf)
        est = EpsilonDist("exponential", m).bias_factor(np.random.default_rng(0))
        assert est == pytest.approx(exact, abs=5e-4)

    def test_truncated_normal_nonnegative(self):
        x = EpsilonDist("truncated_normal", 0.1, 0.3).sample(np.random.default_rng(0), 10_000)
        assert x.min() >= 0


def test_observation_validation():
    with pytest.raises(ValueError):
        Observation("p", "u", "a", "a", "i", 1.0)
    with pytest.raises(ValueError):
        Observation("p", "u", "a", "b", "i", 0.0)
    with pytest.raises(ValueError):
        Observation("p", "u", "a", "b", "k", 1.0)
    assert Observation("p", "u", "b", "a", "i", 1.0).key == Observation("p", "u", "a", "b", "j", 2.0).key


def test_item_utilities_validation():
    with pytest.raises(ValueError):
        ItemUtilities("p", np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        ItemUtilities("p", np.array([1.2, -0.2]))
