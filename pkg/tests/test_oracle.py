import math

import numpy as np
import pytest

from yieldopt.dist import RewardDistribution
from yieldopt.errors import DomainError, SizeLimit
from yieldopt.instances import Instance, gen_upper_triangular, supply_factor
from yieldopt.oracle import (
    RealizedInstance,
    adversary_lp_tight,
    exhaustive_values,
    lp_residuals,
    offline_opt_exact,
    offline_opt_formula,
    online_opt_bruteforce,
    sample_realized,
)
from yieldopt.policy import ThresholdPolicy, make_policy

BINARY = RewardDistribution((0.0, 0.5), (0.5, 1.0))
TRI3 = RewardDistribution((0.0, 0.4, 0.9), (0.3, 0.7, 1.0))


def offline_bruteforce(realized, penalty):
    # exhaustive assignment search; independent of the augmenting-path solver
    inst = realized.instance
    elig_seq = inst.expand()
    best = -math.inf

    def recurse(i, remaining, value):
        nonlocal best
        if i == len(elig_seq):
            best = max(best, value - penalty * sum(remaining))
            return
        r = realized.rewards[i]
        recurse(i + 1, remaining, value + r)  # sell
        for a in elig_seq[i]:
            if remaining[a] > 0:
                nxt = list(remaining)
                nxt[a] -= 1
                recurse(i + 1, tuple(nxt), value)

    recurse(0, inst.demands, 0.0)
    return best


class TestOfflineOptFormula:
    def test_f1_is_zero(self):
        assert offline_opt_formula(BINARY, 1.0, 10.0) == 0.0

    def test_binary_q_half(self):
        assert offline_opt_formula(BINARY, 2.0, 1.0) == pytest.approx(0.5)

    def test_binary_q_below_one_over_f_both_routes(self):
        # q = 0.25 <= 1/f: case formula f(1-1/f)r must agree with the
        # top-quantile route
        d = RewardDistribution((0.0, 0.5), (0.25, 1.0))
        f = 2.0
        case_formula = f * (1.0 - 1.0 / f) * 0.5
        assert offline_opt_formula(d, f, 1.0) == pytest.approx(case_formula)

    def test_binary_q_above_one_over_f_both_routes(self):
        d = RewardDistribution((0.0, 0.5), (0.75, 1.0))
        f = 2.0
        case_formula = f * (1.0 - 0.75) * 0.5
        assert offline_opt_formula(d, f, 1.0) == pytest.approx(case_formula)

    def test_rejects_f_below_one(self):
        with pytest.raises(DomainError):
            offline_opt_formula(BINARY, 0.5, 1.0)


class TestOfflineOptExact:
    def test_single_advertiser_two_queries(self):
        inst = Instance((1,), ((2, (0,)),))
        value = offline_opt_exact(RealizedInstance(inst, (0.0, 0.5)), 1.0)
        assert value == pytest.approx(0.5)  # deliver the 0, sell the 0.5

    def test_all_zero_rewards(self):
        inst = Instance((2, 1), ((2, (0,)), (1, (1,))))
        value = offline_opt_exact(RealizedInstance(inst, (0.0, 0.0, 0.0)), 1.0)
        assert value == pytest.approx(-0.0)  # all deliverable here

    def test_penalty_when_underdeliverable(self):
        inst = Instance((3,), ((1, (0,)),))
        value = offline_opt_exact(RealizedInstance(inst, (0.0,)), 1.0)
        assert value == pytest.approx(-2.0)

    def test_rerouting_needed(self):
        # greedy must move an earlier assignment to make room
        inst = Instance((1, 1), ((1, (0, 1)), (1, (0,))))
        value = offline_opt_exact(RealizedInstance(inst, (0.1, 0.2)), 1.0)
        # optimal: query 0 -> advertiser 1, query 1 -> advertiser 0
        assert value == pytest.approx(0.0)

    def test_matches_bruteforce_on_random_instances(self):
        rng = np.random.default_rng(77)
        for _ in range(40):
            m = int(rng.integers(1, 4))
            demands = tuple(int(v) for v in rng.integers(1, 3, m))
            groups = []
            for _ in range(int(rng.integers(1, 4))):
                elig = tuple(int(a) for a in range(m) if rng.random() < 0.7)
                groups.append((int(rng.integers(0, 3)), elig))
            inst = Instance(demands, tuple(groups))
            if inst.total_queries == 0 or inst.total_queries > 6:
                continue
            rewards = tuple(
                float(rng.choice([0.0, 0.3, 0.8])) for _ in range(inst.total_queries)
            )
            realized = RealizedInstance(inst, rewards)
            assert offline_opt_exact(realized, 1.0) == pytest.approx(
                offline_bruteforce(realized, 1.0), abs=1e-12
            )

    def test_size_limit(self):
        inst = Instance((200_000,), ((200_000, (0,)),))
        with pytest.raises(SizeLimit):
            offline_opt_exact(RealizedInstance(inst, (0.0,) * 200_000), 1.0)

    def test_concentrates_to_formula(self):
        inst = gen_upper_triangular(4, 1000, 2.0, seed=3)
        realized = sample_realized(inst, BINARY, seed=8)
        exact = offline_opt_exact(realized, 1.0)
        formula = offline_opt_formula(BINARY, 2.0, float(inst.total_demand))
        assert exact == pytest.approx(formula, rel=0.03)

    def test_bounded_by_top_reward_sum(self):
        # two-sided bracket: close to the formula from below, never above
        # the sum of the (f-1)N largest realized rewards
        f = 2.0
        for dist in (BINARY, TRI3):
            inst = gen_upper_triangular(4, 1000, f, seed=3)
            realized = sample_realized(inst, dist, seed=8)
            exact = offline_opt_exact(realized, 1.0)
            surplus = inst.total_queries - inst.total_demand
            top_sum = float(np.sort(realized.rewards)[-surplus:].sum())
            assert exact <= top_sum + 1e-9
            assert exact >= 0.97 * offline_opt_formula(dist, f, float(inst.total_demand))


class TestOnlineOptBruteforce:
    def test_hand_computed_case(self):
        inst = Instance((1,), ((2, (0,)),))
        assert online_opt_bruteforce(inst, BINARY, 1.0) == pytest.approx(0.375)

    def test_zero_queries_pure_penalty(self):
        inst = Instance((2, 1), ())
        assert online_opt_bruteforce(inst, BINARY, 1.0) == pytest.approx(-3.0)

    def test_point_mass_zero_rewards_deliver_greedily(self):
        point = RewardDistribution.point_mass(0.0)
        inst = Instance((2, 1), ((2, (0,)), (1, (0, 1))))
        # max deliverable is 3 via (0,0,1); value 0
        assert online_opt_bruteforce(inst, point, 1.0) == pytest.approx(0.0)

    def test_size_limits(self):
        with pytest.raises(SizeLimit):
            online_opt_bruteforce(Instance((9,), ((1, (0,)),)), BINARY, 1.0)
        with pytest.raises(SizeLimit):
            online_opt_bruteforce(Instance((1,), ((13, (0,)),)), BINARY, 1.0)
        wide = RewardDistribution((0.0, 0.1, 0.2, 0.3), (0.2, 0.5, 0.7, 1.0))
        with pytest.raises(SizeLimit):
            online_opt_bruteforce(Instance((1,), ((2, (0,)),)), wide, 1.0)

    def test_dominates_threshold_policy(self):
        inst = Instance((1, 1), ((2, (0, 1)), (2, (1,))))
        f = max(1.0, supply_factor(inst))
        policy, _, _ = make_policy(BINARY, 1.0, f, N=2.0)
        e_alg, e_off = exhaustive_values(inst, BINARY, 1.0, policy)
        v_onl = online_opt_bruteforce(inst, BINARY, 1.0)
        assert e_alg <= v_onl + 1e-9
        assert v_onl <= e_off + 1e-9

    def test_sandwich_on_three_point_dist(self):
        inst = Instance((2, 1), ((3, (0, 1)), (2, (0,))))
        f = max(1.0, supply_factor(inst))
        policy, _, _ = make_policy(TRI3, 1.0, f, N=3.0)
        e_alg, e_off = exhaustive_values(inst, TRI3, 1.0, policy)
        v_onl = online_opt_bruteforce(inst, TRI3, 1.0)
        assert e_alg <= v_onl + 1e-9 <= e_off + 2e-9


class TestAdversaryLpTight:
    def test_first_entry(self):
        policy = ThresholdPolicy((0.3, 1.0), BINARY)
        prof = adversary_lp_tight(policy, 2.0, 1.0, 10)
        assert prof.beta[0] == pytest.approx(0.1)

    def test_binary_matches_piecewise_closed_form(self):
        N, t, f, q = 1.0, 10, 2.0, 0.5
        policy = ThresholdPolicy((0.3, 1.0), BINARY)
        prof = adversary_lp_tight(policy, f, N, t)
        st = 3
        for j in range(1, t + 1):
            if j <= st + 1:
                expected = (N / t) * (1 - 1 / (t * f)) ** (j - 1)
            else:
                expected = (
                    (N / t)
                    * (1 - 1 / (t * f)) ** st
                    * (1 - (1 / q) / (t * f)) ** (j - st - 1)
                )
            assert prof.beta[j - 1] == pytest.approx(expected, abs=1e-12)

    def test_residuals_vanish(self):
        policy = ThresholdPolicy((0.25, 0.7, 1.0), TRI3)
        prof = adversary_lp_tight(policy, 1.5, 1.0, 300)
        resid = lp_residuals(prof, policy, 1.5, 1.0)
        assert resid["equality"] <= 1e-9
        assert resid["beta1"] == 0.0
        assert resid["negativity"] <= 1e-15

    def test_non_increasing(self):
        policy = ThresholdPolicy((0.25, 0.7, 1.0), TRI3)
        prof = adversary_lp_tight(policy, 1.5, 1.0, 300)
        assert np.all(np.diff(prof.beta) <= 1e-15)

    def test_requires_t_at_least_two(self):
        policy = ThresholdPolicy((0.3, 1.0), BINARY)
        with pytest.raises(DomainError):
            adversary_lp_tight(policy, 2.0, 1.0, 1)


class TestRealizedInstance:
    def test_reward_count_checked(self):
        inst = Instance((1,), ((2, (0,)),))
        with pytest.raises(DomainError):
            RealizedInstance(inst, (0.0,))

    def test_sampled_rewards_on_support(self):
        inst = gen_upper_triangular(3, 2, 2.0, seed=0)
        realized = sample_realized(inst, TRI3, seed=5)
        assert set(realized.rewards) <= set(TRI3.support)

    def test_sampling_deterministic(self):
        inst = gen_upper_triangular(3, 2, 2.0, seed=0)
        a = sample_realized(inst, TRI3, seed=5)
        b = sample_realized(inst, TRI3, seed=5)
        assert a == b
