import math

import numpy as np
import pytest

from prefrecovery.bounds import (
    LN_4E2,
    GapEstimate,
    estimate_mu,
    estimate_r,
    estimate_sample_complexity,
    mu_samples,
    shatter_probe,
    theorem3_bound,
    theorem3_terms,
    eu_template,
)
from prefrecovery.errors import ContractViolation, EstimationError
from prefrecovery.estimator import achievable_patterns
from prefrecovery.experiment import ErrorModel, random_plan
from prefrecovery.metric import EvaluationGrid
from prefrecovery.preferences import ExpectedUtility, TotalIndifference
from prefrecovery.spaces import AlternativeSpace

S2 = AlternativeSpace.simplex(2)
S3 = AlternativeSpace.simplex(3)


class TestFitMeasure:
    def setup_method(self):
        self.p = ExpectedUtility.from_index(S3, [0.7, -0.2, -0.5])
        self.em = ErrorModel.exponential(2.0)

    def test_reversed_is_complement(self):
        a = estimate_mu(self.p, self.p, self.em, S3, 5000, 1)
        b = estimate_mu(self.p.reversed(), self.p, self.em, S3, 5000, 1)
        assert a + b == pytest.approx(1.0, abs=1e-12)

    def test_truth_beats_a_coin(self):
        assert estimate_mu(self.p, self.p, self.em, S3, 5000, 2) > 0.5

    def test_indifference_scores_one(self):
        # weakly ranks every pair both ways, so every draw is consistent
        assert estimate_mu(TotalIndifference(S3), self.p, self.em, S3, 500, 3) == 1.0

    def test_sharp_noise_pushes_truth_towards_one(self):
        vals = [estimate_mu(self.p, self.p, ErrorModel.exponential(k), S3, 20000, 4) for k in (1.0, 10.0, 1e4)]
        assert vals[0] < vals[1] < vals[2]
        assert vals[2] > 0.999

    def test_common_random_numbers(self):
        a = mu_samples(self.p, self.p, self.em, S3, 100, 5)
        b = mu_samples(self.p, self.p, self.em, S3, 100, 5)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, mu_samples(self.p, self.p, self.em, S3, 100, 6))

    def test_bad_mc(self):
        with pytest.raises(ContractViolation):
            estimate_mu(self.p, self.p, self.em, S3, 0, 1)


class TestGap:
    def setup_method(self):
        self.p = ExpectedUtility.from_index(S2, [1.0, 0.0])
        self.grid = EvaluationGrid.lattice(S2, 15)
        self.em = ErrorModel.exponential(2.0)

    def test_gap_nonnegative_within_noise(self):
        est = estimate_r(eu_template(2), self.p, 0.2, self.grid, self.em, S2, 5, 20000, 1)
        assert est.gap >= -3 * est.stderr
        assert est.nearest_distance >= 0.2 and est.pairs_probed == 5

    def test_deterministic(self):
        a = estimate_r(eu_template(2), self.p, 0.2, self.grid, self.em, S2, 5, 5000, 2)
        assert a == estimate_r(eu_template(2), self.p, 0.2, self.grid, self.em, S2, 5, 5000, 2)

    def test_unreachable_eta(self):
        with pytest.raises(EstimationError):
            estimate_r(eu_template(2), self.p, 10.0, self.grid, self.em, S2, 3, 100, 1, max_attempts=50)

    @pytest.mark.parametrize("eta,probes", [(0.0, 3), (0.2, 0)])
    def test_contract(self, eta, probes):
        with pytest.raises(ContractViolation):
            estimate_r(eu_template(2), self.p, eta, self.grid, self.em, S2, probes, 100, 1)

    def test_conservative(self):
        g = GapEstimate(0.1, 0.02, 0.001, 3, 10, 5, 0.2)
        assert g.conservative() == pytest.approx(0.023)


class TestSampleComplexity:
    def setup_method(self):
        self.p = ExpectedUtility.from_index(S2, [1.0, 0.0])
        self.grid = EvaluationGrid.lattice(S2, 15)
        self.args = (self.p, eu_template(2))

    def _row(self, eta, delta, table):
        return estimate_sample_complexity(
            *self.args, eta, delta, ErrorModel.exponential(), S2, self.grid, 20, [10, 20, 40], 0, table=table
        )

    def test_from_table(self):
        table = np.tile([0.5, 0.3, 0.1], (20, 1))
        table[:3, 2] = 0.4
        row = self._row(0.2, 0.2, table)
        assert row.success_rates == (0.0, 0.0, 0.85) and row.n_star == 40 and row.success_rate == 0.85
        assert self._row(0.2, 0.1, table).n_star is None

    def test_delta_one_is_first_n(self):
        assert self._row(0.2, 1.0, np.ones((20, 3))).n_star == 10

    def test_large_eta_always_succeeds(self):
        row = estimate_sample_complexity(
            *self.args, 10.0, 0.05, ErrorModel.exponential(), S2, self.grid, 20, [10, 20], 3
        )
        assert row.success_rates == (1.0, 1.0) and row.n_star == 10

    @pytest.mark.parametrize(
        "reps,sched,delta", [(19, [10, 20], 0.1), (20, [20, 10], 0.1), (20, [10, 10], 0.1), (20, [10], 0.0)]
    )
    def test_contract(self, reps, sched, delta):
        with pytest.raises(ContractViolation):
            estimate_sample_complexity(*self.args, 0.2, delta, ErrorModel.exponential(), S2, self.grid, reps, sched, 0)


class TestBound:
    def test_golden_value(self):
        # independent 40-digit mpmath evaluation
        t = theorem3_terms(3, 0.1, 0.05)
        assert t.main == pytest.approx(21315529.552513376, rel=1e-12)
        assert t.c_linear == pytest.approx(1170.3033312030342, rel=1e-12)
        assert t.c_sqrt == pytest.approx(34.20969645002765, rel=1e-12)
        assert theorem3_bound(3, 0.1, 0.05) == t.main
        assert theorem3_bound(1, 0.5, 0.1) == pytest.approx(286085.7373767255, rel=1e-12)

    def test_constant(self):
        assert LN_4E2 == pytest.approx(math.log(4 * math.e ** 2), abs=1e-15)

    def test_monotone_in_each_argument(self):
        assert theorem3_bound(4, 0.1, 0.1) > theorem3_bound(3, 0.1, 0.1)
        assert theorem3_bound(3, 0.05, 0.1) > theorem3_bound(3, 0.1, 0.1)
        assert theorem3_bound(3, 0.1, 0.01) > theorem3_bound(3, 0.1, 0.1)

    def test_halving_r_quadruples_main_term(self):
        a, b = theorem3_terms(3, 0.2, 0.1), theorem3_terms(3, 0.1, 0.1)
        assert b.main == pytest.approx(4 * a.main, rel=1e-12)
        assert a.c_linear == b.c_linear

    def test_side_condition_can_dominate(self):
        t = theorem3_terms(50, 100.0, 0.5)
        assert t.value == t.c_linear > t.main

    @pytest.mark.parametrize("V,r,delta", [(0, 0.1, 0.1), (3, 0.0, 0.1), (3, 0.1, 0.0), (3, 0.1, 1.0)])
    def test_contract(self, V, r, delta):
        with pytest.raises(ContractViolation):
            theorem3_bound(V, r, delta)


class TestShatter:
    def test_single_problem_is_shattered(self):
        assert shatter_probe(2, 1, 5, 0).shattered

    def test_two_goods_index_has_two_directions(self):
        # on the 2-simplex the sum-zero index is +/- one vector: at most two patterns
        res = shatter_probe(2, 3, 200, 1)
        assert res.max_patterns == 2 and not res.shattered

    def test_three_goods_cap_at_six_patterns(self):
        # three lines through the origin of the plane cut it into 2 * (1 + 2) sectors
        res = shatter_probe(3, 3, 200, 2)
        assert res.max_patterns == 6 and not res.shattered
        assert shatter_probe(3, 2, 50, 2).shattered

    def test_four_goods_shatter_three(self):
        res = shatter_probe(4, 3, 500, 2)
        assert res.shattered and len(res.witness) == 3

    def test_witness_reproduces_count(self):
        res = shatter_probe(4, 4, 30, 3)
        xs = np.array([w[0] for w in res.witness])
        ys = np.array([w[1] for w in res.witness])
        assert achievable_patterns(xs, ys).shape[0] == res.max_patterns

    def test_matches_random_plan_counts(self):
        plan = random_plan(S3, 4, 11)
        assert achievable_patterns(plan.xs, plan.ys).shape[0] <= 2 ** 4

    def test_contract(self):
        with pytest.raises(ContractViolation):
            shatter_probe(3, 0, 5, 0)
        with pytest.raises(ContractViolation):
            shatter_probe(3, 2, 5, 0, family="discounted_utility")
