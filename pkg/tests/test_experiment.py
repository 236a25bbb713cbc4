import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from prefrecovery.errors import ConfigError, ContractViolation
from prefrecovery.estimator import kemeny_loss
from prefrecovery.experiment import (
    ChoiceDataError,
    ErrorModel,
    ExperimentPlan,
    RevealedRelation,
    TieRule,
    choices_from_csv,
    choices_to_csv,
    enumerate_alternatives,
    exhaustive_plan,
    pair_index,
    random_plan,
    simulate_noiseless,
    simulate_noisy,
)
from prefrecovery.preferences import ExpectedUtility, TotalIndifference
from prefrecovery.spaces import AlternativeSpace

S2 = AlternativeSpace.simplex(2)
S3 = AlternativeSpace.simplex(3)
LINE = AlternativeSpace.real_line()
R2 = 1 / math.sqrt(2)


def _repeat_plan(space, x, y, n):
    return ExperimentPlan(space, np.tile(x, (n, 1)), np.tile(y, (n, 1)))


class TestExhaustivePlan:
    def test_first_problem_on_real_line(self):
        plan = exhaustive_plan(LINE, 1)
        assert plan.xs.tolist() == [[-1.0]] and plan.ys.tolist() == [[1.0]]

    @pytest.mark.parametrize("space", [LINE, S3, AlternativeSpace.positive_orthant(2)], ids=lambda s: s.kind.value)
    def test_prefix_property(self, space):
        assert exhaustive_plan(space, 10).same_as(exhaustive_plan(space, 50).prefix(10))

    def test_deterministic(self):
        assert exhaustive_plan(S3, 40).same_as(exhaustive_plan(S3, 40))

    def test_diagonal_order(self):
        assert [pair_index(k) for k in range(6)] == [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)]

    def test_every_pair_appears_once(self):
        n_alt = 12
        n = n_alt * (n_alt - 1) // 2
        plan = exhaustive_plan(S3, n)
        alts = enumerate_alternatives(S3, n_alt)
        seen = {tuple(sorted((tuple(x), tuple(y)))) for x, y in zip(plan.xs, plan.ys)}
        expected = {tuple(sorted((tuple(alts[i]), tuple(alts[j])))) for i in range(n_alt) for j in range(i + 1, n_alt)}
        assert seen == expected and len(seen) == n
        assert not np.any(np.all(plan.xs == plan.ys, axis=1))

    @pytest.mark.parametrize("space", [LINE, S2, S3, AlternativeSpace.positive_orthant(2)], ids=lambda s: s.kind.value)
    @pytest.mark.parametrize("level", [1, 2, 3])
    def test_density_by_level(self, space, level):
        pts = space.dyadic_level(level)
        test = space.from_uniforms(np.random.default_rng(level).random((20000, space.uniforms_per_point)))
        corners = space.dyadic_level(0)
        dist, _ = cKDTree(pts).query(np.concatenate([test, corners]))
        assert dist.max() <= 2.0 ** -level * space.diameter + 1e-12

    def test_enumeration_is_levelwise(self):
        a = enumerate_alternatives(S3, 30)
        assert len({tuple(r) for r in a}) == 30
        np.testing.assert_array_equal(a[:3], S3.dyadic_new_points(0))


class TestRandomPlan:
    def test_repeatable_and_prefix_stable(self):
        a, b = random_plan(S3, 50, 7), random_plan(S3, 50, 7)
        assert a.same_as(b)
        assert random_plan(S3, 20, 7).same_as(a.prefix(20))
        assert not a.same_as(random_plan(S3, 50, 8))

    def test_simplex_means(self):
        plan = random_plan(S3, 10_000, 1)
        np.testing.assert_allclose(plan.xs.mean(axis=0), 1 / 3, atol=0.01)
        np.testing.assert_allclose(plan.ys.mean(axis=0), 1 / 3, atol=0.01)

    def test_pairs_distinct_and_in_support(self):
        for space in (S3, AlternativeSpace.positive_orthant(3), AlternativeSpace.dated_reward()):
            plan = random_plan(space, 2000, 3)
            assert not np.any(np.all(plan.xs == plan.ys, axis=1))
            assert space.in_support(plan.xs).all() and space.in_support(plan.ys).all()

    def test_bad_size(self):
        with pytest.raises(ContractViolation):
            random_plan(S3, 0, 1)


class TestErrorModel:
    def test_exponential_contract(self):
        em = ErrorModel.exponential(2.0)
        assert em.f(0.0) == 1.0
        assert em.p_correct(0.5) == pytest.approx(1 - math.exp(-1) / 2, abs=1e-15)
        assert em.p_correct(1e-12) == pytest.approx(0.5, abs=1e-11)

    def test_linear_clamp(self):
        em = ErrorModel.linear_clamp(2.0)
        np.testing.assert_allclose(em.f([0.0, 0.25, 1.0]), [1.0, 0.5, 0.0])

    @pytest.mark.parametrize(
        "t,f",
        [((0, 1), (0.9, 0.5)), ((0, 1), (1.0, 1.0)), ((0.1, 1), (1.0, 0.5)), ((0, 1, 2), (1.0, 0.5, 0.7))],
    )
    def test_custom_rejects_bad_tables(self, t, f):
        with pytest.raises(ContractViolation):
            ErrorModel.custom(t, f)

    def test_custom_valid(self):
        em = ErrorModel.custom((0, 1, 2), (1.0, 0.4, 0.1))
        assert em.f(0.5) == pytest.approx(0.7)

    def test_parameter_validation(self):
        with pytest.raises(ContractViolation):
            ErrorModel.exponential(0.0)
        with pytest.raises(ContractViolation):
            ErrorModel.linear_clamp(-1.0)


class TestSimulation:
    def test_noiseless_example(self):
        p = ExpectedUtility(S2, (R2, -R2))
        plan = ExperimentPlan(S2, [[0.0, 1.0]], [[1.0, 0.0]])
        R = simulate_noiseless(p, plan)
        assert R.chosen.tolist() == [[1.0, 0.0]]

    def test_indifference_lexicographic(self):
        plan = random_plan(S3, 100, 2)
        R = simulate_noiseless(TotalIndifference(S3), plan, TieRule.LEXICOGRAPHIC)
        assert R.tie_flags.all()
        for c, r in zip(R.chosen, R.rejected):
            assert tuple(c) < tuple(r)

    def test_flag_and_skip_drops_ties(self):
        plan = random_plan(S3, 10, 2)
        R = simulate_noiseless(TotalIndifference(S3), plan, TieRule.FLAG_AND_SKIP)
        assert R.n == 0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 200))
    def test_noiseless_is_rationalized(self, seed, n):
        p = ExpectedUtility.from_index(S3, np.random.default_rng(seed).standard_normal(3))
        R = simulate_noiseless(p, random_plan(S3, n, seed))
        assert kemeny_loss(p, R) == 0.0

    def test_space_mismatch(self):
        with pytest.raises(ContractViolation):
            simulate_noiseless(ExpectedUtility(S2, (R2, -R2)), random_plan(S3, 3, 0))

    def test_noisy_reproducible_and_prefix_stable(self):
        p = ExpectedUtility.from_index(S3, [1, 0, -1])
        plan = random_plan(S3, 300, 4)
        em = ErrorModel.exponential()
        a, b = simulate_noisy(p, plan, em, 9), simulate_noisy(p, plan, em, 9)
        assert a.same_as(b)
        short = simulate_noisy(p, plan.prefix(100), em, 9)
        assert short.same_as(a.subset(np.arange(100)))

    def test_correct_frequency_matches_error_model(self):
        p = ExpectedUtility(S2, (R2, -R2))
        a = 0.5 / (2 * math.sqrt(2))
        x, y = np.array([0.5 + a, 0.5 - a]), np.array([0.5 - a, 0.5 + a])
        assert np.linalg.norm(x - y) == pytest.approx(0.5, abs=1e-15)
        R = simulate_noisy(p, _repeat_plan(S2, x, y, 10_000), ErrorModel.exponential(2.0), 11)
        freq = 1 - R.picked_second.mean()
        assert abs(freq - (1 - math.exp(-1) / 2)) <= 0.01

    def test_indifferent_pair_is_a_coin_flip(self):
        # power-of-two weights keep both utilities exactly zero under fused multiply-add
        p = ExpectedUtility(S3, (R2, 0.0, -R2))
        x, y = np.array([0.25, 0.5, 0.25]), np.array([0.5, 0.0, 0.5])
        assert p.utility(x)[0] == p.utility(y)[0]
        R = simulate_noisy(p, _repeat_plan(S3, x, y, 10_000), ErrorModel.exponential(), 5)
        assert R.tie_flags.all()
        assert abs(R.picked_second.mean() - 0.5) <= 0.02

    def test_strict_pairs_answered_correctly_more_than_half(self):
        g = np.random.default_rng(12)
        p = ExpectedUtility.from_index(S3, [0.2, 1, -1.2])
        em = ErrorModel.exponential()
        n = 10_000
        for k in range(20):
            x, y = g.dirichlet(np.ones(3), 2)
            if p.utility(y)[0] > p.utility(x)[0]:
                x, y = y, x
            R = simulate_noisy(p, _repeat_plan(S3, x, y, n), em, k)
            freq = 1 - R.picked_second.mean()
            pc = float(em.p_correct(np.linalg.norm(x - y)))
            assert pc > 0.5
            assert abs(freq - pc) <= 3 * math.sqrt(pc * (1 - pc) / n)


class TestChoiceCsv:
    def _data(self):
        p = ExpectedUtility.from_index(S3, [1, 0, -1])
        return simulate_noisy(p, random_plan(S3, 25, 1), ErrorModel.exponential(), 2)

    def test_roundtrip_is_exact(self):
        R = self._data()
        text = choices_to_csv(R, {"seed": 1})
        R2_, header = choices_from_csv(text)
        assert R2_.same_as(R)
        assert header == {"seed": "1"}
        assert choices_to_csv(R2_, {"seed": 1}) == text

    def test_column_order(self):
        text = choices_to_csv(self._data())
        assert text.splitlines()[0] == "problem_index,x_1,x_2,x_3,y_1,y_2,y_3,chosen,tie_flag"

    @pytest.mark.parametrize(
        "mutate,needle",
        [
            (lambda row: row.replace(",", ",oops,", 1), "line 4"),
            (lambda row: row[: row.rfind(",")] + ",7", "line 4"),
            (lambda row: row.replace(row.split(",")[1], "nan", 1), "line 4"),
        ],
    )
    def test_corrupted_row_names_line(self, mutate, needle):
        lines = choices_to_csv(self._data()).splitlines()
        lines[3] = mutate(lines[3])
        with pytest.raises(ChoiceDataError, match=needle):
            choices_from_csv("\n".join(lines))

    def test_parse_errors_are_config_errors(self):
        assert issubclass(ChoiceDataError, ConfigError)
        with pytest.raises(ChoiceDataError):
            choices_from_csv("")
        with pytest.raises(ChoiceDataError):
            choices_from_csv("a,b,c\n")

    def test_revealed_relation_validation(self):
        with pytest.raises(ContractViolation):
            RevealedRelation(np.zeros((2, 3)), np.zeros((3, 3)))
