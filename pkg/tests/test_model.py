"""
Tests for the problem instance types and assignment evaluation.
"""

import math

import numpy as np
import pytest

from keygroup import (
    AdGroupSpec,
    Assignment,
    DimensionError,
    KeywordStat,
    Moments2,
    ProblemInstance,
    ValidationError,
    evaluate_assignment,
    expected_cost,
    expected_profit,
    profit_variance,
    risk_feasible,
    risk_ratio,
    roi,
)

from .conftest import make_keyword


class TestMoments2:
    """Test the mean/sd pair."""

    def test_second_moment(self):
        """Test E[X^2] = mean^2 + sd^2."""
        assert Moments2(0.5, 0.1).second_moment == pytest.approx(0.26)
        assert Moments2(0.5, 0.1).variance == pytest.approx(0.01)

    def test_negative_sd_rejected(self):
        """Test that a negative sd raises ValidationError."""
        with pytest.raises(ValidationError):
            Moments2(1.0, -0.1)

    def test_nan_mean_rejected(self):
        """Test that a non-finite mean is rejected."""
        with pytest.raises(ValidationError):
            Moments2(math.nan, 0.0)


class TestKeywordStat:
    """Test keyword validation and derived cost moments."""

    def test_cost_derived_from_ctr_and_cpc(self):
        """Test cost mean d*E[c]*p and sd d*p*sd(c)."""
        keyword = make_keyword("kw", demand=100.0, ctr=(0.04, 0.01), cpc=0.3)
        assert keyword.cost[0].mean == pytest.approx(1.2)
        assert keyword.cost[0].sd == pytest.approx(0.3)

    def test_explicit_cost_kept(self):
        """Test that explicit cost moments override the derived ones."""
        keyword = make_keyword("kw", cost=(2.13, 3.67))
        assert keyword.cost == (Moments2(2.13, 3.67),)

    def test_column_length_mismatch(self):
        """Test that ctr/cvr/cpc of different lengths name the keyword."""
        with pytest.raises(ValidationError) as excinfo:
            KeywordStat("kw-bad", 10.0, 1.0, ctr=[(0.1, 0.0)] * 2, cvr=[(0.1, 0.0)], cpc=[0.1])
        assert excinfo.value.keyword_id == "kw-bad"

    def test_rate_outside_unit_interval(self):
        """Test that a CTR mean above 1 is rejected."""
        with pytest.raises(ValidationError, match="ctr mean"):
            make_keyword("kw", ctr=(1.5, 0.0))

    def test_negative_demand(self):
        """Test that negative demand is rejected."""
        with pytest.raises(ValidationError):
            make_keyword("kw", demand=-1.0)

    def test_expected_profit_formula(self):
        """Test e = d*(v*E[c]*E[r] - p*E[c])."""
        keyword = make_keyword("kw", demand=100.0, vps=16.0, ctr=(0.04, 0.0), cvr=(0.5, 0.1))
        assert keyword.expected_profit(0) == pytest.approx(30.8)

    def test_variance_clamped_at_zero(self):
        """Test that w is never negative."""
        keyword = make_keyword("kw", vps=0.0, ctr=(0.5, 0.0), cvr=(0.5, 0.0), cpc=0.0)
        assert keyword.profit_variance(0) == 0.0


class TestAdGroupSpec:
    """Test adgroup validation."""

    def test_alpha_below_half_rejected(self):
        """Test that alpha < 0.5 is rejected."""
        with pytest.raises(ValidationError):
            AdGroupSpec("g", 10.0, 0.4)

    def test_alpha_one_rejected(self):
        """Test that alpha = 1 is rejected."""
        with pytest.raises(ValidationError):
            AdGroupSpec("g", 10.0, 1.0)

    def test_non_positive_budget_rejected(self):
        """Test that a zero budget is rejected."""
        with pytest.raises(ValidationError):
            AdGroupSpec("g", 0.0)


class TestProblemInstance:
    """Test instance validation and cached matrices."""

    def test_duplicate_keyword_ids(self):
        """Test that duplicate keyword ids are rejected."""
        keyword = make_keyword("kw")
        with pytest.raises(ValidationError, match="duplicate"):
            ProblemInstance((keyword, keyword), (AdGroupSpec("g", 1.0),))

    def test_column_count_mismatch(self):
        """Test that keywords must have one column per adgroup."""
        keyword = make_keyword("kw", m=1)
        with pytest.raises(ValidationError):
            ProblemInstance((keyword,), (AdGroupSpec("a", 1.0), AdGroupSpec("b", 1.0)))

    def test_non_positive_theta(self):
        """Test that theta must be positive."""
        with pytest.raises(ValidationError):
            ProblemInstance((make_keyword("kw"),), (AdGroupSpec("g", 1.0),), 0.0)

    def test_matrices_are_read_only(self, single_keyword_instance):
        """Test that cached matrices cannot be modified."""
        with pytest.raises(ValueError):
            single_keyword_instance.profit_matrix[0, 0] = 0.0

    def test_rankings(self, random_instance):
        """Test keyword ranking by best profit and adgroup ranking by budget."""
        inst = random_instance(3, 6, 2)
        best = inst.profit_matrix.max(axis=1)
        ranked = [best[i] for i in inst.keyword_ranking]
        assert ranked == sorted(ranked, reverse=True)
        budgets = [inst.budgets[j] for j in inst.adgroup_ranking]
        assert budgets == sorted(budgets, reverse=True)

    def test_with_budgets(self, random_instance):
        """Test replacing budgets and the common alpha."""
        inst = random_instance(0, 4, 2)
        changed = inst.with_budgets([5.0, 7.0], alpha=0.9)
        assert list(changed.budgets) == [5.0, 7.0]
        assert list(changed.alphas) == [0.9, 0.9]
        assert changed.total_budget == 12.0
        with pytest.raises(DimensionError):
            inst.with_budgets([1.0])

    def test_variance_cap(self, single_keyword_instance):
        """Test theta * sum(B) and the inf cap."""
        assert single_keyword_instance.variance_cap == pytest.approx(60.0)
        assert math.isinf(single_keyword_instance.with_risk_tolerance(math.inf).variance_cap)


class TestAssignment:
    """Test the 0/1 assignment type."""

    def test_row_sum_above_one_rejected(self):
        """Test that a keyword in two adgroups is rejected."""
        with pytest.raises(ValidationError):
            Assignment(np.array([[1, 1]]))

    def test_non_binary_rejected(self):
        """Test that entries other than 0 and 1 are rejected."""
        with pytest.raises(ValidationError):
            Assignment(np.array([[2, 0]]))

    def test_empty(self):
        """Test the empty assignment."""
        empty = Assignment.empty(3, 2)
        assert empty.shape == (3, 2)
        assert empty.num_assigned == 0
        assert empty.pairs() == []
        assert not empty.is_evaluated

    def test_copy_is_read_only(self):
        """Test that the stored matrix is a read-only copy."""
        source = np.array([[1, 0], [0, 1]])
        assignment = Assignment(source)
        source[0, 0] = 0
        assert assignment.x[0, 0] == 1
        with pytest.raises(ValueError):
            assignment.x[0, 0] = 0


class TestEvaluation:
    """Test profit, variance, ROI and risk of assignments."""

    def test_single_keyword_values(self, single_keyword_instance):
        """Test e = 30.8, w = 40.96, ROI = 30.8 / 1.2 and risk 0.2048."""
        inst = single_keyword_instance
        x = [[1]]
        assert expected_profit(inst, x) == pytest.approx(30.8)
        assert profit_variance(inst, x) == pytest.approx(40.96)
        assert expected_cost(inst, x) == pytest.approx(1.2)
        assert roi(inst, x) == pytest.approx(25.6667, rel=1e-4)
        assert risk_ratio(inst, x) == pytest.approx(0.2048)
        assert risk_feasible(inst, x)

    def test_risk_infeasible_below_ratio(self, single_keyword_instance):
        """Test that theta = 0.2 rejects risk 0.2048."""
        assert not risk_feasible(single_keyword_instance.with_risk_tolerance(0.2), [[1]])

    def test_empty_assignment(self, single_keyword_instance):
        """Test zero profit and no ROI for the empty assignment."""
        evaluated = evaluate_assignment(single_keyword_instance, [[0]])
        assert evaluated.expected_profit == 0.0
        assert evaluated.profit_variance == 0.0
        assert evaluated.roi is None
        assert evaluated.per_adgroup_chance == (1.0,)

    def test_dimension_mismatch(self, single_keyword_instance):
        """Test that a wrongly shaped matrix raises DimensionError."""
        with pytest.raises(DimensionError):
            expected_profit(single_keyword_instance, [[1, 0]])

    def test_additivity(self, random_instance):
        """Test that profit and variance add over disjoint assignments."""
        inst = random_instance(11, 6, 2)
        a = np.zeros((6, 2), dtype=int)
        b = np.zeros((6, 2), dtype=int)
        a[0, 0] = a[1, 1] = 1
        b[2, 0] = b[4, 1] = 1
        assert expected_profit(inst, a + b) == pytest.approx(
            expected_profit(inst, a) + expected_profit(inst, b)
        )
        assert profit_variance(inst, a + b) == pytest.approx(
            profit_variance(inst, a) + profit_variance(inst, b)
        )

    def test_demand_scaling(self):
        """Test that scaling demand by k scales e by k and w by k^2."""
        base = make_keyword("kw", demand=50.0, ctr=(0.1, 0.02), cvr=(0.3, 0.05))
        scaled = make_keyword("kw", demand=150.0, ctr=(0.1, 0.02), cvr=(0.3, 0.05))
        assert scaled.expected_profit(0) == pytest.approx(3.0 * base.expected_profit(0))
        assert scaled.profit_variance(0) == pytest.approx(9.0 * base.profit_variance(0))

    def test_monte_carlo_agreement(self):
        """Test e and w against 10^6 draws of independent normal CTR and CVR."""
        keyword = make_keyword("kw", demand=100.0, vps=16.0, ctr=(0.04, 0.01), cvr=(0.5, 0.1))
        rng = np.random.default_rng(1234)
        c = rng.normal(0.04, 0.01, 1_000_000)
        r = rng.normal(0.5, 0.1, 1_000_000)
        profit = 100.0 * c * (r * 16.0 - 0.3)
        assert float(np.mean(profit)) == pytest.approx(keyword.expected_profit(0), rel=5e-3)
        assert float(np.var(profit)) == pytest.approx(keyword.profit_variance(0), rel=2e-2)


SAMPLES = 1_000_000


def _random_keyword(rng: np.random.Generator, keyword_id: str, m: int) -> KeywordStat:
    """Keyword with profitable, strictly uncertain CTR and CVR in each column."""
    ctr, cvr, cpc = [], [], []
    for _ in range(m):
        c = rng.uniform(0.02, 0.2)
        r = rng.uniform(0.2, 0.6)
        ctr.append(Moments2(c, rng.uniform(0.05, 0.25) * c))
        cvr.append(Moments2(r, rng.uniform(0.05, 0.25) * r))
        cpc.append(rng.uniform(0.05, 0.5))
    return KeywordStat(keyword_id, rng.uniform(50.0, 2000.0), rng.uniform(5.0, 20.0), ctr, cvr, cpc)


def _sampled_profit(
    rng: np.random.Generator, keyword: KeywordStat, j: int, size: int = SAMPLES
) -> np.ndarray:
    c = rng.normal(keyword.ctr[j].mean, keyword.ctr[j].sd, size)
    r = rng.normal(keyword.cvr[j].mean, keyword.cvr[j].sd, size)
    return keyword.demand * c * (r * keyword.value_per_sale - keyword.cpc[j])


class TestMonteCarloOracle:
    """Test the closed-form profit moments against sampled CTR and CVR."""

    @pytest.mark.parametrize("seed", range(100))
    def test_single_pair(self, seed):
        """Test e within 0.5% and w within 2% for one random keyword-adgroup pair."""
        rng = np.random.default_rng(seed)
        keyword = _random_keyword(rng, "kw", 1)
        profit = _sampled_profit(rng, keyword, 0)
        assert float(np.mean(profit)) == pytest.approx(keyword.expected_profit(0), rel=5e-3)
        assert float(np.var(profit)) == pytest.approx(keyword.profit_variance(0), rel=2e-2)

    @pytest.mark.parametrize("seed", range(20))
    def test_multi_keyword(self, seed):
        """Test the assignment moments of five keywords over two adgroups."""
        rng = np.random.default_rng(1000 + seed)
        keywords = tuple(_random_keyword(rng, f"kw-{i}", 2) for i in range(5))
        inst = ProblemInstance(keywords, (AdGroupSpec("a", 1.0), AdGroupSpec("b", 1.0)))
        x = np.zeros((5, 2), dtype=int)
        for i, j in enumerate(rng.integers(-1, 2, size=5)):
            if j >= 0:
                x[i, j] = 1
        x[0] = (1, 0)
        x[1] = (0, 1)

        total = np.zeros(SAMPLES)
        for i, j in zip(*np.nonzero(x)):
            total += _sampled_profit(rng, keywords[i], int(j))
        assert float(np.mean(total)) == pytest.approx(expected_profit(inst, x), rel=5e-3)
        assert float(np.var(total)) == pytest.approx(profit_variance(inst, x), rel=2e-2)
