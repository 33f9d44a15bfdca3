"""
Tests for the greedy incumbent and the branch-and-bound search.
"""

import math

import numpy as np
import pytest

from keygroup import (
    AdGroupSpec,
    GeneratorSpec,
    ProblemInstance,
    SolveConfig,
    ValidationError,
    audit_assignment,
    generate,
    greedy_incumbent,
    solve,
)
from keygroup.chance import ChanceMode

from .conftest import make_keyword

NO_AUDIT = SolveConfig(audit_samples=0)


def _case(seed):
    """n in 4..8, m in 1..2 and theta alternating between 0.3 and inf."""
    theta = 0.3 if (seed // 2) % 2 else math.inf
    return 4 + seed % 5, 1 + seed % 2, theta


class TestGreedyIncumbent:
    """Test the first-fit incumbent."""

    def test_prefers_largest_budget(self):
        """Test that a keyword fitting both adgroups lands in the larger one."""
        keyword = make_keyword("kw", m=2, cost=(1.0, 0.1))
        inst = ProblemInstance((keyword,), (AdGroupSpec("small", 5.0), AdGroupSpec("big", 9.0)))
        assert greedy_incumbent(inst).pairs() == [(0, 1)]

    def test_nothing_fits(self):
        """Test the empty incumbent when every keyword exceeds its budget."""
        inst = ProblemInstance((make_keyword("kw", cost=(10.0, 0.0)),), (AdGroupSpec("g", 5.0),))
        greedy = greedy_incumbent(inst)
        assert greedy.num_assigned == 0
        assert greedy.expected_profit == 0.0

    def test_suboptimal_on_trap(self, greedy_trap_instance):
        """Test that greedy keeps the single best keyword worth 10."""
        greedy = greedy_incumbent(greedy_trap_instance)
        assert greedy.expected_profit == pytest.approx(10.0)
        assert greedy.pairs() == [(0, 0)]

    def test_respects_risk(self, random_instance):
        """Test that the incumbent meets theta when risk is enforced."""
        inst = random_instance(7, 8, 2, theta=0.3)
        assert audit_assignment(inst, greedy_incumbent(inst)).feasible


class TestSolve:
    """Test BBKG optimality, soundness and determinism."""

    def test_beats_greedy_on_trap(self, greedy_trap_instance):
        """Test that the search finds the pair of cheaper keywords worth 12."""
        report = solve(greedy_trap_instance, NO_AUDIT)
        assert report.best_value == pytest.approx(12.0)
        assert sorted(report.best.pairs()) == [(1, 0), (2, 0)]
        assert report.proven_optimal
        assert report.gap == 0.0

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_brute_force(self, seed, random_instance, brute_force):
        """Test the optimum against exhaustive enumeration."""
        n, m, theta = _case(seed)
        inst = random_instance(seed, n, m, theta=theta)
        report = solve(inst, NO_AUDIT)
        best_value, _ = brute_force(inst)
        assert report.proven_optimal
        assert abs(report.best_value - best_value) <= 1e-9 * max(1.0, abs(best_value))
        assert report.best.expected_profit == pytest.approx(report.best_value)
        assert audit_assignment(inst, report.best).feasible

    @pytest.mark.parametrize("seed", range(10))
    def test_pruning_does_not_change_optimum(self, seed, random_instance):
        """Test that disabling pruning reaches the same value."""
        n, m, theta = _case(seed)
        inst = random_instance(seed, min(n, 6), m, theta=theta)
        pruned = solve(inst, NO_AUDIT)
        full = solve(inst, SolveConfig(audit_samples=0, prune=False))
        assert full.best_value == pytest.approx(pruned.best_value, rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize("seed", range(40, 45))
    def test_node_bounds_are_valid(self, seed, random_instance, brute_force):
        """Test that every recorded node bound is at least the best value in its subspace."""
        inst = random_instance(seed, 5, 2, theta=0.3 if seed % 2 else math.inf)
        report = solve(inst, SolveConfig(audit_samples=0, record_nodes=True))
        assert report.node_log
        for fixings, bound in report.node_log:
            best = brute_force(inst, fixings)
            if best is None:
                continue
            assert best[0] <= bound + 1e-6 * max(1.0, abs(bound))

    @pytest.mark.parametrize("seed", range(5))
    def test_workers_do_not_change_result(self, seed, random_instance):
        """Test that concurrent relaxations give the same search."""
        inst = random_instance(seed, 7, 2, theta=0.3)
        single = solve(inst, NO_AUDIT)
        threaded = solve(inst, SolveConfig(audit_samples=0, workers=8))
        assert threaded.best_value == single.best_value
        assert np.array_equal(threaded.best.x, single.best.x)
        assert threaded.nodes_expanded == single.nodes_expanded

    def test_risk_tolerance_monotone(self, random_instance):
        """Test that the risk-loving optimum is at least the risk-averse one."""
        inst = random_instance(12, 7, 2)
        loving = solve(inst, NO_AUDIT)
        averse = solve(inst.with_risk_tolerance(0.3), NO_AUDIT)
        assert loving.best_value >= averse.best_value - 1e-9

    def test_nothing_fits(self):
        """Test an empty optimum when no keyword fits any adgroup."""
        inst = ProblemInstance((make_keyword("kw", cost=(10.0, 0.0)),), (AdGroupSpec("g", 5.0),))
        report = solve(inst, NO_AUDIT)
        assert report.best.num_assigned == 0
        assert report.best_value == 0.0
        assert report.proven_optimal

    def test_identical_columns_close_at_root(self):
        """Test that a tie between the root bound and the incumbent ends the search."""
        keywords = tuple(
            make_keyword(f"kw-{i}", demand=100.0 + 10.0 * i, ctr=(0.04, 0.004), m=2)
            for i in range(12)
        )
        inst = ProblemInstance(keywords, (AdGroupSpec("a", 1000.0), AdGroupSpec("b", 500.0)))
        report = solve(inst, NO_AUDIT)
        assert report.nodes_expanded <= 1
        assert report.proven_optimal
        assert report.best.num_assigned == 12
        assert report.best_value == pytest.approx(greedy_incumbent(inst).expected_profit)

    @pytest.mark.slow
    @pytest.mark.filterwarnings("ignore::keygroup.NormalityWarning")
    def test_dataset1_within_limit(self):
        """Test a calibrated 90-keyword instance under a node limit with a gap of at most 2%."""
        inst = generate(GeneratorSpec.dataset1(seed=1))
        report = solve(inst, SolveConfig(audit_samples=0, node_limit=500))
        assert report.gap <= 0.02 * max(1.0, report.best_value)
        assert audit_assignment(inst, report.best).feasible

    def test_node_limit(self, random_instance):
        """Test that a node limit returns a feasible incumbent and a nonnegative gap."""
        inst = random_instance(99, 14, 2, theta=0.3)
        report = solve(inst, SolveConfig(audit_samples=0, node_limit=2))
        assert report.nodes_expanded <= 2
        assert report.gap >= 0.0
        assert report.proven_optimal or report.gap > 0.0
        assert audit_assignment(inst, report.best).feasible

    def test_incumbent_history_non_decreasing(self, random_instance):
        """Test that the anytime incumbent value never drops."""
        inst = random_instance(13, 8, 2, theta=0.3)
        history = [value for _, value in solve(inst, NO_AUDIT).incumbent_history]
        assert history == sorted(history)

    def test_deterministic(self, random_instance):
        """Test that repeated runs are identical."""
        inst = random_instance(14, 7, 2)
        first = solve(inst, NO_AUDIT)
        second = solve(inst, NO_AUDIT)
        assert first.best_value == second.best_value
        assert first.nodes_expanded == second.nodes_expanded
        assert np.array_equal(first.best.x, second.best.x)

    def test_simulated_checks_reproducible(self, random_instance):
        """Test that sampled chance checks repeat for the same seed."""
        inst = random_instance(15, 5, 2)
        config = SolveConfig(
            audit_samples=0, chance_mode=ChanceMode.SIMULATE, samples=2_000, seed=3
        )
        first = solve(inst, config)
        second = solve(inst, config)
        assert first.best_value == second.best_value
        assert np.array_equal(first.best.x, second.best.x)

    def test_audit_attached(self, single_keyword_instance):
        """Test the post-solve audit with sampling."""
        report = solve(single_keyword_instance, SolveConfig(audit_samples=10_000, seed=2))
        assert report.audit is not None
        assert report.audit.feasible
        assert report.best_value == pytest.approx(30.8)


class TestSolveConfig:
    """Test search configuration validation."""

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"node_limit": 0},
            {"time_limit": 0.0},
            {"workers": 0},
            {"chance_mode": "exact"},
            {"samples": 0},
            {"audit_samples": -1},
            {"seed": -1},
            {"gap_tol": 1e-12},
        ],
    )
    def test_invalid(self, kwargs):
        """Test that out-of-range settings are rejected."""
        with pytest.raises(ValidationError):
            SolveConfig(**kwargs)
