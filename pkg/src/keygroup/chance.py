"""
Budget chance constraints: sampled estimates and the exact normal-cost level.

An adgroup column is feasible when P{sum_i x_ij * s_ij <= B_j} >= alpha_j, where the keyword
costs s_ij are independent normals. `simulate_chance` estimates that probability by sampling,
`analytic_chance` evaluates it through the normal CDF.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .model import (
    Assignment,
    AssignmentLike,
    DimensionError,
    ProblemInstance,
    ValidationError,
    as_matrix,
    risk_ratio,
)

# Draws are generated in chunks of this many samples to bound memory.
SAMPLE_CHUNK = 65_536

# Stream id of the post-solve audit, outside the range of search node ids.
AUDIT_STREAM = 2**40


class ChanceMode:
    ANALYTIC = "analytic"
    SIMULATE = "simulate"


@dataclass(frozen=True)
class ChanceCheckConfig:
    """Number of Monte Carlo samples t and the seed of the sampling stream."""

    samples: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.samples < 1:
            raise ValidationError(f"samples must be >= 1, got {self.samples}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class ChanceCheckResult:
    """Outcome of one sampled check: alpha_hat = hits / samples."""

    alpha_hat: float
    satisfied: bool
    standard_error: float
    hits: int
    samples: int


def chance_stream(seed: int, node_id: int, j: int) -> np.random.Generator:
    """Independent RNG stream for one (search node, adgroup) check."""
    return np.random.default_rng([seed, node_id, j])


def _column(inst: ProblemInstance, x_column: Sequence[int], j: int) -> np.ndarray:
    column = np.asarray(x_column)
    if column.shape != (inst.n,):
        raise DimensionError(f"column must have length {inst.n}, got shape {column.shape}")
    if not 0 <= j < inst.m:
        raise DimensionError(f"adgroup index {j} out of range for {inst.m} adgroups")
    return column


def chance_from_moments(mean_cost: float, var_cost: float, budget: float) -> float:
    """P{S <= budget} for S ~ N(mean_cost, var_cost); a step function when var_cost is 0."""
    if var_cost <= 0.0:
        return 1.0 if mean_cost <= budget else 0.0
    return float(norm.cdf((budget - mean_cost) / math.sqrt(var_cost)))


def analytic_chance(inst: ProblemInstance, x_column: Sequence[int], j: int) -> float:
    """Probability that adgroup j's spend stays within its budget, for normal keyword costs."""
    column = _column(inst, x_column, j)
    mean_cost = float(np.dot(column, inst.cost_mean_matrix[:, j]))
    var_cost = float(np.dot(column * column, inst.cost_var_matrix[:, j]))
    return chance_from_moments(mean_cost, var_cost, float(inst.budgets[j]))


def simulate_chance(
    inst: ProblemInstance,
    x_column: Sequence[int],
    j: int,
    cfg: ChanceCheckConfig = ChanceCheckConfig(),
    rng: Optional[np.random.Generator] = None,
) -> ChanceCheckResult:
    """Estimate the budget chance level of adgroup j by sampling keyword costs.

    Args:
        inst: Problem instance providing cost moments, budget and alpha.
        x_column: 0/1 vector of keywords assigned to adgroup j.
        j: Adgroup index.
        cfg: Sample count t and seed.
        rng: Explicit generator; overrides `cfg.seed` when given.

    Returns:
        ChanceCheckResult with alpha_hat = t'/t and the verdict alpha_hat >= alpha_j.
    """
    column = _column(inst, x_column, j)
    budget = float(inst.budgets[j])
    alpha = float(inst.alphas[j])
    assigned = np.flatnonzero(column)
    if assigned.size == 0:
        return ChanceCheckResult(1.0, True, 0.0, cfg.samples, cfg.samples)

    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    weights = column[assigned].astype(float)
    means = inst.cost_mean_matrix[assigned, j] * weights
    sds = np.sqrt(inst.cost_var_matrix[assigned, j]) * weights

    hits = 0
    remaining = cfg.samples
    while remaining > 0:
        size = min(SAMPLE_CHUNK, remaining)
        draws = rng.normal(means, sds, size=(size, assigned.size))
        hits += int(np.count_nonzero(draws.sum(axis=1) <= budget))
        remaining -= size

    alpha_hat = hits / cfg.samples
    standard_error = math.sqrt(alpha_hat * (1.0 - alpha_hat) / cfg.samples)
    return ChanceCheckResult(alpha_hat, alpha_hat >= alpha, standard_error, hits, cfg.samples)


def column_feasible(inst: ProblemInstance, x: AssignmentLike) -> List[bool]:
    """Per-adgroup verdicts of the analytic chance check."""
    matrix = as_matrix(inst, x)
    return [
        analytic_chance(inst, matrix[:, j], j) >= inst.alphas[j] for j in range(inst.m)
    ]


def is_feasible(inst: ProblemInstance, x: AssignmentLike, enforce_risk: bool = True) -> bool:
    """True when every adgroup meets its chance level and (optionally) the risk constraint holds."""
    matrix = as_matrix(inst, x)
    if not all(column_feasible(inst, matrix)):
        return False
    if enforce_risk and not math.isinf(inst.risk_tolerance):
        return risk_ratio(inst, matrix) <= inst.risk_tolerance
    return True


class FeasibilityTracker:
    """Running column cost moments and profit variance for incremental feasibility checks.

    Used by the greedy incumbent, the search and the baselines to ask "does keyword i still fit
    adgroup j?" without re-evaluating whole columns.
    """

    def __init__(
        self,
        inst: ProblemInstance,
        x: Optional[np.ndarray] = None,
        enforce_risk: bool = True,
        mode: str = ChanceMode.ANALYTIC,
        samples: int = 10_000,
        seed: int = 0,
        stream_id: int = 0,
    ) -> None:
        if mode not in (ChanceMode.ANALYTIC, ChanceMode.SIMULATE):
            raise ValidationError(f"unknown chance mode '{mode}'")
        self.inst = inst
        self.enforce_risk = enforce_risk and not math.isinf(inst.risk_tolerance)
        self.mode = mode
        self.samples = samples
        self.seed = seed
        self.stream_id = stream_id
        self.x = (
            np.zeros((inst.n, inst.m), dtype=np.int8) if x is None else np.array(x, dtype=np.int8)
        )
        self.mean_cost = np.einsum("ij,ij->j", self.x, inst.cost_mean_matrix)
        self.var_cost = np.einsum("ij,ij->j", self.x, inst.cost_var_matrix)
        self.variance = float(np.sum(self.x * inst.variance_matrix))

    def is_assigned(self, i: int) -> bool:
        return bool(self.x[i].any())

    def chance_ok(self, i: int, j: int) -> bool:
        inst = self.inst
        if self.mode == ChanceMode.ANALYTIC:
            level = chance_from_moments(
                self.mean_cost[j] + inst.cost_mean_matrix[i, j],
                self.var_cost[j] + inst.cost_var_matrix[i, j],
                float(inst.budgets[j]),
            )
            return level >= inst.alphas[j]
        column = self.x[:, j].copy()
        column[i] = 1
        result = simulate_chance(
            inst,
            column,
            j,
            ChanceCheckConfig(samples=self.samples, seed=self.seed),
            rng=chance_stream(self.seed, self.stream_id, j),
        )
        return result.satisfied

    def risk_ok(self, i: int, j: int) -> bool:
        if not self.enforce_risk:
            return True
        return self.variance + self.inst.variance_matrix[i, j] <= self.inst.variance_cap

    def fits(self, i: int, j: int) -> bool:
        return not self.is_assigned(i) and self.risk_ok(i, j) and self.chance_ok(i, j)

    def add(self, i: int, j: int) -> None:
        self.x[i, j] = 1
        self.mean_cost[j] += self.inst.cost_mean_matrix[i, j]
        self.var_cost[j] += self.inst.cost_var_matrix[i, j]
        self.variance += float(self.inst.variance_matrix[i, j])


@dataclass(frozen=True)
class AuditReport:
    """Independent post-hoc feasibility check of an assignment."""

    row_sums_ok: bool
    offending_keywords: Tuple[str, ...]
    chance: Tuple[float, ...]
    chance_ok: Tuple[bool, ...]
    simulated: Optional[Tuple[ChanceCheckResult, ...]]
    risk: float
    risk_ok: bool

    @property
    def feasible(self) -> bool:
        return self.row_sums_ok and all(self.chance_ok) and self.risk_ok


def audit_assignment(
    inst: ProblemInstance, x: AssignmentLike, samples: int = 0, seed: int = 0
) -> AuditReport:
    """Audit an assignment or raw 0/1 matrix, reporting row-sum violations instead of raising.

    Args:
        inst: Instance the matrix is checked against.
        x: Assignment or n x m matrix of 0/1 entries.
        samples: Simulated samples per adgroup; 0 skips the simulation.
        seed: Base seed of the simulation streams.
    """
    matrix = x.x if isinstance(x, Assignment) else np.asarray(x)
    if matrix.shape != (inst.n, inst.m):
        raise DimensionError(
            f"assignment shape {matrix.shape} does not match instance ({inst.n}, {inst.m})"
        )
    offending = tuple(inst.keywords[i].id for i in np.flatnonzero(matrix.sum(axis=1) > 1))
    chance = tuple(analytic_chance(inst, matrix[:, j], j) for j in range(inst.m))
    chance_ok = tuple(level >= alpha for level, alpha in zip(chance, inst.alphas))
    simulated = None
    if samples > 0:
        simulated = tuple(
            simulate_chance(
                inst,
                matrix[:, j],
                j,
                ChanceCheckConfig(samples=samples, seed=seed),
                rng=chance_stream(seed, AUDIT_STREAM, j),
            )
            for j in range(inst.m)
        )
    risk = float(np.sum(matrix * inst.variance_matrix)) / inst.total_budget
    return AuditReport(
        row_sums_ok=not offending,
        offending_keywords=offending,
        chance=chance,
        chance_ok=tuple(bool(ok) for ok in chance_ok),
        simulated=simulated,
        risk=risk,
        risk_ok=risk <= inst.risk_tolerance,
    )
