"""
Problem instance and assignment types for chance-constrained keyword grouping.

A campaign is a set of keywords with random click-through and conversion rates, a set of
adgroups with soft budgets that must hold with a prescribed probability, and an advertiser
risk tolerance on profit variance per unit of budget. This module holds those types and
evaluates the stochastic objective, its variance and ROI for a 0/1 assignment.
"""

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm


class ValidationError(ValueError):
    """A type invariant of the keyword grouping model does not hold."""

    def __init__(self, message: str, keyword_id: Optional[str] = None) -> None:
        super().__init__(message)
        self.keyword_id = keyword_id


class DimensionError(ValidationError):
    """An assignment or column does not match the shape of its instance."""


class NormalityWarning(UserWarning):
    """Keyword demand is too small for the normal approximation of its click count."""


@dataclass(frozen=True)
class Moments2:
    """Mean and standard deviation of a random quantity."""

    mean: float
    sd: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "sd", float(self.sd))
        if not math.isfinite(self.mean):
            raise ValidationError(f"mean must be finite, got {self.mean}")
        if not (self.sd >= 0.0 and math.isfinite(self.sd)):
            raise ValidationError(f"sd must be finite and >= 0, got {self.sd}")

    @property
    def variance(self) -> float:
        return self.sd * self.sd

    @property
    def second_moment(self) -> float:
        """E[X^2] = mean^2 + sd^2."""
        return self.mean * self.mean + self.sd * self.sd

    def is_rate(self) -> bool:
        return 0.0 <= self.mean <= 1.0


def _as_moments(values: Iterable[Any]) -> Tuple[Moments2, ...]:
    result = []
    for value in values:
        if isinstance(value, Moments2):
            result.append(value)
        else:
            mean, sd = value
            result.append(Moments2(mean, sd))
    return tuple(result)


@dataclass(frozen=True)
class KeywordStat:
    """Market parameters of one keyword, with one column per adgroup.

    Args:
        id: Keyword identifier, unique within an instance.
        demand: Search demand d (queries per campaign period).
        value_per_sale: Revenue per conversion v.
        ctr: Per-adgroup click-through rate moments.
        cvr: Per-adgroup conversion rate moments.
        cpc: Per-adgroup cost per click.
        cost: Per-adgroup cost moments. When empty, derived as
            mean = d * E[ctr] * cpc and sd = d * cpc * sd(ctr).
    """

    id: str
    demand: float
    value_per_sale: float
    ctr: Tuple[Moments2, ...]
    cvr: Tuple[Moments2, ...]
    cpc: Tuple[float, ...]
    cost: Tuple[Moments2, ...] = ()
    product_label: Optional[str] = None
    hierarchy_label: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "demand", float(self.demand))
        object.__setattr__(self, "value_per_sale", float(self.value_per_sale))
        object.__setattr__(self, "ctr", _as_moments(self.ctr))
        object.__setattr__(self, "cvr", _as_moments(self.cvr))
        object.__setattr__(self, "cpc", tuple(float(p) for p in self.cpc))
        object.__setattr__(self, "cost", _as_moments(self.cost))

        if not (self.demand >= 0.0 and math.isfinite(self.demand)):
            raise ValidationError(f"keyword '{self.id}': demand must be >= 0", self.id)
        if not (self.value_per_sale >= 0.0 and math.isfinite(self.value_per_sale)):
            raise ValidationError(f"keyword '{self.id}': value_per_sale must be >= 0", self.id)

        m = len(self.ctr)
        if m == 0:
            raise ValidationError(f"keyword '{self.id}': no adgroup columns", self.id)
        if len(self.cvr) != m or len(self.cpc) != m:
            raise ValidationError(
                f"keyword '{self.id}': ctr/cvr/cpc lengths differ "
                f"({m}/{len(self.cvr)}/{len(self.cpc)})",
                self.id,
            )
        for name, rates in (("ctr", self.ctr), ("cvr", self.cvr)):
            for rate in rates:
                if not rate.is_rate():
                    raise ValidationError(
                        f"keyword '{self.id}': {name} mean {rate.mean} outside [0, 1]", self.id
                    )
        if any(not (p >= 0.0 and math.isfinite(p)) for p in self.cpc):
            raise ValidationError(f"keyword '{self.id}': cpc must be >= 0", self.id)

        if not self.cost:
            derived = tuple(
                Moments2(self.demand * c.mean * p, self.demand * p * c.sd)
                for c, p in zip(self.ctr, self.cpc)
            )
            object.__setattr__(self, "cost", derived)
        elif len(self.cost) != m:
            raise ValidationError(
                f"keyword '{self.id}': cost has {len(self.cost)} columns, expected {m}", self.id
            )
        if any(c.mean < 0.0 for c in self.cost):
            raise ValidationError(f"keyword '{self.id}': cost mean must be >= 0", self.id)

    @property
    def m(self) -> int:
        return len(self.ctr)

    def expected_profit(self, j: int) -> float:
        """e_ij = d * (v * E[c] * E[r] - p * E[c]) with c and r independent."""
        c, r = self.ctr[j], self.cvr[j]
        return self.demand * (self.value_per_sale * c.mean * r.mean - self.cpc[j] * c.mean)

    def profit_variance(self, j: int) -> float:
        """w_ij = d^2 * Var(c * (r * v - p)) with c and r independent."""
        c, r = self.ctr[j], self.cvr[j]
        v, p = self.value_per_sale, self.cpc[j]
        product_term = c.second_moment * r.second_moment - (c.mean * r.mean) ** 2
        variance = v * v * product_term + p * p * c.variance - 2.0 * v * p * r.mean * c.variance
        return self.demand * self.demand * max(variance, 0.0)


@dataclass(frozen=True)
class AdGroupSpec:
    """An adgroup with soft budget B and chance level alpha."""

    id: str
    budget: float
    alpha: float = 0.95

    def __post_init__(self) -> None:
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "budget", float(self.budget))
        object.__setattr__(self, "alpha", float(self.alpha))
        if not (self.budget > 0.0 and math.isfinite(self.budget)):
            raise ValidationError(f"adgroup '{self.id}': budget must be > 0, got {self.budget}")
        if not (0.5 <= self.alpha < 1.0):
            raise ValidationError(
                f"adgroup '{self.id}': alpha must lie in [0.5, 1), got {self.alpha}"
            )


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class ProblemInstance:
    """Keywords x adgroups plus the risk tolerance theta (inf for a risk-loving advertiser)."""

    keywords: Tuple[KeywordStat, ...]
    adgroups: Tuple[AdGroupSpec, ...]
    risk_tolerance: float = math.inf

    def __post_init__(self) -> None:
        object.__setattr__(self, "keywords", tuple(self.keywords))
        object.__setattr__(self, "adgroups", tuple(self.adgroups))
        object.__setattr__(self, "risk_tolerance", float(self.risk_tolerance))
        if not self.keywords:
            raise ValidationError("an instance needs at least one keyword")
        if not self.adgroups:
            raise ValidationError("an instance needs at least one adgroup")
        if not self.risk_tolerance > 0.0:
            raise ValidationError(f"risk tolerance must be > 0, got {self.risk_tolerance}")

        m = len(self.adgroups)
        seen = set()
        for keyword in self.keywords:
            if keyword.m != m:
                raise ValidationError(
                    f"keyword '{keyword.id}' has {keyword.m} adgroup columns, expected {m}",
                    keyword.id,
                )
            if keyword.id in seen:
                raise ValidationError(f"duplicate keyword id '{keyword.id}'", keyword.id)
            seen.add(keyword.id)
        if len({g.id for g in self.adgroups}) != m:
            raise ValidationError("adgroup ids must be unique")

    @property
    def n(self) -> int:
        return len(self.keywords)

    @property
    def m(self) -> int:
        return len(self.adgroups)

    @cached_property
    def profit_matrix(self) -> np.ndarray:
        """n x m matrix of expected pair profits e_ij."""
        return _read_only(
            np.array([[k.expected_profit(j) for j in range(self.m)] for k in self.keywords])
        )

    @cached_property
    def variance_matrix(self) -> np.ndarray:
        """n x m matrix of pair profit variances w_ij."""
        return _read_only(
            np.array([[k.profit_variance(j) for j in range(self.m)] for k in self.keywords])
        )

    @cached_property
    def spend_matrix(self) -> np.ndarray:
        """n x m matrix of expected spend d * E[c] * p (the ROI denominator)."""
        rows = [[k.demand * k.ctr[j].mean * k.cpc[j] for j in range(self.m)] for k in self.keywords]
        return _read_only(np.array(rows, dtype=float))

    @cached_property
    def cost_mean_matrix(self) -> np.ndarray:
        return _read_only(np.array([[c.mean for c in k.cost] for k in self.keywords]))

    @cached_property
    def cost_var_matrix(self) -> np.ndarray:
        return _read_only(np.array([[c.variance for c in k.cost] for k in self.keywords]))

    @cached_property
    def budgets(self) -> np.ndarray:
        return _read_only(np.array([g.budget for g in self.adgroups]))

    @cached_property
    def alphas(self) -> np.ndarray:
        return _read_only(np.array([g.alpha for g in self.adgroups]))

    @cached_property
    def z_alphas(self) -> np.ndarray:
        """Standard normal quantiles of the adgroup chance levels (all >= 0)."""
        return _read_only(np.asarray(norm.ppf(self.alphas), dtype=float))

    @property
    def total_budget(self) -> float:
        return float(np.sum(self.budgets))

    @property
    def variance_cap(self) -> float:
        """theta * sum(B), the largest admissible profit variance."""
        if math.isinf(self.risk_tolerance):
            return math.inf
        return self.risk_tolerance * self.total_budget

    @cached_property
    def keyword_ranking(self) -> Tuple[int, ...]:
        """Keyword indices by decreasing best-adgroup expected profit."""
        best = self.profit_matrix.max(axis=1)
        return tuple(sorted(range(self.n), key=lambda i: (-best[i], i)))

    @cached_property
    def adgroup_ranking(self) -> Tuple[int, ...]:
        """Adgroup indices by decreasing budget."""
        return tuple(sorted(range(self.m), key=lambda j: (-self.budgets[j], j)))

    def keyword_index(self, keyword_id: str) -> int:
        for i, keyword in enumerate(self.keywords):
            if keyword.id == keyword_id:
                return i
        raise KeyError(keyword_id)

    def with_budgets(
        self, budgets: Sequence[float], alpha: Optional[float] = None
    ) -> "ProblemInstance":
        """Copy of the instance with new adgroup budgets (and optionally one common alpha)."""
        if len(budgets) != self.m:
            raise DimensionError(f"expected {self.m} budgets, got {len(budgets)}")
        adgroups = tuple(
            AdGroupSpec(g.id, b, g.alpha if alpha is None else alpha)
            for g, b in zip(self.adgroups, budgets)
        )
        return replace(self, adgroups=adgroups)

    def with_risk_tolerance(self, theta: float) -> "ProblemInstance":
        return replace(self, risk_tolerance=theta)


@dataclass(frozen=True, eq=False)
class Assignment:
    """A 0/1 keyword-to-adgroup matrix, optionally with its evaluation.

    The evaluation fields are filled by `evaluate_assignment`; `roi` stays None when the
    assignment spends nothing.
    """

    x: np.ndarray
    expected_profit: Optional[float] = None
    profit_variance: Optional[float] = None
    expected_cost: Optional[float] = None
    roi: Optional[float] = None
    per_adgroup_chance: Optional[Tuple[float, ...]] = field(default=None)

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=np.int8, copy=True)
        if x.ndim != 2:
            raise DimensionError(f"assignment must be a 2-D matrix, got {x.ndim} dimensions")
        if not np.isin(x, (0, 1)).all():
            raise ValidationError("assignment entries must be 0 or 1")
        row_sums = x.sum(axis=1)
        bad = np.flatnonzero(row_sums > 1)
        if bad.size:
            raise ValidationError(
                f"keyword row {int(bad[0])} is assigned to {int(row_sums[bad[0]])} adgroups"
            )
        object.__setattr__(self, "x", _read_only(x))

    @classmethod
    def empty(cls, n: int, m: int) -> "Assignment":
        return cls(np.zeros((n, m), dtype=np.int8))

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.x.shape[0]), int(self.x.shape[1]))

    @property
    def num_assigned(self) -> int:
        return int(self.x.sum())

    @property
    def is_evaluated(self) -> bool:
        return self.expected_profit is not None

    def pairs(self) -> List[Tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.x))]

    def column(self, j: int) -> np.ndarray:
        return self.x[:, j]


AssignmentLike = Union[Assignment, np.ndarray, Sequence[Sequence[int]]]


def as_matrix(inst: ProblemInstance, x: AssignmentLike) -> np.ndarray:
    """Return the 0/1 matrix of `x`, checking it against the instance dimensions."""
    matrix = x.x if isinstance(x, Assignment) else Assignment(np.asarray(x)).x
    if matrix.shape != (inst.n, inst.m):
        raise DimensionError(
            f"assignment shape {matrix.shape} does not match instance ({inst.n}, {inst.m})"
        )
    return matrix


def expected_profit(inst: ProblemInstance, x: AssignmentLike) -> float:
    """Expected campaign profit: sum of e_ij over assigned pairs."""
    return float(np.sum(inst.profit_matrix * as_matrix(inst, x)))


def profit_variance(inst: ProblemInstance, x: AssignmentLike) -> float:
    """Profit variance: sum of w_ij over assigned pairs (pairs are independent)."""
    return float(np.sum(inst.variance_matrix * as_matrix(inst, x)))


def expected_cost(inst: ProblemInstance, x: AssignmentLike) -> float:
    return float(np.sum(inst.spend_matrix * as_matrix(inst, x)))


def roi(inst: ProblemInstance, x: AssignmentLike) -> Optional[float]:
    """Expected profit over expected spend, or None when nothing is spent."""
    cost = expected_cost(inst, x)
    if cost <= 0.0:
        return None
    return expected_profit(inst, x) / cost


def risk_ratio(inst: ProblemInstance, x: AssignmentLike) -> float:
    """Profit variance per unit of total budget."""
    return profit_variance(inst, x) / inst.total_budget


def risk_feasible(inst: ProblemInstance, x: AssignmentLike) -> bool:
    if math.isinf(inst.risk_tolerance):
        as_matrix(inst, x)
        return True
    return risk_ratio(inst, x) <= inst.risk_tolerance


def evaluate_assignment(inst: ProblemInstance, x: AssignmentLike) -> Assignment:
    """Return `x` as an Assignment carrying its profit, variance, spend, ROI and chance levels."""
    from .chance import analytic_chance

    matrix = as_matrix(inst, x)
    return Assignment(
        matrix,
        expected_profit=expected_profit(inst, matrix),
        profit_variance=profit_variance(inst, matrix),
        expected_cost=expected_cost(inst, matrix),
        roi=roi(inst, matrix),
        per_adgroup_chance=tuple(analytic_chance(inst, matrix[:, j], j) for j in range(inst.m)),
    )
