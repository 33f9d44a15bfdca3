"""
Continuous relaxation of the keyword grouping model and its deterministic-equivalent constraints.

With normal keyword costs, the budget chance constraint of adgroup j is equivalent to

    sum_i x_ij * mu_ij + z_j * sqrt(sum_i x_ij^2 * sigma_ij^2) <= B_j,    z_j = Phi^-1(alpha_j),

a second-order cone constraint for alpha_j >= 0.5. Relaxing x to [0, 1] gives a convex program
whose optimum bounds every 0/1 assignment in a search node from above.
"""

import math
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np

from .model import DimensionError, ProblemInstance, ValidationError

DEFAULT_TOL = 1e-8

Pair = Tuple[int, int]


class RelaxationStatus:
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration-limit"


@dataclass(frozen=True)
class NodeFixings:
    """Keyword-adgroup pairs forced to 1 or to 0 within a search subspace."""

    fixed_one: FrozenSet[Pair] = frozenset()
    fixed_zero: FrozenSet[Pair] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "fixed_one", frozenset(self.fixed_one))
        object.__setattr__(self, "fixed_zero", frozenset(self.fixed_zero))
        clash = self.fixed_one & self.fixed_zero
        if clash:
            raise ValidationError(f"pairs fixed to both 0 and 1: {sorted(clash)}")
        rows = [i for i, _ in self.fixed_one]
        if len(rows) != len(set(rows)):
            raise ValidationError("a keyword is fixed to more than one adgroup")

    def bounds(self, n: int, m: int) -> Tuple[np.ndarray, np.ndarray]:
        """Lower and upper bound matrices implied by the fixings."""
        lower = np.zeros((n, m))
        upper = np.ones((n, m))
        for i, j in self.fixed_one:
            lower[i, j] = 1.0
        for i, j in self.fixed_zero:
            upper[i, j] = 0.0
        return lower, upper

    def assign(self, i: int, j: int, m: int) -> "NodeFixings":
        """Fix keyword i to adgroup j (and away from every other adgroup)."""
        others = {(i, k) for k in range(m) if k != j}
        return NodeFixings(self.fixed_one | {(i, j)}, (self.fixed_zero - {(i, j)}) | others)

    def reject(self, i: int, m: int) -> "NodeFixings":
        """Fix keyword i out of every adgroup."""
        return NodeFixings(self.fixed_one, self.fixed_zero | {(i, k) for k in range(m)})

    def exclude(self, pairs: Iterable[Pair]) -> "NodeFixings":
        extra = frozenset(pairs) - self.fixed_one
        if not extra:
            return self
        return NodeFixings(self.fixed_one, self.fixed_zero | extra)


@dataclass(frozen=True)
class RelaxationResult:
    """Continuous solution of a node relaxation.

    `upper_bound` is the objective at `x_cont` plus the solver tolerance when optimal, and +inf
    when the solve did not converge, so that a failed solve never prunes a node.
    """

    x_cont: Optional[np.ndarray]
    upper_bound: float
    status: str
    kkt_residual: float
    objective: float = math.nan

    @property
    def is_integral(self) -> bool:
        if self.x_cont is None:
            return False
        return bool(np.all(np.minimum(np.abs(self.x_cont), np.abs(1.0 - self.x_cont)) <= 1e-6))


def deterministic_budget_lhs(inst: ProblemInstance, x_column: Sequence[float], j: int) -> float:
    """sum x*mu + Phi^-1(alpha_j) * sqrt(sum x^2 * sigma^2) for adgroup j."""
    column = np.asarray(x_column, dtype=float)
    if column.shape != (inst.n,):
        raise DimensionError(f"column must have length {inst.n}, got shape {column.shape}")
    mean_cost = float(np.dot(column, inst.cost_mean_matrix[:, j]))
    spread = math.sqrt(float(np.dot(column * column, inst.cost_var_matrix[:, j])))
    return mean_cost + float(inst.z_alphas[j]) * spread


def _fixed_part_feasible(inst: ProblemInstance, lower: np.ndarray) -> bool:
    for j in range(inst.m):
        if deterministic_budget_lhs(inst, lower[:, j], j) > inst.budgets[j]:
            return False
    if math.isinf(inst.variance_cap):
        return True
    return float(np.sum(lower * lower * inst.variance_matrix)) <= inst.variance_cap


class RelaxationModel:
    """The relaxed program of one instance, compiled once and re-solved per node.

    Fixings enter through the bound parameters only, so cvxpy reuses the compiled cone
    program across nodes. A model instance is not thread-safe; use one per worker.
    """

    def __init__(self, inst: ProblemInstance, max_iter: int = 200) -> None:
        self.inst = inst
        self.max_iter = max_iter
        n, m = inst.n, inst.m
        self._x = cp.Variable((n, m))
        self._lower = cp.Parameter((n, m), nonneg=True)
        self._upper = cp.Parameter((n, m), nonneg=True)

        self._lower_con = self._x >= self._lower
        self._upper_con = self._x <= self._upper
        self._row_con = cp.sum(self._x, axis=1) <= 1
        self._budget_cons: List[cp.Constraint] = []
        self._conic = np.zeros(m, dtype=bool)
        for j in range(m):
            column = self._x[:, j]
            spend = cp.sum(cp.multiply(inst.cost_mean_matrix[:, j], column))
            sigma = np.sqrt(inst.cost_var_matrix[:, j])
            # All-zero spread or alpha = 0.5 leaves the linear budget constraint.
            if inst.z_alphas[j] > 0.0 and np.any(sigma > 0.0):
                spend = spend + inst.z_alphas[j] * cp.norm(cp.multiply(sigma, column), 2)
                self._conic[j] = True
            self._budget_cons.append(spend <= inst.budgets[j])

        self._risk_con: Optional[cp.Constraint] = None
        if not math.isinf(inst.variance_cap) and np.any(inst.variance_matrix > 0.0):
            self._risk_con = (
                cp.sum(cp.multiply(inst.variance_matrix, cp.square(self._x))) <= inst.variance_cap
            )

        constraints = [self._lower_con, self._upper_con, self._row_con, *self._budget_cons]
        if self._risk_con is not None:
            constraints.append(self._risk_con)
        objective = cp.Maximize(cp.sum(cp.multiply(inst.profit_matrix, self._x)))
        self._problem = cp.Problem(objective, constraints)

    def solve(self, fix: NodeFixings = NodeFixings(), tol: float = DEFAULT_TOL) -> RelaxationResult:
        """Maximize expected profit over the relaxed subspace defined by `fix`."""
        inst = self.inst
        lower, upper = fix.bounds(inst.n, inst.m)
        if not _fixed_part_feasible(inst, lower):
            return RelaxationResult(None, -math.inf, RelaxationStatus.INFEASIBLE, 0.0)
        if np.array_equal(lower, upper):
            value = float(np.sum(inst.profit_matrix * lower))
            return RelaxationResult(lower, value, RelaxationStatus.OPTIMAL, 0.0, value)

        self._lower.value = lower
        self._upper.value = upper
        try:
            self._problem.solve(
                solver=cp.CLARABEL,
                warm_start=False,
                max_iter=self.max_iter,
                tol_gap_rel=tol,
                tol_feas=tol,
            )
        except cp.error.SolverError:
            return RelaxationResult(None, math.inf, RelaxationStatus.ITERATION_LIMIT, math.inf)

        status = self._problem.status
        if status == cp.INFEASIBLE:
            return RelaxationResult(None, -math.inf, RelaxationStatus.INFEASIBLE, 0.0)
        if status != cp.OPTIMAL or self._x.value is None:
            return RelaxationResult(None, math.inf, RelaxationStatus.ITERATION_LIMIT, math.inf)

        x_cont = np.clip(self._x.value, lower, upper)
        objective = max(float(self._problem.value), float(np.sum(inst.profit_matrix * x_cont)))
        return RelaxationResult(
            x_cont,
            objective + tol * max(1.0, abs(objective)),
            RelaxationStatus.OPTIMAL,
            self._kkt_residual(self._x.value),
            objective,
        )

    def _kkt_residual(self, x: np.ndarray) -> float:
        """Largest scaled violation of primal feasibility, complementarity and stationarity."""
        inst = self.inst
        scale = max(1.0, float(np.max(np.abs(inst.profit_matrix))))
        lower = np.asarray(self._lower.value)
        upper = np.asarray(self._upper.value)

        g_lower = lower - x
        g_upper = x - upper
        g_rows = x.sum(axis=1) - 1.0
        g_budget = np.array(
            [deterministic_budget_lhs(inst, x[:, j], j) - inst.budgets[j] for j in range(inst.m)]
        )
        primal = max(
            float(np.max(g_lower, initial=0.0)),
            float(np.max(g_upper, initial=0.0)),
            float(np.max(g_rows, initial=0.0)),
            float(np.max(g_budget / inst.budgets, initial=0.0)),
        )

        a = np.maximum(np.asarray(self._lower_con.dual_value), 0.0)
        b = np.maximum(np.asarray(self._upper_con.dual_value), 0.0)
        nu = np.maximum(np.asarray(self._row_con.dual_value).reshape(-1), 0.0)
        lam = np.array(
            [max(float(np.asarray(c.dual_value)), 0.0) for c in self._budget_cons], dtype=float
        )
        complementarity = max(
            float(np.max(np.abs(a * g_lower))),
            float(np.max(np.abs(b * g_upper))),
            float(np.max(np.abs(nu * g_rows))),
            float(np.max(np.abs(lam * g_budget))),
        )

        residual = inst.profit_matrix + a - b - nu[:, None]
        residual = residual - lam[None, :] * inst.cost_mean_matrix
        if self._risk_con is not None:
            rho = max(float(np.asarray(self._risk_con.dual_value)), 0.0)
            g_risk = float(np.sum(inst.variance_matrix * x * x)) - inst.variance_cap
            primal = max(primal, g_risk / inst.variance_cap)
            complementarity = max(complementarity, abs(rho * g_risk))
            residual = residual - rho * 2.0 * inst.variance_matrix * x

        for j in np.flatnonzero(self._conic):
            sigma2 = inst.cost_var_matrix[:, j]
            spread = math.sqrt(float(np.dot(x[:, j] ** 2, sigma2)))
            weight = lam[j] * inst.z_alphas[j]
            if spread > 1e-12:
                residual[:, j] -= weight * sigma2 * x[:, j] / spread
            elif weight > 0.0:
                # Subgradient of the norm at zero: absorb up to unit length of sigma-scaled slack.
                sigma = np.sqrt(sigma2)
                active = sigma > 0.0
                u = np.zeros_like(sigma)
                u[active] = residual[active, j] / (weight * sigma[active])
                length = float(np.linalg.norm(u))
                if length > 1.0:
                    u /= length
                residual[:, j] -= weight * sigma * u

        stationarity = float(np.max(np.abs(residual)))
        return max(primal, complementarity / scale, stationarity / scale)


def solve_relaxation(
    inst: ProblemInstance, fix: NodeFixings = NodeFixings(), tol: float = DEFAULT_TOL
) -> RelaxationResult:
    """Solve the relaxation of `inst` restricted by `fix` with a freshly built model."""
    return RelaxationModel(inst).solve(fix, tol)
