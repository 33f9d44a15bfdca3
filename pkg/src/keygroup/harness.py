"""
Experiment harness: budget sweeps comparing BBKG with the baselines.

Every (budget level, risk tolerance, approach) cell is an independent job. Cells run on a
bounded worker pool and the result table is ordered by level, theta and approach regardless
of completion order, so the same seed always yields the same table.
"""

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Dict, Iterable, List, Optional, TextIO, Tuple

import numpy as np

from .baselines import BaselineKind, baseline_instance, run_baseline
from .bnb import SolveConfig, solve
from .model import ProblemInstance, ValidationError, risk_ratio

logger = logging.getLogger(__name__)

WORKERS_ENV = "KEYGROUP_WORKERS"

BBKG = "bbkg"
APPROACHES = (BBKG,) + BaselineKind.ALL
APPROACH_LABELS = {BBKG: "BBKG", **BaselineKind.LABELS}

SWEEP_COLUMNS = (
    "level",
    "theta",
    "approach",
    "status",
    "expected_profit",
    "roi",
    "risk",
    "profit_variance",
    "expected_cost",
    "keywords_assigned",
    "nodes",
    "gap",
    "proven_optimal",
)


class CellStatus:
    OPTIMAL = "optimal"
    LIMIT = "limit"
    FEASIBLE = "feasible"
    ERROR = "error"


@dataclass(frozen=True)
class SweepConfig:
    """Budget levels, their split over adgroups and the approaches to compare.

    Args:
        budget_levels: Total campaign budgets, strictly increasing.
        split_ratios: Relative adgroup budgets, normalized internally.
        alpha: Chance level applied to every adgroup.
        thetas: Risk tolerances; inf is the risk-loving advertiser.
        approaches: Subset of `APPROACHES`.
        seed: Base seed of every cell.
        node_limit: BBKG node limit per cell.
        time_limit: BBKG time limit per cell in seconds; makes the table timing dependent.
    """

    budget_levels: Tuple[float, ...]
    split_ratios: Tuple[float, ...]
    alpha: float = 0.95
    thetas: Tuple[float, ...] = (0.3, math.inf)
    approaches: Tuple[str, ...] = APPROACHES
    seed: int = 0
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "budget_levels", tuple(float(b) for b in self.budget_levels))
        object.__setattr__(self, "split_ratios", tuple(float(r) for r in self.split_ratios))
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        object.__setattr__(self, "approaches", tuple(self.approaches))
        if not self.budget_levels:
            raise ValidationError("at least one budget level is required")
        if min(self.budget_levels) <= 0.0:
            raise ValidationError("budget levels must be > 0")
        if any(b >= c for b, c in zip(self.budget_levels, self.budget_levels[1:])):
            raise ValidationError("budget levels must be strictly increasing")
        if not self.split_ratios or min(self.split_ratios) <= 0.0:
            raise ValidationError("split ratios must be positive")
        if not 0.5 <= self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in [0.5, 1), got {self.alpha}")
        if not self.thetas or min(self.thetas) <= 0.0:
            raise ValidationError("risk tolerances must be > 0")
        unknown = [a for a in self.approaches if a not in APPROACHES]
        if unknown or not self.approaches:
            raise ValidationError(
                f"unknown approach(es) {unknown}, expected a subset of {', '.join(APPROACHES)}"
            )
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")

    @classmethod
    def dataset1(cls, **overrides: Any) -> "SweepConfig":
        """2,000 to 20,000 in steps of 2,000, split 2:1."""
        logger.debug("dataset1 sweep starts at 2,000; a first level of 20 is not used")
        levels = tuple(float(b) for b in range(2000, 20001, 2000))
        return replace(cls(levels, (2.0, 1.0)), **overrides)

    @classmethod
    def dataset2(cls, **overrides: Any) -> "SweepConfig":
        """10,000 to 70,000 in steps of 10,000, split 3:2:1."""
        levels = tuple(float(b) for b in range(10000, 70001, 10000))
        return replace(cls(levels, (3.0, 2.0, 1.0)), **overrides)

    def budgets(self, level: float) -> List[float]:
        total = sum(self.split_ratios)
        return [level * r / total for r in self.split_ratios]


@dataclass(frozen=True)
class SweepRow:
    level: float
    theta: float
    approach: str
    status: str
    expected_profit: Optional[float] = None
    roi: Optional[float] = None
    risk: Optional[float] = None
    profit_variance: Optional[float] = None
    expected_cost: Optional[float] = None
    keywords_assigned: Optional[int] = None
    nodes: Optional[int] = None
    gap: Optional[float] = None
    proven_optimal: Optional[bool] = None


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit worker count, else the KEYGROUP_WORKERS override, else 1."""
    if workers is not None:
        if workers < 1:
            raise ValidationError(f"workers must be >= 1, got {workers}")
        return workers
    env_val = os.environ.get(WORKERS_ENV, "").strip()
    if not env_val:
        return 1
    try:
        value = int(env_val)
    except ValueError:
        logger.warning("ignoring %s=%r: not an integer", WORKERS_ENV, env_val)
        return 1
    if value < 1:
        logger.warning("ignoring %s=%r: must be >= 1", WORKERS_ENV, env_val)
        return 1
    return value


def cell_seed(base: int, level_index: int, theta_index: int, approach_index: int) -> int:
    """Seed of one sweep cell, independent of scheduling."""
    sequence = np.random.SeedSequence([base, level_index, theta_index, approach_index])
    return int(sequence.generate_state(1)[0])


def run_cell(
    inst: ProblemInstance, level: float, theta: float, approach: str, cfg: SweepConfig, seed: int
) -> SweepRow:
    """Run one approach at one budget level and risk tolerance; failures become error rows."""
    label = APPROACH_LABELS[approach]
    try:
        cell = inst.with_budgets(cfg.budgets(level), alpha=cfg.alpha).with_risk_tolerance(theta)
        if approach == BBKG:
            report = solve(
                cell,
                SolveConfig(
                    node_limit=cfg.node_limit,
                    time_limit=cfg.time_limit,
                    seed=seed,
                    audit_samples=0,
                ),
            )
            assignment = report.best
            evaluated_on = cell
            status = CellStatus.OPTIMAL if report.proven_optimal else CellStatus.LIMIT
            nodes: Optional[int] = report.nodes_expanded
            gap: Optional[float] = report.gap
            proven: Optional[bool] = report.proven_optimal
        else:
            assignment = run_baseline(approach, cell, seed)
            evaluated_on = baseline_instance(approach, cell)
            status, nodes, gap, proven = CellStatus.FEASIBLE, None, None, None
    except Exception as e:
        logger.warning("cell level=%s theta=%s %s failed: %s", level, theta, label, e)
        return SweepRow(level, theta, label, CellStatus.ERROR)

    logger.debug(
        "cell level=%s theta=%s %s: profit %.6f", level, theta, label, assignment.expected_profit
    )
    return SweepRow(
        level=level,
        theta=theta,
        approach=label,
        status=status,
        expected_profit=assignment.expected_profit,
        roi=assignment.roi,
        risk=risk_ratio(evaluated_on, assignment),
        profit_variance=assignment.profit_variance,
        expected_cost=assignment.expected_cost,
        keywords_assigned=assignment.num_assigned,
        nodes=nodes,
        gap=gap,
        proven_optimal=proven,
    )


def sweep(inst: ProblemInstance, cfg: SweepConfig, workers: Optional[int] = None) -> List[SweepRow]:
    """Run every (budget level, theta, approach) cell of `cfg` on `inst`.

    Args:
        inst: Instance whose keywords are grouped; its budgets, alphas and theta are replaced
            per cell.
        cfg: Sweep definition.
        workers: Pool size; defaults to `resolve_workers()`.

    Returns:
        One row per cell ordered by level, theta and the order of `cfg.approaches`.
    """
    if len(cfg.split_ratios) != inst.m:
        raise ValidationError(
            f"split ratios have {len(cfg.split_ratios)} entries, instance has {inst.m} adgroups"
        )
    jobs = []
    for li, level in enumerate(cfg.budget_levels):
        for ti, theta in enumerate(cfg.thetas):
            for approach in cfg.approaches:
                seed = cell_seed(cfg.seed, li, ti, APPROACHES.index(approach))
                jobs.append((level, theta, approach, seed))
    pool_size = resolve_workers(workers)
    logger.info("sweep: %d cells on %d worker(s)", len(jobs), pool_size)

    if pool_size == 1:
        return [run_cell(inst, level, theta, a, cfg, seed) for level, theta, a, seed in jobs]
    with ThreadPoolExecutor(max_workers=pool_size) as pool:
        futures = [
            pool.submit(run_cell, inst, level, theta, a, cfg, s) for level, theta, a, s in jobs
        ]
        return [f.result() for f in futures]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_sweep_csv(rows: Iterable[SweepRow], out: TextIO) -> None:
    """Write sweep rows; floats are exact (repr), theta inf is `inf`, a no-spend ROI is empty."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, column)) for column in SWEEP_COLUMNS])


def _versions() -> Dict[str, str]:
    import cvxpy
    import scipy
    import sklearn

    from . import __version__

    return {
        "keygroup": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "cvxpy": cvxpy.__version__,
        "scikit-learn": sklearn.__version__,
    }


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def build_manifest(
    inst: ProblemInstance, cfg: SweepConfig, inputs: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """Run manifest: inputs, seeds, configuration and package versions (no timestamps)."""
    config = {
        "budget_levels": list(cfg.budget_levels),
        "split_ratios": list(cfg.split_ratios),
        "alpha": cfg.alpha,
        "thetas": list(cfg.thetas),
        "approaches": [APPROACH_LABELS[a] for a in cfg.approaches],
        "seed": cfg.seed,
        "node_limit": cfg.node_limit,
        "time_limit": cfg.time_limit,
    }
    return _jsonable(
        {
            "inputs": inputs or {},
            "instance": {"keywords": inst.n, "adgroups": inst.m},
            "config": config,
            "versions": _versions(),
        }
    )
