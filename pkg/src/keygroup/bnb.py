"""
Best-first branch-and-bound (BBKG) over keyword-to-adgroup assignments.

Keywords are decided one at a time in decreasing best-adgroup expected profit. Each search
node splits into one child per admissible adgroup (in decreasing budget order) plus a child
that rejects the keyword. Node bounds come from the continuous relaxation; incumbents come
from the node's fixed assignment and a greedy completion of its relaxed solution.
"""

import heapq
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from .chance import AuditReport, ChanceMode, FeasibilityTracker, audit_assignment
from .model import Assignment, ProblemInstance, ValidationError, evaluate_assignment
from .relaxation import (
    DEFAULT_TOL,
    NodeFixings,
    Pair,
    RelaxationModel,
    RelaxationResult,
    RelaxationStatus,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveConfig:
    """Search limits and knobs.

    Args:
        node_limit: Maximum number of expanded nodes (None for no limit).
        time_limit: Wall-clock limit in seconds (None for no limit).
        seed: Seed of the simulated chance checks and of the final audit.
        workers: Threads evaluating sibling relaxations concurrently.
        chance_mode: "analytic" (normal CDF) or "simulate" (sampling) checks inside the search.
        samples: Samples per simulated check.
        audit_samples: Samples per adgroup of the post-solve audit; 0 disables it.
        prune: When False, every node bound is +inf and no node is ever pruned.
        record_nodes: Keep (fixings, bound) of every evaluated node in the report.
        tol: Relaxation solver tolerance.
        gap_tol: Relative gap under which a node bound cannot improve the incumbent. It must
            cover the relaxation tolerance, otherwise ties with the incumbent are never pruned.
    """

    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    seed: int = 0
    workers: int = 1
    chance_mode: str = ChanceMode.ANALYTIC
    samples: int = 10_000
    audit_samples: int = 1_000_000
    prune: bool = True
    record_nodes: bool = False
    tol: float = DEFAULT_TOL
    gap_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.node_limit is not None and self.node_limit < 1:
            raise ValidationError(f"node_limit must be >= 1, got {self.node_limit}")
        if self.time_limit is not None and not self.time_limit > 0:
            raise ValidationError(f"time_limit must be > 0, got {self.time_limit}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        if self.chance_mode not in (ChanceMode.ANALYTIC, ChanceMode.SIMULATE):
            raise ValidationError(f"unknown chance mode '{self.chance_mode}'")
        if self.samples < 1:
            raise ValidationError(f"samples must be >= 1, got {self.samples}")
        if self.audit_samples < 0:
            raise ValidationError(f"audit_samples must be >= 0, got {self.audit_samples}")
        if not self.tol > 0:
            raise ValidationError(f"tol must be > 0, got {self.tol}")
        if self.gap_tol < self.tol:
            raise ValidationError(f"gap_tol must be >= tol ({self.tol}), got {self.gap_tol}")


@dataclass
class SearchNode:
    fixings: NodeFixings
    depth: int
    bound: float
    id: int
    relaxation: Optional[RelaxationResult] = None

    def sort_key(self) -> Tuple[float, int, int]:
        """Largest bound first, then deeper nodes, then older nodes."""
        return (-self.bound, -self.depth, self.id)


@dataclass(frozen=True)
class SolveReport:
    best: Assignment
    best_value: float
    nodes_expanded: int
    proven_optimal: bool
    gap: float
    audit: Optional[AuditReport] = None
    node_log: Tuple[Tuple[NodeFixings, float], ...] = ()
    incumbent_history: Tuple[Tuple[int, float], ...] = field(default=())


def _tracker(
    inst: ProblemInstance,
    x: Optional[np.ndarray],
    enforce_risk: bool,
    config: SolveConfig,
    stream_id: int = 0,
) -> FeasibilityTracker:
    return FeasibilityTracker(
        inst,
        x,
        enforce_risk=enforce_risk,
        mode=config.chance_mode,
        samples=config.samples,
        seed=config.seed,
        stream_id=stream_id,
    )


def greedy_incumbent(
    inst: ProblemInstance, enforce_risk: bool = True, config: Optional[SolveConfig] = None
) -> Assignment:
    """First-fit assignment: adgroups by decreasing budget, keywords by decreasing profit.

    A keyword joins an adgroup when it is not yet assigned, its expected profit there is
    positive, the adgroup's chance constraint still holds with it and, if `enforce_risk`, the
    profit variance stays within theta * total budget.
    """
    config = config or SolveConfig()
    tracker = _tracker(inst, None, enforce_risk, config)
    profit = inst.profit_matrix
    for j in inst.adgroup_ranking:
        for i in inst.keyword_ranking:
            if profit[i, j] > 0.0 and tracker.fits(i, j):
                tracker.add(i, j)
    return evaluate_assignment(inst, tracker.x)


class _Search:
    """State of one BBKG run."""

    def __init__(self, inst: ProblemInstance, config: SolveConfig) -> None:
        self.inst = inst
        self.config = config
        self.profit = inst.profit_matrix
        self.budget_rank = {j: rank for rank, j in enumerate(inst.adgroup_ranking)}
        self.keyword_rank = {i: rank for rank, i in enumerate(inst.keyword_ranking)}
        self.next_id = 0
        self.frontier: List[Tuple[Tuple[float, int, int], SearchNode]] = []
        self.node_log: List[Tuple[NodeFixings, float]] = []
        self.history: List[Tuple[int, float]] = []
        self.nodes_expanded = 0
        self._local = threading.local()
        self._pool: Optional[ThreadPoolExecutor] = None

        greedy = greedy_incumbent(inst, enforce_risk=True, config=config)
        self.best_x = greedy.x
        self.best_value = float(greedy.expected_profit or 0.0)
        self.history.append((0, self.best_value))

    def _new_id(self) -> int:
        node_id = self.next_id
        self.next_id += 1
        return node_id

    def _model(self) -> RelaxationModel:
        model = getattr(self._local, "model", None)
        if model is None:
            model = RelaxationModel(self.inst)
            self._local.model = model
        return model

    def _relax(self, fix: NodeFixings) -> RelaxationResult:
        return self._model().solve(fix, self.config.tol)

    def _offer(self, x: np.ndarray) -> None:
        value = float(np.sum(self.profit * x))
        if value > self.best_value:
            self.best_value = value
            self.best_x = np.array(x, dtype=np.int8)
            self.history.append((self.nodes_expanded, value))
            logger.debug("node %d: incumbent improved to %.6f", self.nodes_expanded, value)

    def _slack(self) -> float:
        return self.config.gap_tol * max(1.0, abs(self.best_value))

    def _closed(self, bound: float) -> bool:
        """True when a subspace bounded by `bound` cannot beat the incumbent."""
        return bound <= self.best_value + self._slack()

    def _partial(self, fix: NodeFixings) -> np.ndarray:
        x = np.zeros((self.inst.n, self.inst.m), dtype=np.int8)
        for i, j in fix.fixed_one:
            x[i, j] = 1
        return x

    def _root_exclusions(self) -> Set[Pair]:
        """Pairs with no profit or that cannot fit their adgroup even alone."""
        inst = self.inst
        empty = _tracker(inst, None, True, self.config, stream_id=self.next_id)
        excluded = set()
        for i in range(inst.n):
            for j in range(inst.m):
                if self.profit[i, j] <= 0.0 or not empty.risk_ok(i, j):
                    excluded.add((i, j))
                elif not empty.chance_ok(i, j):
                    excluded.add((i, j))
        return excluded

    def _propagate(
        self, fix: NodeFixings, tracker: FeasibilityTracker, j: int, depth: int
    ) -> NodeFixings:
        """Fix out undecided pairs that no longer fit on their own after assigning to column j."""
        inst = self.inst
        undecided = inst.keyword_ranking[depth:]
        dropped: List[Pair] = []
        for k in undecided:
            for col in range(inst.m):
                if (k, col) in fix.fixed_zero:
                    continue
                if not tracker.risk_ok(k, col):
                    dropped.append((k, col))
                elif col == j and self.config.chance_mode == ChanceMode.ANALYTIC:
                    if not tracker.chance_ok(k, col):
                        dropped.append((k, col))
        return fix.exclude(dropped)

    def _children(self, node: SearchNode) -> List[SearchNode]:
        inst = self.inst
        i = inst.keyword_ranking[node.depth]
        depth = node.depth + 1
        children = []
        parent_x = self._partial(node.fixings)
        for j in inst.adgroup_ranking:
            if (i, j) in node.fixings.fixed_zero:
                continue
            node_id = self._new_id()
            tracker = _tracker(inst, parent_x, True, self.config, stream_id=node_id)
            if not (tracker.risk_ok(i, j) and tracker.chance_ok(i, j)):
                continue
            tracker.add(i, j)
            fix = node.fixings.assign(i, j, inst.m)
            if depth < inst.n:
                fix = self._propagate(fix, tracker, j, depth)
            children.append(SearchNode(fix, depth, node.bound, node_id))

        reject = node.fixings.reject(i, inst.m)
        child = SearchNode(reject, depth, node.bound, self._new_id())
        if reject == node.fixings:
            # Every pair of keyword i was already fixed out: same subspace as the parent.
            child.relaxation = node.relaxation
        children.append(child)
        return children

    def _evaluate(self, nodes: List[SearchNode]) -> List[Optional[RelaxationResult]]:
        pending = [
            n for n in nodes if n.relaxation is None and n.depth < self.inst.n and self.config.prune
        ]
        if self._pool is not None and len(pending) > 1:
            solved = list(self._pool.map(self._relax, [n.fixings for n in pending]))
        else:
            solved = [self._relax(n.fixings) for n in pending]
        results: Dict[int, RelaxationResult] = {n.id: r for n, r in zip(pending, solved)}
        return [results.get(n.id, n.relaxation) for n in nodes]

    def _complete(self, fix: NodeFixings, x_cont: Optional[np.ndarray], stream_id: int) -> None:
        """Greedy rounding of the relaxed solution on top of the node's fixed pairs."""
        inst = self.inst
        partial = self._partial(fix)
        self._offer(partial)
        tracker = _tracker(inst, partial, True, self.config, stream_id=stream_id)
        weight = np.zeros((inst.n, inst.m)) if x_cont is None else x_cont
        candidates = [
            (i, j)
            for i in range(inst.n)
            for j in range(inst.m)
            if (i, j) not in fix.fixed_zero and self.profit[i, j] > 0.0
        ]
        candidates.sort(
            key=lambda p: (-weight[p], self.budget_rank[p[1]], self.keyword_rank[p[0]])
        )
        for i, j in candidates:
            if tracker.fits(i, j):
                tracker.add(i, j)
        self._offer(tracker.x)

    def _push(self, node: SearchNode) -> None:
        heapq.heappush(self.frontier, (node.sort_key(), node))

    def _accept(self, node: SearchNode, result: Optional[RelaxationResult]) -> None:
        """Bound, record and enqueue one evaluated child."""
        inst = self.inst
        if node.depth == inst.n:
            x = self._partial(node.fixings)
            value = float(np.sum(self.profit * x))
            if self.config.record_nodes:
                self.node_log.append((node.fixings, value))
            self._offer(x)
            return
        if result is None:
            node.bound = math.inf
            if self.config.record_nodes:
                self.node_log.append((node.fixings, node.bound))
            self._push(node)
            return

        node.relaxation = result
        node.bound = result.upper_bound
        if self.config.record_nodes:
            self.node_log.append((node.fixings, node.bound))
        if result.status == RelaxationStatus.INFEASIBLE:
            return
        self._complete(node.fixings, result.x_cont, node.id)
        if result.is_integral and result.x_cont is not None:
            rounded = np.rint(result.x_cont).astype(np.int8)
            tracker = _tracker(inst, None, True, self.config, stream_id=node.id)
            if _tracker_accepts(tracker, rounded):
                self._offer(rounded)
                return
        if not self._closed(node.bound):
            self._push(node)

    def _out_of_budget(self, started: float) -> bool:
        cfg = self.config
        if cfg.node_limit is not None and self.nodes_expanded >= cfg.node_limit:
            return True
        return cfg.time_limit is not None and time.monotonic() - started >= cfg.time_limit

    def _loop(self, started: float) -> bool:
        """Expand nodes best-first; True when a limit stopped the search."""
        while self.frontier:
            _, node = self.frontier[0]
            if self._closed(node.bound):
                heapq.heappop(self.frontier)
                continue
            if self._out_of_budget(started):
                return True
            heapq.heappop(self.frontier)
            self.nodes_expanded += 1
            children = self._children(node)
            for child, result in zip(children, self._evaluate(children)):
                self._accept(child, result)
        return False

    def run(self) -> SolveReport:
        inst = self.inst
        started = time.monotonic()
        root_fix = NodeFixings(fixed_zero=frozenset(self._root_exclusions()))
        root = SearchNode(root_fix, 0, math.inf, self._new_id())
        if self.config.workers > 1:
            self._pool = ThreadPoolExecutor(max_workers=self.config.workers)
        try:
            (root_result,) = self._evaluate([root])
            self._accept(root, root_result)
            limited = self._loop(started)
        finally:
            if self._pool is not None:
                self._pool.shutdown()
                self._pool = None

        gap = 0.0
        if limited:
            open_bounds = [n.bound for _, n in self.frontier if n.bound > self.best_value]
            gap = max(open_bounds, default=self.best_value) - self.best_value
        proven = not limited or gap <= self._slack()
        logger.info(
            "search finished: %d nodes, best %.6f, gap %s%s",
            self.nodes_expanded,
            self.best_value,
            gap,
            "" if proven else " (limit reached)",
        )

        best = evaluate_assignment(inst, self.best_x)
        audit = None
        if self.config.audit_samples > 0:
            audit = audit_assignment(
                inst, best, samples=self.config.audit_samples, seed=self.config.seed
            )
        return SolveReport(
            best=best,
            best_value=self.best_value,
            nodes_expanded=self.nodes_expanded,
            proven_optimal=proven,
            gap=max(gap, 0.0),
            audit=audit,
            node_log=tuple(self.node_log),
            incumbent_history=tuple(self.history),
        )


def _tracker_accepts(tracker: FeasibilityTracker, x: np.ndarray) -> bool:
    if (x.sum(axis=1) > 1).any():
        return False
    for i, j in zip(*np.nonzero(x)):
        if not tracker.fits(int(i), int(j)):
            return False
        tracker.add(int(i), int(j))
    return True


def solve(inst: ProblemInstance, config: Optional[SolveConfig] = None) -> SolveReport:
    """Run BBKG on `inst`.

    Args:
        inst: Problem instance.
        config: Limits, seed and worker count; defaults to an unlimited single-thread search.

    Returns:
        SolveReport whose `best` is always feasible. `proven_optimal` is False only when a
        node or time limit stopped the search with open nodes above the incumbent.
    """
    return _Search(inst, config or SolveConfig()).run()
