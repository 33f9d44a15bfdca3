"""
Comparison strategies: the keyword groupings used in practice and in earlier work.

BASE1 puts every keyword into one merged adgroup, BASE2 groups by product, BASE3 clusters
keywords by their market statistics, BASE4 groups by concept-hierarchy topic and BASE5 is the
greedy deterministic-model assignment. BASE1 to BASE4 build a partition first and then admit
keywords into each adgroup by decreasing expected profit while its budget chance constraint
holds; only BASE5 respects the advertiser's risk tolerance.
"""

from collections import defaultdict
from typing import Dict, List, Optional, Sequence

import numpy as np
from sklearn.cluster import KMeans
from sklearn.preprocessing import StandardScaler

from .bnb import greedy_incumbent
from .chance import FeasibilityTracker
from .model import (
    AdGroupSpec,
    Assignment,
    KeywordStat,
    ProblemInstance,
    ValidationError,
    evaluate_assignment,
)

KMEANS_MAX_ITER = 100


class BaselineKind:
    NOGROUPING = "nogrouping"
    PRODUCT = "product"
    KCLUSTER = "kcluster"
    HIERARCHY = "hierarchy"
    PROFIT = "profit"

    ALL = (NOGROUPING, PRODUCT, KCLUSTER, HIERARCHY, PROFIT)

    LABELS = {
        NOGROUPING: "BASE1-Nogrouping",
        PRODUCT: "BASE2-Product",
        KCLUSTER: "BASE3-Kcluster",
        HIERARCHY: "BASE4-Hierarchy",
        PROFIT: "BASE5-Profit",
    }


class MissingLabelError(ValidationError):
    """A label-based baseline ran on a keyword without that label."""


def kmeans(features: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """Lloyd k-means on z-score standardized features.

    Args:
        features: n x f matrix, one row per keyword.
        k: Number of clusters, 1 <= k <= n.
        seed: Seed of the centroid initialization.

    Returns:
        Integer cluster label per row.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2:
        raise ValidationError(f"features must be a 2-D matrix, got {features.ndim} dimensions")
    n = features.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k must lie in [1, {n}], got {k}")
    if k == 1:
        return np.zeros(n, dtype=int)
    scaled = StandardScaler().fit_transform(features)
    model = KMeans(
        n_clusters=k,
        algorithm="lloyd",
        n_init=1,
        max_iter=KMEANS_MAX_ITER,
        tol=0.0,
        random_state=seed,
    )
    return np.asarray(model.fit_predict(scaled), dtype=int)


def keyword_features(inst: ProblemInstance) -> np.ndarray:
    """Impressions, CTR, CPC, CVR and value per sale of every keyword (adgroup-averaged)."""
    rows = []
    for keyword in inst.keywords:
        rows.append(
            [
                keyword.demand,
                float(np.mean([c.mean for c in keyword.ctr])),
                float(np.mean(keyword.cpc)),
                float(np.mean([r.mean for r in keyword.cvr])),
                keyword.value_per_sale,
            ]
        )
    return np.array(rows)


def merge_adgroups(inst: ProblemInstance) -> ProblemInstance:
    """Single-adgroup instance with budget sum(B) and the alpha of the largest-budget adgroup.

    Each keyword keeps the rate and cost column of its most profitable adgroup.
    """
    best = np.argmax(inst.profit_matrix, axis=1)
    keywords = []
    for keyword, j in zip(inst.keywords, best):
        keywords.append(
            KeywordStat(
                keyword.id,
                keyword.demand,
                keyword.value_per_sale,
                ctr=(keyword.ctr[j],),
                cvr=(keyword.cvr[j],),
                cpc=(keyword.cpc[j],),
                cost=(keyword.cost[j],),
                product_label=keyword.product_label,
                hierarchy_label=keyword.hierarchy_label,
            )
        )
    lead = inst.adgroups[inst.adgroup_ranking[0]]
    merged = AdGroupSpec("merged", inst.total_budget, lead.alpha)
    return ProblemInstance(tuple(keywords), (merged,), inst.risk_tolerance)


def baseline_instance(kind: str, inst: ProblemInstance) -> ProblemInstance:
    """The instance a baseline's assignment is evaluated against."""
    return merge_adgroups(inst) if kind == BaselineKind.NOGROUPING else inst


def _label_groups(inst: ProblemInstance, attribute: str) -> List[List[int]]:
    groups: Dict[str, List[int]] = defaultdict(list)
    for i, keyword in enumerate(inst.keywords):
        label = getattr(keyword, attribute)
        if label is None or label == "":
            raise MissingLabelError(
                f"keyword '{keyword.id}' has no {attribute.replace('_', ' ')}", keyword.id
            )
        groups[label].append(i)
    return [groups[label] for label in sorted(groups)]


def _cluster_groups(inst: ProblemInstance, seed: int) -> List[List[int]]:
    labels = kmeans(keyword_features(inst), min(inst.m, inst.n), seed)
    return [list(np.flatnonzero(labels == c)) for c in sorted(set(labels.tolist()))]


def _deal(inst: ProblemInstance, groups: Sequence[Sequence[int]]) -> List[List[int]]:
    """Deal groups, ranked by total expected profit, round-robin onto adgroups ranked by budget."""
    best = inst.profit_matrix.max(axis=1)

    def weight(group: Sequence[int]) -> float:
        return float(sum(max(best[i], 0.0) for i in group))

    ranked = sorted(range(len(groups)), key=lambda g: (-weight(groups[g]), g))
    members: List[List[int]] = [[] for _ in range(inst.m)]
    for rank, g in enumerate(ranked):
        members[inst.adgroup_ranking[rank % inst.m]].extend(int(i) for i in groups[g])
    return members


def _admit(inst: ProblemInstance, members: Sequence[Sequence[int]]) -> np.ndarray:
    """Per adgroup, take keywords by decreasing profit until the chance budget would break."""
    tracker = FeasibilityTracker(inst, enforce_risk=False)
    profit = inst.profit_matrix
    for j, candidates in enumerate(members):
        ordered = [i for i in candidates if profit[i, j] > 0.0]
        for i in sorted(ordered, key=lambda i: (-profit[i, j], i)):
            if not tracker.chance_ok(i, j):
                break
            tracker.add(i, j)
    return tracker.x


def run_baseline(kind: str, inst: ProblemInstance, seed: int = 0) -> Assignment:
    """Run one comparison strategy.

    Args:
        kind: One of `BaselineKind.ALL`.
        inst: Problem instance.
        seed: Seed of the k-means initialization (BASE3).

    Returns:
        Evaluated assignment. For `BaselineKind.NOGROUPING` it has a single column and is
        evaluated against `merge_adgroups(inst)`.
    """
    if kind == BaselineKind.NOGROUPING:
        merged = merge_adgroups(inst)
        return evaluate_assignment(merged, _admit(merged, [list(range(merged.n))]))
    if kind == BaselineKind.PROFIT:
        return greedy_incumbent(inst, enforce_risk=True)

    groups: Optional[List[List[int]]] = None
    if kind == BaselineKind.PRODUCT:
        groups = _label_groups(inst, "product_label")
    elif kind == BaselineKind.HIERARCHY:
        groups = _label_groups(inst, "hierarchy_label")
    elif kind == BaselineKind.KCLUSTER:
        groups = _cluster_groups(inst, seed)
    if groups is None:
        raise ValidationError(
            f"unknown baseline '{kind}', expected one of {', '.join(BaselineKind.ALL)}"
        )
    return evaluate_assignment(inst, _admit(inst, _deal(inst, groups)))
