"""
Test configuration and fixtures for keygroup.
"""

import itertools
import math
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pytest
from scipy.stats import norm

from keygroup import AdGroupSpec, KeywordStat, Moments2, NodeFixings, ProblemInstance


def make_keyword(
    keyword_id: str,
    demand: float = 100.0,
    vps: float = 16.0,
    ctr: Tuple[float, float] = (0.04, 0.0),
    cvr: Tuple[float, float] = (0.5, 0.0),
    cpc: float = 0.3,
    m: int = 1,
    cost: Optional[Tuple[float, float]] = None,
    product: Optional[str] = None,
    topic: Optional[str] = None,
) -> KeywordStat:
    """Keyword with the same statistics in each of its m adgroup columns."""
    return KeywordStat(
        keyword_id,
        demand,
        vps,
        ctr=(Moments2(*ctr),) * m,
        cvr=(Moments2(*cvr),) * m,
        cpc=(cpc,) * m,
        cost=() if cost is None else (Moments2(*cost),) * m,
        product_label=product,
        hierarchy_label=topic,
    )


def make_random_instance(
    seed: int, n: int, m: int, theta: float = math.inf, alpha: float = 0.95
) -> ProblemInstance:
    """Small instance where budgets admit a few keywords per adgroup and theta = 0.3 binds."""
    rng = np.random.default_rng(seed)
    keywords = []
    for i in range(n):
        demand = rng.uniform(10.0, 60.0)
        vps = rng.uniform(1.0, 5.0)
        ctr, cvr, cpc = [], [], []
        for _ in range(m):
            c = rng.uniform(0.05, 0.2)
            ctr.append(Moments2(c, rng.uniform(0.0, 0.2 * c)))
            cvr.append(Moments2(rng.uniform(0.2, 0.6), rng.uniform(0.0, 0.1)))
            cpc.append(rng.uniform(0.05, 0.5))
        keywords.append(
            KeywordStat(
                f"kw-{i}",
                demand,
                vps,
                ctr=ctr,
                cvr=cvr,
                cpc=cpc,
                product_label=f"product-{i % 2}",
                hierarchy_label=f"topic-{i % 3}",
            )
        )
    draft = ProblemInstance(tuple(keywords), tuple(AdGroupSpec(f"g{j}", 1.0) for j in range(m)))
    column_cost = draft.cost_mean_matrix.sum(axis=0)
    adgroups = tuple(
        AdGroupSpec(f"g{j}", float(rng.uniform(0.2, 0.5) * column_cost[j]), alpha)
        for j in range(m)
    )
    return ProblemInstance(tuple(keywords), adgroups, theta)


def _feasible(inst: ProblemInstance, x: np.ndarray) -> bool:
    for j in range(inst.m):
        mean = float(np.dot(x[:, j], inst.cost_mean_matrix[:, j]))
        var = float(np.dot(x[:, j], inst.cost_var_matrix[:, j]))
        if var <= 0.0:
            level = 1.0 if mean <= inst.budgets[j] else 0.0
        else:
            level = float(norm.cdf((inst.budgets[j] - mean) / math.sqrt(var)))
        if level < inst.alphas[j]:
            return False
    if math.isinf(inst.risk_tolerance):
        return True
    return float(np.sum(x * inst.variance_matrix)) / inst.total_budget <= inst.risk_tolerance


def brute_force_optimum(
    inst: ProblemInstance, fix: Optional[NodeFixings] = None
) -> Optional[Tuple[float, np.ndarray]]:
    """Best feasible assignment by enumerating all (m+1)^n choices, optionally within `fix`.

    Returns None when no assignment consistent with `fix` is feasible.
    """
    best: Optional[Tuple[float, np.ndarray]] = None
    for choice in itertools.product(range(inst.m + 1), repeat=inst.n):
        x = np.zeros((inst.n, inst.m), dtype=np.int8)
        for i, j in enumerate(choice):
            if j < inst.m:
                x[i, j] = 1
        if fix is not None:
            if any(x[i, j] != 1 for i, j in fix.fixed_one):
                continue
            if any(x[i, j] != 0 for i, j in fix.fixed_zero):
                continue
        if not _feasible(inst, x):
            continue
        value = float(np.sum(inst.profit_matrix * x))
        if best is None or value > best[0]:
            best = (value, x)
    return best


@pytest.fixture
def random_instance() -> Callable[..., ProblemInstance]:
    """Factory of seeded random instances."""
    return make_random_instance


@pytest.fixture
def brute_force() -> Callable[..., Optional[Tuple[float, np.ndarray]]]:
    """Exhaustive enumeration oracle."""
    return brute_force_optimum


@pytest.fixture
def single_keyword_instance() -> ProblemInstance:
    """d=100, E[c]=0.04 (deterministic), r ~ (0.5, 0.1), v=16, p=0.3, total budget 200."""
    keyword = make_keyword("kw-1", ctr=(0.04, 0.0), cvr=(0.5, 0.1))
    return ProblemInstance((keyword,), (AdGroupSpec("g1", 200.0),), 0.3)


@pytest.fixture
def boundary_instance() -> ProblemInstance:
    """One keyword with cost (2.13, 3.67) and a budget exactly at the 95% quantile."""
    keyword = make_keyword("kw-1", cost=(2.13, 3.67))
    budget = 2.13 + float(norm.ppf(0.95)) * 3.67
    return ProblemInstance((keyword,), (AdGroupSpec("g1", budget, 0.95),))


@pytest.fixture
def greedy_trap_instance() -> ProblemInstance:
    """Greedy takes the single most profitable keyword; two cheaper ones together earn more."""
    keywords = (
        make_keyword("kw-a", demand=100.0, vps=2.2, ctr=(0.1, 0.0), cvr=(0.5, 0.0), cpc=0.1,
                     m=2, cost=(6.0, 0.0)),
        make_keyword("kw-b", demand=100.0, vps=1.4, ctr=(0.1, 0.0), cvr=(0.5, 0.0), cpc=0.1,
                     m=2, cost=(5.0, 0.0)),
        make_keyword("kw-c", demand=100.0, vps=1.4, ctr=(0.1, 0.0), cvr=(0.5, 0.0), cpc=0.1,
                     m=2, cost=(5.0, 0.0)),
    )
    adgroups = (AdGroupSpec("big", 10.0), AdGroupSpec("small", 1.0))
    return ProblemInstance(keywords, adgroups)


@pytest.fixture
def labeled_instance() -> Callable[[int, int, int], ProblemInstance]:
    """Random instance factory whose keywords carry product and topic labels."""

    def factory(seed: int, n: int = 6, m: int = 2) -> ProblemInstance:
        return make_random_instance(seed, n, m)

    return factory


def write_text(path: Path, lines: Sequence[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def report_csv_content() -> str:
    """Two keywords over two periods, plus one keyword without conversions."""
    return "\n".join(
        [
            "keyword_id,period,impressions,clicks,conversions,cost,revenue,product_label,"
            "hierarchy_label",
            "shoes,p1,1000,30,3,9.0,48.0,footwear,apparel",
            "shoes,p2,1000,50,5,15.0,80.0,footwear,apparel",
            "boots,p1,2000,100,20,40.0,400.0,footwear,outdoor",
            "boots,p2,2000,100,20,40.0,400.0,footwear,outdoor",
            "socks,p1,500,20,0,4.0,0.0,,",
            "socks,p2,500,20,0,4.0,0.0,,",
        ]
    )


@pytest.fixture
def small_instance_files(tmp_path: Path) -> Tuple[Path, Path]:
    """instance.csv with two keywords in one block and adgroups.csv with two adgroups."""
    instance = write_text(
        tmp_path / "instance.csv",
        [
            "keyword_id,demand,vps,product_label,hierarchy_label,ctr_mean_1,ctr_sd_1,cvr_mean_1,"
            "cvr_sd_1,cpc_1,cost_mean_1,cost_sd_1",
            "kw-1,1000.0,16.0,p1,t1,0.04,0.005,0.5,0.1,0.3,12.0,1.5",
            "kw-2,800.0,20.0,p2,t2,0.05,0.005,0.4,0.1,0.25,10.0,1.0",
        ],
    )
    adgroups = write_text(
        tmp_path / "adgroups.csv",
        ["adgroup_id,budget,alpha", "g1,30.0,0.95", "g2,15.0,0.95"],
    )
    return instance, adgroups
