"""
Campaign data: report ingestion, parameter estimation, synthetic generation and CSV files.
"""

import csv
import logging
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, replace
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from scipy.stats import norm, truncnorm

from .model import (
    AdGroupSpec,
    Assignment,
    KeywordStat,
    Moments2,
    NormalityWarning,
    ProblemInstance,
    ValidationError,
)

logger = logging.getLogger(__name__)

# Minimum expected clicks and non-clicks for the normal approximation of the click count.
NORMALITY_MIN_COUNT = 10.0

# Number of keyword ids quoted in an aggregated warning.
WARN_LIST_LIMIT = 5

INSTANCE_BASE_COLUMNS = ("keyword_id", "demand", "vps", "product_label", "hierarchy_label")
INSTANCE_BLOCK_COLUMNS = ("ctr_mean", "ctr_sd", "cvr_mean", "cvr_sd", "cpc", "cost_mean", "cost_sd")
REPORT_COLUMNS = (
    "keyword_id",
    "period",
    "impressions",
    "clicks",
    "conversions",
    "cost",
    "revenue",
    "product_label",
    "hierarchy_label",
)
ADGROUP_COLUMNS = ("adgroup_id", "budget", "alpha")
ASSIGNMENT_COLUMNS = ("keyword_id", "adgroup_id")


class EstimationWarning(UserWarning):
    """Report rows did not support full parameter estimation for some keywords."""


class CsvFormatError(ValidationError):
    """Malformed CSV input; `line` is the 1-based line number."""

    def __init__(self, message: str, line: int, keyword_id: Optional[str] = None) -> None:
        super().__init__(f"line {line}: {message}", keyword_id)
        self.line = line


def _quoted(ids: Sequence[str]) -> str:
    shown = ", ".join(f"'{k}'" for k in ids[:WARN_LIST_LIMIT])
    if len(ids) > WARN_LIST_LIMIT:
        shown += f" and {len(ids) - WARN_LIST_LIMIT} more"
    return shown


def check_normality(keywords: Iterable[KeywordStat]) -> List[str]:
    """Return ids of keywords whose click count is too small for the normal approximation.

    Emits one aggregated NormalityWarning when any keyword fails d*E[c] >= 10 and
    d*(1 - E[c]) >= 10 in some adgroup.
    """
    failing = []
    for keyword in keywords:
        for ctr in keyword.ctr:
            clicks = keyword.demand * ctr.mean
            if clicks < NORMALITY_MIN_COUNT or keyword.demand - clicks < NORMALITY_MIN_COUNT:
                failing.append(keyword.id)
                break
    if failing:
        warnings.warn(
            f"{len(failing)} keyword(s) have too little demand for normally distributed clicks: "
            f"{_quoted(failing)}",
            NormalityWarning,
            stacklevel=2,
        )
    return failing


# ---------------------------------------------------------------------------------------------
# Historical reports
# ---------------------------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    """One keyword's performance in one reporting period."""

    keyword_id: str
    period: str
    impressions: int
    clicks: int
    conversions: int
    cost: float
    revenue: float
    product_label: Optional[str] = None
    hierarchy_label: Optional[str] = None

    def __post_init__(self) -> None:
        for name in ("impressions", "clicks", "conversions"):
            if getattr(self, name) < 0:
                raise ValidationError(f"keyword '{self.keyword_id}': {name} must be >= 0")
        if self.clicks > self.impressions:
            raise ValidationError(
                f"keyword '{self.keyword_id}': clicks exceed impressions", self.keyword_id
            )
        if self.conversions > self.clicks:
            raise ValidationError(
                f"keyword '{self.keyword_id}': conversions exceed clicks", self.keyword_id
            )
        if not (self.cost >= 0.0 and self.revenue >= 0.0):
            raise ValidationError(
                f"keyword '{self.keyword_id}': cost and revenue must be >= 0", self.keyword_id
            )


def _sample_moments(values: Sequence[float]) -> Moments2:
    if len(values) < 2:
        return Moments2(float(values[0]) if values else 0.0, 0.0)
    return Moments2(float(np.mean(values)), float(np.std(values, ddof=1)))


def estimate_stats(rows: Iterable[ReportRow], m: int = 1) -> List[KeywordStat]:
    """Estimate keyword parameters from per-period report rows.

    Args:
        rows: Report rows, any order; keywords keep the order of their first row.
        m: Number of adgroup columns to replicate the per-keyword statistics into.

    Returns:
        One KeywordStat per keyword with at least one click and one conversion. Rates use
        per-period sample moments (n - 1 denominator), CPC and value per sale use totals.
    """
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    by_keyword: Dict[str, List[ReportRow]] = OrderedDict()
    for row in rows:
        by_keyword.setdefault(row.keyword_id, []).append(row)

    stats = []
    excluded = []
    single_period = []
    for keyword_id, periods in by_keyword.items():
        clicks = sum(r.clicks for r in periods)
        conversions = sum(r.conversions for r in periods)
        if clicks == 0 or conversions == 0:
            excluded.append(keyword_id)
            continue
        if len(periods) < 2:
            single_period.append(keyword_id)

        ctr = _sample_moments([r.clicks / r.impressions for r in periods if r.impressions > 0])
        cvr = _sample_moments([r.conversions / r.clicks for r in periods if r.clicks > 0])
        cost = _sample_moments([r.cost for r in periods])
        cpc = sum(r.cost for r in periods) / clicks
        vps = sum(r.revenue for r in periods) / conversions
        demand = float(np.mean([r.impressions for r in periods]))
        first = periods[0]
        stats.append(
            KeywordStat(
                keyword_id,
                demand,
                vps,
                ctr=(ctr,) * m,
                cvr=(cvr,) * m,
                cpc=(cpc,) * m,
                cost=(cost,) * m,
                product_label=first.product_label,
                hierarchy_label=first.hierarchy_label,
            )
        )

    if excluded:
        warnings.warn(
            f"excluded {len(excluded)} keyword(s) without clicks or conversions: "
            f"{_quoted(excluded)}",
            EstimationWarning,
            stacklevel=2,
        )
    if single_period:
        warnings.warn(
            f"{len(single_period)} keyword(s) have a single period, sds set to 0: "
            f"{_quoted(single_period)}",
            EstimationWarning,
            stacklevel=2,
        )
    logger.info("estimated %d keyword(s), excluded %d", len(stats), len(excluded))
    check_normality(stats)
    return stats


# ---------------------------------------------------------------------------------------------
# Synthetic instances
# ---------------------------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    """Population targets for synthetic keywords.

    The mean/sd pairs describe the spread across keywords. Per-keyword rate uncertainty
    follows the binomial click model: sd(ctr) = sqrt(c(1 - c) / d) and
    sd(cvr) = sqrt(r(1 - r) / (d c)).

    Args:
        n: Number of keywords.
        m: Number of adgroups.
        demand, ctr, cvr, vps, cpc: Population mean and sd of each keyword factor.
        cost_mean: Target population mean keyword cost; demand is rescaled by one common
            factor to hit it. None (the default) keeps the raw demand draw; the dataset
            presets set 2.13 and 8.95.
        ctr_multipliers: Optional adgroup-level CTR factors (keyword CTR times adgroup factor).
        n_products: Distinct product labels (default m).
        n_topics: Distinct hierarchy topics (default 2m).
        max_clip_rate: Largest admissible probability mass of a rate target outside [0, 1].
        total_budget: Sum of the adgroup budgets.
        budget_split: Relative adgroup budgets.
        alpha: Chance level of every adgroup.
        risk_tolerance: theta of the generated instance.
        seed: Seed of every draw.
    """

    n: int = 90
    m: int = 2
    demand: Moments2 = Moments2(1211.90, 2296.07)
    ctr: Moments2 = Moments2(0.04, 0.15)
    cvr: Moments2 = Moments2(0.53, 0.37)
    vps: Moments2 = Moments2(16.31, 14.64)
    cpc: Moments2 = Moments2(0.30, 0.08)
    cost_mean: Optional[float] = None
    ctr_multipliers: Optional[Tuple[float, ...]] = None
    n_products: Optional[int] = None
    n_topics: Optional[int] = None
    # Dataset-1 CTR puts 39% of its mass outside [0, 1]; 20% would reject both presets.
    max_clip_rate: float = 0.5
    total_budget: float = 2000.0
    budget_split: Tuple[float, ...] = (2.0, 1.0)
    alpha: float = 0.95
    risk_tolerance: float = math.inf
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("demand", "ctr", "cvr", "vps", "cpc"):
            value = getattr(self, name)
            if not isinstance(value, Moments2):
                object.__setattr__(self, name, Moments2(*value))
        object.__setattr__(self, "budget_split", tuple(float(s) for s in self.budget_split))
        if self.ctr_multipliers is not None:
            object.__setattr__(
                self, "ctr_multipliers", tuple(float(f) for f in self.ctr_multipliers)
            )

        if self.n < 1 or self.m < 1:
            raise ValidationError(f"n and m must be >= 1, got n={self.n}, m={self.m}")
        for name in ("ctr", "cvr"):
            if not getattr(self, name).is_rate():
                raise ValidationError(f"{name} target mean must lie in [0, 1]")
        for name in ("demand", "vps", "cpc"):
            if getattr(self, name).mean < 0.0:
                raise ValidationError(f"{name} target mean must be >= 0")
        if self.cost_mean is not None and not self.cost_mean > 0.0:
            raise ValidationError(f"cost_mean must be > 0, got {self.cost_mean}")
        if self.ctr_multipliers is not None and (
            len(self.ctr_multipliers) != self.m or min(self.ctr_multipliers) <= 0.0
        ):
            raise ValidationError(f"ctr_multipliers must be {self.m} positive factors")
        if len(self.budget_split) != self.m or min(self.budget_split) <= 0.0:
            raise ValidationError(f"budget_split must be {self.m} positive ratios")
        for name in ("n_products", "n_topics"):
            count = getattr(self, name)
            if count is not None and count < 1:
                raise ValidationError(f"{name} must be >= 1, got {count}")
        if not 0.0 <= self.max_clip_rate <= 1.0:
            raise ValidationError(f"max_clip_rate must lie in [0, 1], got {self.max_clip_rate}")
        if not self.total_budget > 0.0:
            raise ValidationError(f"total_budget must be > 0, got {self.total_budget}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")

    @classmethod
    def dataset1(cls, **overrides: Any) -> "GeneratorSpec":
        """Dataset-1 calibration: 90 keywords, two adgroups, budget split 2:1."""
        return replace(cls(cost_mean=2.13), **overrides)

    @classmethod
    def dataset2(cls, **overrides: Any) -> "GeneratorSpec":
        """Dataset-2 calibration: 305 keywords, three adgroups, budget split 3:2:1."""
        spec = cls(
            n=305,
            m=3,
            demand=Moments2(289.57, 2279.9),
            ctr=Moments2(0.17, 0.23),
            cvr=Moments2(0.35, 0.57),
            vps=Moments2(21.90, 54.53),
            cpc=Moments2(1.15, 0.4),
            cost_mean=8.95,
            total_budget=10000.0,
            budget_split=(3.0, 2.0, 1.0),
        )
        return replace(spec, **overrides)

    def budgets(self) -> List[float]:
        total = sum(self.budget_split)
        return [self.total_budget * s / total for s in self.budget_split]


def _clip_mass(target: Moments2, low: float, high: float) -> float:
    if target.sd == 0.0:
        return 0.0
    return float(norm.cdf(low, target.mean, target.sd) + norm.sf(high, target.mean, target.sd))


def _draw_truncated(
    target: Moments2, low: float, high: float, size: int, rng: np.random.Generator
) -> np.ndarray:
    if target.sd == 0.0:
        return np.full(size, target.mean)
    a = (low - target.mean) / target.sd
    b = (high - target.mean) / target.sd
    draws = truncnorm.rvs(a, b, loc=target.mean, scale=target.sd, size=size, random_state=rng)
    return np.clip(np.asarray(draws, dtype=float), low, high)


def _draw_lognormal(target: Moments2, size: int, rng: np.random.Generator) -> np.ndarray:
    if target.sd == 0.0 or target.mean == 0.0:
        return np.full(size, target.mean)
    sigma2 = math.log1p((target.sd / target.mean) ** 2)
    mu = math.log(target.mean) - sigma2 / 2.0
    return rng.lognormal(mu, math.sqrt(sigma2), size)


def _binomial_sd(rate: float, trials: float) -> float:
    if trials <= 0.0:
        return 0.0
    return math.sqrt(max(rate * (1.0 - rate), 0.0) / trials)


def generate(spec: GeneratorSpec) -> ProblemInstance:
    """Draw a synthetic instance matching the population targets of `spec`.

    Demand is log-normal, rates are normals truncated to [0, 1] and value per sale and CPC
    are normals truncated at 0, each moment-matched before truncation.

    Raises:
        ValidationError: A rate target puts more than `max_clip_rate` of its mass outside [0, 1].
    """
    for name in ("ctr", "cvr"):
        target = getattr(spec, name)
        mass = _clip_mass(target, 0.0, 1.0)
        if mass > spec.max_clip_rate:
            raise ValidationError(
                f"{name} target mean {target.mean} with sd {target.sd} puts {mass:.1%} of its "
                f"mass outside [0, 1] (limit {spec.max_clip_rate:.1%})"
            )

    rng = np.random.default_rng(spec.seed)
    n, m = spec.n, spec.m
    demand = _draw_lognormal(spec.demand, n, rng)
    ctr = _draw_truncated(spec.ctr, 0.0, 1.0, n, rng)
    cvr = _draw_truncated(spec.cvr, 0.0, 1.0, n, rng)
    vps = _draw_truncated(spec.vps, 0.0, math.inf, n, rng)
    cpc = _draw_truncated(spec.cpc, 0.0, math.inf, n, rng)
    products = rng.integers(spec.n_products or m, size=n)
    topics = rng.integers(spec.n_topics or 2 * m, size=n)

    multipliers = np.asarray(spec.ctr_multipliers or (1.0,) * m)
    ctr_matrix = np.clip(ctr[:, None] * multipliers[None, :], 0.0, 1.0)

    if spec.cost_mean is not None:
        raw_cost = float(np.mean(demand[:, None] * ctr_matrix * cpc[:, None]))
        if raw_cost <= 0.0:
            raise ValidationError("cannot calibrate keyword cost: every draw has zero cost")
        factor = spec.cost_mean / raw_cost
        demand = demand * factor
        logger.debug("demand rescaled by %.6g for mean keyword cost %g", factor, spec.cost_mean)

    keywords = []
    for i in range(n):
        d = float(demand[i])
        ctr_cols = []
        cvr_cols = []
        for j in range(m):
            c = float(ctr_matrix[i, j])
            r = float(cvr[i])
            ctr_cols.append(Moments2(c, _binomial_sd(c, d)))
            cvr_cols.append(Moments2(r, _binomial_sd(r, d * c)))
        keywords.append(
            KeywordStat(
                f"kw-{i + 1:04d}",
                d,
                float(vps[i]),
                ctr=tuple(ctr_cols),
                cvr=tuple(cvr_cols),
                cpc=(float(cpc[i]),) * m,
                product_label=f"product-{int(products[i]) + 1}",
                hierarchy_label=f"topic-{int(topics[i]) + 1}",
            )
        )
    check_normality(keywords)

    adgroups = tuple(
        AdGroupSpec(f"adgroup-{j + 1}", budget, spec.alpha)
        for j, budget in enumerate(spec.budgets())
    )
    return ProblemInstance(tuple(keywords), adgroups, spec.risk_tolerance)


def summarize_instance(inst: ProblemInstance) -> Dict[str, Moments2]:
    """Population mean and sd of each keyword factor over all keyword-adgroup pairs."""
    columns: Dict[str, List[float]] = {
        "demand": [],
        "ctr": [],
        "cvr": [],
        "vps": [],
        "cpc": [],
        "cost": [],
    }
    for keyword in inst.keywords:
        for j in range(inst.m):
            columns["demand"].append(keyword.demand)
            columns["ctr"].append(keyword.ctr[j].mean)
            columns["cvr"].append(keyword.cvr[j].mean)
            columns["vps"].append(keyword.value_per_sale)
            columns["cpc"].append(keyword.cpc[j])
            columns["cost"].append(keyword.cost[j].mean)
    return {
        name: Moments2(float(np.mean(values)), float(np.std(values))) if values else Moments2(0.0)
        for name, values in columns.items()
    }


# ---------------------------------------------------------------------------------------------
# CSV files
# ---------------------------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def _label(value: Optional[str]) -> Optional[str]:
    value = (value or "").strip()
    return value or None


def _reader(lines: Iterable[str], expected: Sequence[str]) -> "csv.DictReader[str]":
    reader = csv.DictReader(lines)
    header = tuple(reader.fieldnames or ())
    if tuple(expected) != header[: len(expected)]:
        raise CsvFormatError(f"expected header starting with {','.join(expected)}", 1)
    return reader


def _parse_float(row: Dict[str, str], column: str, line: int) -> float:
    text = (row.get(column) or "").strip()
    try:
        return float(text)
    except ValueError:
        raise CsvFormatError(f"column '{column}': '{text}' is not a number", line) from None


def _parse_int(row: Dict[str, str], column: str, line: int) -> int:
    text = (row.get(column) or "").strip()
    try:
        return int(text)
    except ValueError:
        raise CsvFormatError(f"column '{column}': '{text}' is not an integer", line) from None


def parse_report_csv(report_csv: Iterable[str]) -> List[ReportRow]:
    """Parse report rows.

    Args:
        report_csv: Iterable object that produces lines of CSV, e.g. a file object.
    """
    reader = _reader(report_csv, REPORT_COLUMNS)
    rows = []
    for row in reader:
        line = reader.line_num
        keyword_id = (row.get("keyword_id") or "").strip()
        try:
            rows.append(
                ReportRow(
                    keyword_id,
                    (row.get("period") or "").strip(),
                    _parse_int(row, "impressions", line),
                    _parse_int(row, "clicks", line),
                    _parse_int(row, "conversions", line),
                    _parse_float(row, "cost", line),
                    _parse_float(row, "revenue", line),
                    _label(row.get("product_label")),
                    _label(row.get("hierarchy_label")),
                )
            )
        except CsvFormatError:
            raise
        except ValidationError as e:
            raise CsvFormatError(str(e), line, keyword_id) from None
    return rows


def instance_header(m: int) -> List[str]:
    header = list(INSTANCE_BASE_COLUMNS)
    for j in range(1, m + 1):
        header.extend(f"{column}_{j}" for column in INSTANCE_BLOCK_COLUMNS)
    return header


def write_instance_csv(inst: ProblemInstance, out: TextIO) -> None:
    """Write the keyword parameters of `inst`; floats are written exactly (repr)."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(instance_header(inst.m))
    for k in inst.keywords:
        row = [k.id, _fmt(k.demand), _fmt(k.value_per_sale)]
        row += [k.product_label or "", k.hierarchy_label or ""]
        for j in range(inst.m):
            row += [
                _fmt(k.ctr[j].mean),
                _fmt(k.ctr[j].sd),
                _fmt(k.cvr[j].mean),
                _fmt(k.cvr[j].sd),
                _fmt(k.cpc[j]),
                _fmt(k.cost[j].mean),
                _fmt(k.cost[j].sd),
            ]
        writer.writerow(row)


def parse_instance_csv(instance_csv: Iterable[str], m: Optional[int] = None) -> List[KeywordStat]:
    """Parse keyword parameters.

    Args:
        instance_csv: Iterable object that produces lines of CSV, e.g. a file object.
        m: Adgroup count of the target instance. A file with a single per-keyword block is
            replicated into m columns; otherwise the file must carry exactly m blocks.

    Returns:
        Keywords in file order.
    """
    reader = csv.DictReader(instance_csv)
    header = list(reader.fieldnames or ())
    blocks = (len(header) - len(INSTANCE_BASE_COLUMNS)) // len(INSTANCE_BLOCK_COLUMNS)
    if blocks < 1 or header != instance_header(blocks):
        raise CsvFormatError(
            "expected header keyword_id,demand,vps,product_label,hierarchy_label followed by "
            "ctr_mean_j,ctr_sd_j,cvr_mean_j,cvr_sd_j,cpc_j,cost_mean_j,cost_sd_j blocks",
            1,
        )
    target = blocks if m is None else m
    if blocks != target and blocks != 1:
        raise CsvFormatError(f"file has {blocks} adgroup blocks, expected {target}", 1)

    keywords = []
    for row in reader:
        line = reader.line_num
        keyword_id = (row.get("keyword_id") or "").strip()
        if not keyword_id:
            raise CsvFormatError("missing keyword_id", line)
        try:
            cols = []
            for j in range(1, blocks + 1):
                cols.append(
                    (
                        Moments2(
                            _parse_float(row, f"ctr_mean_{j}", line),
                            _parse_float(row, f"ctr_sd_{j}", line),
                        ),
                        Moments2(
                            _parse_float(row, f"cvr_mean_{j}", line),
                            _parse_float(row, f"cvr_sd_{j}", line),
                        ),
                        _parse_float(row, f"cpc_{j}", line),
                        Moments2(
                            _parse_float(row, f"cost_mean_{j}", line),
                            _parse_float(row, f"cost_sd_{j}", line),
                        ),
                    )
                )
            if blocks != target:
                cols = cols * target
            keywords.append(
                KeywordStat(
                    keyword_id,
                    _parse_float(row, "demand", line),
                    _parse_float(row, "vps", line),
                    ctr=tuple(c[0] for c in cols),
                    cvr=tuple(c[1] for c in cols),
                    cpc=tuple(c[2] for c in cols),
                    cost=tuple(c[3] for c in cols),
                    product_label=_label(row.get("product_label")),
                    hierarchy_label=_label(row.get("hierarchy_label")),
                )
            )
        except CsvFormatError:
            raise
        except ValidationError as e:
            raise CsvFormatError(str(e), line, keyword_id) from None
    check_normality(keywords)
    return keywords


def write_adgroups_csv(inst: ProblemInstance, out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ADGROUP_COLUMNS)
    for g in inst.adgroups:
        writer.writerow([g.id, _fmt(g.budget), _fmt(g.alpha)])


def parse_adgroups_csv(adgroups_csv: Iterable[str]) -> List[AdGroupSpec]:
    reader = _reader(adgroups_csv, ADGROUP_COLUMNS)
    adgroups = []
    for row in reader:
        line = reader.line_num
        try:
            adgroups.append(
                AdGroupSpec(
                    (row.get("adgroup_id") or "").strip(),
                    _parse_float(row, "budget", line),
                    _parse_float(row, "alpha", line),
                )
            )
        except CsvFormatError:
            raise
        except ValidationError as e:
            raise CsvFormatError(str(e), line) from None
    return adgroups


def load_instance(
    instance_csv: Iterable[str],
    adgroups_csv: Iterable[str],
    risk_tolerance: float = math.inf,
    alpha: Optional[float] = None,
) -> ProblemInstance:
    """Build an instance from keyword and adgroup CSVs, optionally overriding every alpha."""
    adgroups = parse_adgroups_csv(adgroups_csv)
    if alpha is not None:
        adgroups = [AdGroupSpec(g.id, g.budget, alpha) for g in adgroups]
    keywords = parse_instance_csv(instance_csv, m=len(adgroups))
    return ProblemInstance(tuple(keywords), tuple(adgroups), risk_tolerance)


def write_assignment_csv(inst: ProblemInstance, assignment: Assignment, out: TextIO) -> None:
    """One `keyword_id,adgroup_id` row per assigned pair, in keyword order."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ASSIGNMENT_COLUMNS)
    for i, j in assignment.pairs():
        writer.writerow([inst.keywords[i].id, inst.adgroups[j].id])


def parse_assignment_csv(inst: ProblemInstance, assignment_csv: Iterable[str]) -> np.ndarray:
    """Parse an assignment file into an n x m matrix.

    A keyword listed more than once yields a row sum above 1; that is left for the caller
    to report (see `audit_assignment`) rather than rejected here.
    """
    keyword_index = {k.id: i for i, k in enumerate(inst.keywords)}
    adgroup_index = {g.id: j for j, g in enumerate(inst.adgroups)}
    x = np.zeros((inst.n, inst.m), dtype=np.int64)
    reader = _reader(assignment_csv, ASSIGNMENT_COLUMNS)
    for row in reader:
        line = reader.line_num
        keyword_id = (row.get("keyword_id") or "").strip()
        adgroup_id = (row.get("adgroup_id") or "").strip()
        if keyword_id not in keyword_index:
            raise CsvFormatError(f"unknown keyword '{keyword_id}'", line, keyword_id)
        if adgroup_id not in adgroup_index:
            raise CsvFormatError(f"unknown adgroup '{adgroup_id}'", line, keyword_id)
        x[keyword_index[keyword_id], adgroup_index[adgroup_id]] += 1
    return x

