"""
keygroup: profit-maximizing keyword grouping for sponsored-search campaigns under budget chance
constraints and an advertiser risk tolerance.
"""

from .model import (
    ValidationError,
    DimensionError,
    NormalityWarning,
    Moments2,
    KeywordStat,
    AdGroupSpec,
    ProblemInstance,
    Assignment,
    expected_profit,
    profit_variance,
    expected_cost,
    roi,
    risk_ratio,
    risk_feasible,
    evaluate_assignment,
)

from .chance import (
    ChanceMode,
    ChanceCheckConfig,
    ChanceCheckResult,
    AuditReport,
    simulate_chance,
    analytic_chance,
    is_feasible,
    audit_assignment,
)

from .relaxation import (
    NodeFixings,
    RelaxationStatus,
    RelaxationResult,
    RelaxationModel,
    deterministic_budget_lhs,
    solve_relaxation,
)

from .bnb import (
    SolveConfig,
    SolveReport,
    greedy_incumbent,
    solve,
)

from .baselines import (
    BaselineKind,
    MissingLabelError,
    kmeans,
    merge_adgroups,
    run_baseline,
)

from .data import (
    CsvFormatError,
    EstimationWarning,
    ReportRow,
    GeneratorSpec,
    estimate_stats,
    generate,
    summarize_instance,
    parse_report_csv,
    parse_instance_csv,
    parse_adgroups_csv,
    parse_assignment_csv,
    load_instance,
    write_instance_csv,
    write_adgroups_csv,
    write_assignment_csv,
)

from .harness import (
    SweepConfig,
    SweepRow,
    sweep,
    write_sweep_csv,
    build_manifest,
)

__version__ = "0.1.0"
__author__ = "keygroup developers"

__all__ = [
    "ValidationError",
    "DimensionError",
    "NormalityWarning",
    "Moments2",
    "KeywordStat",
    "AdGroupSpec",
    "ProblemInstance",
    "Assignment",
    "expected_profit",
    "profit_variance",
    "expected_cost",
    "roi",
    "risk_ratio",
    "risk_feasible",
    "evaluate_assignment",
    "ChanceMode",
    "ChanceCheckConfig",
    "ChanceCheckResult",
    "AuditReport",
    "simulate_chance",
    "analytic_chance",
    "is_feasible",
    "audit_assignment",
    "NodeFixings",
    "RelaxationStatus",
    "RelaxationResult",
    "RelaxationModel",
    "deterministic_budget_lhs",
    "solve_relaxation",
    "SolveConfig",
    "SolveReport",
    "greedy_incumbent",
    "solve",
    "BaselineKind",
    "MissingLabelError",
    "kmeans",
    "merge_adgroups",
    "run_baseline",
    "CsvFormatError",
    "EstimationWarning",
    "ReportRow",
    "GeneratorSpec",
    "estimate_stats",
    "generate",
    "summarize_instance",
    "parse_report_csv",
    "parse_instance_csv",
    "parse_adgroups_csv",
    "parse_assignment_csv",
    "load_instance",
    "write_instance_csv",
    "write_adgroups_csv",
    "write_assignment_csv",
    "SweepConfig",
    "SweepRow",
    "sweep",
    "write_sweep_csv",
    "build_manifest",
]
