"""
Command-line interface for keygroup.

This module provides the CLI entry point for generating and estimating keyword instances,
solving them with BBKG or a baseline, auditing assignments and running budget sweeps.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, NoReturn, Optional

from .baselines import BaselineKind, baseline_instance, run_baseline
from .bnb import SolveConfig, solve
from .chance import AuditReport, audit_assignment
from .data import (
    GeneratorSpec,
    generate,
    estimate_stats,
    load_instance,
    parse_assignment_csv,
    parse_instance_csv,
    parse_report_csv,
    write_adgroups_csv,
    write_assignment_csv,
    write_instance_csv,
)
from .harness import APPROACHES, SweepConfig, build_manifest, sweep, write_sweep_csv
from .model import AdGroupSpec, Assignment, ProblemInstance, ValidationError, risk_ratio

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_INCUMBENT = 2


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with EXIT_ERROR; 2 is the solver-limit code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_instance_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("instance", type=Path, help="Keyword parameters (instance.csv)")
    parser.add_argument("adgroups", type=Path, help="Adgroup budgets and alphas (adgroups.csv)")
    parser.add_argument(
        "--theta", type=float, default=math.inf, help="Risk tolerance (default: inf)"
    )
    parser.add_argument("--alpha", type=float, help="Override the chance level of every adgroup")


def create_parser() -> argparse.ArgumentParser:
    """Create the main argument parser with subcommands."""
    parser = _Parser(
        prog="keygroup",
        description="Group search-ad keywords into adgroups under budget chance constraints.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug output"
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # gen subcommand
    gen_parser = subparsers.add_parser(
        "gen",
        help="Generate a synthetic instance",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  keygroup gen -o instance.csv --adgroups-out adgroups.csv
  keygroup gen --preset dataset2 --seed 7 -o instance.csv --adgroups-out adgroups.csv
        """,
    )
    gen_parser.add_argument("--preset", choices=["dataset1", "dataset2"], default="dataset1")
    gen_parser.add_argument("--n", type=int, help="Number of keywords")
    gen_parser.add_argument("--total-budget", type=float, help="Sum of the adgroup budgets")
    gen_parser.add_argument("--alpha", type=float, help="Chance level of every adgroup")
    gen_parser.add_argument("--seed", type=int, default=0)
    gen_parser.add_argument("-o", "--output", type=Path, help="instance.csv (default: stdout)")
    gen_parser.add_argument("--adgroups-out", type=Path, help="adgroups.csv to write")

    # estimate subcommand
    estimate_parser = subparsers.add_parser(
        "estimate",
        help="Estimate keyword parameters from a campaign report",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  keygroup estimate report.csv --m 2 -o instance.csv
        """,
    )
    estimate_parser.add_argument("report", type=Path, help="Per-period report (report.csv)")
    estimate_parser.add_argument("--m", type=int, default=1, help="Adgroup columns to write")
    estimate_parser.add_argument("-o", "--output", type=Path, help="instance.csv (default: stdout)")

    # solve subcommand
    solve_parser = subparsers.add_parser(
        "solve",
        help="Find the profit-maximizing grouping with branch and bound",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  keygroup solve instance.csv adgroups.csv -o assignment.csv --report report.json
  keygroup solve instance.csv adgroups.csv --theta 0.3 --node-limit 5000
        """,
    )
    _add_instance_args(solve_parser)
    solve_parser.add_argument("--seed", type=int, default=0)
    solve_parser.add_argument(
        "--samples", type=int, default=1_000_000, help="Audit samples per adgroup (0: skip)"
    )
    solve_parser.add_argument("--node-limit", type=int, help="Maximum expanded nodes")
    solve_parser.add_argument("--time-limit-s", type=float, help="Wall-clock limit in seconds")
    solve_parser.add_argument("--workers", type=int, default=1, help="Relaxation threads")
    solve_parser.add_argument("-o", "--output", type=Path, help="assignment.csv to write")
    solve_parser.add_argument("--report", type=Path, help="report.json (default: stdout)")

    # baseline subcommand
    baseline_parser = subparsers.add_parser(
        "baseline",
        help="Run one of the comparison strategies",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  keygroup baseline instance.csv adgroups.csv --kind kcluster --seed 3
        """,
    )
    _add_instance_args(baseline_parser)
    baseline_parser.add_argument("--kind", choices=list(BaselineKind.ALL), required=True)
    baseline_parser.add_argument("--seed", type=int, default=0)
    baseline_parser.add_argument("-o", "--output", type=Path, help="assignment.csv to write")

    # sweep subcommand
    sweep_parser = subparsers.add_parser(
        "sweep",
        help="Compare BBKG and the baselines over a range of campaign budgets",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  keygroup sweep instance.csv --preset dataset1 -o sweep.csv --manifest manifest.json
  keygroup sweep instance.csv --levels 1000 2000 --ratios 2 1 --thetas inf
        """,
    )
    sweep_parser.add_argument("instance", type=Path, help="Keyword parameters (instance.csv)")
    sweep_parser.add_argument("--preset", choices=["dataset1", "dataset2"])
    sweep_parser.add_argument("--levels", type=float, nargs="+", help="Total budget levels")
    sweep_parser.add_argument("--ratios", type=float, nargs="+", help="Adgroup budget ratios")
    sweep_parser.add_argument("--alpha", type=float, help="Chance level (default: 0.95)")
    sweep_parser.add_argument("--thetas", type=float, nargs="+", help="Risk tolerances")
    sweep_parser.add_argument("--approaches", choices=list(APPROACHES), nargs="+")
    sweep_parser.add_argument("--seed", type=int, default=0)
    sweep_parser.add_argument("--node-limit", type=int, help="BBKG node limit per cell")
    sweep_parser.add_argument("--time-limit-s", type=float, help="BBKG time limit per cell")
    sweep_parser.add_argument("--workers", type=int, help="Parallel cells (or KEYGROUP_WORKERS)")
    sweep_parser.add_argument("-o", "--output", type=Path, help="sweep.csv (default: stdout)")
    sweep_parser.add_argument("--manifest", type=Path, help="manifest.json to write")

    # audit subcommand
    audit_parser = subparsers.add_parser(
        "audit",
        help="Check an assignment against its instance",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  keygroup audit instance.csv adgroups.csv assignment.csv --theta 0.3 --samples 1000000
        """,
    )
    _add_instance_args(audit_parser)
    audit_parser.add_argument("assignment", type=Path, help="assignment.csv to check")
    audit_parser.add_argument("--samples", type=int, default=0, help="Samples per adgroup")
    audit_parser.add_argument("--seed", type=int, default=0)

    return parser


def _open_instance(args: Any) -> ProblemInstance:
    with open(args.instance, "r", encoding="utf-8") as instance_csv:
        with open(args.adgroups, "r", encoding="utf-8") as adgroups_csv:
            return load_instance(instance_csv, adgroups_csv, args.theta, args.alpha)


def _summary(inst: ProblemInstance, assignment: Assignment) -> Dict[str, Any]:
    return {
        "expected_profit": assignment.expected_profit,
        "profit_variance": assignment.profit_variance,
        "expected_cost": assignment.expected_cost,
        "roi": assignment.roi,
        "risk": risk_ratio(inst, assignment),
        "keywords_assigned": assignment.num_assigned,
        "per_adgroup_chance": list(assignment.per_adgroup_chance or ()),
    }


def _audit_dict(report: AuditReport) -> Dict[str, Any]:
    result: Dict[str, Any] = {
        "feasible": report.feasible,
        "row_sums_ok": report.row_sums_ok,
        "offending_keywords": list(report.offending_keywords),
        "chance": list(report.chance),
        "chance_ok": list(report.chance_ok),
        "risk": report.risk,
        "risk_ok": report.risk_ok,
    }
    if report.simulated is not None:
        result["simulated"] = [
            {"alpha_hat": s.alpha_hat, "standard_error": s.standard_error, "ok": s.satisfied}
            for s in report.simulated
        ]
    return result


def _dump_json(payload: Dict[str, Any], output: Optional[Path]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=str)
    if output:
        with open(output, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    else:
        print(text)


def handle_gen_command(args: Any) -> int:
    """Handle the gen subcommand."""
    overrides: Dict[str, Any] = {"seed": args.seed}
    if args.n is not None:
        overrides["n"] = args.n
    if args.total_budget is not None:
        overrides["total_budget"] = args.total_budget
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    factory = GeneratorSpec.dataset2 if args.preset == "dataset2" else GeneratorSpec.dataset1
    inst = generate(factory(**overrides))

    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as f:
            write_instance_csv(inst, f)
    else:
        write_instance_csv(inst, sys.stdout)
    if args.adgroups_out:
        with open(args.adgroups_out, "w", encoding="utf-8", newline="") as f:
            write_adgroups_csv(inst, f)
    return EXIT_OK


def handle_estimate_command(args: Any) -> int:
    """Handle the estimate subcommand."""
    with open(args.report, "r", encoding="utf-8") as report_csv:
        keywords = estimate_stats(parse_report_csv(report_csv), args.m)
    if not keywords:
        print("Error: No keyword has both clicks and conversions.", file=sys.stderr)
        return EXIT_ERROR
    # Budgets are not part of instance.csv; any valid placeholder serves for writing it.
    placeholder = tuple(AdGroupSpec(f"adgroup-{j + 1}", 1.0) for j in range(args.m))
    inst = ProblemInstance(tuple(keywords), placeholder)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as f:
            write_instance_csv(inst, f)
    else:
        write_instance_csv(inst, sys.stdout)
    return EXIT_OK


def handle_solve_command(args: Any) -> int:
    """Handle the solve subcommand."""
    inst = _open_instance(args)
    config = SolveConfig(
        node_limit=args.node_limit,
        time_limit=args.time_limit_s,
        seed=args.seed,
        workers=args.workers,
        audit_samples=args.samples,
    )
    report = solve(inst, config)

    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as f:
            write_assignment_csv(inst, report.best, f)
    payload = _summary(inst, report.best)
    payload.update(
        {
            "best_value": report.best_value,
            "nodes_expanded": report.nodes_expanded,
            "proven_optimal": report.proven_optimal,
            "gap": report.gap,
        }
    )
    if report.audit is not None:
        payload["audit"] = _audit_dict(report.audit)
    _dump_json(payload, args.report)

    if not report.proven_optimal and report.best.num_assigned == 0 and report.gap > 0.0:
        print("Error: Search limit reached without a non-empty incumbent.", file=sys.stderr)
        return EXIT_NO_INCUMBENT
    return EXIT_OK


def handle_baseline_command(args: Any) -> int:
    """Handle the baseline subcommand."""
    inst = _open_instance(args)
    assignment = run_baseline(args.kind, inst, args.seed)
    evaluated_on = baseline_instance(args.kind, inst)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as f:
            write_assignment_csv(evaluated_on, assignment, f)
    payload = _summary(evaluated_on, assignment)
    payload["approach"] = BaselineKind.LABELS[args.kind]
    _dump_json(payload, None)
    return EXIT_OK


def handle_sweep_command(args: Any) -> int:
    """Handle the sweep subcommand."""
    overrides: Dict[str, Any] = {"seed": args.seed}
    for name, value in (
        ("budget_levels", args.levels),
        ("split_ratios", args.ratios),
        ("alpha", args.alpha),
        ("thetas", args.thetas),
        ("approaches", args.approaches),
        ("node_limit", args.node_limit),
        ("time_limit", args.time_limit_s),
    ):
        if value is not None:
            overrides[name] = value
    preset = SweepConfig.dataset2 if args.preset == "dataset2" else SweepConfig.dataset1
    cfg = preset(**overrides)

    with open(args.instance, "r", encoding="utf-8") as instance_csv:
        keywords = parse_instance_csv(instance_csv, m=len(cfg.split_ratios))
    adgroups = tuple(
        AdGroupSpec(f"adgroup-{j + 1}", budget, cfg.alpha)
        for j, budget in enumerate(cfg.budgets(cfg.budget_levels[0]))
    )
    inst = ProblemInstance(tuple(keywords), adgroups)
    rows = sweep(inst, cfg, args.workers)

    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as f:
            write_sweep_csv(rows, f)
    else:
        write_sweep_csv(rows, sys.stdout)
    if args.manifest:
        manifest = build_manifest(inst, cfg, {"instance": str(args.instance)})
        _dump_json(manifest, args.manifest)
    return EXIT_OK


def handle_audit_command(args: Any) -> int:
    """Handle the audit subcommand."""
    inst = _open_instance(args)
    with open(args.assignment, "r", encoding="utf-8") as assignment_csv:
        matrix = parse_assignment_csv(inst, assignment_csv)
    report = audit_assignment(inst, matrix, samples=args.samples, seed=args.seed)
    _dump_json(_audit_dict(report), None)

    if not report.row_sums_ok:
        offending = ", ".join(report.offending_keywords)
        print(f"Error: Keyword(s) assigned to more than one adgroup: {offending}", file=sys.stderr)
        return EXIT_ERROR
    if not report.feasible:
        print("Error: Assignment violates a chance or risk constraint.", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


HANDLERS = {
    "gen": handle_gen_command,
    "estimate": handle_estimate_command,
    "solve": handle_solve_command,
    "baseline": handle_baseline_command,
    "sweep": handle_sweep_command,
    "audit": handle_audit_command,
}


def run(argv: Optional[List[str]] = None) -> int:
    """Parse `argv` (default: sys.argv), run the subcommand and return its exit code."""
    parser = create_parser()
    args = parser.parse_args(argv)

    handler = HANDLERS.get(args.command)
    if handler is None:
        parser.print_help()
        return EXIT_ERROR

    level = logging.WARNING if args.verbose == 0 else logging.INFO
    if args.verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )

    try:
        return handler(args)
    except FileNotFoundError as e:
        print(f"Error: File '{e.filename}' not found.", file=sys.stderr)
    except PermissionError as e:
        print(f"Error: Permission denied accessing '{e.filename}'.", file=sys.stderr)
    except ValidationError as e:
        print(f"Error: {e}", file=sys.stderr)
    except Exception as e:
        print(f"Error: During processing: {e}", file=sys.stderr)
    return EXIT_ERROR


def main() -> None:
    """Main function to handle command line arguments and execute the subcommand."""
    code = run()
    if code != EXIT_OK:
        sys.exit(code)


if __name__ == "__main__":
    main()
