"""Command-line interface: exact evaluation, impact tables, sweeps, equilibria, simulation.

Every command that writes a data file with ``--out`` also writes
``<out>.manifest.json`` holding the resolved parameters, the seed and the
argument vector; ``rerun <manifest>`` replays it.

Exit codes: 0 success, 2 usage error, 3 enumeration too large, 4 protocol
constraint (odd N with the half/half scheme), 5 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import STATES, ExpertnessError, ExpertnessMatrix, QualityState
from .equilibrium import COST_GRID, DEFAULT_EQ_STEP, SchemeKind, equilibrium_map, high_quality_fractions
from .exact import EnumerationSizeError, LearningMode, expected_pledges, outcome_distribution
from .metrics import FundingConfig, MetricKind, delta_surfaces, evaluate_metric, impact_report
from .montecarlo import (
    DEFAULT_REPLICATIONS,
    SimConfig,
    default_targets,
    estimate_metrics,
    figure9_experiment,
)
from .oracle import validation_suite

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SIZE = 3
EXIT_PROTOCOL = 4
EXIT_VALIDATION = 5


class UsageError(Exception):
    pass


class ProtocolError(Exception):
    pass


# -- parsing helpers ----------------------------------------------------------


def parse_quality(text: str) -> QualityState:
    if len(text) != 2 or any(c not in "01" for c in text):
        raise argparse.ArgumentTypeError(f"quality must be one of 11, 10, 01, 00 (got {text!r})")
    return (int(text[0]), int(text[1]))


def format_quality(state) -> str:
    return f"{state[0]}{state[1]}"


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {exc}") from None


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {exc}") from None


def expertness_from_values(values: list[float]) -> ExpertnessMatrix:
    """Row-major values: backer 1 project 1, backer 1 project 2, backer 2 project 1, ..."""
    if not values or len(values) % 2:
        raise UsageError(f"--expertness needs an even number of values (two per backer), got {len(values)}")
    try:
        return ExpertnessMatrix(np.asarray(values).reshape(-1, 2))
    except ExpertnessError as exc:
        raise UsageError(str(exc)) from None


def read_expertness_file(path: str) -> ExpertnessMatrix:
    """One ``p1,p2`` row per backer; blank lines and ``#`` comments are ignored."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read expertness file: {exc}") from None
    values = []
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise UsageError(f"{path}:{n}: expected two comma-separated values")
        try:
            values.extend(float(p) for p in parts)
        except ValueError:
            raise UsageError(f"{path}:{n}: not a number") from None
    return expertness_from_values(values)


def fmt(x) -> str:
    """Full-precision decimal for CSV cells; ``None`` becomes an empty cell."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def build_manifest(args: argparse.Namespace, outputs: list[str]) -> dict:
    params = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("func", "argv")}
    return {
        "subcommand": args.command,
        "parameters": params,
        "seed": params.get("seed"),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "outputs": outputs,
        "argv": args.argv,
    }


def emit(args: argparse.Namespace, text: str, display: str | None = None) -> None:
    """Write ``text`` to ``--out`` with its manifest, or print it."""
    out = getattr(args, "out", None)
    if out:
        write_atomic(out, text)
        manifest = build_manifest(args, [str(Path(out))])
        write_atomic(f"{out}.manifest.json", json.dumps(manifest, indent=2) + "\n")
        if display:
            sys.stdout.write(display)
    else:
        sys.stdout.write(text)


# -- commands -----------------------------------------------------------------


def _expertness_arg(args) -> ExpertnessMatrix:
    if args.expertness is not None and args.expertness_file is not None:
        raise UsageError("give either --expertness or --expertness-file, not both")
    if args.expertness is not None:
        return expertness_from_values(args.expertness)
    if args.expertness_file is not None:
        return read_expertness_file(args.expertness_file)
    raise UsageError("--expertness or --expertness-file is required")


def cmd_exact(args) -> int:
    em = _expertness_arg(args)
    if not 1 <= args.target <= em.n_backers:
        raise UsageError(f"--target must lie in [1, {em.n_backers}]")
    cfg = FundingConfig(args.target, args.gamma, em.n_backers)
    pmf = outcome_distribution(args.quality, em, args.mode)
    metrics = {m.value: evaluate_metric(m, pmf, args.quality, cfg) for m in MetricKind}
    e1, e2 = expected_pledges(pmf)
    if args.format == "json":
        record = {
            "quality": format_quality(args.quality),
            "mode": args.mode.value,
            "target": args.target,
            "gamma": args.gamma,
            "n_backers": em.n_backers,
            "expertness": em.rows.tolist(),
            "metrics": metrics,
            "expected_pledges": {"n1": e1, "n2": e2},
            "pmf": [{"n1": a, "n2": b, "probability": p} for (a, b), p in pmf.as_dict().items()],
        }
        text = json.dumps(record, indent=2) + "\n"
    else:
        rows = [(name, "", "", value) for name, value in metrics.items()]
        rows += [("expected_n1", "", "", e1), ("expected_n2", "", "", e2)]
        rows += [("pmf", a, b, p) for (a, b), p in pmf.as_dict().items()]
        text = csv_text(["quantity", "n1", "n2", "value"], rows)
    emit(args, text)
    return EXIT_OK


def cmd_impact(args) -> int:
    if not 0 < args.step <= 0.05:
        raise UsageError("--step must lie in (0, 0.05]")
    report = impact_report(FundingConfig(args.target, args.gamma, 2), args.step)
    header = ["metric", "quality_state", "delta_plus", "delta_minus", "delta_avg", "improvement_fraction"]
    rows = [
        (m.value, format_quality(s), c.max_improvement, c.max_harm, c.average_impact, c.improvement_fraction)
        for m, s, c in report.rows()
    ]
    display = "".join(
        f"{m:8s} {q}  d+={'-' if dp is None else f'{dp:.4f}':>8s}  d-={'-' if dm is None else f'{dm:.4f}':>8s}"
        f"  avg={da:+.4f}  improve={fr:.3f}\n"
        for m, q, dp, dm, da, fr in rows
    )
    emit(args, csv_text(header, rows), display)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not 0 < args.step <= 0.05:
        raise UsageError("--step must lie in (0, 0.05]")
    levels, surfaces = delta_surfaces(FundingConfig(args.target, args.gamma, 2), args.step)
    delta = surfaces[args.metric][..., STATES.index(args.quality)]
    rows = [(levels[i], levels[j], delta[i, j]) for i in range(len(levels)) for j in range(len(levels))]
    emit(args, csv_text(["p1", "p2", "delta"], rows))
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    cfg = FundingConfig(args.target, 1.0, 2)
    if args.fractions:
        if args.scheme is not SchemeKind.BACKER:
            raise UsageError("--fractions is defined for the backer scheme only")
        rows = high_quality_fractions(cfg, COST_GRID, args.step)
        emit(args, csv_text(["cost", "ol_fraction", "nl_fraction"], rows))
        return EXIT_OK
    if args.cost is None:
        raise UsageError("--cost is required unless --fractions is given")
    if not 0.0 <= args.cost <= 1.0:
        raise UsageError("--cost must lie in [0, 1]")
    eq = equilibrium_map(args.scheme, cfg, args.mode, args.cost, args.step, literal=args.literal)
    rows = []
    for i, p1 in enumerate(eq.levels):
        for j, p2 in enumerate(eq.levels):
            v1, v2 = eq.state_at(i, j)
            rows.append((p1, p2, v1, v2))
    emit(args, csv_text(["p1", "p2", "v1", "v2"], rows))
    return EXIT_OK


def _simulation_matrix(args) -> ExpertnessMatrix:
    if args.expertness_file is not None:
        if args.p1 is not None or args.p2 is not None:
            raise UsageError("give either --p1/--p2 or --expertness-file, not both")
        em = read_expertness_file(args.expertness_file)
        if args.backers is not None and args.backers != em.n_backers:
            raise UsageError(f"--backers is {args.backers} but the file has {em.n_backers} rows")
        return em
    if args.backers is None or args.p1 is None or args.p2 is None:
        raise UsageError("--backers, --p1 and --p2 are required without --expertness-file")
    if args.backers % 2:
        raise ProtocolError("the half/half scheme needs an even number of backers")
    try:
        return ExpertnessMatrix.half_half(args.p1, args.p2, args.backers)
    except ExpertnessError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    if args.replications < 1:
        raise UsageError("--replications must be positive")
    if args.figure9:
        if args.backers is None:
            raise UsageError("--figure9 needs --backers")
        if args.backers % 2:
            raise ProtocolError("the half/half scheme needs an even number of backers")
        targets = args.targets or default_targets(args.backers)
        if any(not 1 <= t <= args.backers for t in targets):
            raise UsageError(f"--targets must lie in [1, {args.backers}]")
        points = figure9_experiment(
            args.backers, targets, args.replications, args.seed,
            common_random_numbers=not args.no_crn, workers=args.workers,
        )
        rows = [(p.n_backers, p.target_count, format_quality(p.state), p.delta, p.standard_error) for p in points]
        emit(args, csv_text(["n_backers", "target_count", "quality_state", "delta", "standard_error"], rows))
        return EXIT_OK

    em = _simulation_matrix(args)
    if args.target is None or args.quality is None:
        raise UsageError("--target and --quality are required")
    if not 1 <= args.target <= em.n_backers:
        raise UsageError(f"--target must lie in [1, {em.n_backers}]")
    cfg = SimConfig(
        em.n_backers, args.target, args.quality, em, args.mode, args.replications, args.seed,
        args.gamma, common_random_numbers=not args.no_crn,
    )
    est = estimate_metrics(cfg, args.workers)
    fields = ["mean_n1", "mean_n2", "success1_freq", "success2_freq", "contentedness", "profit", "effectiveness"]
    if args.format == "json":
        record = {
            "n_backers": em.n_backers,
            "target": args.target,
            "quality": format_quality(args.quality),
            "mode": args.mode.value,
            "replications": est.replications_used,
            "seed": args.seed,
            "estimates": {f: getattr(est, f) for f in fields},
            "standard_errors": {f: est.standard_errors[f] for f in fields},
        }
        text = json.dumps(record, indent=2, allow_nan=True) + "\n"
    else:
        text = csv_text(["quantity", "estimate", "standard_error"], [(f, getattr(est, f), est.standard_errors[f]) for f in fields])
    emit(args, text)
    return EXIT_OK


def cmd_validate(args) -> int:
    report = validation_suite()
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status}  {check.name:40s} max deviation {check.max_deviation:.3e} (tol {check.tolerance:.0e})  {check.detail}")
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_rerun(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        argv = list(manifest["argv"])
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest: {exc}") from None
    if args.out:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = args.out
        else:
            argv += ["--out", args.out]
    return main(argv)


# -- parser -------------------------------------------------------------------


def _mode(text: str) -> LearningMode:
    try:
        return LearningMode.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError("mode must be 'ol' or 'nl'") from None


def _metric(text: str) -> MetricKind:
    try:
        return MetricKind.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown metric {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdol", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact metrics and pledge-count pmf for a small system")
    p.add_argument("--quality", type=parse_quality, required=True)
    p.add_argument("--expertness", type=parse_float_list, help="row-major list, two values per backer")
    p.add_argument("--expertness-file")
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--mode", type=_mode, default=LearningMode.OL)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("impact", help="improvement/harm potential table for the two-backer system")
    p.add_argument("--target", type=int, choices=(1, 2), required=True)
    p.add_argument("--step", type=float, default=0.005)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_impact)

    p = sub.add_parser("sweep", help="OL-minus-NL delta surface over the expertness grid")
    p.add_argument("--metric", type=_metric, required=True)
    p.add_argument("--quality", type=parse_quality, required=True)
    p.add_argument("--target", type=int, choices=(1, 2), required=True)
    p.add_argument("--step", type=float, default=0.005)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("equilibrium", help="creators' quality equilibrium map or high-quality fractions")
    p.add_argument("--cost", type=float)
    p.add_argument("--target", type=int, choices=(1, 2), required=True)
    p.add_argument("--mode", type=_mode, default=LearningMode.OL)
    p.add_argument("--scheme", type=SchemeKind, choices=list(SchemeKind), default=SchemeKind.BACKER)
    p.add_argument("--step", type=float, default=DEFAULT_EQ_STEP)
    p.add_argument("--fractions", action="store_true", help="emit (1,1) fractions over the cost grid 0..1")
    p.add_argument("--literal", action="store_true", help="allow one-high-one-low outcomes in the backer scheme")
    p.add_argument("--out")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("simulate", help="Monte Carlo estimates for large backer populations")
    p.add_argument("--backers", type=int)
    p.add_argument("--target", type=int)
    p.add_argument("--quality", type=parse_quality)
    p.add_argument("--p1", type=float, help="expertness of the first half of the backers")
    p.add_argument("--p2", type=float, help="expertness of the second half of the backers")
    p.add_argument("--expertness-file")
    p.add_argument("--mode", type=_mode, default=LearningMode.OL)
    p.add_argument("--replications", type=int, default=DEFAULT_REPLICATIONS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--figure9", action="store_true", help="run the half/half protocol over a target list")
    p.add_argument("--targets", type=parse_int_list, help="comma list for --figure9 (default N/10, 2N/10, ...)")
    p.add_argument("--no-crn", action="store_true", help="independent signal streams for OL and NL")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="closed-form and invariant checks of the exact engine")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rerun", help="replay the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write to this path instead of the recorded one")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    args.argv = argv
    try:
        return args.func(args)
    except (UsageError, ExpertnessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EnumerationSizeError as exc:
        print(f"error: {exc}; use 'simulate' for large populations", file=sys.stderr)
        return EXIT_SIZE
    except ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
