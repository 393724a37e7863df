"""Command-line surface: generate samples, run the test, select k, run Monte
Carlo experiments, and flag boundary-adjacent points.

Exit codes: 0 = ran (the decision itself is recorded in the JSON, not in the
exit status), 2 = input or configuration error, 3 = numerical or degeneracy
error.  Diagnostics go to stderr; data goes to files or stdout.
"""

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import (
    BoundaryDetectError,
    DegenerateSampleError,
    InsufficientInteriorPointsError,
    InvalidConfigurationError,
    InvalidInputError,
    SelectionFailedError,
)
from .experiment import (
    K_POLICY_AUTO,
    K_POLICY_FIXED,
    ExperimentPlan,
    report_csv,
    report_json,
    run_experiments,
)
from .knn import PointCloud
from .kselect import select_k
from .manifolds import KINDS, ManifoldSpec, generate
from .testing import CONSISTENT_RULE, THRESHOLD_RULE, TestConfig, run_test

JSON_SCHEMA = 1


class CsvFormatError(InvalidInputError):
    """CSV that does not parse as the point format; message carries line/column."""


def write_points_csv(path, coords):
    # 17 significant digits round-trip float64 exactly
    n, d = coords.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(f"x{j + 1}" for j in range(d)) + "\n")
        for row in coords:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_points_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: line 1: empty file, expected header x1,...,xd")
        d = len(header)
        expected = [f"x{j + 1}" for j in range(d)]
        if [h.strip() for h in header] != expected:
            raise CsvFormatError(
                f"{path}: line 1: header must be {','.join(expected)}, got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d:
                raise CsvFormatError(
                    f"{path}: line {lineno}: expected {d} columns, got {len(row)}"
                )
            parsed = []
            for col, cell in enumerate(row, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: line {lineno}, column {col}: not a number: {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not serializable: {type(obj)!r}")


def _dump_json(payload, out):
    text = json.dumps(payload, sort_keys=True, indent=1, default=_json_default) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _spec_from_args(args, kind=None):
    return ManifoldSpec(
        kind=(kind or args.kind).replace("-", "_"),
        n=args.n,
        seed=args.seed,
        dprime=args.dprime,
        major_radius=args.R,
        minor_radius=args.r,
        width=args.w,
        t0=args.t0,
        t1=args.t1,
        p_low=args.p_low,
        p_high=args.p_high,
    )


def _add_manifold_args(sub, with_n=True):
    sub.add_argument("--kind", required=True, help=f"one of {', '.join(KINDS)}")
    if with_n:
        sub.add_argument("--n", type=int, required=True, help="sample size")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--dprime", type=int, default=1, help="sphere/half-sphere dimension")
    sub.add_argument("--R", type=float, default=2.0, help="torus major radius")
    sub.add_argument("--r", type=float, default=1.0, help="torus minor radius")
    sub.add_argument("--w", type=float, default=0.4, help="moebius half-width")
    sub.add_argument("--t0", type=float, default=math.pi / 2.0, help="spiral start")
    sub.add_argument("--t1", type=float, default=3.0 * math.pi, help="spiral end")
    sub.add_argument("--p-low", type=float, default=1.0 / (4.0 * math.pi))
    sub.add_argument("--p-high", type=float, default=3.0 / (4.0 * math.pi))


def _add_test_args(sub):
    sub.add_argument("input", help="points CSV (header x1,...,xd)")
    sub.add_argument("--dprime", type=int, required=True, help="intrinsic dimension")
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--k", type=int, help="neighbour count")
    group.add_argument("--auto-k", action="store_true", help="select k automatically")
    sub.add_argument("--grid", help="candidate k grid LO:HI:STEP for --auto-k")
    sub.add_argument("--alpha", type=float, default=0.05)
    sub.add_argument("--rule", choices=[THRESHOLD_RULE, CONSISTENT_RULE], default=THRESHOLD_RULE)
    sub.add_argument("--lambda", dest="lam", type=float, default=4.5,
                     help="consistent-rule lower window slope (> 4)")
    sub.add_argument("--mu", type=float, default=None,
                     help="consistent-rule upper window slope (defaults to the max)")
    sub.add_argument("--beta", type=float, default=None, help="explicit consistent cutoff")
    sub.add_argument("--flag-level", type=float, default=0.05)


def _parse_grid(text, n):
    try:
        lo, hi, step = (int(part) for part in text.split(":"))
    except ValueError:
        raise InvalidInputError(f"--grid must look like LO:HI:STEP, got {text!r}") from None
    if step < 1 or lo > hi:
        raise InvalidInputError(f"--grid must satisfy LO <= HI and STEP >= 1, got {text!r}")
    return [k for k in range(lo, hi + 1, step) if k <= n - 1]


def _load_cloud(args):
    coords = read_points_csv(args.input)
    return PointCloud(coords, args.dprime)


def _resolve_k(args, cloud):
    if args.auto_k:
        grid = _parse_grid(args.grid, cloud.n) if args.grid else None
        trace = select_k(cloud, grid)
        return trace.chosen_k, trace
    return args.k, None


def _trace_payload(trace):
    return {
        "chosen_k": trace.chosen_k,
        "candidates": [asdict(c) for c in trace.candidates],
    }


def _outcome_payload(cloud, outcome, trace=None):
    stat = outcome.statistic
    payload = {
        "schema": JSON_SCHEMA,
        "n": cloud.n,
        "d": cloud.d,
        "dprime": cloud.intrinsic_dim,
        "k": stat.k_used,
        "alpha": outcome.alpha,
        "rule": outcome.rule_used,
        "delta_max": stat.big_delta,
        "argmax_index": stat.argmax_index,
        "threshold": outcome.threshold,
        "p_value_bound": outcome.p_value_bound,
        "reject": bool(outcome.reject),
        "boundary_detected": bool(outcome.reject),
        "flag_level": outcome.flag_level,
        "boundary_points": outcome.boundary_points.tolist(),
        "level_diagnostic": outcome.level_diagnostic,
        "degenerate_spectra": int(np.count_nonzero(stat.degenerate)),
        "deltas": stat.delta.tolist(),
    }
    if outcome.beta_window is not None:
        payload["beta_window"] = list(outcome.beta_window)
    if trace is not None:
        payload["selection"] = _trace_payload(trace)
    return payload


def cmd_generate(args):
    spec = _spec_from_args(args)
    cloud, truth = generate(spec)
    out = Path(args.out)
    write_points_csv(out, cloud.coords)
    sidecar = out.with_suffix(".json")
    _dump_json({
        "schema": JSON_SCHEMA,
        "spec": asdict(spec),
        "ground_truth": asdict(truth),
        "n": cloud.n,
        "d": cloud.d,
    }, sidecar)
    print(f"wrote {out} and {sidecar}", file=sys.stderr)
    return 0


def cmd_test(args):
    cloud = _load_cloud(args)
    k, trace = _resolve_k(args, cloud)
    config = TestConfig(
        k=k,
        alpha=args.alpha,
        rule=args.rule,
        flag_level=args.flag_level,
        consistent_lambda=args.lam,
        consistent_mu=args.mu,
        consistent_beta=args.beta,
    )
    outcome = run_test(cloud, config)
    _dump_json(_outcome_payload(cloud, outcome, trace), args.out)
    return 0


def cmd_select_k(args):
    cloud = _load_cloud(args)
    grid = _parse_grid(args.grid, cloud.n) if args.grid else None
    trace = select_k(cloud, grid)
    _dump_json({
        "schema": JSON_SCHEMA,
        "n": cloud.n,
        "d": cloud.d,
        "dprime": cloud.intrinsic_dim,
        **_trace_payload(trace),
    }, args.out)
    return 0


def cmd_flag_boundary(args):
    cloud = _load_cloud(args)
    k, trace = _resolve_k(args, cloud)
    config = TestConfig(k=k, alpha=args.alpha, flag_level=args.flag_level)
    outcome = run_test(cloud, config)
    stat = outcome.statistic

    prefix = Path(args.out)
    flags_path = prefix.with_name(prefix.name + ".flags.csv")
    points_path = prefix.with_name(prefix.name + ".points.csv")
    with open(flags_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index\n")
        for i in outcome.boundary_points:
            fh.write(f"{int(i)}\n")
    flagged = np.zeros(cloud.n, dtype=int)
    flagged[outcome.boundary_points] = 1
    with open(points_path, "w", encoding="utf-8", newline="\n") as fh:
        header = [f"x{j + 1}" for j in range(cloud.d)] + ["delta", "flagged"]
        fh.write(",".join(header) + "\n")
        for i in range(cloud.n):
            cells = [f"{v:.17g}" for v in cloud.coords[i]]
            cells += [f"{stat.delta[i]:.17g}", str(flagged[i])]
            fh.write(",".join(cells) + "\n")
    print(f"wrote {flags_path} and {points_path}", file=sys.stderr)
    return 0


def cmd_experiment(args):
    sizes = tuple(args.n)
    if args.auto_k:
        policy, k_values = K_POLICY_AUTO, None
    else:
        if not args.k or len(args.k) != len(sizes):
            raise InvalidInputError(
                f"--k must be given once per --n ({len(sizes)} sizes, got {args.k or []})"
            )
        policy, k_values = K_POLICY_FIXED, tuple(args.k)

    plans = []
    for kind in args.kind:
        spec = ManifoldSpec(
            kind=kind.replace("-", "_"),
            n=sizes[0],
            seed=0,
            dprime=args.dprime,
            major_radius=args.R,
            minor_radius=args.r,
            width=args.w,
            t0=args.t0,
            t1=args.t1,
            p_low=args.p_low,
            p_high=args.p_high,
        )
        plans.append(ExperimentPlan(
            spec=spec,
            sample_sizes=sizes,
            k_policy=policy,
            k_values=k_values,
            replications=args.replications,
            alpha=args.alpha,
            base_seed=args.seed,
            calibration_reps=args.calibration_reps,
        ))

    started = time.perf_counter()
    report = run_experiments(plans, jobs=args.jobs, base_seed=args.seed)
    elapsed = time.perf_counter() - started
    if args.timing:
        report["wall_time_s"] = elapsed

    prefix = Path(args.out)
    json_path = prefix.with_name(prefix.name + ".json")
    csv_path = prefix.with_name(prefix.name + ".csv")
    json_path.write_text(report_json(report, detail=not args.no_detail), encoding="utf-8")
    csv_path.write_text(report_csv(report), encoding="utf-8")
    for cell in report["cells"]:
        rate = cell.get("rejection_rate")
        shown = "n/a" if rate is None else f"{rate:.4f}"
        print(
            f"{cell['kind']} n={cell['n']} k={cell.get('k', '?')} "
            f"reject_rate={shown} ({cell.get('replications', 0)} reps)",
            file=sys.stderr,
        )
    print(f"wrote {json_path} and {csv_path} in {elapsed:.1f}s", file=sys.stderr)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="manifold-boundary",
        description="Decide from a point sample whether its manifold support has a boundary.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="draw a synthetic sample to CSV")
    _add_manifold_args(p_gen)
    p_gen.add_argument("--out", required=True, help="output CSV path")
    p_gen.set_defaults(func=cmd_generate)

    p_test = sub.add_parser("test", help="run the boundary test on a points CSV")
    _add_test_args(p_test)
    p_test.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p_test.set_defaults(func=cmd_test)

    p_sel = sub.add_parser("select-k", help="scan k candidates and report the best")
    p_sel.add_argument("input")
    p_sel.add_argument("--dprime", type=int, required=True)
    p_sel.add_argument("--grid", help="candidate grid LO:HI:STEP")
    p_sel.add_argument("--out", default=None)
    p_sel.set_defaults(func=cmd_select_k)

    p_exp = sub.add_parser("experiment", help="Monte Carlo level/power table")
    p_exp.add_argument("--kind", action="append", required=True,
                       help="manifold kind; repeat for several rows")
    p_exp.add_argument("--n", type=int, action="append", required=True,
                       help="sample size; repeat for several columns")
    p_exp.add_argument("--k", type=int, action="append",
                       help="neighbour count, once per --n (fixed policy)")
    p_exp.add_argument("--auto-k", action="store_true",
                       help="calibrate k per cell from preliminary draws")
    p_exp.add_argument("--replications", type=int, default=200)
    p_exp.add_argument("--calibration-reps", type=int, default=50)
    p_exp.add_argument("--alpha", type=float, default=0.05)
    p_exp.add_argument("--seed", type=int, default=0, help="base seed")
    p_exp.add_argument("--jobs", type=int, default=1)
    p_exp.add_argument("--timing", action="store_true",
                       help="include wall time in the JSON (breaks byte-reproducibility)")
    p_exp.add_argument("--no-detail", action="store_true",
                       help="omit per-replication records from the JSON")
    p_exp.add_argument("--dprime", type=int, default=1)
    p_exp.add_argument("--R", type=float, default=2.0)
    p_exp.add_argument("--r", type=float, default=1.0)
    p_exp.add_argument("--w", type=float, default=0.4)
    p_exp.add_argument("--t0", type=float, default=math.pi / 2.0)
    p_exp.add_argument("--t1", type=float, default=3.0 * math.pi)
    p_exp.add_argument("--p-low", type=float, default=1.0 / (4.0 * math.pi))
    p_exp.add_argument("--p-high", type=float, default=3.0 / (4.0 * math.pi))
    p_exp.add_argument("--out", required=True, help="output prefix (.json and .csv)")
    p_exp.set_defaults(func=cmd_experiment)

    p_flag = sub.add_parser("flag-boundary", help="per-point boundary flags and plot data")
    _add_test_args(p_flag)
    p_flag.add_argument("--out", required=True, help="output prefix (.flags.csv, .points.csv)")
    p_flag.set_defaults(func=cmd_flag_boundary)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, InvalidConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateSampleError, InsufficientInteriorPointsError, SelectionFailedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except BoundaryDetectError as exc:  # safety net for new error kinds
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
