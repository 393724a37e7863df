"""Monte Carlo harness: estimated level and power over seeded replications.

Every replication draws its own stream derived from (base_seed, kind index,
sample size, replication number), so any cell of any report can be reproduced
in isolation and results do not depend on how work is spread over processes.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import BoundaryDetectError, InvalidInputError
from .kselect import select_k
from .manifolds import ManifoldSpec, derive_seed, generate
from .testing import THRESHOLD_RULE, TestConfig, run_test

REPORT_SCHEMA = 1

# Calibration replications live on a stream disjoint from measurement ones.
CALIBRATION_STREAM = 1 << 32

SEED_RULE = (
    "replication seed = derive_seed(base_seed, kind_index, n, r); "
    "calibration draws use r = 2**32 + c"
)

K_POLICY_FIXED = "fixed"
K_POLICY_AUTO = "auto"


@dataclass(frozen=True)
class ExperimentPlan:
    """One manifold kind crossed with several sample sizes."""

    spec: ManifoldSpec                  # template; n and seed are overridden
    sample_sizes: tuple[int, ...]
    k_policy: str = K_POLICY_FIXED
    k_values: tuple[int, ...] | None = None  # parallel to sample_sizes when fixed
    replications: int = 200
    alpha: float = 0.05
    base_seed: int = 0
    calibration_reps: int = 50

    def __post_init__(self):
        if self.k_policy not in (K_POLICY_FIXED, K_POLICY_AUTO):
            raise InvalidInputError(f"unknown k policy {self.k_policy!r}")
        if not self.sample_sizes:
            raise InvalidInputError("at least one sample size is required")
        if self.replications < 1:
            raise InvalidInputError("replications must be >= 1")
        if self.k_policy == K_POLICY_FIXED:
            if self.k_values is None or len(self.k_values) != len(self.sample_sizes):
                raise InvalidInputError(
                    "fixed k policy needs one k per sample size "
                    f"({len(self.sample_sizes)} sizes, got {self.k_values!r})"
                )
        if self.k_policy == K_POLICY_AUTO and self.calibration_reps < 1:
            raise InvalidInputError("calibration_reps must be >= 1")


def _make_cloud(spec, n, seed):
    cloud, _ = generate(replace(spec, n=int(n), seed=int(seed)))
    return cloud


def _replication_task(args):
    spec, n, k, alpha, seed, r = args
    try:
        cloud = _make_cloud(spec, n, seed)
        out = run_test(cloud, TestConfig(k=k, alpha=alpha, rule=THRESHOLD_RULE))
        return (r, {
            "r": r,
            "seed": seed,
            "delta": out.statistic.big_delta,
            "p_value_bound": out.p_value_bound,
            "reject": bool(out.reject),
        }, None)
    except BoundaryDetectError as exc:
        return (r, None, f"{type(exc).__name__}: {exc}")


def _calibration_task(args):
    spec, n, seed, c = args
    try:
        cloud = _make_cloud(spec, n, seed)
        trace = select_k(cloud)
        return (c, trace.chosen_k, None)
    except BoundaryDetectError as exc:
        return (c, None, f"{type(exc).__name__}: {exc}")


def _map_tasks(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def run_cell(plan, n, k_fixed, kind_index=0, jobs=1):
    """All replications for one (kind, n) cell; returns a plain dict."""
    spec = plan.spec
    cell = {
        "kind": spec.kind,
        "n": int(n),
        "k_policy": plan.k_policy,
        "alpha": plan.alpha,
        "replications_planned": plan.replications,
    }

    if plan.k_policy == K_POLICY_AUTO:
        tasks = [
            (spec, n, derive_seed(plan.base_seed, kind_index, n, CALIBRATION_STREAM + c), c)
            for c in range(plan.calibration_reps)
        ]
        picks = _map_tasks(_calibration_task, tasks, jobs)
        chosen = [k for _, k, err in picks if err is None]
        if not chosen:
            cell.update({
                "error": "calibration failed for every draw",
                "calibration_errors": [err for _, _, err in picks if err],
                "complete": False,
            })
            return cell
        mean_k = float(np.mean(chosen))
        k = int(round(mean_k))
        k = min(max(k, spec.dprime + 1), n - 1)
        cell["mean_chosen_k"] = mean_k
        cell["calibration_reps"] = len(chosen)
    else:
        k = int(k_fixed)

    cell["k"] = k
    tasks = [(spec, n, k, plan.alpha, derive_seed(plan.base_seed, kind_index, n, r), r)
             for r in range(plan.replications)]
    results = _map_tasks(_replication_task, tasks, jobs)

    reps, errors = [], []
    for r, rec, err in results:
        if err is None:
            reps.append(rec)
        else:
            errors.append({"r": r, "error": err})
    rejections = sum(1 for rec in reps if rec["reject"])
    done = len(reps)
    cell.update({
        "replications": done,
        "rejections": rejections,
        "rejection_rate": (rejections / done) if done else None,
        "errors": errors,
        "complete": not errors and done == plan.replications,
        "reps": reps,
    })
    return cell


def run_experiments(plans, jobs=1, base_seed=None):
    """Run one or more plans and assemble the report dict.

    `base_seed` overrides every plan's own seed when given, so a whole table
    reproduces from a single number.
    """
    cells = []
    for kind_index, plan in enumerate(plans):
        if base_seed is not None:
            plan = replace(plan, base_seed=int(base_seed))
        for j, n in enumerate(plan.sample_sizes):
            k_fixed = plan.k_values[j] if plan.k_policy == K_POLICY_FIXED else None
            cells.append(run_cell(plan, n, k_fixed, kind_index=kind_index, jobs=jobs))
    return {
        "schema": REPORT_SCHEMA,
        "base_seed": int(base_seed) if base_seed is not None else plans[0].base_seed,
        "seed_derivation": SEED_RULE,
        "cells": cells,
    }


def report_json(report, detail=True):
    """Deterministic JSON serialization of a report."""
    if detail:
        payload = report
    else:
        payload = {
            **{key: val for key, val in report.items() if key != "cells"},
            "cells": [{k: v for k, v in cell.items() if k != "reps"} for cell in report["cells"]],
        }
    return json.dumps(payload, sort_keys=True, indent=1) + "\n"


def report_csv(report):
    """Wide table: one row per kind, one (k, rejection rate) pair per n."""
    sizes = sorted({cell["n"] for cell in report["cells"]})
    kinds = []
    for cell in report["cells"]:
        if cell["kind"] not in kinds:
            kinds.append(cell["kind"])
    by_key = {(cell["kind"], cell["n"]): cell for cell in report["cells"]}
    header = ["kind"]
    for n in sizes:
        header += [f"k@n={n}", f"reject_rate@n={n}"]
    lines = [",".join(header)]
    for kind in kinds:
        row = [kind]
        for n in sizes:
            cell = by_key.get((kind, n))
            if cell is None or cell.get("rejection_rate") is None:
                row += ["", ""]
            else:
                row += [str(cell["k"]), repr(cell["rejection_rate"])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
