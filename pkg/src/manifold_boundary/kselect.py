"""Automatic choice of the neighbour count k.

Scan a candidate grid and keep the k whose per-point statistics best match
the chi-square(d') reference, measured as the mean absolute gap between the
empirical and reference CDFs evaluated at the statistics themselves.  When
the estimated p-value at a candidate already signals a boundary, the fit is
judged only on the points far from it, against the reference conditioned to
its lower 95% (renormalized by 0.95).
"""

from dataclasses import dataclass

import numpy as np

from .boundary_stat import compute_statistic, statistic_from_neighbors
from .chisq import chisq_cdf, chisq_sf
from .errors import (
    BoundaryDetectError,
    InsufficientInteriorPointsError,
    InvalidInputError,
    SelectionFailedError,
)
from .knn import PointCloud, build_index, k_nearest_all
from .testing import p_value_bound

BRANCH_ALL_POINTS = "all-points"
BRANCH_FAR_FROM_BOUNDARY = "far-from-boundary"

# Branch split on the estimated p-value, and the survival cut that defines
# "far from the boundary".
P_VALUE_SPLIT = 0.05
INTERIOR_SF_CUT = 0.05


@dataclass(frozen=True)
class KCandidate:
    k: int
    d_chi2: float | None
    p_value_bound: float | None
    branch: str | None
    error: str | None = None


@dataclass(frozen=True)
class KSelectionTrace:
    candidates: tuple[KCandidate, ...]
    chosen_k: int


def branch_i_discrepancy(deltas, d_prime):
    """Mean |empirical CDF - chi-square CDF| over all per-point statistics."""
    deltas = np.asarray(deltas, dtype=float)
    n = deltas.size
    s = np.sort(deltas)
    ecdf = np.searchsorted(s, deltas, side="right") / n
    return float(np.mean(np.abs(ecdf - chisq_cdf(d_prime, deltas))))


def branch_ii_discrepancy(deltas, d_prime):
    """Same discrepancy restricted to points far from the boundary, against
    the reference CDF renormalized to its lower 1 - INTERIOR_SF_CUT mass."""
    deltas = np.asarray(deltas, dtype=float)
    interior = chisq_sf(d_prime, deltas) >= INTERIOR_SF_CUT
    m = int(np.count_nonzero(interior))
    if m < max(10, d_prime + 2):
        raise InsufficientInteriorPointsError(
            f"only {m} points far from the boundary; k is too large for this sample"
        )
    sub = deltas[interior]
    s = np.sort(sub)
    ecdf = np.searchsorted(s, sub, side="right") / m
    cdf = chisq_cdf(d_prime, sub)
    # by construction of the interior set no cdf value can exceed the cut
    assert float(cdf.max()) <= 1.0 - INTERIOR_SF_CUT + 1e-9
    ref = np.minimum(cdf / (1.0 - INTERIOR_SF_CUT), 1.0)
    return float(np.mean(np.abs(ecdf - ref)))


def _evaluate(stat, n, d_prime):
    pvb = p_value_bound(n, d_prime, stat.big_delta)
    if pvb >= P_VALUE_SPLIT:
        return branch_i_discrepancy(stat.delta, d_prime), BRANCH_ALL_POINTS, pvb
    return branch_ii_discrepancy(stat.delta, d_prime), BRANCH_FAR_FROM_BOUNDARY, pvb


def d_chi2(cloud, k, index=None):
    """Goodness-of-fit discrepancy at one k.

    Returns (discrepancy, branch, p_value_bound); the discrepancy always lies
    in [0, 1] since it averages absolute differences of probabilities.
    """
    stat = compute_statistic(cloud, k, index=index)
    return _evaluate(stat, cloud.n, cloud.intrinsic_dim)


def default_grid(cloud):
    """k from max(d'+2, 5) to min(n // 10, 100) in steps of 5."""
    lo = max(cloud.intrinsic_dim + 2, 5)
    hi = min(cloud.n // 10, 100, cloud.n - 1)
    return list(range(lo, hi + 1, 5))


def select_k(cloud, grid=None):
    """Evaluate the discrepancy over a grid of k and return the argmin.

    Ties resolve to the smallest k.  Candidates that error are recorded in the
    trace and skipped; if every candidate fails the selection fails with the
    per-k causes attached.
    """
    if not isinstance(cloud, PointCloud):
        raise InvalidInputError("select_k expects a PointCloud")
    if grid is None:
        grid = default_grid(cloud)
    lo = cloud.intrinsic_dim + 1
    hi = cloud.n - 1
    ks = sorted({int(k) for k in grid if lo <= int(k) <= hi})
    if not ks:
        raise InvalidInputError(
            f"no candidate k in the valid range [{lo}, {hi}] after clamping"
        )

    index = build_index(cloud)
    try:
        neighbors, dist = k_nearest_all(index, ks[-1])
    except BoundaryDetectError as exc:
        # a zero radius at the largest k means zero at every smaller k too
        cause = f"{type(exc).__name__}: {exc}"
        raise SelectionFailedError("every candidate k failed", causes={k: cause for k in ks})

    candidates = []
    causes = {}
    for k in ks:
        try:
            stat = statistic_from_neighbors(cloud, neighbors[:, :k], dist[:, k - 1], k)
            value, branch, pvb = _evaluate(stat, cloud.n, cloud.intrinsic_dim)
            candidates.append(KCandidate(k=k, d_chi2=value, p_value_bound=pvb, branch=branch))
        except BoundaryDetectError as exc:
            causes[k] = f"{type(exc).__name__}: {exc}"
            candidates.append(KCandidate(k=k, d_chi2=None, p_value_bound=None,
                                         branch=None, error=causes[k]))

    usable = [c for c in candidates if c.error is None]
    if not usable:
        raise SelectionFailedError("every candidate k failed", causes=causes)
    best = min(usable, key=lambda c: (c.d_chi2, c.k))
    return KSelectionTrace(candidates=tuple(candidates), chosen_k=best.k)
