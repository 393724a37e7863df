"""Per-point boundary statistics and their maximum over the sample.

For each point: take its k nearest neighbours, form the second-moment matrix
of the centred differences about the point itself (deliberately not about the
neighbour centroid: near a boundary the shift IS the signal), project the
centred differences onto the span of the top-d' eigenvectors, and rescale the
squared norm of their mean.  Interior points give roughly chi-square(d')
values; points whose neighbourhood looks like a half-ball give large ones.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .knn import PointCloud, build_index, k_nearest, k_nearest_all
from .linalg import DEGENERACY_GAP, SymMatrix, eigh_descending


@dataclass(frozen=True)
class NeighborhoodSummary:
    """Everything computed for one point's neighbourhood."""

    point_index: int
    k: int
    radius: float
    second_moment: SymMatrix
    basis: np.ndarray
    projected_mean: np.ndarray
    delta: float
    degenerate_spectrum: bool


@dataclass(frozen=True)
class StatisticResult:
    """All per-point summaries (stored columnar) plus the max and its argmax."""

    intrinsic_dim: int
    k_used: int
    delta: np.ndarray
    radius: np.ndarray
    projected_mean: np.ndarray
    basis: np.ndarray
    second_moment: np.ndarray
    eigenvalues: np.ndarray
    degenerate: np.ndarray
    big_delta: float
    argmax_index: int

    @property
    def n(self):
        return self.delta.shape[0]

    def summary(self, i):
        """The per-point view of row i as a NeighborhoodSummary."""
        if not 0 <= i < self.n:
            raise InvalidInputError(f"point index {i} out of range [0, {self.n - 1}]")
        return NeighborhoodSummary(
            point_index=int(i),
            k=self.k_used,
            radius=float(self.radius[i]),
            second_moment=SymMatrix(self.second_moment[i]),
            basis=self.basis[i],
            projected_mean=self.projected_mean[i],
            delta=float(self.delta[i]),
            degenerate_spectrum=bool(self.degenerate[i]),
        )

    def summaries(self):
        return [self.summary(i) for i in range(self.n)]


def _check_k(cloud, k):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        raise InvalidInputError(f"k must be an integer, got {k!r}")
    lo = cloud.intrinsic_dim + 1
    hi = cloud.n - 1
    if not lo <= k <= hi:
        raise InvalidInputError(
            f"k must be in [intrinsic_dim + 1, n - 1] = [{lo}, {hi}], got {k}"
        )
    return int(k)


def _summarize_rows(coords, dprime, query_idx, nbr_idx, radii, k):
    """Vectorized core shared by the per-point and whole-cloud entry points,
    so both produce bit-identical numbers."""
    diffs = coords[nbr_idx] - coords[query_idx][:, None, :]
    second = np.einsum("mkd,mke->mde", diffs, diffs) / float(k)
    second = 0.5 * (second + second.transpose(0, 2, 1))
    vals, vecs = eigh_descending(second)
    basis = vecs[:, :, :dprime]
    # mean of the projections == projection of the mean (the map is linear)
    mean_diff = diffs.mean(axis=1)
    coeff = np.einsum("mdj,md->mj", basis, mean_diff)
    pmean = np.einsum("mdj,mj->md", basis, coeff)
    delta = (dprime + 2) * k * np.einsum("md,md->m", pmean, pmean) / (radii * radii)
    d_amb = coords.shape[1]
    if dprime < d_amb:
        gap = vals[:, dprime - 1] - vals[:, dprime]
        degenerate = gap < DEGENERACY_GAP * vals[:, 0]
    else:
        degenerate = np.zeros(query_idx.shape[0], dtype=bool)
    return delta, pmean, basis, second, vals, degenerate


def statistic_from_neighbors(cloud, neighbor_indices, radii, k):
    """Statistic for every point given precomputed neighbour rows.

    `neighbor_indices` is (n, k) sorted nearest first and `radii` the matching
    k-th neighbour distances; useful when several k values share one neighbour
    query (prefixes of a longer sorted list are valid shorter lists).
    """
    k = _check_k(cloud, k)
    nbr = np.asarray(neighbor_indices)
    radii = np.asarray(radii, dtype=float)
    if nbr.shape != (cloud.n, k) or radii.shape != (cloud.n,):
        raise InvalidInputError(
            f"expected neighbours ({cloud.n}, {k}) and radii ({cloud.n},), "
            f"got {nbr.shape} and {radii.shape}"
        )
    if np.any(radii <= 0.0):
        bad = int(np.flatnonzero(radii <= 0.0)[0])
        raise InvalidInputError(f"non-positive neighbourhood radius at point {bad}")
    delta, pmean, basis, second, vals, degenerate = _summarize_rows(
        cloud.coords, cloud.intrinsic_dim, np.arange(cloud.n), nbr, radii, k
    )
    argmax = int(np.argmax(delta))  # ties resolve to the smallest index
    return StatisticResult(
        intrinsic_dim=cloud.intrinsic_dim,
        k_used=k,
        delta=delta,
        radius=radii,
        projected_mean=pmean,
        basis=basis,
        second_moment=second,
        eigenvalues=vals,
        degenerate=degenerate,
        big_delta=float(delta[argmax]),
        argmax_index=argmax,
    )


def compute_statistic(cloud, k, index=None):
    """Per-point statistics for the whole cloud and their maximum."""
    k = _check_k(cloud, k)
    if index is None:
        index = build_index(cloud)
    neighbors, dist = k_nearest_all(index, k)
    return statistic_from_neighbors(cloud, neighbors, dist[:, -1], k)


def neighborhood_summary(cloud, index, i, k):
    """The statistic ingredients for a single point."""
    k = _check_k(cloud, k)
    if not 0 <= i < cloud.n:
        raise InvalidInputError(f"point index {i} out of range [0, {cloud.n - 1}]")
    nl = k_nearest(index, i, k)
    delta, pmean, basis, second, vals, degenerate = _summarize_rows(
        cloud.coords,
        cloud.intrinsic_dim,
        np.array([i]),
        nl.neighbor_indices[None, :],
        np.array([nl.radius]),
        k,
    )
    return NeighborhoodSummary(
        point_index=int(i),
        k=k,
        radius=nl.radius,
        second_moment=SymMatrix(second[0]),
        basis=basis[0],
        projected_mean=pmean[0],
        delta=float(delta[0]),
        degenerate_spectrum=bool(degenerate[0]),
    )


def empirical_cdf(result, x):
    """Fraction of per-point statistics at or below x (right-continuous)."""
    if not isinstance(result, StatisticResult):
        raise InvalidInputError("empirical_cdf expects a StatisticResult")
    return float(np.count_nonzero(result.delta <= x)) / result.n
