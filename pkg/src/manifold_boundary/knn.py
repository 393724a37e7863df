"""Exact k-nearest-neighbour queries over a point sample.

A balanced kd-tree answers candidate retrieval; candidates are then re-ranked
with plainly computed squared distances so tie handling (equal distance ->
smaller point index wins) is identical to the brute-force oracle bit for bit.
The query point is never its own neighbour.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateSampleError, InvalidInputError

# Multiplicative slack when deciding whether a distance tie at the k-th slot
# could extend past the retrieved candidates; generous versus float rounding.
_TIE_MARGIN = 1.0 + 1e-12


@dataclass(frozen=True)
class PointCloud:
    """n points in R^d with a declared intrinsic dimension d' <= d."""

    coords: np.ndarray
    intrinsic_dim: int

    def __post_init__(self):
        a = np.ascontiguousarray(self.coords, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidInputError(f"coords must be a 2-d array of points, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("coordinates must be finite")
        dp = self.intrinsic_dim
        if isinstance(dp, bool) or not isinstance(dp, (int, np.integer)):
            raise InvalidInputError(f"intrinsic_dim must be an integer, got {dp!r}")
        n, d = a.shape
        if not 1 <= dp <= d:
            raise InvalidInputError(f"intrinsic_dim must be in [1, {d}], got {dp}")
        if n < dp + 2:
            raise InvalidInputError(
                f"need at least intrinsic_dim + 2 = {dp + 2} points, got {n}"
            )
        object.__setattr__(self, "coords", a)
        object.__setattr__(self, "intrinsic_dim", int(dp))

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def d(self):
        return self.coords.shape[1]


@dataclass(frozen=True)
class NeighborList:
    """The k nearest points to one sample point, nearest first."""

    query_index: int
    neighbor_indices: np.ndarray
    distances: np.ndarray
    radius: float


class NeighborIndex:
    """Immutable spatial index over a cloud; safe for concurrent queries."""

    def __init__(self, cloud):
        if not isinstance(cloud, PointCloud):
            raise InvalidInputError("build_index expects a PointCloud")
        self.cloud = cloud
        self.tree = cKDTree(cloud.coords, balanced_tree=True)

    @property
    def n(self):
        return self.cloud.n


def build_index(cloud):
    """Build the exact k-NN index (median-split balanced tree)."""
    return NeighborIndex(cloud)


def _check_query(index, k):
    n = index.n
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        raise InvalidInputError(f"k must be an integer, got {k!r}")
    if not 1 <= k <= n - 1:
        raise InvalidInputError(f"k must be in [1, n-1] = [1, {n - 1}], got {k}")
    return int(k)


def _sq_dists(coords, indices, point):
    diff = coords[indices] - point
    return (diff * diff).sum(axis=-1)


def brute_force_k_nearest(cloud, i, k):
    """Reference answer by full sort; the oracle the index is checked against."""
    if not 0 <= i < cloud.n:
        raise InvalidInputError(f"query index {i} out of range [0, {cloud.n - 1}]")
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= cloud.n - 1:
        raise InvalidInputError(f"k must be in [1, n-1] = [1, {cloud.n - 1}], got {k!r}")
    d2 = _sq_dists(cloud.coords, np.arange(cloud.n), cloud.coords[i])
    order = np.argsort(d2, kind="stable")  # stable: ties keep ascending index order
    order = order[order != i][:k]
    dist = np.sqrt(d2[order])
    radius = float(dist[-1])
    if radius == 0.0:
        raise DegenerateSampleError(
            f"the {k}-th neighbour of point {i} coincides with it (duplicated points)"
        )
    return NeighborList(int(i), order.astype(np.int64), dist, radius)


def k_nearest(index, i, k):
    """Exact k nearest neighbours of sample point i, excluding the point itself."""
    k = _check_query(index, k)
    cloud = index.cloud
    n = cloud.n
    if not 0 <= i < n:
        raise InvalidInputError(f"query index {i} out of range [0, {n - 1}]")
    point = cloud.coords[i]

    kk = min(k + 2, n)
    while True:
        dist, idx = index.tree.query(point, k=kk)
        dist = np.atleast_1d(dist)
        idx = np.atleast_1d(idx)
        nonself = idx != i
        if int(np.count_nonzero(nonself)) >= k:
            kth = np.sort(dist[nonself])[k - 1]
            if kk >= n or dist[-1] > kth * _TIE_MARGIN:
                break
        if kk >= n:
            break
        kk = min(2 * kk + 2, n)

    cand = idx[nonself]
    d2 = _sq_dists(cloud.coords, cand, point)
    order = np.lexsort((cand, d2))[:k]
    neighbors = cand[order].astype(np.int64)
    ndist = np.sqrt(d2[order])
    radius = float(ndist[-1])
    if radius == 0.0:
        raise DegenerateSampleError(
            f"the {k}-th neighbour of point {i} coincides with it (duplicated points)"
        )
    return NeighborList(int(i), neighbors, ndist, radius)


def k_nearest_all(index, k):
    """Neighbour indices and distances for every point at once.

    Returns (indices, distances), both (n, k), row i sorted nearest first with
    the same tie rule as `k_nearest`.  A zero k-th distance raises.
    """
    k = _check_query(index, k)
    cloud = index.cloud
    coords = cloud.coords
    n = cloud.n

    kk = min(k + 2, n)
    dist, idx = index.tree.query(coords, k=kk)
    selfmask = idx == np.arange(n)[:, None]
    masked = np.where(selfmask, np.inf, dist)
    kth = np.sort(masked, axis=1)[:, k - 1]
    complete = (kk >= n) | (dist[:, -1] > kth * _TIE_MARGIN)

    diffs = coords[idx] - coords[:, None, :]
    d2 = (diffs * diffs).sum(axis=-1)
    d2 = np.where(selfmask, np.inf, d2)
    sort_idx = np.where(selfmask, n, idx)
    order = np.lexsort((sort_idx, d2), axis=1)
    neighbors = np.take_along_axis(idx, order, axis=1)[:, :k].astype(np.int64)
    ndist = np.sqrt(np.take_along_axis(d2, order, axis=1)[:, :k])

    for row in np.flatnonzero(~complete):
        nl = k_nearest(index, int(row), k)
        neighbors[row] = nl.neighbor_indices
        ndist[row] = nl.distances

    radii = ndist[:, -1]
    if np.any(radii == 0.0):
        bad = int(np.flatnonzero(radii == 0.0)[0])
        raise DegenerateSampleError(
            f"the {k}-th neighbour of point {bad} coincides with it (duplicated points)"
        )
    return neighbors, ndist
