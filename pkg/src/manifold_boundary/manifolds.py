"""Seeded synthetic samples on spheres, curves and surfaces with known truth.

Every generator is deterministic for a fixed seed (counter-based Philox
streams), reports the intrinsic dimension and whether the support has a
boundary, and exposes the distance to the true boundary where one exists.
The square perimeter and the unevenly weighted circle are adversarial: their
supports have no boundary but break the smoothness/continuity assumptions the
test relies on, so false rejections there are expected behaviour.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError
from .knn import PointCloud

_M64 = (1 << 64) - 1

KINDS = (
    "sphere",
    "half_sphere",
    "trefoil",
    "torus",
    "moebius",
    "spiral",
    "square_perimeter",
    "circle_discontinuous",
)

_HAS_BOUNDARY = {"half_sphere", "moebius", "spiral"}


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return (z ^ (z >> 31)) & _M64


def derive_seed(seed, *tokens):
    """Independent reproducible stream for a replication: seed xor mixed token.

    Multiple tokens fold in order-sensitively, so (kind, n, r) tuples give
    distinct streams.
    """
    s = int(seed) & _M64
    for j, t in enumerate(tokens):
        s ^= _splitmix64((int(t) + j * 0x9E3779B97F4A7C15) & _M64)
    return s & _M64


def _rng(seed):
    return np.random.Generator(np.random.Philox(key=int(seed) & _M64))


@dataclass(frozen=True)
class ManifoldSpec:
    """A named generator, its parameters, the sample size and the seed."""

    kind: str
    n: int
    seed: int = 0
    dprime: int = 1            # spheres and half-spheres
    major_radius: float = 2.0  # torus
    minor_radius: float = 1.0  # torus
    width: float = 0.4         # moebius half-width
    t0: float = math.pi / 2.0  # spiral parameter range
    t1: float = 3.0 * math.pi
    p_low: float = 1.0 / (4.0 * math.pi)   # circle density, left half
    p_high: float = 3.0 / (4.0 * math.pi)  # circle density, right half


@dataclass(frozen=True)
class GroundTruth:
    intrinsic_dim: int
    has_boundary: bool
    boundary_description: str | None = None
    violates_smoothness: bool = False


def ambient_dim(spec):
    if spec.kind in ("sphere", "half_sphere"):
        return spec.dprime + 1
    if spec.kind in ("trefoil", "torus", "moebius"):
        return 3
    return 2


def _validate(spec):
    if spec.kind not in KINDS:
        raise InvalidInputError(f"unknown manifold kind {spec.kind!r}; choose from {KINDS}")
    if isinstance(spec.n, bool) or not isinstance(spec.n, (int, np.integer)) or spec.n < 1:
        raise InvalidInputError(f"sample size must be a positive integer, got {spec.n!r}")
    if spec.kind in ("sphere", "half_sphere"):
        if isinstance(spec.dprime, bool) or not isinstance(spec.dprime, (int, np.integer)) or spec.dprime < 1:
            raise InvalidInputError(f"dprime must be a positive integer, got {spec.dprime!r}")
    if spec.kind == "torus" and not spec.major_radius > spec.minor_radius > 0.0:
        raise InvalidInputError(
            f"torus radii must satisfy R > r > 0, got R={spec.major_radius}, r={spec.minor_radius}"
        )
    if spec.kind == "moebius" and not spec.width > 0.0:
        raise InvalidInputError(f"moebius width must satisfy w > 0, got {spec.width}")
    if spec.kind == "spiral" and not 0.0 < spec.t0 < spec.t1:
        raise InvalidInputError(
            f"spiral range must satisfy 0 < t0 < t1, got t0={spec.t0}, t1={spec.t1}"
        )
    if spec.kind == "circle_discontinuous" and not (spec.p_low > 0.0 and spec.p_high > 0.0):
        raise InvalidInputError(
            f"circle weights must be positive, got p_low={spec.p_low}, p_high={spec.p_high}"
        )
    n_min = _truth(spec).intrinsic_dim + 2
    if spec.n < n_min:
        raise InvalidInputError(f"kind {spec.kind!r} needs at least {n_min} points, got {spec.n}")


def _truth(spec):
    kind = spec.kind
    if kind == "sphere":
        return GroundTruth(spec.dprime, False)
    if kind == "half_sphere":
        return GroundTruth(
            spec.dprime, True,
            "equator: unit vectors whose last coordinate is zero",
        )
    if kind == "trefoil":
        return GroundTruth(1, False)
    if kind == "torus":
        return GroundTruth(2, False)
    if kind == "moebius":
        return GroundTruth(
            2, True,
            f"band edge: parameter offset +/-{spec.width} from the core circle",
        )
    if kind == "spiral":
        return GroundTruth(
            1, True,
            f"curve endpoints at parameters {spec.t0} and {spec.t1}",
        )
    if kind == "square_perimeter":
        return GroundTruth(1, False, None, violates_smoothness=True)
    if kind == "circle_discontinuous":
        return GroundTruth(1, False, None, violates_smoothness=True)
    raise InvalidInputError(f"unknown manifold kind {kind!r}")


def _unit_sphere(rng, n, dp):
    g = rng.standard_normal((n, dp + 1))
    norms = np.linalg.norm(g, axis=1)
    while np.any(norms == 0.0):  # probability-zero guard
        bad = norms == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), dp + 1))
        norms = np.linalg.norm(g, axis=1)
    return g / norms[:, None]


def _spiral_point(t):
    t = np.asarray(t, dtype=float)
    return np.stack([t * np.cos(t), t * np.sin(t)], axis=-1)


def _moebius_point(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    radial = 1.0 + v * np.cos(0.5 * u)
    return np.stack([radial * np.cos(u), radial * np.sin(u), v * np.sin(0.5 * u)], axis=-1)


def _sample(spec, rng):
    kind = spec.kind
    n = spec.n
    if kind == "sphere":
        return _unit_sphere(rng, n, spec.dprime)
    if kind == "half_sphere":
        pts = _unit_sphere(rng, n, spec.dprime)
        pts[:, -1] = np.abs(pts[:, -1])
        return pts
    if kind == "trefoil":
        t = rng.uniform(0.0, 2.0 * math.pi, n)
        return np.stack(
            [np.sin(t) + 2.0 * np.sin(2.0 * t),
             np.cos(t) - 2.0 * np.cos(2.0 * t),
             -np.sin(3.0 * t)],
            axis=-1,
        )
    if kind == "torus":
        theta = rng.uniform(0.0, 2.0 * math.pi, n)
        phi = rng.uniform(0.0, 2.0 * math.pi, n)
        ring = spec.major_radius + spec.minor_radius * np.cos(theta)
        return np.stack(
            [ring * np.cos(phi), ring * np.sin(phi), spec.minor_radius * np.sin(theta)],
            axis=-1,
        )
    if kind == "moebius":
        u = rng.uniform(0.0, 2.0 * math.pi, n)
        v = rng.uniform(-spec.width, spec.width, n)
        return _moebius_point(u, v)
    if kind == "spiral":
        t = rng.uniform(spec.t0, spec.t1, n)
        return _spiral_point(t)
    if kind == "square_perimeter":
        s = rng.uniform(0.0, 4.0, n)
        side = np.floor(s).astype(int)
        u = s - side
        x = np.choose(side, [u, np.ones_like(u), 1.0 - u, np.zeros_like(u)])
        y = np.choose(side, [np.zeros_like(u), u, np.ones_like(u), 1.0 - u])
        return np.stack([x, y], axis=-1)
    if kind == "circle_discontinuous":
        p_right = spec.p_high / (spec.p_low + spec.p_high)
        right = rng.uniform(0.0, 1.0, n) < p_right
        theta = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, n)
        theta = np.where(right, theta, theta + math.pi)
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    raise InvalidInputError(f"unknown manifold kind {kind!r}")


def generate(spec):
    """Draw the sample described by `spec`; returns (PointCloud, GroundTruth)."""
    if not isinstance(spec, ManifoldSpec):
        raise InvalidInputError("generate expects a ManifoldSpec")
    _validate(spec)
    truth = _truth(spec)
    coords = _sample(spec, _rng(spec.seed))
    return PointCloud(coords, truth.intrinsic_dim), truth


def _min_dist_to_curve(point, chart, lo, hi, grid=4096, iters=90):
    """Distance from a point to a smooth closed/parametric curve by dense grid
    plus golden-section refinement of the best bracket."""
    u = np.linspace(lo, hi, grid)
    d2 = ((chart(u) - point) ** 2).sum(axis=-1)
    j = int(np.argmin(d2))
    a = u[max(j - 1, 0)]
    b = u[min(j + 1, grid - 1)]
    invphi = 0.5 * (math.sqrt(5.0) - 1.0)
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc = float(((chart(np.float64(c)) - point) ** 2).sum())
    fe = float(((chart(np.float64(e)) - point) ** 2).sum())
    for _ in range(iters):
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = float(((chart(np.float64(c)) - point) ** 2).sum())
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = float(((chart(np.float64(e)) - point) ** 2).sum())
    return math.sqrt(min(fc, fe))


def boundary_distance(spec, point):
    """Euclidean distance from a point to the manifold's true boundary set."""
    if not isinstance(spec, ManifoldSpec):
        raise InvalidInputError("boundary_distance expects a ManifoldSpec")
    _validate(spec)
    if spec.kind not in _HAS_BOUNDARY:
        raise InvalidInputError(f"kind {spec.kind!r} has no boundary")
    p = np.asarray(point, dtype=float)
    d = ambient_dim(spec)
    if p.shape != (d,) or not np.all(np.isfinite(p)):
        raise InvalidInputError(f"point must be a finite vector of length {d}")

    if spec.kind == "half_sphere":
        # boundary = unit (d'-1)-sphere in the hyperplane of the last coordinate
        rho = float(np.linalg.norm(p[:-1]))
        return math.hypot(rho - 1.0, float(p[-1]))
    if spec.kind == "spiral":
        ends = _spiral_point(np.array([spec.t0, spec.t1]))
        return float(np.min(np.linalg.norm(ends - p, axis=1)))
    # moebius: the edge is traced by both half-width offsets over a full turn
    d_plus = _min_dist_to_curve(p, lambda u: _moebius_point(u, spec.width), 0.0, 2.0 * math.pi)
    d_minus = _min_dist_to_curve(p, lambda u: _moebius_point(u, -spec.width), 0.0, 2.0 * math.pi)
    return min(d_plus, d_minus)


def sample_unit_ball(rng_or_seed, n, d):
    """n points uniform in the closed unit ball of R^d."""
    rng = rng_or_seed if isinstance(rng_or_seed, np.random.Generator) else _rng(rng_or_seed)
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d < 1:
        raise InvalidInputError(f"dimension must be a positive integer, got {d!r}")
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1)
    while np.any(norms == 0.0):  # probability-zero guard
        bad = norms == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1)
    radius = rng.uniform(0.0, 1.0, n) ** (1.0 / d)
    return g * (radius / norms)[:, None]


def replicate(spec, *tokens):
    """Same spec on the replication stream addressed by `tokens`."""
    return replace(spec, seed=derive_seed(spec.seed, *tokens))
