"""Chi-square distribution functions, tail-quantile inversion, the half-ball
mean constant, and the conservative level bound used as a test diagnostic.

The regularized incomplete gamma is computed in-house: a power series below
the a+1 split and a modified-Lentz continued fraction above it, both iterated
to a 1e-15 term tolerance.  All distribution functions accept scalars or
numpy arrays of quantiles.
"""

import math
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError

# Constant multiplying the chi-square tail in the rejection-zone bound:
# reject when the max statistic exceeds the upper quantile at alpha / (C * n).
TAIL_BOUND_CONST = 2.0 * math.e**3 / 9.0

MAX_DF = 50

_TERM_TOL = 1e-15
_MAX_ITER = 700
_TINY = 1e-300


def _check_df(d):
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)):
        raise InvalidInputError(f"degrees of freedom must be an integer, got {d!r}")
    if not 1 <= d <= MAX_DF:
        raise InvalidInputError(f"degrees of freedom must be in [1, {MAX_DF}], got {d}")
    return int(d)


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("quantile arguments must be finite")
    return arr


def _restore(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


def _lower_series(a, y):
    """Regularized lower incomplete gamma P(a, y) by power series, y < a+1."""
    total = np.ones_like(y)
    term = np.ones_like(y)
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term = term * y / denom
        total = total + term
        if np.all(term <= _TERM_TOL * total):
            break
    return np.exp(a * np.log(y) - y - math.lgamma(a + 1.0)) * total


def _upper_cf_factor(a, y):
    """Continued-fraction factor h with Q(a, y) = exp(a ln y - y - lgamma(a)) * h,
    valid for y >= a+1 (modified Lentz iteration)."""
    b = y + 1.0 - a
    c = np.full_like(y, 1.0 / _TINY)
    d = 1.0 / np.maximum(b, _TINY)
    h = d.copy()
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) <= _TERM_TOL):
            break
    return h


def chisq_cdf(d, x):
    """Chi-square(d) cumulative distribution function; 0 for x <= 0."""
    d = _check_df(d)
    arr = _as_array(x)
    a = 0.5 * d
    y = 0.5 * np.atleast_1d(arr).astype(float)
    out = np.zeros_like(y)
    small = (y > 0.0) & (y < a + 1.0)
    large = y >= a + 1.0
    if small.any():
        out[small] = _lower_series(a, y[small])
    if large.any():
        yl = y[large]
        out[large] = 1.0 - np.exp(a * np.log(yl) - yl - math.lgamma(a)) * _upper_cf_factor(a, yl)
    out = np.clip(out, 0.0, 1.0)
    return _restore(x, out.reshape(arr.shape))


def chisq_sf(d, x):
    """Chi-square(d) survival function 1 - CDF, computed through the upper
    incomplete gamma directly so the far tail keeps relative accuracy."""
    d = _check_df(d)
    arr = _as_array(x)
    a = 0.5 * d
    y = 0.5 * np.atleast_1d(arr).astype(float)
    out = np.ones_like(y)
    small = (y > 0.0) & (y < a + 1.0)
    large = y >= a + 1.0
    if small.any():
        out[small] = 1.0 - _lower_series(a, y[small])
    if large.any():
        yl = y[large]
        out[large] = np.exp(a * np.log(yl) - yl - math.lgamma(a)) * _upper_cf_factor(a, yl)
    out = np.clip(out, 0.0, 1.0)
    return _restore(x, out.reshape(arr.shape))


def chisq_log_sf(d, x):
    """log of the survival function, finite for any finite x (no underflow)."""
    d = _check_df(d)
    arr = _as_array(x)
    a = 0.5 * d
    y = 0.5 * np.atleast_1d(arr).astype(float)
    out = np.zeros_like(y)
    small = (y > 0.0) & (y < a + 1.0)
    large = y >= a + 1.0
    if small.any():
        out[small] = np.log1p(-_lower_series(a, y[small]))
    if large.any():
        yl = y[large]
        out[large] = a * np.log(yl) - yl - math.lgamma(a) + np.log(_upper_cf_factor(a, yl))
    return _restore(x, out.reshape(arr.shape))


def _chisq_log_pdf(d, t):
    a = 0.5 * d
    return (a - 1.0) * math.log(t) - 0.5 * t - a * math.log(2.0) - math.lgamma(a)


def chisq_sf_inv(d, q):
    """Inverse survival function: t with chisq_sf(d, t) = q.

    Accurate in relative terms down to extreme tail arguments (q ~ 1e-300),
    which the rejection threshold needs since its argument scales like 1/n.
    """
    d = _check_df(d)
    try:
        q = float(q)
    except (TypeError, ValueError):
        raise InvalidInputError(f"q must be a real number, got {q!r}") from None
    if not math.isfinite(q) or not 0.0 < q < 1.0:
        raise InvalidInputError(f"q must lie strictly inside (0, 1), got {q}")
    target = math.log(q)
    a = 0.5 * d

    # Start from the tail expansion F(t) ~ e^{-t/2} (1 + t/2)^{a-1} / Gamma(a)
    # when q is small, else from the mean.
    if q < 0.2:
        t = max(2.0 * -target, float(d))
        for _ in range(64):
            t_new = 2.0 * (-target + (a - 1.0) * math.log1p(0.5 * t) - math.lgamma(a))
            t_new = max(t_new, 1e-8)
            if abs(t_new - t) <= 1e-12 * t:
                t = t_new
                break
            t = t_new
    else:
        t = float(d)

    lo, hi = 0.0, t
    for _ in range(200):
        if chisq_log_sf(d, hi) <= target:
            break
        lo, hi = hi, 2.0 * hi + 1.0
    else:  # pragma: no cover - cannot happen for q in (0, 1)
        raise InvalidInputError(f"failed to bracket the quantile for q={q}")

    t = min(max(t, 0.5 * (lo + hi)), hi)
    for _ in range(200):
        g = chisq_log_sf(d, t) - target
        if abs(g) <= 1e-12:
            break
        if g > 0.0:
            lo = t
        else:
            hi = t
        slope = -math.exp(_chisq_log_pdf(d, t) - chisq_log_sf(d, t)) if t > 0 else -math.inf
        step = g / slope if slope != 0.0 else math.inf
        t_new = t - step if math.isfinite(step) else 0.5 * (lo + hi)
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        if hi - lo <= 4.0 * math.ulp(hi):
            t = t_new
            break
        t = t_new
    return t


def alpha_const(d):
    """Expected value of <X - x, u> / r for X uniform on a radius-r half-ball
    in dimension d with inward normal u; strictly decreasing in d."""
    d = _check_df(d)
    return math.exp(math.lgamma(0.5 * (d + 2)) - math.lgamma(0.5 * (d + 3))) / math.sqrt(math.pi)


def _concentration_H(k, d, eps):
    root = k ** (1.0 / 3.0) + (d + 2.0) ** (1.0 / 3.0) * eps ** (1.0 / 3.0)
    expo = k * eps ** (2.0 / 3.0) * (d + 2.0) ** (-4.0 / 3.0) / (d * d * root * root)
    return np.exp(-expo)


def _concentration_R(k, d, eps):
    expo = k ** (1.0 / 3.0) * eps ** (2.0 / 3.0) / (d * d * (d + 2.0) ** (4.0 / 3.0))
    return np.exp(-expo)


def _level_objective(k, t, d, eps):
    return (
        TAIL_BOUND_CONST * chisq_sf(d, t - eps)
        + (d * d + d) * _concentration_H(k, d, eps)
        + 2.0 * d * _concentration_R(k, d, eps)
    )


@lru_cache(maxsize=4096)
def level_bound_G(k, t, d):
    """Conservative bound on the per-point tail probability at threshold t.

    Minimizes the tail-plus-concentration envelope over a 1024-point geometric
    grid of the split parameter in (0, t], refined by golden section; the
    endpoint split 0 is included as a candidate.  Any grid value upper-bounds
    the exact minimum, which is all the diagnostic needs.
    """
    d = _check_df(d)
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidInputError(f"k must be a positive integer, got {k!r}")
    t = float(t)
    if not math.isfinite(t) or t <= 0.0:
        raise InvalidInputError(f"threshold t must be positive and finite, got {t}")

    best = TAIL_BOUND_CONST * chisq_sf(d, t) + (d * d + d) + 2.0 * d  # split at 0
    grid = np.geomspace(t * 1e-15, t, 1024)
    vals = _level_objective(k, t, d, grid)
    j = int(np.argmin(vals))
    best = min(best, float(vals[j]))

    lo = grid[j - 1] if j > 0 else grid[0] * 0.5
    hi = grid[j + 1] if j < grid.size - 1 else t
    invphi = 0.5 * (math.sqrt(5.0) - 1.0)
    c = hi - invphi * (hi - lo)
    e = lo + invphi * (hi - lo)
    fc = float(_level_objective(k, t, d, np.float64(c)))
    fe = float(_level_objective(k, t, d, np.float64(e)))
    for _ in range(200):
        if hi - lo <= 1e-6 * max(abs(hi), 1e-300):
            break
        if fc <= fe:
            hi, e, fe = e, c, fc
            c = hi - invphi * (hi - lo)
            fc = float(_level_objective(k, t, d, np.float64(c)))
        else:
            lo, c, fc = c, e, fe
            e = lo + invphi * (hi - lo)
            fe = float(_level_objective(k, t, d, np.float64(e)))
    return min(best, fc, fe)
