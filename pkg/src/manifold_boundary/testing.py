"""The boundary-emptiness hypothesis test.

Threshold rule: reject "no boundary" when the max statistic reaches the
chi-square(d') upper quantile at alpha / (TAIL_BOUND_CONST * n).  The reported
p-value bound inverts that zone, p = min(1, TAIL_BOUND_CONST * n * SF(max)):
it is the smallest level at which the rule rejects, a conservative bound
rather than an exact probability.  The consistent rule instead compares the
max against a deterministic cutoff inside [lambda ln n, mu k].
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .boundary_stat import StatisticResult, compute_statistic
from .chisq import TAIL_BOUND_CONST, alpha_const, chisq_sf, chisq_sf_inv, level_bound_G
from .errors import InvalidConfigurationError, InvalidInputError
from .knn import PointCloud

THRESHOLD_RULE = "threshold"
CONSISTENT_RULE = "consistent"


@dataclass(frozen=True)
class TestConfig:
    k: int
    alpha: float = 0.05
    rule: str = THRESHOLD_RULE
    flag_level: float = 0.05
    consistent_lambda: float = 4.5
    consistent_mu: float | None = None   # defaults to the largest admissible value
    consistent_beta: float | None = None  # explicit cutoff override

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and 0.0 < self.alpha < 1.0):
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.rule not in (THRESHOLD_RULE, CONSISTENT_RULE):
            raise InvalidInputError(f"unknown rule {self.rule!r}")
        if not (isinstance(self.flag_level, (int, float)) and 0.0 < self.flag_level < 1.0):
            raise InvalidInputError(f"flag_level must lie in (0, 1), got {self.flag_level!r}")


@dataclass(frozen=True)
class ConsistentDecision:
    reject: bool
    beta: float
    window_low: float
    window_high: float


@dataclass(frozen=True)
class TestOutcome:
    statistic: StatisticResult
    threshold: float
    p_value_bound: float
    reject: bool
    boundary_points: np.ndarray
    rule_used: str
    alpha: float
    flag_level: float
    level_diagnostic: float
    beta_window: tuple[float, float] | None = None


def threshold(n, alpha, d_prime):
    """Rejection cutoff for the max statistic at nominal level alpha."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidInputError(f"sample size must be an integer >= 2, got {n!r}")
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    q = alpha / (TAIL_BOUND_CONST * n)
    if q >= 1.0:
        raise InvalidInputError(f"tail argument {q} >= 1; n too small for this alpha")
    return chisq_sf_inv(d_prime, q)


def p_value_bound(n, d_prime, big_delta):
    """Smallest nominal level at which the threshold rule rejects (clamped at 1)."""
    return min(1.0, TAIL_BOUND_CONST * n * chisq_sf(d_prime, big_delta))


def flag_boundary_points(deltas, d_prime, flag_level=0.05):
    """Indices whose per-point tail score TAIL_BOUND_CONST * SF(delta) is at
    most flag_level; these are the points that look boundary-adjacent."""
    scores = TAIL_BOUND_CONST * chisq_sf(d_prime, np.asarray(deltas, dtype=float))
    return np.flatnonzero(scores <= flag_level).astype(np.int64)


def max_consistent_mu(d_prime):
    """Largest admissible slope for the consistent-rule upper window edge."""
    return (d_prime + 2) * alpha_const(d_prime) ** 2


def consistent_rule(statistic, n, k, d_prime, lam, mu):
    """Decision rule with an n-independent tuning window.

    Decides "boundary present" iff the max statistic exceeds the geometric
    midpoint of [lam * ln n, mu * k]; both endpoints are reported so callers
    can pick a different point of the window.
    """
    if not (isinstance(lam, (int, float)) and lam > 4.0):
        raise InvalidInputError(f"lambda must exceed 4, got {lam!r}")
    mu_cap = max_consistent_mu(d_prime)
    if not (isinstance(mu, (int, float)) and 0.0 < mu <= mu_cap * (1.0 + 1e-12)):
        raise InvalidInputError(
            f"mu must lie in (0, {mu_cap:.6g}] for intrinsic dimension {d_prime}, got {mu!r}"
        )
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidInputError(f"sample size must be an integer >= 2, got {n!r}")
    low = lam * math.log(n)
    high = mu * k
    if low > high:
        k_min = math.ceil(low / mu)
        raise InvalidConfigurationError(
            f"empty cutoff window: lambda*ln(n) = {low:.4g} exceeds mu*k = {high:.4g}; "
            f"raise k to at least {k_min}"
        )
    beta = math.sqrt(low * high)
    return ConsistentDecision(
        reject=bool(statistic.big_delta > beta),
        beta=beta,
        window_low=low,
        window_high=high,
    )


def run_test(cloud, config, index=None):
    """Run the full test on a cloud: statistic, decision, per-point flags."""
    if not isinstance(cloud, PointCloud):
        raise InvalidInputError("run_test expects a PointCloud")
    if not isinstance(config, TestConfig):
        raise InvalidInputError("run_test expects a TestConfig")
    stat = compute_statistic(cloud, config.k, index=index)
    n = cloud.n
    dp = cloud.intrinsic_dim

    t_alpha = threshold(n, config.alpha, dp)
    pvb = p_value_bound(n, dp, stat.big_delta)
    flagged = flag_boundary_points(stat.delta, dp, config.flag_level)
    diagnostic = n * level_bound_G(stat.k_used, t_alpha, dp)

    if config.rule == THRESHOLD_RULE:
        return TestOutcome(
            statistic=stat,
            threshold=t_alpha,
            p_value_bound=pvb,
            reject=bool(stat.big_delta >= t_alpha),
            boundary_points=flagged,
            rule_used=THRESHOLD_RULE,
            alpha=config.alpha,
            flag_level=config.flag_level,
            level_diagnostic=diagnostic,
        )

    mu = config.consistent_mu if config.consistent_mu is not None else max_consistent_mu(dp)
    decision = consistent_rule(stat, n, config.k, dp, config.consistent_lambda, mu)
    beta = decision.beta
    reject = decision.reject
    if config.consistent_beta is not None:
        beta = float(config.consistent_beta)
        if not beta > 0.0:
            raise InvalidInputError(f"beta override must be positive, got {beta}")
        reject = bool(stat.big_delta > beta)
    return TestOutcome(
        statistic=stat,
        threshold=beta,
        p_value_bound=pvb,
        reject=reject,
        boundary_points=flagged,
        rule_used=CONSISTENT_RULE,
        alpha=config.alpha,
        flag_level=config.flag_level,
        level_diagnostic=diagnostic,
        beta_window=(decision.window_low, decision.window_high),
    )
