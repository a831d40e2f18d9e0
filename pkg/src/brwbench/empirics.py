"""Per-tree empirical statistics and forest-level deviation rates.

All quantile arithmetic is done on exact integers (leaf counts), so grid
effects at atoms behave identically whether probabilities arrive as floats
or Fractions.  The quantile convention is the left-closed generalized
inverse: Q(a) is the smallest leaf position whose cumulative fraction
reaches ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .errors import EmptyForestError
from .simulate import ForestSample, LeafHistogram

Number = Union[int, float, Fraction]

#: two-sided 99% standard-normal quantile (norm.ppf(0.995))
Z99 = 2.5758293035489004


def _require_surviving(h: Optional[LeafHistogram]) -> LeafHistogram:
    if h is None:
        raise EmptyForestError("statistic undefined on an extinct tree")
    return h


def ecdf(h: LeafHistogram, t: Number) -> float:
    """Fraction of leaves at positions <= t."""
    h = _require_surviving(h)
    return h.count_leq(t) / h.total


def exceedance(h: LeafHistogram, threshold: Number) -> float:
    """Fraction of leaves at positions >= threshold."""
    h = _require_surviving(h)
    return h.count_geq(threshold) / h.total


def quantile(h: LeafHistogram, a: Number) -> int:
    """Smallest position t with ecdf(h, t) >= a, for 0 < a <= 1.

    The comparison is exact: a is converted to a Fraction, so on-grid values
    like Fraction(k, total) never suffer float rounding at atoms.
    """
    h = _require_surviving(h)
    a = Fraction(a)
    if not 0 < a <= 1:
        raise ValueError(f"quantile level must be in (0, 1], got {float(a)}")
    # smallest leaf count k with k/total >= a
    k = math.ceil(a * h.total)
    idx = int(h.cumulative().searchsorted(k, side="left"))
    return int(h.positions[idx])


def wilson_interval(successes: int, n: int, z: float = Z99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class DeviationEstimate:
    """Observed frequencies of per-tree quantile deviations from the center.

    ``rate_upper`` counts trees with Q(alpha) - center >= lam, ``rate_lower``
    those with Q(alpha) - center <= -lam, and ``rate_two_sided`` their union;
    each comes with a Wilson 99% interval over the surviving trees.
    """

    alpha: float
    lam: float
    rate_upper: float
    rate_lower: float
    rate_two_sided: float
    ci_upper: tuple[float, float]
    ci_lower: tuple[float, float]
    ci_two_sided: tuple[float, float]
    trees_used: int


def deviation_rate(forest: ForestSample, a: Number, lam: Number,
                   na: Number) -> DeviationEstimate:
    """Empirical one- and two-sided deviation frequencies over surviving trees.

    The center ``na`` is supplied by the caller (walk mean, or an exact
    spine-marginal mean for position-dependent steps).
    """
    if not forest.surviving:
        raise EmptyForestError("no surviving trees in the sample")
    hi_threshold = math.ceil(na + lam)   # Q >= na + lam, Q integer
    lo_threshold = math.floor(na - lam)  # Q <= na - lam
    n_up = n_low = n_two = 0
    for tree in forest.surviving:
        q = quantile(tree.final, a)
        up = q >= hi_threshold
        low = q <= lo_threshold
        n_up += up
        n_low += low
        n_two += up or low
    m = len(forest.surviving)
    return DeviationEstimate(
        alpha=float(a), lam=float(lam),
        rate_upper=n_up / m, rate_lower=n_low / m, rate_two_sided=n_two / m,
        ci_upper=wilson_interval(n_up, m),
        ci_lower=wilson_interval(n_low, m),
        ci_two_sided=wilson_interval(n_two, m),
        trees_used=m,
    )
