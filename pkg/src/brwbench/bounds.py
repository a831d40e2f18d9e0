"""Exponential tail bounds for the walk and for per-tree quantiles.

The canonical internal form is the one-sided Hoeffding bound for sums of
independent bounded steps,

    Pr(S_n - E S_n >= lam) <= exp(-2 lam^2 / sum_i w_i^2),

with w_i the width of step i's support.  The exponent constant ``c`` is
defined so that exp(-c lam^2 / n) equals this one-sided form, i.e.
c = 2 n / sum w_i^2 (= 2 / w^2 for homogeneous widths).  Two-sided reports
double the one-sided value; treating the generic two-sided form as tight
per side fails pointwise (fair +-1 steps, n = 2, lam = 2 already exceed it).

The quantile bound halves the exponent and doubles the prefactor:
Pr(|Q(alpha) - na| >= lam) <= 2 exp(-c lam^2 / (2n)) for alpha inside
[exp(-c lam^2 / (2n)), 1 - exp(-c lam^2 / (2n))].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence


@dataclass(frozen=True)
class BoundParams:
    """Exponent constant, horizon, and deviation for a bound evaluation."""

    c: float
    n: int
    lam: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be > 0")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")


def hoeffding_constant(ranges: Sequence[float]) -> float:
    """Exponent constant c = 2 n / sum(w_i^2) from per-step support widths.

    Degenerate (zero-width) steps are allowed as long as at least one step
    actually moves.
    """
    if not ranges:
        raise ValueError("no step ranges given")
    if any(w < 0 for w in ranges):
        raise ValueError("step ranges must be non-negative")
    ssq = sum(float(w) * float(w) for w in ranges)
    if ssq == 0.0:
        raise ValueError("all steps are point masses: the walk is deterministic "
                         "and needs no tail bound")
    return 2.0 * len(ranges) / ssq


def rw_bound(p: BoundParams) -> float:
    """One-sided walk tail bound min(1, exp(-c lam^2 / n))."""
    return min(1.0, math.exp(-p.c * p.lam * p.lam / p.n))


class TheoremBound(NamedTuple):
    """Two-sided quantile bound and the admissible quantile-level window."""

    bound: float
    alpha_lo: float
    alpha_hi: float

    @property
    def window_empty(self) -> bool:
        return self.alpha_lo > self.alpha_hi

    def covers(self, alpha: float) -> bool:
        return self.alpha_lo <= alpha <= self.alpha_hi


def theorem_bound(p: BoundParams) -> TheoremBound:
    """Evaluate the per-tree quantile bound 2 exp(-c lam^2 / (2n)) (capped
    1 for reporting) and the window endpoints, which both equal the
    one-sided value exp(-c lam^2 / (2n)).

    The window is empty (alpha_lo > alpha_hi) iff c lam^2 / (2n) < ln 2.
    """
    one_sided = math.exp(-p.c * p.lam * p.lam / (2.0 * p.n))
    return TheoremBound(bound=min(1.0, 2.0 * one_sided),
                        alpha_lo=one_sided, alpha_hi=1.0 - one_sided)
