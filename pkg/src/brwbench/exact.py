"""Exact reference computations on the integer lattice.

Everything here is closed-form or brute-force enumeration, kept in
:class:`fractions.Fraction` arithmetic whenever the specification is
rational, so the identities the Monte Carlo side is checked against hold
*exactly*, not just to float precision:

* n-step walk distributions by discrete convolution, and their tails;
* the root-to-leaf path ("spine") law of the branching process, including
  position-dependent branching factors, and its collapse to the plain walk
  law when branching is position-independent;
* full enumeration of tiny forests (every tree shape crossed with every
  displacement assignment), giving the survival-conditioned expected
  exceedance proportion of one tree;
* extinction probabilities by generating-function composition.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Union

from .errors import BrwError, EnumerationBudgetError, PositionDependenceError
from .model import Prob, TOL, ValidatedSpec

DEFAULT_BUDGET = 10_000_000

Number = Union[int, float, Fraction]


@dataclass(frozen=True)
class FinitePmf:
    """Probability mass function on integer positions, sorted by position."""

    atoms: tuple[tuple[int, Prob], ...]

    def __post_init__(self):
        probs = [p for _, p in self.atoms]
        if any(p < 0 for p in probs):
            raise ValueError("negative probability atom")
        total = sum(probs)
        if isinstance(total, Fraction):
            if total != 1:
                raise ValueError(f"pmf not normalized (sums to {total})")
        elif abs(float(total) - 1.0) > TOL:
            raise ValueError(f"pmf not normalized (sums to {float(total)!r})")

    @classmethod
    def of(cls, mapping) -> "FinitePmf":
        items = mapping.items() if hasattr(mapping, "items") else mapping
        return cls(atoms=tuple(sorted((int(x), p) for x, p in items)))

    def as_dict(self) -> dict[int, Prob]:
        return dict(self.atoms)

    def support(self) -> tuple[int, ...]:
        return tuple(x for x, _ in self.atoms)

    def mean(self) -> Prob:
        return sum(x * p for x, p in self.atoms)

    def prob(self, x: int) -> Prob:
        for pos, p in self.atoms:
            if pos == x:
                return p
        return 0


def convolve(a: FinitePmf, b: FinitePmf) -> FinitePmf:
    """Distribution of the sum of independent draws from ``a`` and ``b``."""
    acc: dict[int, Prob] = {}
    for x, p in a.atoms:
        for y, q in b.atoms:
            acc[x + y] = acc.get(x + y, 0) + p * q
    return FinitePmf.of(acc)


def exact_rw_distribution(spec: ValidatedSpec) -> FinitePmf:
    """Exact law of the n-step walk whose step ``g`` follows generation
    ``g``'s displacement law.

    Requires position-independent displacements; with position overrides the
    walk is a chain and the marginal comes from :func:`spine_marginal_position`.
    """
    if not spec.displacement_position_independent:
        raise PositionDependenceError(
            "walk distribution undefined for position-dependent steps; "
            "use spine_marginal_position(spine_law(spec))")
    one = Fraction(1) if spec.is_rational else 1.0
    dist = FinitePmf.of({0: one})
    for g in spec.generations:
        dist = convolve(dist, FinitePmf(atoms=g.displacement.support))
    return dist


def exact_tail(pmf: FinitePmf, threshold: Number) -> Prob:
    """Upper tail mass: total probability of positions >= ``threshold``."""
    return sum((p for x, p in pmf.atoms if x >= threshold), start=0)


@dataclass(frozen=True)
class SpineLaw:
    """Joint law of the displacement sequence along a root-to-leaf path.

    ``spines`` maps each path ``(x_1, ..., x_n)`` to its probability;
    ``normalizer`` is the raw total weight (the expected generation-n
    population contributed per ancestor, up to the ancestors' own constant
    branching factor) before normalization.
    """

    spines: tuple[tuple[tuple[int, ...], Prob], ...]
    normalizer: Prob

    def as_dict(self) -> dict[tuple[int, ...], Prob]:
        return dict(self.spines)


def _spine_budget_estimate(spec: ValidatedSpec) -> int:
    total = 1
    for g in spec.generations:
        size = len(g.displacement.support)
        if g.displacement.position_map:
            size = max([size] + [len(law.support) for _, law in g.displacement.position_map])
        total *= size
    return total


def spine_law(spec: ValidatedSpec, budget: int = DEFAULT_BUDGET) -> SpineLaw:
    """Enumerate the exact path law, weighting each path by its step
    probabilities times the branching factors met along the way.

    The branching factor of the ancestors themselves multiplies every path
    equally (all ancestors sit at the origin), so it cancels and is omitted.
    """
    required = _spine_budget_estimate(spec)
    if required > budget:
        raise EnumerationBudgetError(required=required, budget=budget)

    n = spec.n
    weights: dict[tuple[int, ...], Prob] = {}

    def walk(g: int, u: int, prefix: tuple[int, ...], w: Prob) -> None:
        if g > n:
            weights[prefix] = weights.get(prefix, 0) + w
            return
        step_law = spec.displacement(g).at(u)
        for x, p in step_law.support:
            w2 = w * p
            u2 = u + x
            if g < n:
                w2 = w2 * spec.offspring(g + 1).at(u2).mean
            walk(g + 1, u2, prefix + (x,), w2)

    walk(1, 0, (), Fraction(1) if spec.is_rational else 1.0)

    normalizer = sum(weights.values())
    if normalizer == 0:
        raise BrwError("spine law undefined: expected generation-n population is zero")
    spines = tuple(sorted((x, w / normalizer) for x, w in weights.items()))
    return SpineLaw(spines=spines, normalizer=normalizer)


def spine_marginal_position(s: SpineLaw) -> FinitePmf:
    """Pushforward of the path law under total displacement."""
    acc: dict[int, Prob] = {}
    for path, p in s.spines:
        pos = sum(path)
        acc[pos] = acc.get(pos, 0) + p
    return FinitePmf.of(acc)


def reduction_distance(spec: ValidatedSpec, budget: int = DEFAULT_BUDGET) -> Prob:
    """Total-variation distance between the path law and the plain product
    of the step laws.

    Zero exactly iff weighting paths by branching factors changes nothing,
    i.e. whenever branching is position-independent.
    """
    if not spec.displacement_position_independent:
        raise PositionDependenceError(
            "product step law undefined for position-dependent steps")
    law = spine_law(spec, budget=budget).as_dict()
    supports = [g.displacement.support for g in spec.generations]
    diff_total = 0
    for combo in itertools.product(*supports):
        path = tuple(x for x, _ in combo)
        prod = 1
        for _, p in combo:
            prod = prod * p
        diff = law.get(path, 0) - prod
        diff_total = diff_total + (diff if diff >= 0 else -diff)
    return diff_total / 2


class TinyForestCheck(NamedTuple):
    """Both sides of the exceedance identity, computed by independent routes."""

    expected_exceedance: Prob
    tail: Prob

    @property
    def difference(self) -> Prob:
        return self.expected_exceedance - self.tail


def enumerate_tiny_forest(spec: ValidatedSpec, lam: Number,
                          budget: int = DEFAULT_BUDGET) -> TinyForestCheck:
    """Brute-force one tree of the forest and compare against the walk tail.

    Enumerates every tree shape (all offspring-count assignments) crossed
    with every displacement assignment, computes the exceedance proportion
    of leaves at or beyond ``mean + lam`` for each outcome, and averages over
    surviving trees (population >= 1).  The reference tail is computed by
    discrete convolution, an entirely separate route; in rational mode the
    two must agree exactly.
    """
    if not spec.branching_position_independent:
        raise PositionDependenceError(
            "exceedance identity requires position-independent branching")
    for i, g in enumerate(spec.generations, start=1):
        if g.offspring.support() is None:
            raise BrwError(
                f"generation {i}: offspring law has unbounded support; "
                "full enumeration needs finite count tables")

    if spec.displacement_position_independent:
        reference = exact_rw_distribution(spec)
    else:
        reference = spine_marginal_position(spine_law(spec, budget=budget))
    na = reference.mean()
    threshold = na + lam
    tail = exact_tail(reference, threshold)

    n = spec.n
    exact_mode = spec.is_rational
    states = 0

    def bump(count: int) -> None:
        nonlocal states
        states += count
        if states > budget:
            raise EnumerationBudgetError(required=states, budget=budget)

    # leaf-multiset distribution of the subtree grown by one particle at
    # (generation g, position u); multisets are sorted position tuples
    memo: dict[tuple[int, int], dict[tuple[int, ...], Prob]] = {}

    def subtree(g: int, u: int) -> dict[tuple[int, ...], Prob]:
        key = (g, u)
        if key in memo:
            return memo[key]
        if g == n:
            result = {(u,): Fraction(1) if exact_mode else 1.0}
            memo[key] = result
            return result
        count_law = spec.offspring(g + 1).at(u)
        step_law = spec.displacement(g + 1).at(u)

        # distribution over one child's leaf multiset: mix over its step
        child: dict[tuple[int, ...], Prob] = {}
        for x, p in step_law.support:
            for leaves, q in subtree(g + 1, u + x).items():
                child[leaves] = child.get(leaves, 0) + p * q
        bump(len(child))

        result = {}
        for k, pk in count_law.table:
            # k independent children: k-fold multiset convolution
            combo: dict[tuple[int, ...], Prob] = {(): Fraction(1) if exact_mode else 1.0}
            for _ in range(k):
                nxt: dict[tuple[int, ...], Prob] = {}
                for la, pa in combo.items():
                    for lb, pb in child.items():
                        merged = tuple(sorted(la + lb))
                        nxt[merged] = nxt.get(merged, 0) + pa * pb
                combo = nxt
                bump(len(combo))
            for leaves, q in combo.items():
                result[leaves] = result.get(leaves, 0) + pk * q
        memo[key] = result
        return result

    forest = subtree(0, 0)
    survival = sum((p for leaves, p in forest.items() if leaves), start=0)
    if survival == 0:
        raise BrwError("no surviving trees: every outcome is extinct by generation n")

    weighted = 0
    for leaves, p in forest.items():
        if not leaves:
            continue
        hits = sum(1 for z in leaves if z >= threshold)
        if exact_mode:
            weighted = weighted + p * Fraction(hits, len(leaves))
        else:
            weighted = weighted + p * (hits / len(leaves))
    return TinyForestCheck(expected_exceedance=weighted / survival, tail=tail)


def extinction_probability(spec: ValidatedSpec, upto: Optional[int] = None) -> list[Prob]:
    """Probability of an empty generation k, for k = 1..upto.

    Computed by composing the offspring generating functions from the last
    generation inward: a single ancestor dies out by generation k iff each
    of its children's subtrees dies out one generation sooner.
    """
    if not spec.branching_position_independent:
        raise PositionDependenceError(
            "extinction recursion requires position-independent branching")
    upto = spec.n if upto is None else upto
    if not 1 <= upto <= spec.n:
        raise ValueError(f"upto must be in 1..{spec.n}")
    exact_mode = spec.is_rational and all(
        g.offspring.kind != "poisson" for g in spec.generations[:upto])
    out: list[Prob] = []
    for k in range(1, upto + 1):
        q: Prob = Fraction(0) if exact_mode else 0.0
        for g in range(k, 0, -1):
            q = spec.offspring(g).pgf(q)
        out.append(q)
    return out
