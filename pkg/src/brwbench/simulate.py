"""Monte Carlo realization of trees and forests.

Each tree is grown generation by generation from a single ancestor at the
origin, holding only a position -> count histogram per generation, so memory
scales with the number of distinct lattice positions (an interval of width
O(n * max step)) rather than with the population.

Reproducibility: every tree owns a counter-based Philox stream keyed by a
64-bit hash of ``(master_seed, tree_index)``.  Forest results are therefore
identical for any worker count and any scheduling order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import PopulationOverflowError
from .model import ValidatedSpec

DEFAULT_CAP = 10_000_000

_M64 = (1 << 64) - 1


def _mix64(z: int) -> int:
    # splitmix64 finalizer
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def tree_seed(master_seed: int, tree_index: int) -> int:
    """Derive the per-tree stream key from the forest master seed."""
    return _mix64((_mix64(master_seed & _M64) + tree_index) & _M64)


class LeafHistogram:
    """Multiset of one tree's generation-n leaf positions.

    ``positions`` is strictly increasing int64; ``counts`` holds the
    matching positive multiplicities; ``total`` is the population.
    """

    __slots__ = ("positions", "counts", "total", "_cum")

    def __init__(self, positions: np.ndarray, counts: np.ndarray):
        positions = np.asarray(positions, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if positions.ndim != 1 or positions.shape != counts.shape:
            raise ValueError("positions and counts must be 1-d arrays of equal length")
        if len(positions) == 0:
            raise ValueError("a leaf histogram cannot be empty (total >= 1)")
        if np.any(counts <= 0):
            raise ValueError("zero or negative count entry")
        if np.any(np.diff(positions) <= 0):
            raise ValueError("positions must be strictly increasing")
        self.positions = positions
        self.counts = counts
        self.total = int(counts.sum())
        self._cum: Optional[np.ndarray] = None

    @classmethod
    def from_dict(cls, mapping) -> "LeafHistogram":
        items = sorted((int(k), int(v)) for k, v in mapping.items())
        return cls(np.array([k for k, _ in items], dtype=np.int64),
                   np.array([v for _, v in items], dtype=np.int64))

    @classmethod
    def from_positions(cls, raw_positions: np.ndarray) -> "LeafHistogram":
        pos, cnt = np.unique(np.asarray(raw_positions, dtype=np.int64),
                             return_counts=True)
        return cls(pos, cnt)

    def as_dict(self) -> dict[int, int]:
        return {int(p): int(c) for p, c in zip(self.positions, self.counts)}

    def cumulative(self) -> np.ndarray:
        if self._cum is None:
            self._cum = np.cumsum(self.counts)
        return self._cum

    def count_leq(self, t) -> int:
        """Number of leaves at positions <= t.

        Exact for int, float and Fraction thresholds: integer positions
        satisfy p <= t iff p <= floor(t).
        """
        idx = int(np.searchsorted(self.positions, math.floor(t), side="right"))
        return int(self.cumulative()[idx - 1]) if idx > 0 else 0

    def count_geq(self, t) -> int:
        """Number of leaves at positions >= t (exact, via p >= ceil(t))."""
        idx = int(np.searchsorted(self.positions, math.ceil(t), side="left"))
        return self.total - (int(self.cumulative()[idx - 1]) if idx > 0 else 0)

    def __eq__(self, other) -> bool:
        return (isinstance(other, LeafHistogram)
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.counts, other.counts))

    def __repr__(self) -> str:
        return f"LeafHistogram({self.as_dict()})"


@dataclass(frozen=True)
class TreeRun:
    """Outcome of one tree: final histogram (None when extinct), generation
    sizes 1..n, and the stream seed that produced it."""

    index: int
    seed: int
    per_generation_sizes: tuple[int, ...]
    final: Optional[LeafHistogram]

    @property
    def extinct(self) -> bool:
        return self.final is None


class OverflowRecord(NamedTuple):
    index: int
    seed: int
    generation: int
    population: int


@dataclass(frozen=True)
class ForestSample:
    """Aggregate of independent tree runs.

    ``surviving`` keeps full runs for trees with a non-empty last generation;
    extinct trees are only counted; capped trees are recorded with where they
    blew up.  surviving + extinct + overflowed always equals ``requested``.
    """

    requested: int
    master_seed: int
    cap: int
    surviving: tuple[TreeRun, ...]
    extinct_count: int
    overflows: tuple[OverflowRecord, ...]

    @property
    def overflow_count(self) -> int:
        return len(self.overflows)

    @property
    def extinct_fraction(self) -> float:
        return self.extinct_count / self.requested

    @property
    def surviving_fraction(self) -> float:
        return len(self.surviving) / self.requested


class _PhiloxStream:
    """A reusable counter-based generator, re-keyed per tree.

    Re-keying resets the full bit-generator state, so draws are identical to
    those from a freshly constructed generator with the same key.  One
    instance per worker thread; never share across threads.
    """

    __slots__ = ("_bg", "generator")

    def __init__(self):
        self._bg = np.random.Philox(key=0)
        self.generator = np.random.Generator(self._bg)

    def rekey(self, seed: int) -> np.random.Generator:
        state = self._bg.state
        state["state"]["key"] = np.array([seed & _M64, 0], dtype=np.uint64)
        state["state"]["counter"] = np.zeros(4, dtype=np.uint64)
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self._bg.state = state
        return self.generator


def _grow_tree(spec: ValidatedSpec, rng: np.random.Generator, seed: int,
               cap: int, index: int) -> TreeRun:
    """Generation loop on a raw per-particle position array.

    Generation g: one child count per parent from generation g's offspring
    law, then one displacement per child from its displacement law.  Draws
    follow particle order for position-free laws and ascending parent
    position for position-dependent ones.
    """
    n = spec.n
    particles = np.zeros(1, dtype=np.int64)
    sizes: list[int] = []

    for g in range(1, n + 1):
        offspring = spec.offspring(g)
        displacement = spec.displacement(g)

        if offspring.is_position_dependent:
            upos, ucnt = np.unique(particles, return_counts=True)
            groups = [(int(u), offspring.at(int(u)).sample(rng, int(k)))
                      for u, k in zip(upos, ucnt)]
            population = int(sum(int(d.sum()) for _, d in groups))
        else:
            fixed = offspring.fixed_count
            if fixed is not None:
                population = fixed * len(particles)
                groups = None
            else:
                draws = offspring.sample(rng, len(particles))
                population = int(draws.sum())
                groups = None

        sizes.append(population)
        if population > cap:
            raise PopulationOverflowError(generation=g, population=population,
                                          cap=cap)
        if population == 0:
            sizes.extend([0] * (n - g))
            return TreeRun(index=index, seed=seed,
                           per_generation_sizes=tuple(sizes), final=None)

        # position of each child's parent, one entry per child
        if offspring.is_position_dependent:
            parent_pos = np.concatenate(
                [np.full(int(d.sum()), u, dtype=np.int64) for u, d in groups])
        elif offspring.fixed_count is not None:
            k = offspring.fixed_count
            parent_pos = particles if k == 1 else np.repeat(particles, k)
        else:
            parent_pos = np.repeat(particles, draws)

        if displacement.is_position_dependent:
            upos, ucnt = np.unique(parent_pos, return_counts=True)
            parts = [u + displacement.at(int(u)).sample(rng, int(k))
                     for u, k in zip(upos, ucnt)]
            particles = np.concatenate(parts)
        else:
            particles = parent_pos + displacement.sample(rng, population)

    return TreeRun(index=index, seed=seed, per_generation_sizes=tuple(sizes),
                   final=LeafHistogram.from_positions(particles))


def simulate_tree(spec: ValidatedSpec, seed: int, cap: int = DEFAULT_CAP,
                  index: int = 0) -> TreeRun:
    """Grow one tree to generation n; a deterministic function of (spec, seed).

    Raises
    ------
    PopulationOverflowError
        When a generation's population exceeds ``cap``; the error names the
        generation reached.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed & _M64))
    return _grow_tree(spec, rng, seed, cap, index)


def simulate_forest(spec: ValidatedSpec, trees: int, master_seed: int,
                    cap: int = DEFAULT_CAP, workers: int = 1) -> ForestSample:
    """Run ``trees`` independent tree simulations.

    Tree i uses the stream ``tree_seed(master_seed, i)``, so the sample is a
    pure function of (spec, trees, master_seed, cap) no matter how many
    workers execute it or in which order they finish.  Overflowing trees are
    recorded and the run continues.
    """
    if trees < 1:
        raise ValueError("trees must be >= 1")

    results: list = [None] * trees

    def run_range(lo: int, hi: int) -> None:
        stream = _PhiloxStream()
        for i in range(lo, hi):
            seed = tree_seed(master_seed, i)
            try:
                results[i] = _grow_tree(spec, stream.rekey(seed), seed, cap, i)
            except PopulationOverflowError as exc:
                results[i] = OverflowRecord(index=i, seed=seed,
                                            generation=exc.generation,
                                            population=exc.population)

    if workers <= 1:
        run_range(0, trees)
    else:
        step = -(-trees // workers)
        bounds = [(lo, min(lo + step, trees)) for lo in range(0, trees, step)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_range, lo, hi) for lo, hi in bounds]
            for fut in futures:
                fut.result()

    surviving = []
    overflows = []
    extinct = 0
    for res in results:
        if isinstance(res, OverflowRecord):
            overflows.append(res)
        elif res.extinct:
            extinct += 1
        else:
            surviving.append(res)
    return ForestSample(requested=trees, master_seed=master_seed, cap=cap,
                        surviving=tuple(surviving), extinct_count=extinct,
                        overflows=tuple(overflows))
