"""Process model: per-generation offspring and displacement laws.

A branching random walk over ``n`` generations is specified by an ordered
list of generation entries.  Entry ``g`` (1-indexed) controls how generation
``g`` is produced from generation ``g-1``: every parent draws an independent
child count from the entry's offspring law, and every child draws an integer
displacement (relative to its parent) from the entry's displacement law.
Either law may depend on the parent's position through an explicit override
map; unmapped positions fall back to the entry's default law.

Probabilities may be given as :class:`fractions.Fraction` (exact mode, used
by the enumeration oracles) or as floats.  A law is *rational* when every
probability it carries is a ``Fraction``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import PositionDependenceError, SpecValidationError

Prob = Union[Fraction, float]

#: absolute tolerance for float-mode normalization and mean checks
TOL = 1e-12

_OFFSPRING_KINDS = ("deterministic", "bernoulli-split", "poisson", "finite-table")


def _as_prob(value) -> Prob:
    """Normalize a config-level probability: int -> Fraction, str 'a/b' -> Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("probability cannot be a bool")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        return value
    raise TypeError(f"cannot interpret {value!r} as a probability")


def _is_rational(values: Iterable[Prob]) -> bool:
    return all(isinstance(v, Fraction) for v in values)


def _check_pmf(pairs: Sequence[tuple[int, Prob]], what: str, errors: list[str]) -> None:
    """Append normalization/range violations of a (value, prob) table to errors."""
    if not pairs:
        errors.append(f"{what}: empty support")
        return
    values = [v for v, _ in pairs]
    if len(set(values)) != len(values):
        errors.append(f"{what}: duplicate support values")
    for v, p in pairs:
        if not isinstance(v, int):
            errors.append(f"{what}: support value {v!r} is not an integer")
        if p <= 0 or p > 1:
            errors.append(f"{what}: probability {p} for value {v} outside (0, 1]")
    probs = [p for _, p in pairs]
    total = sum(probs)
    if _is_rational(probs):
        if total != 1:
            errors.append(f"{what}: pmf not normalized (sums to {total})")
    elif abs(float(total) - 1.0) > TOL:
        errors.append(f"{what}: pmf not normalized (sums to {float(total)!r})")


def _sorted_pairs(table: Mapping[int, object] | Sequence) -> tuple[tuple[int, Prob], ...]:
    if isinstance(table, Mapping):
        items = table.items()
    else:
        items = ((k, v) for k, v in table)
    return tuple(sorted((int(k), _as_prob(v)) for k, v in items))


@dataclass(frozen=True)
class DisplacementLaw:
    """Integer step distribution of a child relative to its parent.

    ``support`` is a sorted tuple of ``(offset, probability)`` atoms.  An
    optional ``position_map`` overrides the law at specific parent positions;
    the base support is the default for unmapped positions.  Mapped laws must
    themselves be position-free.
    """

    support: tuple[tuple[int, Prob], ...]
    position_map: Optional[tuple[tuple[int, "DisplacementLaw"], ...]] = None

    @classmethod
    def of(cls, table: Mapping[int, object] | Sequence,
           position_map: Optional[Mapping[int, "DisplacementLaw"]] = None) -> "DisplacementLaw":
        pm = None
        if position_map:
            pm = tuple(sorted((int(u), law) for u, law in position_map.items()))
        return cls(support=_sorted_pairs(table), position_map=pm)

    @property
    def is_position_dependent(self) -> bool:
        return bool(self.position_map)

    def at(self, position: int) -> "DisplacementLaw":
        """The effective (position-free) law for a parent at ``position``."""
        if self.position_map is None:
            return self
        overrides = getattr(self, "_override_lookup", None)
        if overrides is None:
            overrides = (dict(self.position_map), DisplacementLaw(support=self.support))
            object.__setattr__(self, "_override_lookup", overrides)
        return overrides[0].get(position, overrides[1])

    def offsets(self) -> tuple[int, ...]:
        return tuple(o for o, _ in self.support)

    def mean(self) -> Prob:
        return sum(o * p for o, p in self.support)

    def span(self) -> int:
        """Support width max - min (the Hoeffding step range)."""
        offs = self.offsets()
        return max(offs) - min(offs)

    def is_rational(self) -> bool:
        own = _is_rational(p for _, p in self.support)
        if not self.position_map:
            return own
        return own and all(law.is_rational() for _, law in self.position_map)

    def validate(self, what: str = "displacement") -> list[str]:
        errors: list[str] = []
        _check_pmf(self.support, what, errors)
        if self.position_map:
            for u, law in self.position_map:
                if law.position_map:
                    errors.append(f"{what}: override at position {u} is itself position-mapped")
                errors.extend(law.validate(f"{what}[u={u}]"))
        return errors

    def _sampler(self) -> tuple[np.ndarray, np.ndarray]:
        cached = getattr(self, "_sampler_arrays", None)
        if cached is None:
            offs = np.array([o for o, _ in self.support], dtype=np.int64)
            cum = np.cumsum(np.array([float(p) for _, p in self.support]))
            cum[-1] = 1.0
            cached = (offs, cum)
            object.__setattr__(self, "_sampler_arrays", cached)
        return cached

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` steps (int64).  Ignores position overrides; callers
        resolve the effective law with :meth:`at` first."""
        offs, cum = self._sampler()
        if len(offs) == 1:
            return np.full(size, offs[0], dtype=np.int64)
        return offs[np.searchsorted(cum, rng.random(size), side="right")]


@dataclass(frozen=True)
class OffspringLaw:
    """Child-count distribution of a single parent.

    ``kind`` is one of ``deterministic``, ``bernoulli-split``, ``poisson``,
    ``finite-table``.  All kinds except ``poisson`` carry their exact pmf in
    ``table``; ``poisson`` carries only its rate (infinite support, excluded
    from the exact enumeration oracles).  ``mean`` is the declared branching
    factor and must match the analytic mean of the parameters.
    """

    kind: str
    mean: Prob
    table: Optional[tuple[tuple[int, Prob], ...]] = None
    rate: Optional[Prob] = None
    position_map: Optional[tuple[tuple[int, "OffspringLaw"], ...]] = None

    @classmethod
    def deterministic(cls, count: int, mean: Optional[Prob] = None) -> "OffspringLaw":
        declared = Fraction(count) if mean is None else _as_prob_like(mean)
        return cls(kind="deterministic", mean=declared, table=((int(count), Fraction(1)),))

    @classmethod
    def bernoulli_split(cls, p, mean: Optional[Prob] = None) -> "OffspringLaw":
        """Either 2 children (probability ``p``) or none."""
        p = _as_prob(p)
        declared = 2 * p if mean is None else _as_prob_like(mean)
        table = ((0, 1 - p), (2, p)) if 0 < p < 1 else (
            ((2, Fraction(1)),) if p == 1 else ((0, Fraction(1)),))
        return cls(kind="bernoulli-split", mean=declared, table=table)

    @classmethod
    def poisson(cls, rate, mean: Optional[Prob] = None) -> "OffspringLaw":
        rate = _as_prob_like(rate)
        declared = rate if mean is None else _as_prob_like(mean)
        return cls(kind="poisson", mean=declared, rate=rate)

    @classmethod
    def finite_table(cls, table: Mapping[int, object] | Sequence,
                     mean: Optional[Prob] = None) -> "OffspringLaw":
        pairs = _sorted_pairs(table)
        declared = sum(k * p for k, p in pairs) if mean is None else _as_prob_like(mean)
        return cls(kind="finite-table", mean=declared, table=pairs)

    def with_position_map(self, overrides: Mapping[int, "OffspringLaw"]) -> "OffspringLaw":
        pm = tuple(sorted((int(u), law) for u, law in overrides.items()))
        return OffspringLaw(kind=self.kind, mean=self.mean, table=self.table,
                            rate=self.rate, position_map=pm)

    @property
    def is_position_dependent(self) -> bool:
        return bool(self.position_map)

    def at(self, position: int) -> "OffspringLaw":
        if self.position_map is None:
            return self
        overrides = getattr(self, "_override_lookup", None)
        if overrides is None:
            overrides = (dict(self.position_map),
                         OffspringLaw(kind=self.kind, mean=self.mean,
                                      table=self.table, rate=self.rate))
            object.__setattr__(self, "_override_lookup", overrides)
        return overrides[0].get(position, overrides[1])

    def analytic_mean(self) -> Prob:
        if self.kind == "poisson":
            return self.rate
        return sum(k * p for k, p in self.table)

    def support(self) -> Optional[tuple[int, ...]]:
        """Possible child counts, or None for unbounded (poisson)."""
        if self.table is None:
            return None
        return tuple(k for k, _ in self.table)

    @property
    def fixed_count(self) -> Optional[int]:
        """The constant child count when the law is a point mass, else None."""
        if self.table is not None and len(self.table) == 1:
            return self.table[0][0]
        return None

    def pgf(self, s):
        """Probability generating function E[s^N]; exact for finite kinds."""
        if self.kind == "poisson":
            return math.exp(float(self.rate) * (float(s) - 1.0))
        return sum(p * s ** k for k, p in self.table)

    def is_rational(self) -> bool:
        if self.kind == "poisson":
            own = isinstance(self.rate, Fraction)
        else:
            own = _is_rational(p for _, p in self.table)
        if not self.position_map:
            return own
        return own and all(law.is_rational() for _, law in self.position_map)

    def validate(self, what: str = "offspring") -> list[str]:
        errors: list[str] = []
        if self.kind not in _OFFSPRING_KINDS:
            errors.append(f"{what}: unknown kind {self.kind!r}")
            return errors
        if self.kind == "poisson":
            if self.rate is None or float(self.rate) < 0:
                errors.append(f"{what}: poisson rate must be >= 0")
        else:
            if self.table is None:
                errors.append(f"{what}: missing count table")
            else:
                _check_pmf(self.table, what, errors)
                for k, _ in self.table:
                    if not isinstance(k, int) or k < 0:
                        errors.append(f"{what}: child count {k!r} is not a non-negative integer")
        if not errors:
            declared, analytic = self.mean, self.analytic_mean()
            if isinstance(declared, Fraction) and isinstance(analytic, Fraction):
                mismatch = declared != analytic
            else:
                mismatch = abs(float(declared) - float(analytic)) > TOL
            if mismatch:
                errors.append(
                    f"{what}: declared mean {declared} does not match analytic mean {analytic}")
        if self.position_map:
            for u, law in self.position_map:
                if law.position_map:
                    errors.append(f"{what}: override at position {u} is itself position-mapped")
                errors.extend(law.validate(f"{what}[u={u}]"))
        return errors

    def _sampler(self) -> tuple[np.ndarray, np.ndarray]:
        cached = getattr(self, "_sampler_arrays", None)
        if cached is None:
            counts = np.array([k for k, _ in self.table], dtype=np.int64)
            cum = np.cumsum(np.array([float(p) for _, p in self.table]))
            cum[-1] = 1.0
            cached = (counts, cum)
            object.__setattr__(self, "_sampler_arrays", cached)
        return cached

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` child counts (int64) from the position-free law."""
        if self.kind == "poisson":
            return rng.poisson(float(self.rate), size).astype(np.int64)
        counts, cum = self._sampler()
        if len(counts) == 1:
            return np.full(size, counts[0], dtype=np.int64)
        return counts[np.searchsorted(cum, rng.random(size), side="right")]


@dataclass(frozen=True)
class GenerationSpec:
    """One generation transition: offspring law plus displacement law."""

    offspring: OffspringLaw
    displacement: DisplacementLaw

    def validate(self, index: int) -> list[str]:
        errors = self.offspring.validate(f"generation {index}: offspring")
        errors.extend(self.displacement.validate(f"generation {index}: displacement"))
        return errors


@dataclass(frozen=True)
class BrwSpec:
    """Raw (unvalidated) process specification.

    The two flags assert position independence of branching and of
    displacement.  ``None`` means "derive from the laws"; explicit flags are
    cross-checked against the presence of override maps during validation.
    """

    generations: tuple[GenerationSpec, ...]
    branching_position_independent: Optional[bool] = None
    displacement_position_independent: Optional[bool] = None

    @classmethod
    def homogeneous(cls, n: int, offspring: OffspringLaw,
                    displacement: DisplacementLaw) -> "BrwSpec":
        gen = GenerationSpec(offspring=offspring, displacement=displacement)
        return cls(generations=(gen,) * n)


@dataclass(frozen=True)
class ValidatedSpec:
    """Immutable validated handle; safe to share across simulation workers."""

    generations: tuple[GenerationSpec, ...]
    branching_position_independent: bool
    displacement_position_independent: bool
    is_rational: bool

    @property
    def n(self) -> int:
        return len(self.generations)

    def offspring(self, g: int) -> OffspringLaw:
        """Offspring law producing generation ``g`` (1-indexed)."""
        return self.generations[g - 1].offspring

    def displacement(self, g: int) -> DisplacementLaw:
        """Displacement law of generation ``g`` children (1-indexed)."""
        return self.generations[g - 1].displacement


def validate_spec(spec: BrwSpec) -> ValidatedSpec:
    """Check every invariant of ``spec``; raise with the full violation list.

    Raises
    ------
    SpecValidationError
        Carrying one message per violation found (validation is total: it
        never stops at the first problem).
    """
    errors: list[str] = []
    if not spec.generations:
        errors.append("spec has no generations (n must be >= 1)")
    for i, gen in enumerate(spec.generations, start=1):
        errors.extend(gen.validate(i))

    branching_dep = any(g.offspring.is_position_dependent for g in spec.generations)
    displacement_dep = any(g.displacement.is_position_dependent for g in spec.generations)
    if spec.branching_position_independent is True and branching_dep:
        errors.append("flag contradiction: branching flagged position-independent "
                      "but an offspring position override is present")
    if spec.branching_position_independent is False and not branching_dep:
        errors.append("flag contradiction: branching flagged position-dependent "
                      "but no offspring position override is present")
    if spec.displacement_position_independent is True and displacement_dep:
        errors.append("flag contradiction: displacement flagged position-independent "
                      "but a displacement position override is present")
    if spec.displacement_position_independent is False and not displacement_dep:
        errors.append("flag contradiction: displacement flagged position-dependent "
                      "but no displacement position override is present")

    if errors:
        raise SpecValidationError(errors)

    rational = all(
        g.offspring.is_rational() and g.displacement.is_rational()
        for g in spec.generations
    )
    return ValidatedSpec(
        generations=spec.generations,
        branching_position_independent=not branching_dep,
        displacement_position_independent=not displacement_dep,
        is_rational=rational,
    )


def mean_position(spec: ValidatedSpec) -> Prob:
    """Expected leaf position: the sum of per-generation step means.

    Only defined when displacements are position-independent; otherwise the
    expected position depends on the step chain and must come from the exact
    spine marginal.
    """
    if not spec.displacement_position_independent:
        raise PositionDependenceError(
            "mean position undefined for position-dependent steps; "
            "use the exact spine marginal instead")
    return sum(g.displacement.mean() for g in spec.generations)


def hoeffding_ranges(spec: ValidatedSpec) -> list[int]:
    """Per-generation step support widths (max - min), for the bound constant."""
    if not spec.displacement_position_independent:
        raise PositionDependenceError(
            "step ranges undefined for position-dependent steps")
    return [g.displacement.span() for g in spec.generations]


def _as_prob_like(value) -> Prob:
    """Like _as_prob but for means/rates, which may exceed 1."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        return value
    raise TypeError(f"cannot interpret {value!r} as a number")
