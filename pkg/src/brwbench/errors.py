"""Exception types shared across the package."""

from __future__ import annotations


class BrwError(Exception):
    """Base class for all structured errors raised by this package."""


class SpecValidationError(BrwError):
    """A process specification failed validation.

    Carries the complete list of violations, not just the first one found.
    """

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class PositionDependenceError(BrwError):
    """An operation requiring position-independent laws was given a
    position-dependent specification."""


class PopulationOverflowError(BrwError):
    """A simulated tree exceeded the population cap."""

    def __init__(self, generation: int, population: int, cap: int):
        self.generation = generation
        self.population = population
        self.cap = cap
        super().__init__(
            f"population {population} exceeds cap {cap} at generation {generation}"
        )


class EnumerationBudgetError(BrwError):
    """An exact enumeration would require more states than the budget allows."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(f"enumeration needs {required} states, budget is {budget}")


class EmptyForestError(BrwError):
    """No surviving trees are available for the requested statistic."""


class ExperimentConfigError(BrwError):
    """The experiment configuration is unusable (bad file, bad keys, bad values)."""
