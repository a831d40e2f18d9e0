"""Branching-random-walk simulation, exact oracles, and bound verification."""

__version__ = "0.1.0"

from .bounds import BoundParams, TheoremBound, hoeffding_constant, rw_bound, theorem_bound
from .empirics import (DeviationEstimate, deviation_rate, ecdf, exceedance,
                       quantile, wilson_interval)
from .errors import (BrwError, EmptyForestError, EnumerationBudgetError,
                     ExperimentConfigError, PopulationOverflowError,
                     PositionDependenceError, SpecValidationError)
from .exact import (FinitePmf, SpineLaw, TinyForestCheck, convolve,
                    enumerate_tiny_forest, exact_rw_distribution, exact_tail,
                    extinction_probability, reduction_distance, spine_law,
                    spine_marginal_position)
from .model import (BrwSpec, DisplacementLaw, GenerationSpec, OffspringLaw,
                    ValidatedSpec, hoeffding_ranges, mean_position, validate_spec)
from .simulate import (ForestSample, LeafHistogram, OverflowRecord, TreeRun,
                       simulate_forest, simulate_tree, tree_seed)

__all__ = [
    "__version__",
    "BoundParams", "TheoremBound", "hoeffding_constant", "rw_bound", "theorem_bound",
    "DeviationEstimate", "deviation_rate", "ecdf", "exceedance", "quantile",
    "wilson_interval",
    "BrwError", "EmptyForestError", "EnumerationBudgetError",
    "ExperimentConfigError", "PopulationOverflowError",
    "PositionDependenceError", "SpecValidationError",
    "FinitePmf", "SpineLaw", "TinyForestCheck", "convolve",
    "enumerate_tiny_forest", "exact_rw_distribution", "exact_tail",
    "extinction_probability", "reduction_distance", "spine_law",
    "spine_marginal_position",
    "BrwSpec", "DisplacementLaw", "GenerationSpec", "OffspringLaw",
    "ValidatedSpec", "hoeffding_ranges", "mean_position", "validate_spec",
    "ForestSample", "LeafHistogram", "OverflowRecord", "TreeRun",
    "simulate_forest", "simulate_tree", "tree_seed",
]
