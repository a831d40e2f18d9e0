"""Experiment configuration: TOML/JSON ingestion and canonical round-trip.

A config file carries the process under ``generations`` plus experiment
knobs under ``experiment``.  Probabilities may be written as floats or as
exact fraction strings ("3/4"), which are preserved as Fractions end to end
so the enumeration oracles stay exact.  ``resolved_dict`` renders a config
back into the same schema; reports embed that dict, and re-running from an
embedded config reproduces the report byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ExperimentConfigError
from .model import BrwSpec, DisplacementLaw, GenerationSpec, OffspringLaw

MODES = ("verify-theorem", "oracle-check", "bound-curve", "simulate")

DEFAULT_TREES = 10_000
DEFAULT_CAP = 10_000_000
DEFAULT_BUDGET = 10_000_000
DEFAULT_ALPHA_GRID = (0.1, 0.25, 0.5, 0.75, 0.9)


@dataclass
class ExperimentConfig:
    spec: BrwSpec
    mode: Optional[str]
    trees: int
    master_seed: int
    lambda_grid: list
    alpha_grid: list
    cap: int
    c_override: Optional[float]
    enumeration_budget: int
    workers: int = 1
    out: Optional[str] = None
    fmt: str = "json"

    def validate(self) -> None:
        problems = []
        if self.mode is not None and self.mode not in MODES:
            problems.append(f"unknown mode {self.mode!r} (expected one of {MODES})")
        if self.trees < 1:
            problems.append("trees must be >= 1")
        if self.cap < 1:
            problems.append("cap must be >= 1")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if not self.lambda_grid:
            problems.append("lambda_grid must be nonempty")
        if not self.alpha_grid:
            problems.append("alpha_grid must be nonempty")
        if any(not 0 < a < 1 for a in self.alpha_grid):
            problems.append("alpha_grid entries must lie strictly between 0 and 1")
        if any(l < 0 for l in self.lambda_grid):
            problems.append("lambda_grid entries must be >= 0")
        if self.c_override is not None and not self.c_override > 0:
            problems.append("c_override must be > 0")
        if self.fmt not in ("json", "csv"):
            problems.append(f"unknown output format {self.fmt!r}")
        if problems:
            raise ExperimentConfigError("; ".join(problems))


def default_lambda_grid(n: int) -> list[int]:
    """Deviations at 1, 2, 3 times the sqrt(n) scale."""
    base = math.ceil(math.sqrt(n))
    return [base, 2 * base, 3 * base]


# ---------------------------------------------------------------- parsing

def _parse_offspring(d: dict, where: str) -> OffspringLaw:
    try:
        kind = d["kind"]
        params = d.get("params", {})
        mean = d.get("mean")
        if kind == "deterministic":
            law = OffspringLaw.deterministic(int(params["count"]), mean=mean)
        elif kind == "bernoulli-split":
            law = OffspringLaw.bernoulli_split(params["p"], mean=mean)
        elif kind == "poisson":
            law = OffspringLaw.poisson(params["mean"], mean=mean)
        elif kind == "finite-table":
            table = {int(k): v for k, v in params["table"].items()}
            law = OffspringLaw.finite_table(table, mean=mean)
        else:
            raise ExperimentConfigError(f"{where}: unknown offspring kind {kind!r}")
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ExperimentConfigError(f"{where}: bad offspring entry: {exc}") from exc
    overrides = d.get("position_overrides")
    if overrides:
        mapped = {}
        for entry in overrides:
            sub = {k: v for k, v in entry.items() if k != "position"}
            mapped[int(entry["position"])] = _parse_offspring(sub, where)
        law = law.with_position_map(mapped)
    return law


def _parse_displacement(d: dict, where: str) -> DisplacementLaw:
    try:
        pairs = [(int(off), p) for off, p in d["support"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ExperimentConfigError(f"{where}: bad displacement entry: {exc}") from exc
    position_map = None
    overrides = d.get("position_overrides")
    if overrides:
        position_map = {
            int(entry["position"]): _parse_displacement(
                {k: v for k, v in entry.items() if k != "position"}, where)
            for entry in overrides
        }
    try:
        return DisplacementLaw.of(pairs, position_map=position_map)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ExperimentConfigError(f"{where}: bad displacement entry: {exc}") from exc


def parse_spec(data: dict) -> BrwSpec:
    """Build a (still unvalidated) process spec from a config mapping."""
    raw_gens = data.get("generations")
    if not raw_gens:
        raise ExperimentConfigError("config has no generations[] entries")
    generations: list[GenerationSpec] = []
    for i, entry in enumerate(raw_gens, start=1):
        where = f"generations[{i}]"
        if "offspring" not in entry or "displacement" not in entry:
            raise ExperimentConfigError(f"{where}: needs offspring and displacement")
        gen = GenerationSpec(
            offspring=_parse_offspring(entry["offspring"], where),
            displacement=_parse_displacement(entry["displacement"], where),
        )
        repeat = int(entry.get("repeat", 1))
        if repeat < 1:
            raise ExperimentConfigError(f"{where}: repeat must be >= 1")
        generations.extend([gen] * repeat)
    return BrwSpec(
        generations=tuple(generations),
        branching_position_independent=data.get("branching_position_independent"),
        displacement_position_independent=data.get("displacement_position_independent"),
    )


def parse_config(data: dict) -> ExperimentConfig:
    spec = parse_spec(data)
    exp = data.get("experiment", {})
    n = len(spec.generations)
    lam_grid = exp.get("lambda_grid") or default_lambda_grid(n)
    alpha_grid = exp.get("alpha_grid") or list(DEFAULT_ALPHA_GRID)
    cfg = ExperimentConfig(
        spec=spec,
        mode=exp.get("mode"),
        trees=int(exp.get("trees", DEFAULT_TREES)),
        master_seed=int(exp.get("master_seed", 0)),
        lambda_grid=list(lam_grid),
        alpha_grid=list(alpha_grid),
        cap=int(exp.get("cap", DEFAULT_CAP)),
        c_override=exp.get("c_override"),
        enumeration_budget=int(exp.get("enumeration_budget", DEFAULT_BUDGET)),
    )
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a TOML or JSON config file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ExperimentConfigError(f"cannot read config file: {exc}") from exc
    data = None
    if path.suffix.lower() == ".json":
        loaders = (json.loads, tomllib.loads)
    else:
        loaders = (tomllib.loads, json.loads)
    last_error = None
    for loader in loaders:
        try:
            data = loader(raw.decode("utf-8"))
            break
        except Exception as exc:  # tomllib/json raise different types
            last_error = exc
    if data is None:
        raise ExperimentConfigError(f"config is neither valid TOML nor JSON: {last_error}")
    if not isinstance(data, dict):
        raise ExperimentConfigError("config root must be a table/object")
    return parse_config(data)


# ------------------------------------------------------------ round-trip

def _prob_repr(p) -> Any:
    return str(p) if isinstance(p, Fraction) else p


def _offspring_to_dict(law: OffspringLaw) -> dict:
    if law.kind == "deterministic":
        params = {"count": law.table[0][0]}
    elif law.kind == "bernoulli-split":
        split = dict(law.table).get(2, Fraction(0))
        params = {"p": _prob_repr(split)}
    elif law.kind == "poisson":
        params = {"mean": _prob_repr(law.rate)}
    else:
        params = {"table": {str(k): _prob_repr(p) for k, p in law.table}}
    out = {"kind": law.kind, "params": params, "mean": _prob_repr(law.mean)}
    if law.position_map:
        out["position_overrides"] = [
            {"position": u, **_offspring_to_dict(sub)} for u, sub in law.position_map
        ]
    return out


def _displacement_to_dict(law: DisplacementLaw) -> dict:
    out = {"support": [[off, _prob_repr(p)] for off, p in law.support]}
    if law.position_map:
        out["position_overrides"] = [
            {"position": u, **_displacement_to_dict(sub)} for u, sub in law.position_map
        ]
    return out


def resolved_dict(cfg: ExperimentConfig, mode: str) -> dict:
    """Canonical config mapping: semantic inputs only (no output paths or
    worker counts), suitable for hashing and for byte-identical reruns."""
    return {
        "experiment": {
            "mode": mode,
            "trees": cfg.trees,
            "master_seed": cfg.master_seed,
            "lambda_grid": list(cfg.lambda_grid),
            "alpha_grid": list(cfg.alpha_grid),
            "cap": cfg.cap,
            "c_override": cfg.c_override,
            "enumeration_budget": cfg.enumeration_budget,
        },
        "generations": [
            {
                "offspring": _offspring_to_dict(g.offspring),
                "displacement": _displacement_to_dict(g.displacement),
            }
            for g in cfg.spec.generations
        ],
    }
