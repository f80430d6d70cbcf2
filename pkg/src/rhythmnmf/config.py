"""Pipeline configuration loaded from a YAML file.

Schema (every key optional; defaults shown)::

    seed: 0
    out_dir: out
    n_jobs: 1
    window:   {start_week: 2, end_week: 51, year: 2014, tz_offset_minutes: 0}
    filter:   {min_active_day_fraction: 0.8, min_mean_weekly_events: 280}
    ingest:   {max_malformed: 100}
    solver:   {max_iterations: 500, relative_tolerance: 1.0e-6, restarts: 1000,
               epsilon_floor: 1.0e-12}
    rank:     {k_min: 2, k_max: 7, runs_per_k: 50}
    sleep:    {min_duration: 2, apply_filters: true}
    synth:    {n_persons: 200, events_per_week: 300, weeks: 50, noise_rate: 0.0, ...}

Restart seeds are ``seed, seed+1, ..., seed+restarts-1``; rank runs use
``seed + K*10**6 + r``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import yaml

from .errors import ConfigError, RhythmError
from .ingest import FilterCriteria, StudyWindow
from .nmf import SolverConfig
from .synthgen import PopulationSpec


@dataclass
class SolverSection:
    max_iterations: int = 500
    relative_tolerance: float = 1e-6
    restarts: int = 1000
    epsilon_floor: float = 1e-12


@dataclass
class RankSection:
    k_min: int = 2
    k_max: int = 7
    runs_per_k: int = 50


@dataclass
class SleepSection:
    min_duration: int = 2
    apply_filters: bool = True


@dataclass
class IngestSection:
    max_malformed: int = 100


@dataclass
class PipelineConfig:
    seed: int = 0
    out_dir: str = "out"
    n_jobs: int = 1
    window: StudyWindow = field(default_factory=StudyWindow)
    filter: FilterCriteria = field(default_factory=FilterCriteria)
    ingest: IngestSection = field(default_factory=IngestSection)
    solver: SolverSection = field(default_factory=SolverSection)
    rank: RankSection = field(default_factory=RankSection)
    sleep: SleepSection = field(default_factory=SleepSection)
    synth: dict = field(default_factory=dict)

    def solver_config(self) -> SolverConfig:
        s = self.solver
        if s.restarts < 1:
            raise ConfigError("solver.restarts must be >= 1")
        return SolverConfig(
            max_iterations=s.max_iterations,
            relative_tolerance=s.relative_tolerance,
            restart_seeds=tuple(range(self.seed, self.seed + s.restarts)),
            epsilon_floor=s.epsilon_floor,
        )

    def k_range(self) -> range:
        if self.rank.k_min > self.rank.k_max:
            raise ConfigError("rank.k_min is larger than rank.k_max")
        return range(self.rank.k_min, self.rank.k_max + 1)

    def population_spec(self) -> PopulationSpec:
        names = {f.name for f in dataclasses.fields(PopulationSpec)}
        unknown = set(self.synth) - names
        if unknown:
            raise ConfigError(f"unknown synth keys: {sorted(unknown)}")
        params = dict(self.synth)
        params.setdefault("seed", self.seed)
        for key in ("weight_prior", "onset_shifts", "duration_range"):
            if key in params:
                params[key] = tuple(params[key])
        if "templates" in params:
            from .synthgen import bump_templates
            params["templates"] = bump_templates(**params["templates"])
        try:
            return PopulationSpec(**params)
        except TypeError as exc:
            raise ConfigError(f"invalid synth section: {exc}") from exc


_SECTIONS = {
    "window": StudyWindow,
    "filter": FilterCriteria,
    "ingest": IngestSection,
    "solver": SolverSection,
    "rank": RankSection,
    "sleep": SleepSection,
}


def _build(cls, values: Any, name: str):
    if not isinstance(values, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    try:
        return cls(**values)
    except ConfigError:
        raise
    except RhythmError as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc


def config_from_dict(data: dict | None) -> PipelineConfig:
    data = dict(data or {})
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build(cls, data.pop(name), name)
    if "synth" in data:
        synth = data.pop("synth")
        if not isinstance(synth, dict):
            raise ConfigError("section 'synth' must be a mapping")
        kwargs["synth"] = synth
    for key in ("seed", "out_dir", "n_jobs"):
        if key in data:
            kwargs[key] = data.pop(key)
    if data:
        raise ConfigError(f"unknown top-level keys: {sorted(data)}")
    return PipelineConfig(**kwargs)


def load_config(path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: PipelineConfig) -> dict:
    out = dataclasses.asdict(cfg)
    return out


def dump_config(cfg: PipelineConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=True)
