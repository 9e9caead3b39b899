"""Experiment configuration: defaults reproduce the 7x7x20 87Rb lattice."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .geometry import (
    RB87_D1_WAVELENGTH_UM,
    RB87_GAMMA1_PER_US,
    PerturbationSpec,
    SampleGeometry,
    build_lattice,
    perturb,
)


class ConfigError(ValueError):
    """Invalid configuration. ``problems`` maps field names to messages."""

    def __init__(self, problems: dict):
        self.problems = dict(problems)
        msg = "; ".join(f"{k}: {v}" for k, v in self.problems.items())
        super().__init__(f"invalid configuration: {msg}")


DEFAULT_SCHEDULE = {"start": 1e-4, "stop": 0.2, "num": 200}
DEFAULT_REMOVAL_COUNTS = (1, 5, 10, 20, 30)


@dataclass(frozen=True)
class ExperimentConfig:
    dims: tuple = (7, 7, 20)
    spacing_um: float = 0.37
    wavelength_um: float = RB87_D1_WAVELENGTH_UM
    gamma1_per_us: float = RB87_GAMMA1_PER_US
    k0_direction: Optional[tuple] = None
    grid: tuple = (64, 64)
    # split the polar rule at the cone boundary so cone fractions converge
    grid_split_at_cone: bool = True
    time_schedule: object = field(default_factory=lambda: dict(DEFAULT_SCHEDULE))
    profile_times_us: tuple = (0.1,)
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    sweep_removal_counts: tuple = DEFAULT_REMOVAL_COUNTS
    sweep_seeds: int = 20
    sweep_seed_base: int = 0
    output_dir: str = "out"
    cone_half_angle_rad: float = 0.3
    workers: int = 1

    def times(self) -> np.ndarray:
        s = self.time_schedule
        if isinstance(s, dict):
            return np.geomspace(s["start"], s["stop"], int(s["num"]))
        return np.asarray(s, dtype=float)

    def sample(self, with_perturbation: bool = True) -> SampleGeometry:
        base = build_lattice(
            self.dims, self.spacing_um, self.wavelength_um, self.gamma1_per_us, self.k0_direction
        )
        return perturb(base, self.perturbation) if with_perturbation else base

    def grid_kwargs(self, scale: int = 1) -> dict:
        kw = {"n_polar": self.grid[0] * scale, "n_azimuth": self.grid[1] * scale}
        if self.grid_split_at_cone:
            kw["split_angle"] = self.cone_half_angle_rad
        return kw

    def seeds(self) -> list:
        return list(range(self.sweep_seed_base, self.sweep_seed_base + self.sweep_seeds))

    def with_overrides(self, output_dir=None, grid=None, seed=None) -> "ExperimentConfig":
        cfg = self
        if output_dir is not None:
            cfg = replace(cfg, output_dir=str(output_dir))
        if grid is not None:
            cfg = replace(cfg, grid=tuple(grid))
        if seed is not None:
            cfg = replace(
                cfg, perturbation=replace(cfg.perturbation, seed=int(seed)), sweep_seed_base=int(seed)
            )
        validate(cfg)
        return cfg


_PERTURBATION_KEYS = {"removal_indices", "removal_count", "jitter_sigma", "seed"}
_SCHEDULE_KEYS = {"start", "stop", "num"}
_SWEEP_KEYS = {"removal_counts", "seeds", "seed_base"}


def _positive(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    problems = {}
    if len(cfg.dims) != 3 or not all(isinstance(d, int) and d >= 1 for d in cfg.dims):
        problems["dims"] = f"need three positive integers, got {list(cfg.dims)}"
    for name in ("spacing_um", "wavelength_um", "gamma1_per_us", "cone_half_angle_rad"):
        if not _positive(getattr(cfg, name)):
            problems[name] = f"must be > 0, got {getattr(cfg, name)!r}"
    if _positive(cfg.cone_half_angle_rad) and cfg.cone_half_angle_rad > math.pi:
        problems["cone_half_angle_rad"] = "must be <= pi"
    if cfg.k0_direction is not None:
        k = cfg.k0_direction
        if len(k) != 3 or not np.linalg.norm(np.asarray(k, dtype=float)) > 0:
            problems["k0_direction"] = f"need a non-zero 3-vector, got {k!r}"
    if len(cfg.grid) != 2 or not all(isinstance(g, int) and g >= 2 for g in cfg.grid):
        problems["grid"] = f"need [n_polar, n_azimuth] with both >= 2, got {list(cfg.grid)}"
    elif cfg.grid_split_at_cone and cfg.grid[0] < 4:
        problems["grid"] = "a split grid needs n_polar >= 4"

    s = cfg.time_schedule
    if isinstance(s, dict):
        bad = set(s) ^ _SCHEDULE_KEYS
        if bad:
            problems["time_schedule"] = f"log schedule needs exactly keys {sorted(_SCHEDULE_KEYS)}"
        elif not (_positive(s["start"]) and _positive(s["stop"]) and s["stop"] > s["start"]):
            problems["time_schedule"] = "need 0 < start < stop"
        elif not (isinstance(s["num"], int) and s["num"] >= 2):
            problems["time_schedule"] = "num must be an integer >= 2"
    else:
        t = np.asarray(s, dtype=float) if s is not None else np.array([])
        if t.ndim != 1 or t.size == 0 or np.any(t < 0) or np.any(np.diff(t) <= 0):
            problems["time_schedule"] = "need a non-empty ascending list of times >= 0"
    pt = np.asarray(cfg.profile_times_us, dtype=float)
    if pt.ndim != 1 or np.any(pt < 0) or np.any(np.diff(pt) <= 0):
        problems["profile_times_us"] = "need an ascending list of times >= 0"

    if not isinstance(cfg.sweep_seeds, int) or cfg.sweep_seeds < 1:
        problems["sweep.seeds"] = f"must be an integer >= 1, got {cfg.sweep_seeds!r}"
    if not isinstance(cfg.sweep_seed_base, int) or cfg.sweep_seed_base < 0:
        problems["sweep.seed_base"] = "must be a non-negative integer"
    n_atoms = int(np.prod(cfg.dims)) if "dims" not in problems else None
    if not all(isinstance(k, int) and k >= 0 for k in cfg.sweep_removal_counts):
        problems["sweep.removal_counts"] = "must be non-negative integers"
    p = cfg.perturbation
    if n_atoms is not None and p.removal_count is not None and p.removal_count >= n_atoms:
        problems["perturbation.removal_count"] = f"must be < N={n_atoms}"
    if n_atoms is not None and p.removal_indices is not None:
        if any(i < 0 or i >= n_atoms for i in p.removal_indices):
            problems["perturbation.removal_indices"] = f"indices must lie in [0, {n_atoms})"
    if not isinstance(cfg.workers, int) or cfg.workers < 1:
        problems["workers"] = "must be an integer >= 1"
    if not isinstance(cfg.output_dir, str) or not cfg.output_dir:
        problems["output_dir"] = "must be a non-empty path"
    if problems:
        raise ConfigError(problems)
    return cfg


_TOP_KEYS = {
    "dims",
    "spacing_um",
    "wavelength_um",
    "gamma1_per_us",
    "k0_direction",
    "grid",
    "grid_split_at_cone",
    "time_schedule",
    "profile_times_us",
    "perturbation",
    "sweep",
    "output_dir",
    "cone_half_angle_rad",
    "workers",
}


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build and validate a config; unknown keys anywhere are rejected."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError({"<root>": "configuration must be a mapping"})
    problems = {}
    for k in sorted(set(data) - _TOP_KEYS):
        problems[k] = "unknown key"
    kw = {}
    for k in _TOP_KEYS & set(data) - {"perturbation", "sweep"}:
        v = data[k]
        if k in ("dims", "grid", "profile_times_us") and isinstance(v, list):
            v = tuple(v)
        if k == "k0_direction" and v is not None:
            v = tuple(v) if isinstance(v, list) else v
        kw[k] = v

    pert = data.get("perturbation") or {}
    if not isinstance(pert, dict):
        problems["perturbation"] = "must be a mapping"
        pert = {}
    for k in sorted(set(pert) - _PERTURBATION_KEYS):
        problems[f"perturbation.{k}"] = "unknown key"
    try:
        kw["perturbation"] = PerturbationSpec(
            removal_indices=pert.get("removal_indices"),
            removal_count=pert.get("removal_count"),
            jitter_sigma=pert.get("jitter_sigma", 0.0),
            seed=pert.get("seed", 0),
        )
    except (TypeError, ValueError) as exc:
        problems["perturbation"] = str(exc)

    sweep = data.get("sweep") or {}
    if not isinstance(sweep, dict):
        problems["sweep"] = "must be a mapping"
        sweep = {}
    for k in sorted(set(sweep) - _SWEEP_KEYS):
        problems[f"sweep.{k}"] = "unknown key"
    if "removal_counts" in sweep:
        kw["sweep_removal_counts"] = tuple(sweep["removal_counts"])
    if "seeds" in sweep:
        kw["sweep_seeds"] = sweep["seeds"]
    if "seed_base" in sweep:
        kw["sweep_seed_base"] = sweep["seed_base"]
    try:
        validate(ExperimentConfig(**kw))
    except ConfigError as exc:
        problems.update(exc.problems)
    except TypeError as exc:
        problems.setdefault("<root>", f"wrong value type: {exc}")
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(**kw)


def check_sweep_counts(cfg: ExperimentConfig, n_atoms: int) -> None:
    if any(k >= n_atoms for k in cfg.sweep_removal_counts):
        raise ConfigError({"sweep.removal_counts": f"every count must be < N={n_atoms}"})


def load_config(path) -> ExperimentConfig:
    """Read a YAML (or JSON) config file."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError({"<file>": f"{path}: {exc}"}) from exc
    return config_from_dict(data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    p = cfg.perturbation
    return {
        "dims": list(cfg.dims),
        "spacing_um": cfg.spacing_um,
        "wavelength_um": cfg.wavelength_um,
        "gamma1_per_us": cfg.gamma1_per_us,
        "k0_direction": None if cfg.k0_direction is None else list(cfg.k0_direction),
        "grid": list(cfg.grid),
        "grid_split_at_cone": cfg.grid_split_at_cone,
        "time_schedule": cfg.time_schedule if isinstance(cfg.time_schedule, dict) else list(cfg.time_schedule),
        "profile_times_us": list(cfg.profile_times_us),
        "perturbation": {
            "removal_indices": None if p.removal_indices is None else list(p.removal_indices),
            "removal_count": p.removal_count,
            "jitter_sigma": p.jitter_sigma,
            "seed": p.seed,
        },
        "sweep": {
            "removal_counts": list(cfg.sweep_removal_counts),
            "seeds": cfg.sweep_seeds,
            "seed_base": cfg.sweep_seed_base,
        },
        "output_dir": cfg.output_dir,
        "cone_half_angle_rad": cfg.cone_half_angle_rad,
        "workers": cfg.workers,
    }
