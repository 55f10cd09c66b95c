"""Experiment configuration, validation and fingerprinting.

Configuration files are YAML mappings whose keys mirror the CLI flags
(``--event-rate`` becomes ``event_rate``); see ``FLAT_KEYS``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .forest import PolicyConfig, PolicyKind
from .swarm import SensingModel
from .world import Environment, GaussianDensity

AGENT_DENSITY = 0.0025  # agents per m^2
BASE_AGENTS = 25
BASE_SIDE = 100.0
BASE_COV = 50.0
BASE_EVENT_RATE = 0.05


class ConfigError(ValueError):
    """The configuration is inconsistent or malformed."""


def square_world(n_agents: int = BASE_AGENTS, event_rate_25: float = BASE_EVENT_RATE,
                 grid_resolution: float = 1.0, density: float = AGENT_DENSITY) -> Environment:
    """Square environment holding ``n_agents`` at ``density``, with the base scenario scaled to it.

    The side grows with sqrt(n); the covariance grows linearly with the side,
    so the area of the 2-sigma event circle grows in proportion to the side;
    the event rate grows with the area.
    """
    side = math.sqrt(n_agents / density)
    base_side = math.sqrt(BASE_AGENTS / density)
    k = side / base_side
    return Environment(
        width=side,
        height=side,
        grid_resolution=grid_resolution,
        density=GaussianDensity((side / 2, side / 2), (BASE_COV * k, BASE_COV * k)),
        event_rate=event_rate_25 * k * k,
    )


@dataclass(frozen=True)
class ExperimentConfig:
    n_agents: int = BASE_AGENTS
    duration: float = 9000.0
    replicates: int = 20
    dt: float = 1.0
    seed: int = 0
    policy: PolicyConfig = PolicyConfig()
    sensing: SensingModel = SensingModel()
    world: Environment = field(default_factory=square_world)
    walk_leg: tuple = (5.0, 20.0)
    enforce_density: bool = True
    output_dir: str = "runs"

    def validate(self) -> "ExperimentConfig":
        if self.n_agents < 1:
            raise ConfigError("n_agents must be >= 1")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.duration <= 0 or self.dt <= 0:
            raise ConfigError("duration and dt must be positive")
        lo, hi = self.walk_leg
        if not 0 < lo <= hi:
            raise ConfigError(f"walk_leg must satisfy 0 < min <= max, got {self.walk_leg}")
        if self.policy.d_min > self.sensing.comm_range:
            raise ConfigError("d_min must not exceed comm_range")
        if self.enforce_density:
            want = self.n_agents / AGENT_DENSITY
            if not math.isclose(self.world.area, want, rel_tol=1e-9):
                raise ConfigError(f"area {self.world.area} m^2 does not hold {self.n_agents} "
                                  f"agents at {AGENT_DENSITY}/m^2 (expected {want})")
        return self

    @property
    def label(self) -> str:
        return f"{self.policy.label}-n{self.n_agents}"

    def model_dict(self) -> dict:
        """Every parameter that affects a replicate's dynamics (no seed, count or paths)."""
        d = to_dict(self)
        for k in ("replicates", "seed", "output_dir"):
            d.pop(k)
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.model_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def to_dict(cfg: ExperimentConfig) -> dict:
    def conv(v):
        if isinstance(v, PolicyKind):
            return v.value
        if dataclasses.is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in dataclasses.fields(v)}
        if isinstance(v, tuple):
            return [conv(x) for x in v]
        return v
    return conv(cfg)


def from_dict(d: Mapping[str, Any]) -> ExperimentConfig:
    d = dict(d)
    try:
        policy = PolicyConfig(**d.pop("policy", {}))
        sensing = SensingModel(**d.pop("sensing", {}))
        w = dict(d.pop("world", {}))
        dens = w.pop("density", None)
        if dens is not None:
            w["density"] = GaussianDensity(tuple(dens["mean"]), tuple(dens["cov"]))
        world = Environment(**w) if w else square_world(d.get("n_agents", BASE_AGENTS))
        if "walk_leg" in d:
            d["walk_leg"] = tuple(d["walk_leg"])
        return ExperimentConfig(policy=policy, sensing=sensing, world=world, **d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# flat (CLI-shaped) configuration ------------------------------------------------

FLAT_KEYS = {
    "scenario": str,
    "policy": str,
    "delta": int,
    "rho": int,
    "agents": int,
    "duration": float,
    "replicates": int,
    "seed": int,
    "active_recruitment": bool,
    "dissolution": bool,
    "event_rate": float,
    "comm_range": float,
    "sensing_range": float,
    "d_min": float,
    "gamma_max": int,
    "recruitment_period": float,
    "rejoin_cooldown": float,
    "grid_resolution": float,
    "dt": float,
    "out": str,
}


def load_flat(path) -> dict:
    """Read a YAML config file into a dict of known flat keys, type-checked."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    out = {}
    for key, value in data.items():
        key = str(key).replace("-", "_")
        if key not in FLAT_KEYS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        typ = FLAT_KEYS[key]
        if typ is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"{path}: {key} must be true/false")
        elif typ is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        elif not isinstance(value, typ) or isinstance(value, bool):
            raise ConfigError(f"{path}: {key} must be {typ.__name__}, got {value!r}")
        out[key] = value
    return out


def from_flat(flat: Mapping[str, Any]) -> ExperimentConfig:
    """Build a config from CLI-shaped keys; anything missing takes the default."""
    n = flat.get("agents", BASE_AGENTS)
    pdef = PolicyConfig()
    try:
        policy = PolicyConfig(
            kind=PolicyKind(flat.get("policy", pdef.kind.value)),
            rho=flat.get("rho", pdef.rho),
            delta=flat.get("delta", pdef.delta),
            d_min=flat.get("d_min", pdef.d_min),
            gamma_max=flat.get("gamma_max", pdef.gamma_max),
            recruitment_period=flat.get("recruitment_period", pdef.recruitment_period),
            active_recruitment_enabled=flat.get("active_recruitment", True),
            dissolution_enabled=flat.get("dissolution", True),
            rejoin_cooldown=flat.get("rejoin_cooldown", pdef.rejoin_cooldown),
        )
        sdef = SensingModel()
        sensing = SensingModel(flat.get("sensing_range", sdef.sensing_range),
                               flat.get("comm_range", sdef.comm_range))
        world = square_world(n, grid_resolution=flat.get("grid_resolution", 1.0))
        if "event_rate" in flat:
            world = dataclasses.replace(world, event_rate=flat["event_rate"])
        cfg = ExperimentConfig(
            n_agents=n,
            duration=flat.get("duration", 9000.0),
            replicates=flat.get("replicates", 20),
            dt=flat.get("dt", 1.0),
            seed=flat.get("seed", 0),
            policy=policy,
            sensing=sensing,
            world=world,
            output_dir=flat.get("out", "runs"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()
