"""Run configuration: a JSON file with flat keys plus flag overrides.

Top-level keys describe the experiment (world, formation, batch size and
output location); the ``sim`` and ``weights`` sections override individual
fields of SimConfig and CostWeights.  Every key can also be set from the
command line; flags win over file values.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .agent import SimConfig
from .cost import CostWeights
from .errors import ConfigError

KNOWN_FORMATIONS = ("diamond", "line", "rectangle", "triangle")
KNOWN_KINDS = ("forest", "sharp_turn")
YAW_MODES = ("dpso", "velocity")


@dataclass
class RunConfig:
    scenario: str = "forest"       # generator kind, or a path to a world json
    density: float = 0.045
    formation: str = "diamond"
    episodes: int = 1
    seed: int = 0
    out_dir: str = "runs/out"
    yaw_mode: str = "dpso"
    gmm_enabled: bool = True
    stgo_enabled: bool = True
    min_success_rate: float = 0.0  # batch fails (exit 1) below this
    sim: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)

    def validate(self):
        if not self._scenario_is_file() and self.scenario not in KNOWN_KINDS:
            raise ConfigError(
                f"scenario: {self.scenario!r} is neither a known kind "
                f"{KNOWN_KINDS} nor an existing file")
        if self.formation not in KNOWN_FORMATIONS:
            raise ConfigError(
                f"formation: {self.formation!r} not one of {KNOWN_FORMATIONS}")
        if self.episodes < 1:
            raise ConfigError("episodes: must be at least 1")
        if self.density < 0:
            raise ConfigError("density: must be nonnegative")
        if self.yaw_mode not in YAW_MODES:
            raise ConfigError(f"yaw_mode: {self.yaw_mode!r} not in {YAW_MODES}")
        if not 0.0 <= self.min_success_rate <= 1.0:
            raise ConfigError("min_success_rate: must lie in [0, 1]")
        sim_fields = {f.name for f in dataclasses.fields(SimConfig)}
        for k in self.sim:
            if k not in sim_fields:
                raise ConfigError(f"sim.{k}: unknown SimConfig field")
        w_fields = {f.name for f in dataclasses.fields(CostWeights)}
        for k in self.weights:
            if k not in w_fields:
                raise ConfigError(f"weights.{k}: unknown CostWeights field")
        # instantiating runs the dataclass-level validation too
        self.build_sim_config()
        return self

    def _scenario_is_file(self):
        return self.scenario.endswith(".json") or Path(self.scenario).is_file()

    def build_sim_config(self):
        weights = CostWeights(**self.weights).validate()
        sim_kwargs = dict(self.sim)
        sim_kwargs.setdefault("yaw_mode", self.yaw_mode)
        sim_kwargs.setdefault("gmm_enabled", self.gmm_enabled)
        sim_kwargs.setdefault("stgo_enabled", self.stgo_enabled)
        try:
            cfg = SimConfig(weights=weights, **sim_kwargs)
        except TypeError as exc:
            raise ConfigError(f"sim: {exc}") from exc
        if cfg.yaw_mode not in YAW_MODES:
            raise ConfigError(f"sim.yaw_mode: {cfg.yaw_mode!r} not in {YAW_MODES}")
        return cfg

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        for k in d:
            if k not in known:
                raise ConfigError(f"{k}: unknown configuration key")
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as f:
                d = json.load(f)
        except OSError as exc:
            raise ConfigError(f"config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file: invalid json ({exc})") from exc
        if not isinstance(d, dict):
            raise ConfigError("config file: top level must be an object")
        return cls.from_dict(d)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
