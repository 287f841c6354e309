"""Run configuration: one flat record of every sampler hyperparameter.

Serialized as flat JSON; CLI flags override file values.  The theta grid can
be given explicitly (`theta_grid: [..]`) or as a spec
(`grid_min/grid_max/grid_count/grid_spacing`), which is resolved eagerly so
round-tripping a parsed config is idempotent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError
from .mutation import MutationModel, make_binary_model, make_stepwise_model

# sampling thetas near the modes visible in the reference experiments;
# arbitrary but stable defaults
DEFAULT_THETA0 = {"binary": 2.0, "stepwise": 5.0}


@dataclass
class RunConfig:
    model: str = "binary"
    num_states: int = 2
    theta0: float | None = None
    theta_grid: list = field(default_factory=list)
    iterations: int = 2000
    burn_in: int = 800
    thinning: int = 1
    particles: int = 200
    gibbs_rounds: int = 50
    csmc_mode: str = "smc"
    grid_points: int = 256
    seed: int = 0
    input_path: str | None = None
    output_path: str | None = None
    checkpoint_path: str | None = None
    checkpoint_interval: int = 0  # 0 disables checkpointing

    def __post_init__(self):
        if self.theta0 is None:
            self.theta0 = DEFAULT_THETA0.get(self.model, 1.0)
        self.validate()

    def validate(self) -> None:
        if self.model not in ("binary", "stepwise"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.model == "binary" and self.num_states != 2:
            raise ConfigError("binary model has exactly 2 states")
        if self.num_states < 2:
            raise ConfigError("num_states must be at least 2")
        if not self.theta0 > 0:
            raise ConfigError("theta0 must be positive")
        if any(not t > 0 for t in self.theta_grid):
            raise ConfigError("theta grid values must be positive")
        for name in ("iterations", "thinning", "particles", "gibbs_rounds", "grid_points"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.csmc_mode not in ("sis", "smc"):
            raise ConfigError(f"unknown csmc_mode {self.csmc_mode!r}")
        if self.checkpoint_interval < 0:
            raise ConfigError("checkpoint_interval must be nonnegative")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must fit in 64 unsigned bits")

    def make_model(self) -> MutationModel:
        if self.model == "binary":
            return make_binary_model()
        return make_stepwise_model(self.num_states)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        obj = dict(obj)
        grid_spec = {k: obj.pop(k, None) for k in
                     ("grid_min", "grid_max", "grid_count", "grid_spacing")}
        if grid_spec["grid_min"] is not None:
            if obj.get("theta_grid"):
                raise ConfigError("give either theta_grid or grid_min/max/count, not both")
            obj["theta_grid"] = resolve_grid(
                grid_spec["grid_min"], grid_spec["grid_max"],
                grid_spec["grid_count"] or 9, grid_spec["grid_spacing"] or "log")
        unknown = set(obj) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_json(obj)

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


def resolve_grid(lo: float, hi: float, count: int, spacing: str) -> list:
    if not 0 < lo < hi:
        raise ConfigError("grid bounds must satisfy 0 < min < max")
    if count < 1:
        raise ConfigError("grid count must be at least 1")
    if spacing == "log":
        return [float(t) for t in np.geomspace(lo, hi, count)]
    if spacing == "linear":
        return [float(t) for t in np.linspace(lo, hi, count)]
    raise ConfigError(f"unknown grid spacing {spacing!r}")
