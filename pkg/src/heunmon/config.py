"""Run configuration shared by every module."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

SCHEMA_VERSION = "1.0"


@dataclass(frozen=True)
class Config:
    # q-series truncation: dropped term below series_tol * partial sum
    series_tol: float = 1e-18
    max_series_terms: int = 2000
    pole_threshold: float = 1e-9
    # ODE
    ode_rtol: float = 1e-12
    ode_atol: float = 1e-13
    clearance_factor: float = 0.05
    base_point: tuple = (0.31, 0.43)  # (x, y) in (1, tau) coordinates
    base_seed: int = 20240611
    local_loop_tol: float = 1e-7
    # linear algebra / classification
    rank_tol: float = 1e-7
    parabolic_tol: float = 1e-6
    unitary_tol: float = 1e-7
    dedup_tol: float = 1e-6
    # grids
    count_resolution: int = 10
    rs_grid: int = 48
    exclusion_radius: float = 0.05
    threads: int = 1

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not v > 0:
                raise ValueError(f"config field {f.name} must be positive")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["base_point"] = list(self.base_point)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        d = dict(d)
        if "base_point" in d:
            d["base_point"] = tuple(d["base_point"])
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


DEFAULT = Config()


def load_config(path: str | None = None) -> Config:
    """Read a JSON config file; falls back to $HEUNMON_CONFIG, then defaults."""
    path = path or os.environ.get("HEUNMON_CONFIG")
    if not path:
        return DEFAULT
    with open(path) as fh:
        return Config.from_dict(json.load(fh))
