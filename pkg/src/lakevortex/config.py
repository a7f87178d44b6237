"""Run configuration: a YAML key/value tree validated into ``RunConfig``.

Schema (all lengths in lake units)::

    scenario: radial              # free-form tag
    lake:
      shape: {type: disc, center: [0, 0], radius: 2}
      depth: {c: {type: radial, coeffs: [1, 0.5]}, alpha: 0}
      resolution: 128             # cells per unit length
    blobs:
      - {z0: [1, 0], gamma: 1, M0: 1, profile: uniform}   # optional eps, sign
    eps: 0.025                    # default core size for blobs without eps
    eps0: 0.1                     # largest admissible eps
    T: 1.0
    sample_interval: 0.05
    dt: {cfl: 0.5, max: null}
    solver: {method: direct, tol: 1.0e-10}
    sweep: [0.05, 0.025, 0.0125]  # optional
    output: runs/radial
    snapshots: false

Only the output directory may be overridden from the environment
(``LAKEVORTEX_OUTPUT``).
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .blob import PROFILES
from .lake import LakeError, LakeSpec

OUTPUT_ENV = "LAKEVORTEX_OUTPUT"
SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


@dataclass(frozen=True)
class BlobConfig:
    z0: tuple[float, float]
    gamma: float
    M0: float = 1.0
    profile: str = "uniform"
    eps: float | None = None

    @property
    def sign(self) -> int:
        return 1 if self.gamma > 0 else -1

    def to_mapping(self) -> dict:
        d = {"z0": list(self.z0), "gamma": self.gamma, "M0": self.M0, "profile": self.profile}
        if self.eps is not None:
            d["eps"] = self.eps
        return d


@dataclass(frozen=True)
class RunConfig:
    lake: LakeSpec
    blobs: tuple[BlobConfig, ...]
    eps: float
    T: float = 1.0
    sample_interval: float = 0.05
    cfl: float = 0.5
    dt_max: float | None = None
    method: str = "direct"
    tol: float = 1e-10
    sweep: tuple[float, ...] = ()
    output: str = "runs/out"
    scenario: str = "custom"
    eps0: float = 0.1
    snapshots: bool = False
    extra: dict = field(default_factory=dict)

    def blob_eps(self, b: BlobConfig) -> float:
        return self.eps if b.eps is None else b.eps

    def with_eps(self, eps: float) -> "RunConfig":
        """Copy with every blob's core size set to ``eps``."""
        return replace(self, eps=float(eps), blobs=tuple(replace(b, eps=None) for b in self.blobs))

    def with_resolution(self, resolution: int) -> "RunConfig":
        return replace(self, lake=replace(self.lake, resolution=int(resolution)))

    def to_mapping(self) -> dict:
        return {
            "scenario": self.scenario, "lake": self.lake.to_mapping(),
            "blobs": [b.to_mapping() for b in self.blobs], "eps": self.eps, "eps0": self.eps0,
            "T": self.T, "sample_interval": self.sample_interval,
            "dt": {"cfl": self.cfl, "max": self.dt_max},
            "solver": {"method": self.method, "tol": self.tol},
            "sweep": list(self.sweep), "output": self.output, "snapshots": self.snapshots,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_mapping(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _pair(v, what: str) -> tuple[float, float]:
    try:
        x, y = (float(c) for c in v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a pair of numbers") from exc
    return x, y


def _parse_blob(d: Mapping) -> BlobConfig:
    if not isinstance(d, Mapping):
        raise ConfigError("each blob must be a mapping")
    try:
        gamma = float(d["gamma"])
        z0 = _pair(d["z0"], "blob z0")
    except KeyError as exc:
        raise ConfigError(f"blob is missing {exc}") from exc
    if "sign" in d:
        sign = int(d["sign"])
        if sign not in (-1, 1):
            raise ConfigError("blob sign must be -1 or +1")
        if gamma < 0 and sign > 0:
            raise ConfigError("negative gamma contradicts sign +1")
        gamma = sign * abs(gamma)
    profile = str(d.get("profile", "uniform"))
    if profile not in PROFILES:
        raise ConfigError(f"unknown blob profile {profile!r}")
    eps = d.get("eps")
    return BlobConfig(z0=z0, gamma=gamma, M0=float(d.get("M0", 1.0)), profile=profile,
                      eps=None if eps is None else float(eps))


def from_mapping(data: Mapping[str, Any]) -> RunConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("configuration root must be a mapping")
    known = {"scenario", "lake", "blobs", "eps", "eps0", "T", "sample_interval", "dt",
             "solver", "sweep", "output", "snapshots"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        lake = LakeSpec.from_mapping(data["lake"])
        blobs = tuple(_parse_blob(b) for b in data["blobs"])
        dt = data.get("dt") or {}
        solver = data.get("solver") or {}
        sweep = tuple(float(e) for e in (data.get("sweep") or ()))
        eps_default = data.get("eps", sweep[0] if sweep else None)
        if eps_default is None:
            raise ConfigError("no eps given (set 'eps' or 'sweep')")
        cfg = RunConfig(
            lake=lake, blobs=blobs, eps=float(eps_default), T=float(data.get("T", 1.0)),
            sample_interval=float(data.get("sample_interval", 0.05)),
            cfl=float(dt.get("cfl", 0.5)),
            dt_max=None if dt.get("max") is None else float(dt["max"]),
            method=str(solver.get("method", "direct")), tol=float(solver.get("tol", 1e-10)),
            sweep=sweep, output=str(data.get("output", "runs/out")),
            scenario=str(data.get("scenario", "custom")), eps0=float(data.get("eps0", 0.1)),
            snapshots=bool(data.get("snapshots", False)))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, LakeError) as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Structural checks that need no grid; grid-level checks happen at init."""
    if not cfg.blobs:
        raise ConfigError("at least one blob is required")
    if cfg.T < 0 or cfg.sample_interval <= 0:
        raise ConfigError("need T >= 0 and sample_interval > 0")
    if not (0 < cfg.cfl <= 1):
        raise ConfigError("dt.cfl must lie in (0, 1]")
    if cfg.dt_max is not None and cfg.dt_max <= 0:
        raise ConfigError("dt.max must be positive")
    if cfg.method not in ("cg", "direct"):
        raise ConfigError("solver.method must be 'cg' or 'direct'")
    if cfg.lake.resolution <= 0:
        raise ConfigError("lake.resolution must be positive")
    eps_all = [cfg.eps, *cfg.sweep, *(b.eps for b in cfg.blobs if b.eps is not None)]
    for e in eps_all:
        if not (0 < e < 1):
            raise ConfigError(f"eps={e} must lie in (0, 1)")
        if e > cfg.eps0:
            raise ConfigError(f"eps={e} exceeds eps0={cfg.eps0}")
    if len(set(cfg.sweep)) != len(cfg.sweep):
        raise ConfigError("sweep eps values must be distinct")
    for b in cfg.blobs:
        if b.gamma == 0:
            raise ConfigError("blob gamma must be nonzero")
        if b.M0 <= 0:
            raise ConfigError("blob M0 must be positive")
        if not cfg.lake.phi(b.z0) > 0:
            raise ConfigError(f"blob center {b.z0} is outside the lake")


def load(path) -> RunConfig:
    """Parse a YAML file; ``LAKEVORTEX_OUTPUT`` overrides the output directory."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    cfg = from_mapping(data)
    if os.environ.get(OUTPUT_ENV):
        cfg = replace(cfg, output=os.environ[OUTPUT_ENV])
    return cfg


def dump(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_mapping(), sort_keys=False))


# ---------------------------------------------------------------------------
# built-in scenarios

SWEEP = (0.05, 0.025, 0.0125)

_RADIAL_LAKE = {"shape": {"type": "disc", "center": [0, 0], "radius": 2.0},
                "depth": {"c": {"type": "radial", "coeffs": [1.0, 0.5]}, "alpha": 0},
                "resolution": 128}
_UNIT_FLAT = {"shape": {"type": "disc", "center": [0, 0], "radius": 1.0},
              "depth": {"c": {"type": "constant", "value": 1.0}, "alpha": 0},
              "resolution": 128}
_BEACH = {"shape": {"type": "disc", "center": [0, 0], "radius": 1.0},
          "depth": {"c": {"type": "constant", "value": 1.0}, "alpha": 1},
          "resolution": 128}
_AFFINE = {"shape": {"type": "rectangle", "bounds": [0, 1, 0, 1]},
           "depth": {"c": {"type": "affine", "value": 0.1, "slope": [0, 1]}, "alpha": 0},
           "resolution": 128}

SCENARIOS: dict[str, dict] = {
    "radial": {"lake": _RADIAL_LAKE, "blobs": [{"z0": [1.0, 0.0], "gamma": 1.0}]},
    "flat": {"lake": _UNIT_FLAT, "blobs": [{"z0": [0.5, 0.0], "gamma": 1.0}]},
    "beach": {"lake": _BEACH, "blobs": [{"z0": [0.5, 0.0], "gamma": 1.0}]},
    "affine": {"lake": _AFFINE, "blobs": [{"z0": [0.5, 0.5], "gamma": 1.0}]},
    "two-vortex": {"lake": _RADIAL_LAKE, "eps": 0.025,
                   "blobs": [{"z0": [0.6, 0.0], "gamma": 1.0},
                             {"z0": [-1.2, 0.0], "gamma": -1.0}]},
}


def scenario_mapping(name: str) -> dict:
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    base = copy.deepcopy(SCENARIOS[name])
    data = {"scenario": name, "T": 1.0, "sample_interval": 0.05, "sweep": list(SWEEP),
            "output": f"runs/{name}", "dt": {"cfl": 0.5, "max": None},
            "solver": {"method": "direct", "tol": 1e-10}}
    data.update(base)
    return data


def scenario(name: str, **overrides) -> RunConfig:
    data = scenario_mapping(name)
    data.update(overrides)
    return from_mapping(data)
