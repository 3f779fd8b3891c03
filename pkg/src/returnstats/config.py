"""Experiment configuration: YAML schema, validation, object construction.

A config names a system, a target family, and a schedule of experiment
rows (one scale value per row plus window/horizon/trial settings).  Every
defaulted value is filled in explicitly at load time so the manifest can
echo the exact parameters a run used.

Schema (YAML):

    experiment: torus-strip-sweep        # free-form label
    system:
      kind: torus                        # torus | linear_mod1 | cml |
      a: 2                               #   piecewise_sine | regenerative
      # cml only: n, gamma, weights
      # piecewise_sine only: eps, burn_in
      # regenerative only: block_rule, cluster_lambdas, k_cap
    target:
      kind: torus_strip                  # ball | torus_strip | diagonal_strip
      center: [0.5]                      #   | level_set (regenerative)
      periodic_period: 1                 # optional: target around a periodic
                                         # point of known period (predictions)
    schedule:
      - {rho: 1.0e-3, K: 50, L: 1000, t: 1.0, n_trials: 100000,
         min_entries: 10000, max_orbit: 50000000}
    seed: 1234
    workers: 1
    threshold: 0.01
    outputs: {dir: results, formats: [json, csv]}

Scale parameter per row: ``rho`` (ball / torus_strip), ``nu``
(diagonal_strip) or ``m`` (level_set).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .distributions import ClusterSizeDist
from .dynamics import (CmlSpec, CmlSystem, LinearMod1System, PiecewiseSystem,
                       SinePerturbedInterval, TorusAffineSystem)
from .regenerative import RegenSpec
from .targets import Ball, DiagonalStrip, TorusStrip

__all__ = ["ExperimentConfig", "ConfigError", "ScheduleRow"]

_ROW_DEFAULTS = {
    "K": 10,
    "L": 1000,
    "t": 1.0,
    "n_trials": 10000,
    "min_entries": 1000,
    "max_orbit": 20_000_000,
    "orbit_len": None,
    "stream_len": None,
    "k_max": 6,
}


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass(frozen=True)
class ScheduleRow:
    scale: float            # rho, nu or m depending on the target kind
    K: int
    L: int
    t: float
    n_trials: int
    min_entries: int
    max_orbit: int
    orbit_len: int | None = None
    stream_len: int | None = None
    k_max: int = 6

    def label(self, scale_name: str) -> str:
        s = f"{self.scale:g}".replace(".", "p").replace("-", "m")
        return f"{scale_name}{s}_K{self.K}"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    system: dict
    target: dict
    schedule: tuple
    seed: int
    workers: int
    threshold: float
    outputs: dict

    # ------------------------------------------------------------------
    # parsing / serialization
    # ------------------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        for key in ("system", "target", "schedule"):
            if key not in raw:
                raise ConfigError(f"missing required section {key!r}")
        system = dict(raw["system"])
        target = dict(raw["target"])
        kind = system.get("kind")
        if kind not in ("torus", "linear_mod1", "cml", "piecewise_sine", "regenerative"):
            raise ConfigError(f"unknown system kind {kind!r}")
        tkind = target.get("kind")
        if tkind not in ("ball", "torus_strip", "diagonal_strip", "level_set"):
            raise ConfigError(f"unknown target kind {tkind!r}")
        if (kind == "regenerative") != (tkind == "level_set"):
            raise ConfigError("level_set targets pair with regenerative systems only")

        rows = raw["schedule"]
        if not isinstance(rows, list) or not rows:
            raise ConfigError("schedule must be a non-empty list")
        scale_name = cls._scale_name(tkind)
        schedule = []
        for row in rows:
            row = dict(row)
            if scale_name not in row:
                raise ConfigError(f"schedule row missing scale parameter {scale_name!r}")
            merged = dict(_ROW_DEFAULTS)
            merged.update({k: v for k, v in row.items() if k != scale_name})
            unknown = set(merged) - set(_ROW_DEFAULTS)
            if unknown:
                raise ConfigError(f"unknown schedule keys {sorted(unknown)}")
            schedule.append(ScheduleRow(scale=float(row[scale_name]), **merged))

        seed = int(raw.get("seed", 0))
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        workers = int(raw.get("workers", 1))
        if workers < 1:
            raise ConfigError("workers must be >= 1")
        threshold = float(raw.get("threshold", 0.01))
        if not 0.0 <= threshold < 1.0:
            raise ConfigError("threshold must lie in [0, 1)")
        outputs = dict(raw.get("outputs", {}))
        outputs.setdefault("dir", "results")
        outputs.setdefault("formats", ["json", "csv"])

        return cls(experiment=str(raw.get("experiment", "experiment")),
                   system=system, target=target, schedule=tuple(schedule),
                   seed=seed, workers=workers, threshold=threshold,
                   outputs=outputs)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"invalid YAML: {e}") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_yaml(Path(path).read_text())

    def to_dict(self) -> dict:
        scale_name = self._scale_name(self.target["kind"])
        rows = []
        for r in self.schedule:
            d = {scale_name: r.scale, "K": r.K, "L": r.L, "t": r.t,
                 "n_trials": r.n_trials, "min_entries": r.min_entries,
                 "max_orbit": r.max_orbit, "k_max": r.k_max}
            if r.orbit_len is not None:
                d["orbit_len"] = r.orbit_len
            if r.stream_len is not None:
                d["stream_len"] = r.stream_len
            rows.append(d)
        return {"experiment": self.experiment, "system": dict(self.system),
                "target": dict(self.target), "schedule": rows, "seed": self.seed,
                "workers": self.workers, "threshold": self.threshold,
                "outputs": dict(self.outputs)}

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    # ------------------------------------------------------------------
    # object construction
    # ------------------------------------------------------------------

    @staticmethod
    def _scale_name(target_kind: str) -> str:
        return {"ball": "rho", "torus_strip": "rho",
                "diagonal_strip": "nu", "level_set": "m"}[target_kind]

    @property
    def scale_name(self) -> str:
        return self._scale_name(self.target["kind"])

    def build_system(self):
        s = self.system
        kind = s["kind"]
        if kind == "torus":
            return TorusAffineSystem(int(s.get("a", 2)))
        if kind == "linear_mod1":
            return LinearMod1System(int(s.get("a", 2)))
        if kind == "cml":
            n = int(s.get("n", 2))
            weights = s.get("weights")
            w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, float)
            spec = CmlSpec(base_map=self._base_map(), n=n,
                           gamma=float(s.get("gamma", 0.0)), weights=w)
            return CmlSystem(spec, burn_in=int(s.get("burn_in", 1024)))
        if kind == "piecewise_sine":
            imap = SinePerturbedInterval(int(s.get("a", 2)), float(s.get("eps", 0.1)))
            return PiecewiseSystem(imap, burn_in=int(s.get("burn_in", 1024)))
        if kind == "regenerative":
            return None  # regenerative runs go through build_regen_spec
        raise ConfigError(f"unknown system kind {kind!r}")

    def _base_map(self):
        s = self.system
        eps = float(s.get("eps", 0.0))
        a = int(s.get("a", 2))
        if eps:
            return SinePerturbedInterval(a, eps)
        from .dynamics import LinearInterval
        return LinearInterval(a)

    def build_regen_spec(self) -> RegenSpec:
        s = self.system
        k_cap = int(s.get("k_cap", 10**5))
        rule = s.get("block_rule", "smith")
        if rule == "smith":
            return RegenSpec.smith(k_cap)
        if rule == "fixed_lengths":
            lam = s.get("cluster_lambdas")
            if lam is None:
                raise ConfigError("fixed_lengths needs cluster_lambdas")
            return RegenSpec.fixed_lengths(ClusterSizeDist(np.asarray(lam, float)), k_cap)
        raise ConfigError(f"unknown block rule {rule!r}")

    def build_target(self, row: ScheduleRow):
        t = self.target
        kind = t["kind"]
        if kind == "ball":
            center = t.get("center", [0.5])
            periodic = self.system["kind"] == "torus"
            return Ball(center=tuple(center), rho=row.scale, periodic=periodic)
        if kind == "torus_strip":
            return TorusStrip(rho=row.scale)
        if kind == "diagonal_strip":
            return DiagonalStrip(nu=row.scale)
        if kind == "level_set":
            return int(row.scale)  # handled by the regenerative path
        raise ConfigError(f"unknown target kind {kind!r}")
