import numpy as np
import pytest

from returnstats.config import ConfigError, ExperimentConfig
from returnstats.dynamics import (CmlSystem, LinearMod1System,
                                  PiecewiseSystem, TorusAffineSystem)
from returnstats.regenerative import RegenSpec
from returnstats.targets import Ball, DiagonalStrip, TorusStrip

TORUS_YAML = """
experiment: torus-sweep
system: {kind: torus, a: 2}
target: {kind: torus_strip}
schedule:
  - {rho: 1.0e-2, K: 50}
  - {rho: 1.0e-3, K: 50, n_trials: 500}
seed: 42
workers: 2
"""


def test_round_trip_is_identity():
    cfg = ExperimentConfig.from_yaml(TORUS_YAML)
    again = ExperimentConfig.from_yaml(cfg.to_yaml())
    assert again.to_dict() == cfg.to_dict()
    assert again == cfg


def test_defaults_are_echoed_explicitly():
    cfg = ExperimentConfig.from_yaml(TORUS_YAML)
    row = cfg.to_dict()["schedule"][0]
    # every defaulted knob appears in the serialized row
    for key in ("K", "L", "t", "n_trials", "min_entries", "max_orbit", "k_max"):
        assert key in row
    assert row["L"] == 1000 and row["min_entries"] == 1000
    d = cfg.to_dict()
    assert d["threshold"] == 0.01 and d["outputs"]["dir"] == "results"


def test_schedule_scale_names():
    cfg = ExperimentConfig.from_yaml(TORUS_YAML)
    assert cfg.scale_name == "rho"
    assert cfg.schedule[0].label("rho") == "rho0p01_K50"


def test_missing_sections_and_bad_kinds():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"system": {"kind": "torus"}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_yaml(TORUS_YAML.replace("kind: torus,", "kind: pendulum,"))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_yaml(TORUS_YAML.replace("kind: torus_strip", "kind: moon"))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_yaml("not: [valid")  # YAML error -> ConfigError


def test_level_set_pairs_with_regenerative_only():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_yaml(TORUS_YAML.replace("kind: torus_strip",
                                                      "kind: level_set"))
    cfg = ExperimentConfig.from_yaml("""
system: {kind: regenerative, block_rule: smith, k_cap: 1000}
target: {kind: level_set}
schedule: [{m: 100, K: 10}]
""")
    spec = cfg.build_regen_spec()
    assert isinstance(spec, RegenSpec) and spec.k_cap == 1000


def test_schedule_validation():
    base = ExperimentConfig.from_yaml(TORUS_YAML).to_dict()
    bad = dict(base, schedule=[])
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(dict(base, schedule=[{"K": 5}]))  # missing rho
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(dict(base, schedule=[{"rho": 0.1, "frobnicate": 1}]))


def test_numeric_range_validation():
    base = ExperimentConfig.from_yaml(TORUS_YAML).to_dict()
    for patch in ({"seed": -1}, {"seed": 2**64}, {"workers": 0},
                  {"threshold": 1.5}):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(dict(base, **patch))


def test_build_system_families():
    assert isinstance(ExperimentConfig.from_yaml(TORUS_YAML).build_system(),
                      TorusAffineSystem)
    cfg = ExperimentConfig.from_yaml("""
system: {kind: linear_mod1, a: 3}
target: {kind: ball, center: [0.5]}
schedule: [{rho: 1.0e-3}]
""")
    assert isinstance(cfg.build_system(), LinearMod1System)
    target = cfg.build_target(cfg.schedule[0])
    assert isinstance(target, Ball) and not target.periodic

    cml = ExperimentConfig.from_yaml("""
system: {kind: cml, a: 2, n: 3, gamma: 0.1}
target: {kind: diagonal_strip}
schedule: [{nu: 1.0e-3}]
""")
    system = cml.build_system()
    assert isinstance(system, CmlSystem) and system.spec.n == 3
    np.testing.assert_allclose(system.spec.weights, np.full(3, 1 / 3))
    assert isinstance(cml.build_target(cml.schedule[0]), DiagonalStrip)

    pw = ExperimentConfig.from_yaml("""
system: {kind: piecewise_sine, a: 3, eps: 0.05, burn_in: 64}
target: {kind: ball, center: [0.3]}
schedule: [{rho: 1.0e-2}]
""")
    assert isinstance(pw.build_system(), PiecewiseSystem)


def test_ball_is_periodic_exactly_on_the_torus():
    torus_ball = ExperimentConfig.from_yaml("""
system: {kind: torus, a: 2}
target: {kind: ball, center: [0.3, 0.7]}
schedule: [{rho: 1.0e-2}]
""")
    assert torus_ball.build_target(torus_ball.schedule[0]).periodic
    strip = ExperimentConfig.from_yaml(TORUS_YAML)
    assert isinstance(strip.build_target(strip.schedule[0]), TorusStrip)


def test_load_from_file(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text(TORUS_YAML)
    cfg = ExperimentConfig.load(p)
    assert cfg.seed == 42 and cfg.workers == 2
