import numpy as np
import pytest
import yaml

from esorl import config as cfgmod
from esorl.errors import ConfigError


@pytest.mark.parametrize("name", cfgmod.BUNDLED)
def test_bundled_configs_resolve_and_round_trip(name):
    cfg = cfgmod.resolve(cfgmod.load(name))
    again = cfgmod.resolve(yaml.safe_load(cfgmod.dump(cfg)))
    assert again == cfg
    exp = cfgmod.build(cfg)
    assert exp.observer.n == exp.plant.n


def test_grid_configs_differ_only_in_grid_size():
    base = cfgmod.resolve(cfgmod.load("example1_known_basis"))
    for a in (2, 3, 5, 9):
        cfg = cfgmod.resolve(cfgmod.load(f"example1_grid_{a}"))
        assert cfg["learner"]["grid"]["a"] == a
        assert cfgmod.with_grid(base, a)["learner"] == cfg["learner"]
        assert cfg["observer"] == base["observer"] and cfg["sim"] == base["sim"]


def test_known_basis_settings():
    cfg = cfgmod.resolve(cfgmod.load("example1_known_basis"))
    assert cfg["observer"]["L"] == [3.0, 3.0, 1.0] and cfg["observer"]["epsilon"] == 0.02
    assert cfg["learner"]["gains"] == dict(lambda_v1=1.0, lambda_v2=5.0, lambda_c1=100.0, lambda_c2=0.1,
                                           beta=100.0, gamma=0.5, sigma1=2000.0)
    assert cfg["sim"]["h"] == 1e-3 and cfg["sim"]["T"] == 100.0
    assert cfg["sim"]["x0"] == [1.5, 1.5]


def test_random_initial_weights_are_seeded():
    raw = cfgmod.load("example2")
    a = cfgmod.resolve(raw)
    b = cfgmod.resolve(raw)
    c = cfgmod.resolve(raw, seed=1)
    assert a["learner"]["theta_c0"] == b["learner"]["theta_c0"]
    assert a["learner"]["theta_c0"] != c["learner"]["theta_c0"]
    rng = np.random.default_rng(a["seed"])
    assert a["learner"]["theta_v0"] == rng.uniform(0, 2, 6).tolist()
    assert a["learner"]["theta_c0"] == rng.uniform(0, 2, 6).tolist()
    assert all(0 <= v <= 2 for v in a["learner"]["theta_v0"] + a["learner"]["theta_c0"])


def test_defaults_are_filled():
    raw = {"observer": {"epsilon": 0.02, "M": [2, 2, 2]},
           "learner": {"gains": dict(lambda_v1=1, lambda_v2=5, lambda_c1=100, lambda_c2=0.1, beta=100,
                                     gamma=0.5, sigma1=2000)},
           "sim": {"x0": [1, 1]}}
    cfg = cfgmod.resolve(raw)
    assert cfg["observer"]["L"] == [3.0, 3.0, 1.0]
    assert cfg["learner"]["basis"] == "quad2" and cfg["learner"]["grid"]["a"] == 5
    assert cfg["sim"]["h"] == pytest.approx(1e-3) and cfg["sim"]["T"] == 100.0
    assert cfg["sim"]["z0"] == [0.0]


@pytest.mark.parametrize("mutate,match", [
    (lambda c: c.update(bogus=1), "unknown config keys"),
    (lambda c: c["observer"].pop("epsilon"), "epsilon"),
    (lambda c: c["learner"]["gains"].pop("beta"), "missing"),
    (lambda c: c["learner"].update(theta_c0={"normal": [0, 1]}), "random"),
    (lambda c: c["sim"].pop("x0"), "x0"),
    (lambda c: c["observer"].update(M=["a", 1, 1]), "numeric"),
])
def test_invalid_configs(mutate, match):
    raw = cfgmod.load("example1_known_basis")
    mutate(raw)
    with pytest.raises(ConfigError, match=match):
        cfgmod.resolve(raw)


@pytest.mark.parametrize("mutate,match", [
    (lambda c: c["observer"].update(L=[1.0, 0.0, 0.0]), "Hurwitz"),
    (lambda c: c["sim"].update(h=0.011), "stiffness"),
    (lambda c: c["learner"].update(basis="quad3"), "basis"),
    (lambda c: c["sim"].update(x0=[1.0, 1.0, 1.0]), "x0"),
])
def test_build_validation(mutate, match):
    cfg = cfgmod.resolve(cfgmod.load("example1_known_basis"))
    mutate(cfg)
    with pytest.raises(ConfigError, match=match):
        cfgmod.build(cfg)


def test_unknown_source():
    with pytest.raises(ConfigError):
        cfgmod.load("no_such_config")
    with pytest.raises(ConfigError):
        cfgmod.bundled_path("no_such_config")
