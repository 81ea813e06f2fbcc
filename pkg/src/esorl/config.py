"""YAML run configurations: loading, default filling and object construction.

A configuration is a nested mapping with the groups ``plant``, ``observer``,
``learner`` and ``sim`` plus a top-level ``seed``.  :func:`resolve` fills
every default and replaces random initial weights by the numbers actually
drawn, so dumping the resolved mapping and loading it again reproduces the
run bit for bit.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dynamics import CostSpec, NominalModel, NormalFormPlant, get_plant
from .errors import ConfigError
from .learner import ExtrapolationGrid, LearnerConfig, LearnerGains, get_basis, make_grid
from .observer import EsoConfig, binomial_gains
from .sim import SimConfig

BUNDLED = (
    "example1_known_basis",
    "example1_unknown_basis",
    "example1_grid_2",
    "example1_grid_3",
    "example1_grid_5",
    "example1_grid_9",
    "example2",
)

GAIN_KEYS = ("lambda_v1", "lambda_v2", "lambda_c1", "lambda_c2", "beta", "gamma", "sigma1")
TOP_KEYS = {"name", "seed", "plant", "observer", "learner", "sim"}


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ConfigError(f"unknown bundled config {name!r}; known: {', '.join(BUNDLED)}")
    return Path(str(resources.files("esorl") / "configs" / f"{name}.yaml"))


def load(source) -> dict:
    """Read a config from a path, or by bundled name when no such file exists."""
    path = Path(source)
    if not path.exists() and str(source) in BUNDLED:
        path = bundled_path(str(source))
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {source}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {source} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {source} must be a mapping")
    return raw


def _floats(v, what: str) -> list[float]:
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be numeric, got {v!r}") from None
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what} must be finite")
    return arr.tolist()


def _initial_weights(value, l: int, rng, what: str) -> list[float]:
    """Explicit list, a scalar repeated ``l`` times, or ``{random: [lo, hi]}``."""
    if isinstance(value, dict):
        if set(value) != {"random"}:
            raise ConfigError(f"{what}: only the key 'random' is understood")
        lo, hi = _floats(value["random"], f"{what}.random")
        return rng.uniform(lo, hi, l).tolist()
    vals = _floats(value, what)
    if np.ndim(vals) == 0:
        return [float(vals)] * l
    return vals


def resolve(raw: dict, seed: int | None = None) -> dict:
    """Return a fully specified copy of ``raw``.

    ``seed`` overrides the config seed.  Initial weights given as
    ``{random: [lo, hi]}`` are drawn in the order ``theta_v0``, ``theta_c0``
    from one generator seeded with the run seed.
    """
    raw = copy.deepcopy(raw)
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    seed = int(raw.get("seed", 0) if seed is None else seed)
    if seed < 0:
        raise ConfigError("seed must be nonnegative")
    rng = np.random.default_rng(seed)

    pl = dict(raw.get("plant") or {})
    pl.setdefault("name", "example1")
    pl.setdefault("params", {})
    plant, _, _ = get_plant(pl["name"], **pl["params"])
    n = plant.n

    ob = dict(raw.get("observer") or {})
    ob["L"] = _floats(ob.get("L", binomial_gains(n).tolist()), "observer.L")
    if "epsilon" not in ob:
        raise ConfigError("observer.epsilon is required")
    ob["epsilon"] = float(ob["epsilon"])
    if "M" not in ob:
        raise ConfigError("observer.M is required")
    ob["M"] = _floats(ob["M"], "observer.M")
    ob["initial"] = _floats(ob.get("initial", [0.0] * (n + 1)), "observer.initial")

    lr = dict(raw.get("learner") or {})
    lr.setdefault("basis", "quad2" if n == 2 else "quad3")
    basis = get_basis(lr["basis"])
    grid = dict(lr.get("grid") or {})
    if "points" in grid:
        # explicit extrapolation points replace the uniform a^n grid
        if "a" in grid:
            raise ConfigError("learner.grid takes either 'points' or 'a', not both")
        grid["points"] = _floats(grid["points"], "learner.grid.points")
        if np.ndim(grid["points"]) != 2 or np.shape(grid["points"])[1] != n or not grid["points"]:
            raise ConfigError(f"learner.grid.points must be a nonempty list of {n}-vectors")
    else:
        grid.setdefault("a", 5)
        grid["a"] = int(grid["a"])
    grid["box"] = _floats(grid.get("box", [list(b) for b in plant.x_box]), "learner.grid.box")
    lr["grid"] = grid
    gains = dict(lr.get("gains") or {})
    missing = [k for k in GAIN_KEYS if k not in gains]
    if missing:
        raise ConfigError(f"learner.gains is missing {missing}")
    extra = set(gains) - set(GAIN_KEYS)
    if extra:
        raise ConfigError(f"unknown learner gains: {sorted(extra)}")
    lr["gains"] = {k: float(gains[k]) for k in GAIN_KEYS}
    lr["theta_v0"] = _initial_weights(lr.get("theta_v0", 0.5), basis.l, rng, "learner.theta_v0")
    lr["theta_c0"] = _initial_weights(lr.get("theta_c0", 0.5), basis.l, rng, "learner.theta_c0")
    lr["Gamma0_diag"] = _initial_weights(lr.get("Gamma0_diag", 100.0), basis.l, rng, "learner.Gamma0_diag")
    lr["grid_stride"] = int(lr.get("grid_stride", 1))

    sm = dict(raw.get("sim") or {})
    # one step per 1/20 of the observer time scale: 1e-3 at eps = 0.02
    sm["h"] = float(sm.get("h", ob["epsilon"] / 20.0))
    sm["T"] = float(sm.get("T", 200.0 if basis.l > 3 and n == 2 else 100.0))
    sm["record_stride"] = int(sm.get("record_stride", 100))
    if "x0" not in sm:
        raise ConfigError("sim.x0 is required")
    sm["x0"] = _floats(sm["x0"], "sim.x0")
    sm["z0"] = _floats(sm.get("z0", [0.0] * plant.p), "sim.z0")
    sm["u_max"] = None if sm.get("u_max") is None else float(sm["u_max"])

    return {
        "name": str(raw.get("name", pl["name"])),
        "seed": seed,
        "plant": pl,
        "observer": ob,
        "learner": lr,
        "sim": sm,
    }


@dataclass
class Experiment:
    """Everything :func:`esorl.sim.run` needs, built from a resolved config."""

    config: dict
    plant: NormalFormPlant
    model: NominalModel
    cost: CostSpec
    observer: EsoConfig
    learner: LearnerConfig
    sim: SimConfig

    def run(self, progress=None):
        from .sim import run

        return run(self.plant, self.model, self.cost, self.observer, self.learner, self.sim, progress)


def build(cfg: dict) -> Experiment:
    """Construct and validate the run objects from a resolved config."""
    pl, ob, lr, sm = cfg["plant"], cfg["observer"], cfg["learner"], cfg["sim"]
    plant, model, cost = get_plant(pl["name"], **pl["params"])
    observer = EsoConfig(L=ob["L"], epsilon=ob["epsilon"], M=ob["M"], initial=ob["initial"])
    if observer.n != plant.n:
        raise ConfigError(f"observer.L has {len(ob['L'])} gains, plant needs {plant.n + 1}")
    basis = get_basis(lr["basis"])
    if basis.n != plant.n:
        raise ConfigError(f"basis {lr['basis']!r} is for n={basis.n}, plant has n={plant.n}")
    box = np.asarray(lr["grid"]["box"], dtype=float)
    if box.shape != (plant.n, 2) or np.any(box[:, 0] > box[:, 1]):
        raise ConfigError(f"learner.grid.box must be {plant.n} (lo, hi) pairs")
    if "points" in lr["grid"]:
        grid = ExtrapolationGrid(np.asarray(lr["grid"]["points"], dtype=float))
    else:
        grid = make_grid(box, lr["grid"]["a"])
    gains = LearnerGains(**lr["gains"])
    learner = LearnerConfig(
        basis=basis, grid=grid, gains=gains, theta_v0=lr["theta_v0"], theta_c0=lr["theta_c0"],
        Gamma0=np.diag(lr["Gamma0_diag"]), grid_stride=lr["grid_stride"],
    )
    sim = SimConfig(h=sm["h"], T=sm["T"], x0=sm["x0"], z0=sm["z0"], record_stride=sm["record_stride"],
                    u_max=sm["u_max"])
    sim.check_step(observer.epsilon)
    if sim.x0.shape != (plant.n,) or sim.z0.shape != (plant.p,):
        raise ConfigError(f"sim.x0 / sim.z0 must have lengths {plant.n} / {plant.p}")
    return Experiment(cfg, plant, model, cost, observer, learner, sim)


def dump(cfg: dict) -> str:
    """YAML text of a resolved config; floats are written with full precision."""
    return yaml.safe_dump(cfg, sort_keys=False, default_flow_style=None)


def with_grid(cfg: dict, a: int) -> dict:
    out = copy.deepcopy(cfg)
    out["learner"]["grid"].pop("points", None)
    out["learner"]["grid"]["a"] = int(a)
    out["name"] = f"{cfg['name']}_a{a}"
    return out
