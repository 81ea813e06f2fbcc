"""Uncertain plants in normal form, their known nominal models, and the two benchmarks.

State-dependent callables take ``x`` with the chain coordinates on the last
axis, so the same function evaluates one point ``(n,)`` or a batch ``(N, n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class NormalFormPlant:
    """``z' = f_z(x, z, w)``, ``x' = A x + B (f + g u)``, ``y = x_1``.

    ``x_box``, ``z_bound`` and ``w_bound`` describe the operating set used by
    the sampling monitors; they play no role in the simulation itself.
    """

    n: int
    p: int
    f: Callable
    g: Callable
    f_z: Callable
    disturbance: Callable[[float], float]
    disturbance_rate_bound: float = np.inf
    x_box: tuple = ()
    z_bound: float = np.inf
    w_bound: float = np.inf
    name: str = "custom"

    def __post_init__(self):
        if self.n < 1 or self.p < 0:
            raise ConfigError(f"invalid plant dimensions n={self.n}, p={self.p}")


@dataclass(frozen=True)
class NominalModel:
    f0: Callable
    g0: Callable
    M_f: float
    M_g: float
    g_floor: float

    def __post_init__(self):
        if not (self.M_f > 0 and self.M_g > 0 and self.g_floor > 0):
            raise ConfigError("nominal bounds M_f, M_g and g_floor must be positive")


@dataclass(frozen=True)
class CostSpec:
    Q: Callable
    R: float
    Qbar: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.R > 0:
            raise ConfigError(f"control weight R must be positive, got {self.R}")

    def r(self, x, u0):
        return self.Q(x) + self.R * np.square(u0)


def quadratic_cost(Qbar, R=1.0) -> CostSpec:
    Qbar = np.asarray(Qbar, dtype=float)

    def Q(x):
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, Qbar, x)

    return CostSpec(Q=Q, R=float(R), Qbar=Qbar)


def _check_dims(plant: NormalFormPlant, x, z):
    if x.shape != (plant.n,) or z.shape != (plant.p,):
        raise ConfigError(
            f"plant {plant.name!r} expects x of shape ({plant.n},) and z of shape ({plant.p},), "
            f"got {x.shape} and {z.shape}"
        )


def plant_rhs(plant: NormalFormPlant, x, z, u, t):
    """Return ``(x_dot, z_dot)`` of the true plant."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_dims(plant, x, z)
    w = plant.disturbance(t)
    xdot = np.empty_like(x)
    xdot[:-1] = x[1:]
    xdot[-1] = plant.f(x, z, w) + plant.g(x, z, w) * u
    zdot = np.asarray(plant.f_z(x, z, w), dtype=float).reshape(plant.p)
    return xdot, zdot


def nominal_eval(model: NominalModel, x, epsilon):
    """Smoothly saturated ``(f0, g0)``.

    ``f0`` is passed through ``M_f * s(f0 / M_f)``; ``g0`` keeps its sign and
    its magnitude is saturated at ``M_g`` and floored at ``g_floor`` so the
    compensation term never divides by a small number.  Inside the linear
    zone the values pass through unchanged.
    """
    from .observer import saturate

    f0 = model.f0(x)
    g0 = model.g0(x)
    g_mag = np.maximum(model.g_floor, saturate(np.abs(g0), model.M_g, epsilon))
    return saturate(f0, model.M_f, epsilon), np.copysign(g_mag, g0)


def total_uncertainty(plant: NormalFormPlant, model: NominalModel, x, z, u, t) -> float:
    """Ground-truth extended state ``(f - f0) + (g - g0) u`` (diagnostics only)."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    w = plant.disturbance(t)
    return float((plant.f(x, z, w) - model.f0(x)) + (plant.g(x, z, w) - model.g0(x)) * u)


def a3_metric(plant: NormalFormPlant, model: NominalModel, x, z, w, xbar=None, epsilon=0.02) -> float:
    """Sampled ``max |(g - g0(x)) / g0(xbar)|``; must stay below one.

    ``x``, ``z``, ``w`` are sample batches of shape ``(N, n)``, ``(N, p)`` and
    ``(N,)``.  When ``xbar`` is omitted the estimate is taken equal to ``x``.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    xbar = x if xbar is None else np.asarray(xbar, dtype=float)
    dg = np.array([plant.g(xi, zi, wi) - model.g0(xi) for xi, zi, wi in zip(x, z, w)])
    _, g0s = nominal_eval(model, xbar, epsilon)
    return float(np.max(np.abs(dg / g0s)))


def check_disturbance(plant: NormalFormPlant, bound: float, T: float = 100.0, dt: float = 1e-3) -> dict:
    """Sample the disturbance and its numerical derivative against the declared bounds."""
    t = np.arange(0.0, T + dt, dt)
    w = np.array([plant.disturbance(ti) for ti in t])
    wdot = np.gradient(w, dt)
    sup_w = float(np.max(np.abs(w)))
    sup_wdot = float(np.max(np.abs(wdot)))
    return {
        "sup_w": sup_w,
        "sup_wdot": sup_wdot,
        "ok": sup_w <= bound and sup_wdot <= plant.disturbance_rate_bound * (1 + 1e-6),
    }


def check_input_gain(plant: NormalFormPlant, samples: int = 10_000, seed: int = 0) -> float:
    """Smallest sampled ``|g|`` over the operating set; zero means loss of control authority."""
    if not plant.x_box:
        raise ConfigError("plant has no operating box to sample")
    rng = np.random.default_rng(seed)
    box = np.asarray(plant.x_box, dtype=float)
    zb = plant.z_bound if np.isfinite(plant.z_bound) else 1.0
    wb = plant.w_bound if np.isfinite(plant.w_bound) else 1.0
    xs = rng.uniform(box[:, 0], box[:, 1], size=(samples, plant.n))
    zs = rng.uniform(-zb, zb, size=(samples, plant.p))
    ws = rng.uniform(-wb, wb, size=samples)
    return float(min(abs(plant.g(x, z, w)) for x, z, w in zip(xs, zs, ws)))


# Example 1: second-order plant with a nonlinear nominal model and closed-form optimum.

def _ex1_gnom(x):
    return np.cos(2.0 * x[..., 0]) + 2.0


def _ex1_f0(x):
    x1, x2 = x[..., 0], x[..., 1]
    return -x1 - 1.5 * x2 + 0.5 * (x1 + x2) * _ex1_gnom(x) ** 2


def make_example1(g_floor: float = 0.5, M_f: float = 6.5, M_g: float = 3.0):
    """Second-order benchmark with a disturbance of amplitude 0.5 and scalar zero dynamics."""

    def w(t):
        return 0.5 * np.sin(t)

    def f(x, z, om):
        x1, x2 = x[..., 0], x[..., 1]
        return -x1 - 2.5 * x2 + om + z[..., 0] ** 2 + 0.5 * (x1 + x2) * _ex1_gnom(x) ** 2

    def g(x, z, om):
        return _ex1_gnom(x) + np.sin(x[..., 0]) * om

    def f_z(x, z, om):
        return -(x[..., 1] ** 2 + om**2) * z

    plant = NormalFormPlant(
        n=2, p=1, f=f, g=g, f_z=f_z, disturbance=w, disturbance_rate_bound=0.5,
        x_box=((-2.0, 2.0), (-2.0, 2.0)), z_bound=1.0, w_bound=0.5, name="example1",
    )
    model = NominalModel(f0=_ex1_f0, g0=_ex1_gnom, M_f=M_f, M_g=M_g, g_floor=g_floor)
    cost = quadratic_cost([[2.0, 1.0], [1.0, 1.0]], R=1.0)
    return plant, model, cost


def make_example2(m: float = 1.0, b: float = 1.0, tau: float = 0.1, g_floor: float = 1.0,
                  M_f: float = 70.0, M_g: float = 11.0):
    """Third-order kinematic chain (position, velocity, scaled actuator force).

    The disturbance enters through the input channel, so the true plant
    differs from the nominal one only by ``omega / (tau m)``.
    """
    k_vel = -b / (tau * m)
    k_acc = -(1.0 / tau + b / m)
    k_in = 1.0 / (tau * m)

    def w(t):
        return 0.2 * np.sin(t)

    def f0(x):
        return k_vel * x[..., 1] + k_acc * x[..., 2]

    def g0(x):
        return np.full(np.shape(x)[:-1], k_in)

    def f(x, z, om):
        return f0(x) + k_in * om

    def f_z(x, z, om):
        return np.zeros(0)

    plant = NormalFormPlant(
        n=3, p=0, f=f, g=lambda x, z, om: g0(x), f_z=f_z, disturbance=w,
        disturbance_rate_bound=0.2, x_box=((-1.0, 1.0), (-1.0, 1.0), (-5.0, 5.0)),
        z_bound=0.0, w_bound=0.2, name="example2",
    )
    model = NominalModel(f0=f0, g0=g0, M_f=M_f, M_g=M_g, g_floor=g_floor)
    cost = quadratic_cost(np.eye(3), R=1.0)
    return plant, model, cost


def chain_matrices(n: int):
    """``A`` (shift), ``B`` (last unit vector) of the integrator chain."""
    A = np.eye(n, k=1)
    B = np.zeros(n)
    B[-1] = 1.0
    return A, B


PLANTS: dict[str, Callable] = {
    "example1": make_example1,
    "example2": make_example2,
}


def register_plant(name: str, factory: Callable) -> None:
    """Make a ``factory() -> (plant, model, cost)`` selectable by name in config files."""
    PLANTS[name] = factory


def get_plant(name: str, **overrides):
    try:
        factory = PLANTS[name]
    except KeyError:
        raise ConfigError(f"unknown plant {name!r}; known: {sorted(PLANTS)}") from None
    return factory(**overrides)
