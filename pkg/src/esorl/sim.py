"""Fixed-step simulation of the plant / observer / learner closed loop.

The integrated state is one flat vector laid out as
``[x | z | xhat | theta_v | theta_c | Gamma (row-major)]``.
"""
from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .controller import compose, control
from .dynamics import CostSpec, NominalModel, NormalFormPlant, plant_rhs, total_uncertainty
from .errors import ConfigError, DivergenceError
from .learner import (
    GridCache,
    LearnerConfig,
    a4_from_terms,
    actor_rhs,
    critic_rhs,
    nominal_features,
    gamma_rhs,
    spectral_norm,
)
from .observer import EsoConfig, eso_rhs, saturate_outputs, scaled_error

# Gamma is parked this far below sigma1 when a step would cross it.
GAMMA_LANDING = 1e-10


@dataclass
class SimConfig:
    h: float
    T: float
    x0: np.ndarray
    z0: np.ndarray = field(default_factory=lambda: np.zeros(0))
    record_stride: int = 100
    u_max: float | None = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        self.z0 = np.asarray(self.z0, dtype=float).reshape(-1)
        if not (self.h > 0 and self.T > 0):
            raise ConfigError("step h and horizon T must be positive")
        if self.record_stride < 1:
            raise ConfigError("record_stride must be a positive integer")

    @property
    def steps(self) -> int:
        return int(math.floor(self.T / self.h + 1e-9))

    def check_step(self, epsilon: float):
        """Fixed-step guard against the ``1/eps^(n+1)`` observer stiffness."""
        if self.h > epsilon / 2:
            raise ConfigError(f"step h={self.h:g} exceeds eps/2={epsilon / 2:g} (observer stiffness guard)")
        if self.h > epsilon / 10:
            warnings.warn(f"step h={self.h:g} exceeds eps/10={epsilon / 10:g}; observer accuracy may suffer",
                          stacklevel=2)


class Layout:
    def __init__(self, n: int, p: int, l: int):
        self.n, self.p, self.l = n, p, l
        sizes = [n, p, n + 1, l, l, l * l]
        edges = np.cumsum([0] + sizes)
        self.x, self.z, self.xhat, self.theta_v, self.theta_c, self.gamma = (
            slice(a, b) for a, b in zip(edges[:-1], edges[1:])
        )
        self.size = int(edges[-1])

    def pack(self, x, z, xhat, theta_v, theta_c, Gamma) -> np.ndarray:
        return np.concatenate([x, z, xhat, theta_v, theta_c, np.asarray(Gamma).ravel()]).astype(float)

    def Gamma(self, S) -> np.ndarray:
        return S[self.gamma].reshape(self.l, self.l)


def rk4_step(rhs: Callable, S, t: float, h: float) -> np.ndarray:
    """Classical four-stage Runge-Kutta step; aborts on a non-finite stage."""
    k1 = rhs(S, t)
    _check_stage(k1, 1, t)
    k2 = rhs(S + 0.5 * h * k1, t + 0.5 * h)
    _check_stage(k2, 2, t)
    k3 = rhs(S + 0.5 * h * k2, t + 0.5 * h)
    _check_stage(k3, 3, t)
    k4 = rhs(S + h * k3, t + h)
    _check_stage(k4, 4, t)
    return S + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_stage(k, stage, t):
    if not np.isfinite(k).all():
        raise DivergenceError(f"non-finite derivative in RK4 stage {stage} at t={t:.6g}", t=t, stage=stage)


class ClosedLoop:
    """Right-hand side and stepping rules of the full closed loop."""

    def __init__(self, plant: NormalFormPlant, model: NominalModel, cost: CostSpec,
                 observer: EsoConfig, learner: LearnerConfig, u_max: float | None = None):
        if observer.n != plant.n or learner.basis.n != plant.n:
            raise ConfigError("plant, observer and basis dimensions disagree")
        self.plant, self.model, self.cost = plant, model, cost
        self.observer, self.learner = observer, learner
        self.gains = learner.gains
        self.basis = learner.basis
        self.eps = observer.epsilon
        self.u_max = u_max
        self.layout = Layout(plant.n, plant.p, learner.basis.l)
        self.cache = GridCache.build(learner.grid, learner.basis, model, cost, self.eps)
        self._held = None

    def initial_state(self, x0, z0) -> np.ndarray:
        lr = self.learner
        return self.layout.pack(x0, z0, self.observer.initial, lr.theta_v0, lr.theta_c0, lr.Gamma0)

    def point_terms(self, xb, theta_v, theta_c, Gamma):
        """Trajectory-side ``(mu, rho, delta, gvec, u0, g0)`` at the saturated estimate."""
        drift_mu, gvec, g0s = nominal_features(xb, self.basis, self.model, self.eps)
        R = self.cost.R
        u0 = -(gvec @ theta_c) / (2.0 * R)
        mu = drift_mu + gvec * u0
        r = 1.0 + self.gains.gamma * (mu @ Gamma @ mu)
        delta = mu @ theta_v + float(self.cost.Q(xb)) + R * u0 * u0
        return mu, r, delta, gvec, u0, g0s

    def rhs(self, S, t, active: bool = True, held=None) -> np.ndarray:
        L = self.layout
        n = L.n
        x, z, xhat = S[L.x], S[L.z], S[L.xhat]
        tv, tc = S[L.theta_v], S[L.theta_c]
        G = L.Gamma(S)

        xbar = saturate_outputs(xhat, self.observer)
        mu, r, delta, gvec, u0, g0s = self.point_terms(xbar[:n], tv, tc, G)
        u = compose(u0, xbar[n], g0s, self.u_max).u
        xdot, zdot = plant_rhs(self.plant, x, z, u, t)
        xhdot = eso_rhs(xhat, x[0], u, self.model, self.observer, t)

        grid = held if held is not None else self.cache.terms(tv, tc, G, self.gains.gamma)
        tv_dot = critic_rhs(G, delta, mu, r, grid, self.gains)
        G_dot = gamma_rhs(G, mu, r, self.gains, active)
        tc_dot = actor_rhs(tc, tv, mu, r, None, grid, self.gains, gvec=gvec)
        return np.concatenate([xdot, zdot, xhdot, tv_dot, tc_dot, G_dot.ravel()])

    def step(self, S, t: float, h: float, k: int = 0) -> np.ndarray:
        """One RK4 step with the Gamma switch frozen at the step start.

        If the step would carry ``||Gamma||`` past ``sigma1``, only the part of
        the Gamma increment that reaches the bound is applied; once Gamma sits
        on the bound it stays frozen.
        """
        L = self.layout
        G0 = L.Gamma(S)
        sigma1 = self.gains.sigma1
        norm0 = spectral_norm(G0)
        active = norm0 <= sigma1
        held = None
        stride = self.learner.grid_stride
        if stride > 1:
            if k % stride == 0 or self._held is None:
                self._held = self.cache.terms(S[L.theta_v], S[L.theta_c], G0, self.gains.gamma)
            held = self._held
        S1 = rk4_step(lambda s, tt: self.rhs(s, tt, active, held), S, t, h)
        G1 = L.Gamma(S1)
        G1 = 0.5 * (G1 + G1.T)
        if active and spectral_norm(G1) > sigma1:
            target = sigma1 * (1.0 - GAMMA_LANDING)
            if norm0 >= target:
                G1 = G0
            else:
                dG = G1 - G0
                frac = brentq(lambda a: spectral_norm(G0 + a * dG) - target, 0.0, 1.0, xtol=1e-14)
                G1 = G0 + frac * dG
                G1 = 0.5 * (G1 + G1.T)
        S1[L.gamma] = G1.ravel()
        return S1


TRACE_FIELDS = ("t", "x", "z", "xhat", "xbar", "u", "u0_hat", "comp", "delta_t", "a4_c",
                "gamma_norm", "gamma_min_eig", "theta_gap", "x_ext_true", "eta", "sat")


@dataclass
class Trace:
    n: int
    p: int
    l: int
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    xhat: np.ndarray
    xbar: np.ndarray
    u: np.ndarray
    u0_hat: np.ndarray
    comp: np.ndarray
    delta_t: np.ndarray
    a4_c: np.ndarray
    gamma_norm: np.ndarray
    gamma_min_eig: np.ndarray
    theta_gap: np.ndarray
    x_ext_true: np.ndarray
    eta: np.ndarray
    sat: np.ndarray
    theta_v: np.ndarray
    theta_c: np.ndarray
    gamma_sym_defect: np.ndarray
    mu_over_rho: np.ndarray
    G_t_norm: np.ndarray

    def __len__(self):
        return self.t.size

    @classmethod
    def from_records(cls, n, p, l, records: list[dict]) -> "Trace":
        shapes = {"x": n, "z": p, "xhat": n + 1, "xbar": n + 1, "eta": n + 1, "sat": n + 1,
                  "theta_v": l, "theta_c": l}
        cols = {}
        for name in cls.__dataclass_fields__:
            if name in ("n", "p", "l"):
                continue
            if records:
                cols[name] = np.array([r[name] for r in records])
            else:
                cols[name] = np.zeros((0, shapes[name]) if name in shapes else 0)
        return cls(n=n, p=p, l=l, **cols)

    def header(self) -> list[str]:
        n, p = self.n, self.p
        m = n + 1
        return (
            ["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"z{i}" for i in range(1, p + 1)]
            + [f"xhat{i}" for i in range(1, m + 1)] + [f"xbar{i}" for i in range(1, m + 1)]
            + ["u", "u0_hat", "comp", "delta_t", "a4_c", "gamma_norm", "gamma_min_eig", "theta_gap",
               f"x{m}_true"]
            + [f"eta{i}" for i in range(1, m + 1)] + [f"sat{i}" for i in range(1, m + 1)]
        )

    def rows(self):
        for k in range(len(self)):
            yield np.concatenate([
                [self.t[k]], self.x[k], self.z[k], self.xhat[k], self.xbar[k],
                [self.u[k], self.u0_hat[k], self.comp[k], self.delta_t[k], self.a4_c[k],
                 self.gamma_norm[k], self.gamma_min_eig[k], self.theta_gap[k], self.x_ext_true[k]],
                self.eta[k], self.sat[k].astype(float),
            ])


@dataclass
class RunResult:
    trace: Trace
    summary: dict
    failed: bool = False
    error: str | None = None


def _record(loop: ClosedLoop, S, t) -> dict:
    L = loop.layout
    n = L.n
    x, z, xhat = S[L.x], S[L.z], S[L.xhat]
    tv, tc = S[L.theta_v], S[L.theta_c]
    G = L.Gamma(S)
    obs = loop.observer
    xbar = saturate_outputs(xhat, obs)
    cs = control(xbar, tc, loop.basis, loop.model, loop.cost.R, loop.eps, loop.u_max)
    mu, r, delta, gvec, _, _ = loop.point_terms(xbar[:n], tv, tc, G)
    grid = loop.cache.terms(tv, tc, G, loop.gains.gamma)
    ev = np.linalg.eigvalsh(G)
    x_ext = total_uncertainty(loop.plant, loop.model, x, z, cs.u, t)
    return {
        "t": t, "x": x.copy(), "z": z.copy(), "xhat": xhat.copy(), "xbar": xbar,
        "u": cs.u, "u0_hat": cs.u0_hat, "comp": cs.comp, "delta_t": float(delta),
        "a4_c": a4_from_terms(grid.mu, grid.rho),
        "gamma_norm": float(max(abs(ev[0]), abs(ev[-1]))), "gamma_min_eig": float(ev[0]),
        "theta_gap": float(np.linalg.norm(tc - tv)), "x_ext_true": x_ext,
        "eta": scaled_error(x, x_ext, xhat, obs.epsilon), "sat": np.abs(xhat) > obs.M,
        "theta_v": tv.copy(), "theta_c": tc.copy(),
        "gamma_sym_defect": float(np.max(np.abs(G - G.T))),
        "mu_over_rho": float(np.linalg.norm(mu) / r),
        "G_t_norm": float(gvec @ gvec) / loop.cost.R,
    }


def summarize(trace: Trace, loop: ClosedLoop, T: float, wall: float, steps: int) -> dict:
    if len(trace) == 0:
        return {"records": 0}
    n = trace.n
    late = trace.t >= T / 2 - 1e-9
    x_ext = np.column_stack([trace.x, trace.x_ext_true])
    est_err = np.max(np.abs(x_ext[late] - trace.xhat[late]), axis=0) if late.any() else np.full(n + 1, np.nan)
    return {
        "records": int(len(trace)),
        "steps": int(steps),
        "t_final": float(trace.t[-1]),
        "final_x": trace.x[-1].tolist(),
        "final_x_norm": float(np.linalg.norm(trace.x[-1])),
        "final_theta_v": trace.theta_v[-1].tolist(),
        "final_theta_c": trace.theta_c[-1].tolist(),
        "inf_a4_c": float(np.min(trace.a4_c)),
        "mean_a4_c": float(np.mean(trace.a4_c)),
        "max_gamma_norm": float(np.max(trace.gamma_norm)),
        "min_gamma_eig": float(np.min(trace.gamma_min_eig)),
        "max_gamma_sym_defect": float(np.max(trace.gamma_sym_defect)),
        "steady_state_est_error": est_err.tolist(),
        "sup_G_t": float(np.max(trace.G_t_norm)),
        "max_G_i": float(np.max(loop.cache.G_norms)),
        "wall_time_s": wall,
    }


def run(plant: NormalFormPlant, model: NominalModel, cost: CostSpec, observer_cfg: EsoConfig,
        learner_cfg: LearnerConfig, sim_cfg: SimConfig, progress: Callable | None = None) -> RunResult:
    """Integrate the closed loop over ``[0, T]`` and record every ``record_stride`` steps.

    A divergence stops the run and returns the partial trace with
    ``failed=True``.
    """
    sim_cfg.check_step(observer_cfg.epsilon)
    if plant.x_box and not learner_cfg.grid.inside(plant.x_box):
        warnings.warn("extrapolation grid leaves the plant operating box", stacklevel=2)
    if sim_cfg.x0.shape != (plant.n,) or sim_cfg.z0.shape != (plant.p,):
        raise ConfigError(f"initial state shapes {sim_cfg.x0.shape}, {sim_cfg.z0.shape} do not match the plant")
    loop = ClosedLoop(plant, model, cost, observer_cfg, learner_cfg, sim_cfg.u_max)
    S = loop.initial_state(sim_cfg.x0, sim_cfg.z0)
    h = sim_cfg.h
    steps = sim_cfg.steps
    stride = sim_cfg.record_stride
    records = []
    failed, error = False, None
    start = time.perf_counter()
    k = 0
    try:
        # overflow on the way to a divergence is caught by the stage checks
        with np.errstate(over="ignore", invalid="ignore"):
            records.append(_record(loop, S, 0.0))
            for k in range(steps):
                t = k * h
                S = loop.step(S, t, h, k)
                if (k + 1) % stride == 0:
                    records.append(_record(loop, S, (k + 1) * h))
                    if progress is not None:
                        progress((k + 1) * h)
    except DivergenceError as exc:
        failed, error = True, str(exc)
    wall = time.perf_counter() - start
    trace = Trace.from_records(plant.n, plant.p, learner_cfg.basis.l, records)
    summary = summarize(trace, loop, sim_cfg.T, wall, k + 1 if not failed else k)
    summary["failed"] = failed
    if error:
        summary["error"] = error
    return RunResult(trace=trace, summary=summary, failed=failed, error=error)


def write_trace(trace: Trace, path) -> Path:
    """CSV with the documented header, 17 significant digits per value."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(trace.header())
            for row in trace.rows():
                w.writerow([format(v, ".17g") for v in row])
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc
    return path


def write_weights(trace: Trace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"theta_v{i}" for i in range(1, trace.l + 1)]
                   + [f"theta_c{i}" for i in range(1, trace.l + 1)])
        for k in range(len(trace)):
            row = np.concatenate([[trace.t[k]], trace.theta_v[k], trace.theta_c[k]])
            w.writerow([format(v, ".17g") for v in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and float matrix of a trace or weights file."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r]
    return header, np.array(data, dtype=float).reshape(len(data), len(header))
