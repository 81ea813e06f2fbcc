"""Actor-critic learner driven by Bellman errors on the trajectory and on a fixed grid.

The value estimate is ``theta_v . phi(x)`` and the policy is derived from the
actor weights through the nominal input gain.  Bellman errors are evaluated
at the (saturated) observer output and extrapolated to a fixed set of grid
points using only the nominal model, which replaces persistent excitation by
a rank condition on the grid regressors.

Everything here is vectorised over leading axes: ``x`` may be ``(n,)`` or
``(N, n)``.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamics import CostSpec, NominalModel, nominal_eval
from .errors import ConfigError


@dataclass(frozen=True)
class Basis:
    """Activation vector ``phi`` with its Jacobian ``phi_x`` (shape ``(..., l, n)``)."""

    l: int
    n: int
    phi: Callable
    phi_x: Callable
    names: tuple = ()
    exponents: np.ndarray | None = field(default=None, compare=False)


def polynomial_basis(exponents, names: Sequence[str] | None = None) -> Basis:
    """Monomial basis; row ``k`` of ``exponents`` holds the powers of ``x_1..x_n``."""
    E = np.asarray(exponents, dtype=int)
    l, n = E.shape
    # d phi_k / d x_j = E[k, j] * x^(E[k] - e_j): one monomial per (k, j)
    D = np.repeat(E[:, None, :], n, axis=1) - np.eye(n, dtype=int)[None]
    coef = E.astype(float)
    D = np.where(coef[..., None] > 0, D, 0).reshape(l * n, n)

    def phi(x):
        x = np.asarray(x, dtype=float)
        return np.prod(x[..., None, :] ** E, axis=-1)

    def phi_x(x):
        x = np.asarray(x, dtype=float)
        mono = np.prod(x[..., None, :] ** D, axis=-1)
        return coef * mono.reshape(x.shape[:-1] + (l, n))

    if names is None:
        names = tuple(
            "*".join(f"x{j + 1}^{e}" if e > 1 else f"x{j + 1}" for j, e in enumerate(row) if e)
            for row in E
        )
    return Basis(l=l, n=n, phi=phi, phi_x=phi_x, names=tuple(names), exponents=E)


BASES = {
    # x1^2, x1 x2, x2^2
    "quad2": lambda: polynomial_basis([(2, 0), (1, 1), (0, 2)]),
    # x1^2, x1^3, x2^2, x2^3, x1 x2, x1 x2^2, x1^2 x2
    "poly7": lambda: polynomial_basis([(2, 0), (3, 0), (0, 2), (0, 3), (1, 1), (1, 2), (2, 1)]),
    # x1^2, x2^2, x3^2, x1 x2, x1 x3, x2 x3
    "quad3": lambda: polynomial_basis(
        [(2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1)]
    ),
}


def get_basis(name: str) -> Basis:
    try:
        return BASES[name]()
    except KeyError:
        raise ConfigError(f"unknown basis {name!r}; known: {sorted(BASES)}") from None


@dataclass(frozen=True)
class LearnerGains:
    lambda_v1: float
    lambda_v2: float
    lambda_c1: float
    lambda_c2: float
    beta: float
    gamma: float
    sigma1: float

    def __post_init__(self):
        for name in ("lambda_v1", "lambda_v2", "lambda_c1", "lambda_c2", "beta"):
            if getattr(self, name) < 0:
                raise ConfigError(f"learner gain {name} must be nonnegative")
        if not (self.gamma > 0 and self.sigma1 > 0):
            raise ConfigError("learner gamma and sigma1 must be positive")
        if self.lambda_c1 > 0 and self.lambda_c2 / self.lambda_c1 > 0.1:
            warnings.warn(
                f"lambda_c2/lambda_c1 = {self.lambda_c2 / self.lambda_c1:.3g} is not small; "
                "the actor weights will be biased toward zero",
                stacklevel=2,
            )


@dataclass(frozen=True)
class ExtrapolationGrid:
    points: np.ndarray  # (N, n)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise ConfigError("extrapolation grid needs at least one point")
        object.__setattr__(self, "points", pts)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    def inside(self, box) -> bool:
        box = np.asarray(box, dtype=float)
        return bool(np.all((self.points >= box[:, 0]) & (self.points <= box[:, 1])))


def make_grid(box, a: int) -> ExtrapolationGrid:
    """``a`` evenly spaced values per axis (endpoints included), all combinations."""
    if a < 2:
        raise ConfigError(f"grid resolution must be at least 2, got {a}")
    axes = [np.linspace(lo, hi, a) for lo, hi in box]
    return ExtrapolationGrid(np.array(list(itertools.product(*axes))))


@dataclass
class LearnerConfig:
    basis: Basis
    grid: ExtrapolationGrid
    gains: LearnerGains
    theta_v0: np.ndarray
    theta_c0: np.ndarray
    Gamma0: np.ndarray
    grid_stride: int = 1

    def __post_init__(self):
        l = self.basis.l
        self.theta_v0 = np.asarray(self.theta_v0, dtype=float)
        self.theta_c0 = np.asarray(self.theta_c0, dtype=float)
        self.Gamma0 = np.asarray(self.Gamma0, dtype=float)
        if self.Gamma0.ndim == 1:
            self.Gamma0 = np.diag(self.Gamma0)
        if self.theta_v0.shape != (l,) or self.theta_c0.shape != (l,):
            raise ConfigError(f"initial weights must have length {l}")
        if self.Gamma0.shape != (l, l):
            raise ConfigError(f"Gamma0 must be {l}x{l}")
        if not np.allclose(self.Gamma0, self.Gamma0.T):
            raise ConfigError("Gamma0 must be symmetric")
        eig = np.linalg.eigvalsh(self.Gamma0)
        if eig[0] <= 0:
            raise ConfigError("Gamma0 must be positive definite")
        if eig[-1] > self.gains.sigma1:
            raise ConfigError(f"||Gamma0|| = {eig[-1]:g} exceeds sigma1 = {self.gains.sigma1:g}")
        if self.grid.points.shape[1] != self.basis.n:
            raise ConfigError("grid dimension does not match the basis")
        if self.grid_stride < 1:
            raise ConfigError("grid_stride must be a positive integer")


# Point-wise quantities.  Every Bellman-error related quantity at a point x
# is affine in the actor weights through two vectors:
#   drift_mu = phi_x(x) (A x + B f0(x))     (mu with zero policy)
#   gvec     = g0(x) dphi/dx_n (x)           (G = gvec gvec^T / R)


def _chain_drift(x, f0s):
    d = np.empty(np.shape(x))
    d[..., :-1] = x[..., 1:]
    d[..., -1] = f0s
    return d


def nominal_features(x, basis: Basis, model: NominalModel, eps: float):
    """``(drift_mu, gvec, g0_sat)`` at ``x``; see the module comment."""
    x = np.asarray(x, dtype=float)
    phx = basis.phi_x(x)
    f0s, g0s = nominal_eval(model, x, eps)
    drift_mu = np.einsum("...ij,...j->...i", phx, _chain_drift(x, f0s))
    gvec = np.asarray(g0s)[..., None] * phx[..., -1]
    return drift_mu, gvec, g0s


def features(x, basis: Basis, model: NominalModel, eps: float):
    drift_mu, gvec, _ = nominal_features(x, basis, model, eps)
    return drift_mu, gvec


def value_hat(x, theta_v, basis: Basis):
    return basis.phi(x) @ np.asarray(theta_v, dtype=float)


def policy_hat(x, theta_c, basis: Basis, model: NominalModel, R: float, eps: float):
    """``-(1/2R) g0(x) (dphi/dx_n)^T theta_c``."""
    _, gvec = features(x, basis, model, eps)
    return -(gvec @ np.asarray(theta_c, dtype=float)) / (2.0 * R)


def regressor(x, theta_c, basis: Basis, model: NominalModel, R: float, eps: float):
    """``mu = phi_x(x) [A x + B (f0(x) + g0(x) u0_hat(x))]``."""
    drift_mu, gvec = features(x, basis, model, eps)
    u0 = -(gvec @ np.asarray(theta_c, dtype=float)) / (2.0 * R)
    return drift_mu + gvec * np.asarray(u0)[..., None]


def rho(mu, Gamma, gamma: float):
    mu = np.asarray(mu, dtype=float)
    return 1.0 + gamma * np.einsum("...i,ij,...j->...", mu, Gamma, mu)


def bellman_error(x, theta_v, theta_c, basis: Basis, model: NominalModel, cost: CostSpec, eps: float):
    """Approximate HJB residual ``mu . theta_v + Q(x) + R u0_hat(x)^2``."""
    x = np.asarray(x, dtype=float)
    drift_mu, gvec = features(x, basis, model, eps)
    u0 = -(gvec @ np.asarray(theta_c, dtype=float)) / (2.0 * cost.R)
    mu = drift_mu + gvec * np.asarray(u0)[..., None]
    return mu @ np.asarray(theta_v, dtype=float) + cost.Q(x) + cost.R * u0**2


def g_matrix(x, basis: Basis, model: NominalModel, R: float, eps: float):
    """Rank-one matrix ``phi_x B g0 R^-1 g0 B^T phi_x^T``."""
    _, gvec = features(x, basis, model, eps)
    return gvec[..., :, None] * gvec[..., None, :] / R


@dataclass
class GridTerms:
    """Per-grid-point quantities for the current weights (``N`` rows)."""

    mu: np.ndarray  # (N, l)
    rho: np.ndarray  # (N,)
    delta: np.ndarray  # (N,)
    gvec: np.ndarray  # (N, l)
    u0: np.ndarray  # (N,)
    R: float

    @property
    def G(self) -> np.ndarray:
        return self.gvec[:, :, None] * self.gvec[:, None, :] / self.R


@dataclass
class GridCache:
    """Weight-independent grid quantities, computed once per run."""

    drift_mu: np.ndarray
    gvec: np.ndarray
    q: np.ndarray
    R: float
    G_norms: np.ndarray = field(init=False)

    def __post_init__(self):
        self.G_norms = np.sum(self.gvec**2, axis=1) / self.R

    @classmethod
    def build(cls, grid: ExtrapolationGrid, basis: Basis, model: NominalModel, cost: CostSpec, eps: float):
        drift_mu, gvec = features(grid.points, basis, model, eps)
        return cls(drift_mu=drift_mu, gvec=gvec, q=np.asarray(cost.Q(grid.points), dtype=float), R=cost.R)

    def terms(self, theta_v, theta_c, Gamma, gamma: float) -> GridTerms:
        u0 = -(self.gvec @ theta_c) / (2.0 * self.R)
        mu = self.drift_mu + self.gvec * u0[:, None]
        r = 1.0 + gamma * np.sum((mu @ Gamma) * mu, axis=1)
        delta = mu @ theta_v + self.q + self.R * u0 * u0
        return GridTerms(mu=mu, rho=r, delta=delta, gvec=self.gvec, u0=u0, R=self.R)


def grid_terms(grid: ExtrapolationGrid, theta_v, theta_c, Gamma, basis, model, cost, gamma, eps) -> GridTerms:
    return GridCache.build(grid, basis, model, cost, eps).terms(
        np.asarray(theta_v, float), np.asarray(theta_c, float), np.asarray(Gamma, float), gamma
    )


# Update laws.


def critic_rhs(Gamma, delta_t, mu, rho_t, grid: GridTerms, gains: LearnerGains):
    """Normalised least-squares critic update over trajectory and grid errors."""
    N = grid.mu.shape[0]
    s = gains.lambda_v1 * delta_t / rho_t * np.asarray(mu)
    s = s + (gains.lambda_v2 / N) * (grid.mu.T @ (grid.delta / grid.rho))
    return -(Gamma @ s)


def gamma_active(Gamma, gains: LearnerGains) -> bool:
    """Indicator ``||Gamma||_2 <= sigma1`` (spectral norm of a symmetric matrix)."""
    return bool(spectral_norm(Gamma) <= gains.sigma1)


def gamma_rhs(Gamma, mu, rho_t, gains: LearnerGains, active: bool | None = None):
    """Forgetting-factor gain update, switched off while ``||Gamma|| > sigma1``.

    ``active`` lets the caller freeze the indicator over an integration step.
    """
    if active is None:
        active = gamma_active(Gamma, gains)
    if not active:
        return np.zeros_like(Gamma)
    Gm = Gamma @ mu
    return gains.beta * Gamma - gains.lambda_v1 * np.outer(Gm, Gm) / rho_t**2


def actor_rhs(theta_c, theta_v, mu, rho_t, G_t, grid: GridTerms, gains: LearnerGains, gvec=None):
    """Actor update: pull toward the critic, small leak, and the two cross terms.

    The cross terms are read as ``(mu^T theta_v) G^T theta_c / (4 rho)``.
    Passing ``gvec`` (with ``G_t=None``) uses the rank-one form of ``G_t``.
    """
    N = grid.mu.shape[0]
    d = -gains.lambda_c1 * (theta_c - theta_v) - gains.lambda_c2 * theta_c
    Gc = gvec * ((gvec @ theta_c) / grid.R) if G_t is None else np.asarray(G_t).T @ theta_c
    d = d + gains.lambda_v1 * ((mu @ theta_v) / (4.0 * rho_t)) * Gc
    # G_i theta_c = gvec_i (gvec_i . theta_c) / R = -2 u0_i gvec_i
    w = gains.lambda_v2 / (4.0 * N) * (grid.mu @ theta_v) / grid.rho * (-2.0 * grid.u0)
    return d + grid.gvec.T @ w


def a4_from_terms(mu, r) -> float:
    """``(1/N) lambda_min(sum_i mu_i mu_i^T / rho_i)``, clipped at zero.

    The sum is positive semidefinite, so a negative eigenvalue is rounding.
    """
    mu = np.atleast_2d(mu)
    S = (mu / np.asarray(r)[:, None]).T @ mu
    return max(float(np.linalg.eigvalsh((S + S.T) / 2.0)[0]), 0.0) / mu.shape[0]


def a4_metric(grid: ExtrapolationGrid, theta_c, Gamma, basis, model, cost, gains: LearnerGains, eps) -> float:
    """Instantaneous value of the grid rank condition; the run tracks its infimum."""
    mu = regressor(grid.points, theta_c, basis, model, cost.R, eps)
    return a4_from_terms(mu, rho(mu, Gamma, gains.gamma))


def spectral_norm(S) -> float:
    ev = np.linalg.eigvalsh(S)
    return float(max(abs(ev[0]), abs(ev[-1])))


@dataclass
class GainReport:
    evaluable: bool
    chi1: float = float("nan")
    conditions: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.evaluable and all(self.conditions.values())

    def lines(self) -> list[str]:
        if not self.evaluable:
            return ["gain conditions: not evaluable (c <= 0 or sigma0 <= 0)"]
        out = [f"gain conditions (chi1 = {self.chi1:.6g}):"]
        out += [f"  {name}: {'pass' if ok else 'fail'}" for name, ok in self.conditions.items()]
        return out


def gain_condition_report(gains: LearnerGains, theta_ref, run_stats: dict) -> GainReport:
    """Evaluate the sufficient gain inequalities with measured run quantities.

    ``run_stats`` keys: ``sigma0`` (min eigenvalue of Gamma seen), ``sup_G_t``,
    ``max_G_i`` and ``c`` (infimum of the grid rank metric).  Diagnostic only.
    """
    sigma0 = run_stats.get("sigma0", 0.0)
    c = run_stats.get("c", 0.0)
    inputs = dict(run_stats)
    if not (sigma0 > 0 and c > 0):
        return GainReport(evaluable=False, inputs=inputs)
    theta_norm = float(np.linalg.norm(theta_ref))
    root = 8.0 * np.sqrt(gains.gamma * sigma0)
    chi1 = gains.lambda_v1 / root * run_stats["sup_G_t"] + gains.lambda_v2 / root * run_stats["max_G_i"]
    s1 = gains.sigma1
    conditions = {
        "beta > sigma1 chi1 |Theta| + sigma1 lambda_c1": gains.beta > s1 * chi1 * theta_norm + s1 * gains.lambda_c1,
        "lambda_v2 > 5 lambda_v1 / (4 c gamma sigma0)": gains.lambda_v2 > 5 * gains.lambda_v1 / (4 * c * gains.gamma * sigma0),
        "lambda_c1 > 3 chi1 |Theta|": gains.lambda_c1 > 3 * chi1 * theta_norm,
    }
    inputs["theta_norm"] = theta_norm
    return GainReport(evaluable=True, chi1=float(chi1), conditions=conditions, inputs=inputs)
