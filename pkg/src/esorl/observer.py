"""Extended state observer with soft output saturation.

The observer estimates the chain state ``x_1..x_n`` together with the lumped
uncertainty ``x_{n+1}`` from the measured output ``y = x_1``.  Its raw state
peaks during the initial transient (of order ``1/eps**n``), so anything that
consumes the estimate goes through :func:`saturate_outputs` first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import NamedTuple

import numpy as np

from .dynamics import NominalModel, nominal_eval
from .errors import ConfigError, DivergenceError

HURWITZ_MARGIN = 1e-12
DIVERGENCE_LIMIT = 1e9


def soft_sat(v, epsilon):
    """Odd, C^1 saturation-like function and its derivative.

    Identity on ``[0, 1]``, a quadratic blend on ``[1, 1 + eps]`` and the
    constant ``1 + eps/2`` beyond.  Works elementwise on arrays.

    Returns
    -------
    s, s_prime : ndarray or float
    """
    # with d = clip(|v| - 1, 0, eps) the three branches collapse to
    # s(|v|) = min(|v|, 1) + d - d^2 / (2 eps) and s' = 1 - d / eps
    if np.ndim(v) == 0:
        v = float(v)
        a = abs(v)
        if a <= 1.0:
            return v, 1.0
        d = min(a - 1.0, epsilon)
        return math.copysign(1.0 + d - d * d / (2.0 * epsilon), v), 1.0 - d / epsilon
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    d = np.clip(a - 1.0, 0.0, epsilon)
    s = np.copysign(np.minimum(a, 1.0) + d - d * d / (2.0 * epsilon), v)
    return s, 1.0 - d / epsilon


def saturate(values, bounds, epsilon):
    """``M * s(v / M)`` elementwise; exactly ``v`` where ``|v| <= M``."""
    if np.ndim(values) == 0 and np.ndim(bounds) == 0:
        v, m = float(values), float(bounds)
        return v if abs(v) <= m else m * soft_sat(v / m, epsilon)[0]
    bounds = np.asarray(bounds, dtype=float)
    values = np.asarray(values, dtype=float)
    s, _ = soft_sat(values / bounds, epsilon)
    return np.where(np.abs(values) <= bounds, values, bounds * s)


class HurwitzReport(NamedTuple):
    ok: bool
    eigenvalues: np.ndarray
    max_real: float


def companion_matrix(L) -> np.ndarray:
    """Observer error matrix: first column ``-L``, ones on the superdiagonal."""
    L = np.asarray(L, dtype=float)
    m = L.size
    E = np.zeros((m, m))
    E[:, 0] = -L
    E[np.arange(m - 1), np.arange(1, m)] = 1.0
    return E


def hurwitz_check(L) -> HurwitzReport:
    """Check that the observer gain vector gives a Hurwitz error matrix.

    The characteristic polynomial is ``s^{n+1} + l_1 s^n + ... + l_{n+1}``.
    A Hurwitz polynomial has all coefficients positive, which is checked
    exactly before trusting the eigenvalues; repeated roots at zero would
    otherwise be blurred by rounding.
    """
    L = np.asarray(L, dtype=float)
    eig = np.linalg.eigvals(companion_matrix(L))
    max_real = float(np.max(eig.real))
    ok = bool(np.all(L > 0) and max_real < -HURWITZ_MARGIN)
    return HurwitzReport(ok, eig, max_real)


def binomial_gains(n: int, bandwidth: float = 1.0) -> np.ndarray:
    """Gains placing every observer pole at ``-bandwidth`` (before the 1/eps scaling).

    ``n`` is the plant relative degree, so ``n + 1`` gains are returned.
    ``binomial_gains(2)`` is ``(3, 3, 1)``.
    """
    m = n + 1
    return np.array([comb(m, i) * bandwidth**i for i in range(1, m + 1)], dtype=float)


@dataclass
class EsoConfig:
    L: np.ndarray
    epsilon: float
    M: np.ndarray
    initial: np.ndarray | None = None
    report: HurwitzReport = field(init=False, repr=False)
    gain_scale: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=float)
        self.M = np.asarray(self.M, dtype=float)
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"observer epsilon must lie in (0, 1), got {self.epsilon}")
        if self.M.shape != self.L.shape:
            raise ConfigError(f"observer M has shape {self.M.shape}, expected {self.L.shape}")
        if np.any(self.M <= 0):
            raise ConfigError("observer saturation bounds M must be positive")
        self.report = hurwitz_check(self.L)
        if not self.report.ok:
            raise ConfigError(
                f"observer gains L={self.L.tolist()} are not Hurwitz "
                f"(max eigenvalue real part {self.report.max_real:.3g})"
            )
        self.gain_scale = self.L / self.epsilon ** np.arange(1, self.L.size + 1)
        if self.initial is None:
            self.initial = np.zeros_like(self.L)
        self.initial = np.asarray(self.initial, dtype=float)
        if self.initial.shape != self.L.shape:
            raise ConfigError(f"observer initial state has shape {self.initial.shape}, expected {self.L.shape}")

    @property
    def n(self) -> int:
        return self.L.size - 1


def saturate_outputs(xhat, cfg: EsoConfig) -> np.ndarray:
    return saturate(xhat, cfg.M, cfg.epsilon)


def eso_rhs(xhat, y, u, model: NominalModel, cfg: EsoConfig, t: float | None = None) -> np.ndarray:
    """Observer right-hand side.

    The nominal model enters the ``n``-th equation evaluated at the raw
    (unsaturated) estimate.
    """
    xhat = np.asarray(xhat, dtype=float)
    n = cfg.n
    eps = cfg.epsilon
    f0s, g0s = nominal_eval(model, xhat[:n], eps)
    d = cfg.gain_scale * (y - xhat[0])
    d[:n] += xhat[1:]
    d[n - 1] += f0s + g0s * u
    if not np.isfinite(d).all() or np.abs(xhat).max() > DIVERGENCE_LIMIT:
        where = "" if t is None else f" at t={t:.6g}"
        raise DivergenceError(f"observer diverged{where}: xhat={xhat.tolist()}", t=t)
    return d


def scaled_error(x, x_np1_true, xhat, epsilon) -> np.ndarray:
    """Estimation error with component ``i`` divided by ``eps**(n+1-i)``."""
    x_ext = np.append(np.asarray(x, dtype=float), x_np1_true)
    m = x_ext.size
    powers = np.arange(m - 1, -1, -1)
    return (x_ext - np.asarray(xhat, dtype=float)) / float(epsilon) ** powers


def check_saturation_bounds(cfg: EsoConfig, model: NominalModel, box, samples: int = 2000,
                            seed: int = 0, uncertainty_bound: float | None = None) -> list[str]:
    """Sampled checks of the observer and nominal-model saturation bounds.

    ``M_i`` (i <= n) must exceed ``sup |x_i|`` over the box, and ``M_f``,
    ``M_g`` the sampled sup of ``|f0|`` and ``|g0|``.  The bound on
    the extended state can only be checked against a user-supplied estimate
    of the uncertainty magnitude.  Returns a list of warning strings.
    """
    box = np.asarray(box, dtype=float)
    warnings = []
    reach = np.max(np.abs(box), axis=1)
    for i, (m, r) in enumerate(zip(cfg.M[:-1], reach), start=1):
        if not m > r:
            warnings.append(f"M_{i}={m:g} does not exceed sup|x_{i}|={r:g} on the operating box")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(box[:, 0], box[:, 1], size=(samples, box.shape[0]))
    corners = np.array(np.meshgrid(*box, indexing="ij")).reshape(box.shape[0], -1).T
    xs = np.vstack([xs, corners])
    f_sup = float(np.max(np.abs(model.f0(xs))))
    g_sup = float(np.max(np.abs(np.broadcast_to(model.g0(xs), xs.shape[:1]))))
    if not model.M_f > f_sup:
        warnings.append(f"M_f={model.M_f:g} does not exceed sampled sup|f0|={f_sup:.4g}")
    if not model.M_g > g_sup:
        warnings.append(f"M_g={model.M_g:g} does not exceed sampled sup|g0|={g_sup:.4g}")
    if uncertainty_bound is not None and not cfg.M[-1] > uncertainty_bound:
        warnings.append(
            f"M_{cfg.n + 1}={cfg.M[-1]:g} does not exceed the uncertainty bound {uncertainty_bound:g}; "
            "the compensation may saturate in steady state"
        )
    return warnings
