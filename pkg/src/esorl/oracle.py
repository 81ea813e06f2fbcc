"""Reference solutions used to check the learner.

Two ground truths are available: a closed-form optimal pair for the
second-order benchmark, and the LQR solution for any benchmark whose nominal
model is linear.  The Riccati equation is solved with Newton-Kleinman policy
iteration; every policy-evaluation step is a Lyapunov equation written out as
one Kronecker-product linear system, which is fine for the small ``n`` here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import CostSpec, NominalModel, chain_matrices, make_example1, make_example2, nominal_eval
from .errors import ConfigError
from .learner import Basis, get_basis

RESIDUAL_TOL = 1e-8
RICCATI_TOL = 1e-10


@dataclass(frozen=True)
class AnalyticSolution:
    """Optimal value and policy, with the ideal weights for a named basis.

    ``V_x`` is the gradient of ``V_star``; ``basis`` names the activation
    vector in which ``theta_star`` is expressed.
    """

    theta_star: np.ndarray
    V_star: Callable
    V_x: Callable
    u0_star: Callable
    basis: str
    extra: dict = field(default_factory=dict, compare=False)


def _chain_drift(x, f0s, g0s, u):
    d = np.empty(np.shape(x))
    d[..., :-1] = x[..., 1:]
    d[..., -1] = f0s + g0s * u
    return d


def hjb_residual(V_x: Callable, u0: Callable, model: NominalModel, cost: CostSpec, x, eps: float = 0.02):
    """``V_x(x) . (A x + B (f0 + g0 u0(x))) + Q(x) + R u0(x)^2`` with the saturated model.

    Vectorised over leading axes of ``x``.
    """
    x = np.asarray(x, dtype=float)
    f0s, g0s = nominal_eval(model, x, eps)
    u = np.asarray(u0(x), dtype=float)
    grad = np.asarray(V_x(x), dtype=float)
    drift = _chain_drift(x, f0s, g0s, u)
    return np.sum(grad * drift, axis=-1) + cost.Q(x) + cost.R * u * u


def _lyapunov(Acl, W):
    """Solve ``Acl^T P + P Acl + W = 0`` as ``(I kron Acl^T + Acl^T kron I) vec P = -vec W``."""
    n = Acl.shape[0]
    I = np.eye(n)
    M = np.kron(I, Acl.T) + np.kron(Acl.T, I)
    P = np.linalg.solve(M, -W.reshape(-1)).reshape(n, n)
    return 0.5 * (P + P.T)


def _mirrored_poles(A, floor=1.0):
    """Open-loop eigenvalues reflected into the open left half-plane.

    Eigenvalues with a real part closer to zero than ``-floor`` are pushed
    to ``-floor`` so a marginally stable mode does not stay marginal.
    """
    ev = np.linalg.eigvals(A)
    re = -np.maximum(np.abs(ev.real), floor)
    return re + 1j * ev.imag


def _ackermann(A, b, poles):
    """Single-input pole placement: ``K = e_n^T C^{-1} p(A)``."""
    n = A.shape[0]
    C = np.column_stack([np.linalg.matrix_power(A, k) @ b for k in range(n)])
    if np.linalg.matrix_rank(C) < n:
        return None
    coeffs = np.real(np.poly(poles))
    pA = sum(c * np.linalg.matrix_power(A, n - k) for k, c in enumerate(coeffs))
    e = np.zeros(n)
    e[-1] = 1.0
    return np.linalg.solve(C.T, e) @ pA


def _hurwitz(M) -> bool:
    return bool(np.max(np.linalg.eigvals(M).real) < 0)


def initial_gain(A, b, retries: int = 6) -> np.ndarray:
    """A stabilising state-feedback gain to start the policy iteration.

    Tries zero feedback, then pole placement at the mirrored open-loop
    spectrum, moving the target poles further left on each retry.
    """
    if _hurwitz(A):
        return np.zeros(A.shape[0])
    poles = _mirrored_poles(A)
    for k in range(retries):
        K = _ackermann(A, b, poles * 2.0**k)
        if K is None:
            break
        if _hurwitz(A - np.outer(b, K)):
            return K
    raise ConfigError("no stabilising initial gain found; the pair (A, B) may not be stabilisable")


def riccati_residual(A, B, Qbar, R, P) -> float:
    b = np.asarray(B, dtype=float).reshape(-1)
    res = A.T @ P + P @ A - np.outer(P @ b, P @ b) / R + Qbar
    return float(np.max(np.abs(res)))


def solve_lqr(A, B, Qbar, R: float, tol: float = RICCATI_TOL, max_iter: int = 100):
    """Stabilising solution ``P`` of ``A^T P + P A - P B R^-1 B^T P + Q = 0`` and ``K = R^-1 B^T P``.

    Newton-Kleinman iteration from :func:`initial_gain`.  Each iterate is
    a Lyapunov solve for the current closed loop; the gain is then improved
    from the new ``P``.  Converges quadratically once close.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(B, dtype=float).reshape(-1)
    Qbar = np.atleast_2d(np.asarray(Qbar, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,) or Qbar.shape != (n, n):
        raise ConfigError("solve_lqr expects A (n, n), B (n,) and Q (n, n)")
    if not R > 0:
        raise ConfigError("R must be positive")
    K = initial_gain(A, b)
    P = None
    for _ in range(max_iter):
        Acl = A - np.outer(b, K)
        P_new = _lyapunov(Acl, Qbar + R * np.outer(K, K))
        K = b @ P_new / R
        if P is not None and np.max(np.abs(P_new - P)) <= 1e-14 * max(1.0, np.max(np.abs(P_new))):
            P = P_new
            break
        P = P_new
    res = riccati_residual(A, b, Qbar, R, P)
    if not res <= tol:
        raise ConfigError(f"Riccati iteration stalled with residual {res:.3g}")
    return P, K


def quadratic_weights(P, basis: Basis) -> np.ndarray:
    """Weights of ``x^T P x`` in a monomial basis.

    Squares take ``P_ii``, cross terms ``2 P_ij``; monomials of any other
    degree get zero.
    """
    if basis.exponents is None:
        raise ConfigError("quadratic_weights needs a polynomial basis")
    theta = np.zeros(basis.l)
    for k, e in enumerate(basis.exponents):
        if e.sum() != 2:
            continue
        idx = np.flatnonzero(e)
        theta[k] = P[idx[0], idx[0]] if idx.size == 1 else 2.0 * P[idx[0], idx[1]]
    return theta


def _ex1_V(x):
    x1, x2 = x[..., 0], x[..., 1]
    return 1.5 * x1**2 + 2.0 * x1 * x2 + x2**2


def _ex1_V_x(x):
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([3.0 * x1 + 2.0 * x2, 2.0 * x1 + 2.0 * x2], axis=-1)


def _ex1_u0(x):
    x1, x2 = x[..., 0], x[..., 1]
    return -(np.cos(2.0 * x1) + 2.0) * (x1 + x2)


def example1_analytic() -> AnalyticSolution:
    """Closed-form optimum of the second-order benchmark in the ``quad2`` basis."""
    return AnalyticSolution(
        theta_star=np.array([1.5, 2.0, 1.0]), V_star=_ex1_V, V_x=_ex1_V_x, u0_star=_ex1_u0, basis="quad2",
    )


def example1_unknown_basis_weights() -> np.ndarray:
    """The same optimum written in the seven-term ``poly7`` basis."""
    return np.array([1.5, 0.0, 1.0, 0.0, 2.0, 0.0, 0.0])


def example2_analytic() -> AnalyticSolution:
    """LQR optimum of the third-order benchmark in the ``quad3`` basis."""
    _, model, cost = make_example2()
    A, b = chain_matrices(3)
    # nominal drift is linear: f0(x) = a . x, g0 constant
    a = np.array([model.f0(e) for e in np.eye(3)])
    g = float(model.g0(np.zeros(3)))
    A = A + np.outer(b, a)
    Bv = g * b
    P, K = solve_lqr(A, Bv, cost.Qbar, cost.R)
    theta = quadratic_weights(P, get_basis("quad3"))
    return AnalyticSolution(
        theta_star=theta,
        V_star=lambda x: np.einsum("...i,ij,...j->...", x, P, x),
        V_x=lambda x: 2.0 * np.asarray(x) @ P,
        u0_star=lambda x: -(np.asarray(x) @ K),
        basis="quad3",
        extra={"P": P, "K": K, "A": A, "B": Bv},
    )


def weight_error(theta_hat, solution) -> tuple[float, float]:
    """``(max-abs, Euclidean)`` distance to the ideal weights.

    ``solution`` is an :class:`AnalyticSolution` or a plain weight vector.
    """
    ref = solution.theta_star if isinstance(solution, AnalyticSolution) else np.asarray(solution, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    if theta_hat.shape != ref.shape:
        raise ConfigError(f"weight vector has shape {theta_hat.shape}, expected {ref.shape}")
    d = theta_hat - ref
    return float(np.max(np.abs(d))), float(np.linalg.norm(d))


def sample_box(box, samples: int, seed: int = 0) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    rng = np.random.default_rng(seed)
    return rng.uniform(box[:, 0], box[:, 1], size=(samples, box.shape[0]))


@dataclass
class OracleReport:
    ex1_max_residual: float
    ex2_max_residual: float
    riccati_residual: float
    ex2_theta: np.ndarray
    ex2_K: np.ndarray
    ex1_theta: np.ndarray

    @property
    def ok(self) -> bool:
        return (self.ex1_max_residual <= RESIDUAL_TOL and self.ex2_max_residual <= RESIDUAL_TOL
                and self.riccati_residual <= RICCATI_TOL)

    def lines(self) -> list[str]:
        names = ("x1^2", "x2^2", "x3^2", "x1*x2", "x1*x3", "x2*x3")
        out = [
            f"example1: max |HJB residual| over samples = {self.ex1_max_residual:.3e}",
            f"example1: theta* = {np.array2string(self.ex1_theta, precision=6)}",
            f"example2: Riccati residual = {self.riccati_residual:.3e}",
            f"example2: max |HJB residual| over samples = {self.ex2_max_residual:.3e}",
            "example2: V* coefficients",
        ]
        out += [f"  {nm:6s} {v: .6f}" for nm, v in zip(names, self.ex2_theta)]
        out.append("example2: u0* = -(" + " + ".join(f"{k:.6f} x{i + 1}" for i, k in enumerate(self.ex2_K)) + ")")
        return out


def verify_oracles(samples: int = 1000, seed: int = 0, theta_override=None) -> OracleReport:
    """Residual checks of both reference solutions on uniform samples of their boxes.

    ``theta_override`` replaces the Example 1 weights (negative control):
    the value gradient and policy are rebuilt from those weights.
    """
    plant1, model1, cost1 = make_example1()
    sol1 = example1_analytic()
    V_x, u0 = sol1.V_x, sol1.u0_star
    theta1 = sol1.theta_star
    if theta_override is not None:
        theta1 = np.asarray(theta_override, dtype=float)
        V_x, u0 = _quad2_pair(theta1, model1, cost1)
    xs = sample_box(plant1.x_box, samples, seed)
    r1 = float(np.max(np.abs(hjb_residual(V_x, u0, model1, cost1, xs))))

    plant2, model2, cost2 = make_example2()
    sol2 = example2_analytic()
    xs2 = sample_box(plant2.x_box, samples, seed)
    r2 = float(np.max(np.abs(hjb_residual(sol2.V_x, sol2.u0_star, model2, cost2, xs2, eps=0.01))))
    ex = sol2.extra
    rr = riccati_residual(ex["A"], ex["B"], cost2.Qbar, cost2.R, ex["P"])
    return OracleReport(r1, r2, rr, sol2.theta_star, ex["K"], theta1)


def _quad2_pair(theta, model, cost, eps=0.02):
    """Value gradient and greedy policy of ``theta . (x1^2, x1 x2, x2^2)``."""

    def V_x(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([2 * theta[0] * x1 + theta[1] * x2, theta[1] * x1 + 2 * theta[2] * x2], axis=-1)

    def u0(x):
        _, g0s = nominal_eval(model, x, eps)
        return -g0s * V_x(x)[..., -1] / (2.0 * cost.R)

    return V_x, u0
