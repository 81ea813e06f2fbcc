"""Composite control: learned nominal policy plus cancellation of the estimated uncertainty."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import NominalModel
from .errors import DivergenceError
from .learner import Basis, nominal_features


@dataclass(frozen=True)
class ControlSample:
    u: float
    u0_hat: float
    comp: float


def control(xbar, theta_c, basis: Basis, model: NominalModel, R: float, eps: float,
            u_max: float | None = None) -> ControlSample:
    """``u = u0_hat(xbar) - xbar_{n+1} / g0(xbar)`` from the saturated observer output.

    ``u_max`` optionally clips the applied input; the two parts are reported
    unclipped.
    """
    xbar = np.asarray(xbar, dtype=float)
    if not np.all(np.isfinite(xbar)):
        raise DivergenceError(f"non-finite observer output {xbar.tolist()}")
    _, gvec, g0s = nominal_features(xbar[:-1], basis, model, eps)
    u0 = -(gvec @ np.asarray(theta_c, dtype=float)) / (2.0 * R)
    return compose(u0, xbar[-1], g0s, u_max)


def compose(u0, x_ext, g0s, u_max: float | None = None) -> ControlSample:
    """Add the cancellation term to an already evaluated nominal policy."""
    u0 = float(u0)
    comp = float(-x_ext / g0s)
    u = u0 + comp
    if u_max is not None:
        u = float(np.clip(u, -u_max, u_max))
    return ControlSample(u=u, u0_hat=u0, comp=comp)
