"""Disturbance rejection with an extended state observer and an actor-critic learner.

The package simulates uncertain single-input plants in normal form, where an
extended state observer estimates and cancels the lumped uncertainty while
an actor-critic learner, trained on Bellman errors extrapolated over a fixed
grid, approximates the optimal policy of the known nominal model.
"""
from .dynamics import (
    CostSpec,
    NominalModel,
    NormalFormPlant,
    get_plant,
    make_example1,
    make_example2,
    nominal_eval,
    plant_rhs,
    quadratic_cost,
    register_plant,
    total_uncertainty,
)
from .errors import ConfigError, DivergenceError
from .learner import (
    Basis,
    ExtrapolationGrid,
    LearnerConfig,
    LearnerGains,
    get_basis,
    make_grid,
    polynomial_basis,
)
from .observer import EsoConfig, eso_rhs, hurwitz_check, saturate_outputs, soft_sat
from .oracle import example1_analytic, example2_analytic, hjb_residual, solve_lqr, weight_error
from .sim import RunResult, SimConfig, Trace, run, write_trace

__version__ = "0.1.0"
