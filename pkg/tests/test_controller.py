import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esorl.controller import compose, control
from esorl.dynamics import NormalFormPlant, plant_rhs
from esorl.errors import DivergenceError
from esorl.learner import get_basis, policy_hat

EPS = 0.02
THETA = np.array([1.5, 2.0, 1.0])


@pytest.fixture(scope="module")
def quad2():
    return get_basis("quad2")


def test_no_compensation_when_extended_estimate_is_zero(ex1, quad2, rng):
    _, model, cost = ex1
    for xb in rng.uniform(-2, 2, (50, 2)):
        cs = control(np.append(xb, 0.0), THETA, quad2, model, cost.R, EPS)
        assert cs.comp == 0.0
        assert cs.u == cs.u0_hat == pytest.approx(policy_hat(xb, THETA, quad2, model, cost.R, EPS), rel=1e-14)


def test_control_examples(ex1, quad2):
    _, model, cost = ex1
    g = math.cos(2) + 2
    cs = control(np.array([1.0, 1.0, 0.5]), THETA, quad2, model, cost.R, EPS)
    assert cs.u == pytest.approx(-2 * g - 0.5 / g, abs=1e-12)
    assert cs.u == pytest.approx(-3.48339, abs=1e-5)
    cs = control(np.array([0.0, 0.0, 1.0]), np.zeros(3), quad2, model, cost.R, EPS)
    assert cs.u == pytest.approx(-1.0 / 3.0, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-2.1, 2.1), min_size=3, max_size=3),
       st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_parts_add_up_exactly(xbar, theta):
    from esorl.dynamics import make_example1

    _, model, cost = make_example1()
    cs = control(np.array(xbar), np.array(theta), get_basis("quad2"), model, cost.R, EPS)
    assert cs.u == cs.u0_hat + cs.comp


def test_non_finite_input_raises(ex1, quad2):
    _, model, cost = ex1
    with pytest.raises(DivergenceError):
        control(np.array([np.nan, 0.0, 0.0]), THETA, quad2, model, cost.R, EPS)


def test_input_clipping_keeps_parts():
    cs = compose(-3.0, 2.0, 1.0, u_max=4.0)
    assert cs.u == -4.0 and cs.u0_hat == -3.0 and cs.comp == -2.0


def test_perfect_compensation_gives_nominal_closed_loop(ex1, quad2, rng):
    _, model, cost = ex1
    nominal = NormalFormPlant(n=2, p=0, f=lambda x, z, w: model.f0(x), g=lambda x, z, w: model.g0(x),
                              f_z=lambda x, z, w: np.zeros(0), disturbance=lambda t: 0.0)
    for x in rng.uniform(-1.5, 1.5, (50, 2)):
        cs = control(np.append(x, 0.0), THETA, quad2, model, cost.R, EPS)
        xdot, _ = plant_rhs(nominal, x, np.zeros(0), cs.u, 0.0)
        u0 = policy_hat(x, THETA, quad2, model, cost.R, EPS)
        ref = np.array([x[1], model.f0(x) + model.g0(x) * u0])
        np.testing.assert_allclose(xdot, ref, rtol=0, atol=1e-13)


def test_control_is_lipschitz_on_box(ex1, quad2, rng):
    _, model, cost = ex1
    a = rng.uniform(-2, 2, (500, 3))
    b = a + rng.normal(scale=1e-4, size=a.shape)
    ua = np.array([control(p, THETA, quad2, model, cost.R, EPS).u for p in a])
    ub = np.array([control(p, THETA, quad2, model, cost.R, EPS).u for p in b])
    q = np.abs(ua - ub) / np.linalg.norm(a - b, axis=1)
    assert np.all(np.isfinite(q)) and q.max() < 100.0
