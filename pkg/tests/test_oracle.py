import math
import time

import numpy as np
import pytest
from scipy.linalg import solve_continuous_are

from esorl.dynamics import make_example2
from esorl.errors import ConfigError
from esorl.learner import get_basis
from esorl.oracle import (
    example1_analytic,
    example1_unknown_basis_weights,
    example2_analytic,
    hjb_residual,
    initial_gain,
    quadratic_weights,
    riccati_residual,
    sample_box,
    solve_lqr,
    verify_oracles,
    weight_error,
)

# Riccati solution of the third-order benchmark, frozen from an independent
# Schur-method solve (scipy CARE) of the same A, B, Q, R.
EX2_THETA = np.array([2.266945, 2.358012, 0.046952, 3.139037, 0.2, 0.253389])
EX2_K = np.array([1.0, 1.266945, 0.469519])
# reference coefficients rounded to four decimals
EX2_THETA_4DP = np.array([2.2669, 2.3580, 0.0470, 3.1390, 0.2, 0.2534])
EX2_K_4DP = np.array([1.0, 1.2669, 0.4695])


def test_example1_solution(ex1):
    sol = example1_analytic()
    assert np.array_equal(sol.theta_star, [1.5, 2.0, 1.0])
    assert sol.V_star(np.zeros(2)) == 0.0
    assert sol.u0_star(np.array([1.0, 1.0])) == pytest.approx(-(math.cos(2) + 2) * 2, abs=1e-12)
    assert sol.u0_star(np.array([1.0, 1.0])) == pytest.approx(-3.16770, abs=1e-5)
    # V* in the basis reproduces the closed form
    b = get_basis("quad2")
    x = np.array([0.3, -1.7])
    assert b.phi(x) @ sol.theta_star == pytest.approx(sol.V_star(x), rel=1e-14)


def test_example1_hjb_residual(ex1):
    plant, model, cost = ex1
    sol = example1_analytic()
    assert abs(hjb_residual(sol.V_x, sol.u0_star, model, cost, np.array([1.0, 1.0]))) <= 1e-9
    assert hjb_residual(sol.V_x, sol.u0_star, model, cost, np.zeros(2)) == 0.0
    xs = sample_box(plant.x_box, 1000, seed=3)
    assert np.max(np.abs(hjb_residual(sol.V_x, sol.u0_star, model, cost, xs))) <= 1e-8


def test_wrong_weights_leave_a_residual(ex1):
    from esorl.oracle import _quad2_pair

    _, model, cost = ex1
    V_x, u0 = _quad2_pair(np.ones(3), model, cost)
    assert abs(hjb_residual(V_x, u0, model, cost, np.array([1.0, 1.0]))) > 0.1


def test_unknown_basis_weights_express_the_same_value():
    b = get_basis("poly7")
    th = example1_unknown_basis_weights()
    x = sample_box(((-2, 2), (-2, 2)), 100, seed=1)
    np.testing.assert_allclose(b.phi(x) @ th, example1_analytic().V_star(x), rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("A,B,Q,R,P", [(0.0, 1.0, 1.0, 1.0, 1.0), (-1.0, 1.0, 1.0, 1.0, math.sqrt(2) - 1)])
def test_scalar_riccati(A, B, Q, R, P):
    Pm, K = solve_lqr(np.array([[A]]), np.array([B]), np.array([[Q]]), R)
    assert Pm[0, 0] == pytest.approx(P, abs=1e-12)
    assert K[0] == pytest.approx(B * P / R, abs=1e-12)
    assert riccati_residual(np.array([[A]]), np.array([B]), np.array([[Q]]), R, Pm) <= 1e-10


def test_example2_riccati_matches_rounded_coefficients():
    sol = example2_analytic()
    ex = sol.extra
    A = np.array([[0, 1, 0], [0, 0, 1], [0, -10, -11.0]])
    np.testing.assert_allclose(ex["A"], A, atol=1e-14)
    np.testing.assert_allclose(ex["B"], [0, 0, 10.0], atol=1e-14)
    assert np.max(np.abs(sol.theta_star - EX2_THETA_4DP)) <= 5e-3
    assert np.max(np.abs(ex["K"] - EX2_K_4DP)) <= 5e-3
    np.testing.assert_allclose(sol.theta_star, EX2_THETA, atol=1e-6)
    np.testing.assert_allclose(ex["K"], EX2_K, atol=1e-6)
    assert riccati_residual(A, ex["B"], np.eye(3), 1.0, ex["P"]) <= 1e-10


def test_kleinman_agrees_with_schur_solver():
    sol = example2_analytic()
    ex = sol.extra
    P_ref = solve_continuous_are(ex["A"], ex["B"][:, None], np.eye(3), np.array([[1.0]]))
    np.testing.assert_allclose(ex["P"], P_ref, atol=1e-10)
    rng = np.random.default_rng(7)
    for _ in range(5):
        A = rng.normal(size=(3, 3))
        B = rng.normal(size=3)
        P, _ = solve_lqr(A, B, np.eye(3), 2.0)
        P_ref = solve_continuous_are(A, B[:, None], np.eye(3), np.array([[2.0]]))
        np.testing.assert_allclose(P, P_ref, rtol=1e-8, atol=1e-8)


def test_example2_policy_is_negative_feedback(ex2):
    sol = example2_analytic()
    x = np.array([1.0, 0.0, 0.0])
    assert sol.u0_star(x) == pytest.approx(-1.0, abs=5e-3)
    # closed loop of the nominal linear model is Hurwitz
    ex = sol.extra
    assert np.max(np.linalg.eigvals(ex["A"] - np.outer(ex["B"], ex["K"])).real) < 0


def test_example2_quadratic_weights_solve_hjb(ex2):
    plant, model, cost = ex2
    sol = example2_analytic()
    xs = sample_box(plant.x_box, 1000, seed=5)
    assert np.max(np.abs(hjb_residual(sol.V_x, sol.u0_star, model, cost, xs, eps=0.01))) <= 1e-8
    b = get_basis("quad3")
    np.testing.assert_allclose(b.phi(xs) @ sol.theta_star, sol.V_star(xs), rtol=1e-12, atol=1e-12)


def test_quadratic_weights_layout():
    P = np.array([[1.0, 0.5, 0.25], [0.5, 2.0, 0.125], [0.25, 0.125, 3.0]])
    np.testing.assert_allclose(quadratic_weights(P, get_basis("quad3")), [1, 2, 3, 1, 0.5, 0.25])
    np.testing.assert_allclose(quadratic_weights(P[:2, :2], get_basis("quad2")), [1, 1, 2])


def test_initial_gain_stabilises_unstable_chain():
    A = np.array([[0, 1.0], [3.0, 1.0]])
    b = np.array([0, 1.0])
    K = initial_gain(A, b)
    assert np.max(np.linalg.eigvals(A - np.outer(b, K)).real) < 0


def test_unstabilisable_pair_is_rejected():
    A = np.diag([1.0, 2.0])
    with pytest.raises(ConfigError):
        solve_lqr(A, np.array([1.0, 0.0]), np.eye(2), 1.0)


def test_weight_error_examples():
    sol = example1_analytic()
    assert weight_error(sol.theta_star, sol) == (0.0, 0.0)
    mx, l2 = weight_error(sol.theta_star + [0.1, 0, 0], sol)
    assert mx == pytest.approx(0.1) and l2 == pytest.approx(0.1)
    mx, l2 = weight_error(np.zeros(3), sol)
    assert mx == 2.0 and l2 == pytest.approx(2.6925824, abs=1e-7)
    with pytest.raises(ConfigError):
        weight_error(np.zeros(4), sol)


def test_verify_oracles_report_and_runtime():
    start = time.perf_counter()
    rep = verify_oracles()
    assert time.perf_counter() - start < 1.0
    assert rep.ok
    assert rep.ex1_max_residual <= 1e-8 and rep.riccati_residual <= 1e-10
    assert any("Riccati residual" in line for line in rep.lines())
    assert not verify_oracles(theta_override=[1.0, 1.0, 1.0]).ok
