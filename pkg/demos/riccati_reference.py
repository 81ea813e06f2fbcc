"""Reference optimum for the third-order benchmark.

The nominal model is linear, so the optimal value is x^T P x with P from
the algebraic Riccati equation.  Kleinman iteration solves it by repeated
Lyapunov solves; the six quadratic weights and the feedback gain are
printed along with the residuals that certify them.
Run:  python3 demos/riccati_reference.py
"""
import numpy as np

from esorl.dynamics import make_example2
from esorl.oracle import example2_analytic, hjb_residual, riccati_residual, sample_box

plant, model, cost = make_example2()
sol = example2_analytic()
ex = sol.extra

print("A =\n", ex["A"])
print("B =", ex["B"])
print("P =\n", np.round(ex["P"], 6))
for name, w in zip(("x1^2", "x2^2", "x3^2", "x1*x2", "x1*x3", "x2*x3"), sol.theta_star):
    print(f"  {name:6s} {w:9.6f}")
print("u0*(x) = -(" + " + ".join(f"{k:.4f} x{i + 1}" for i, k in enumerate(ex["K"])) + ")")

print(f"Riccati residual  {riccati_residual(ex['A'], ex['B'], cost.Qbar, cost.R, ex['P']):.2e}")
xs = sample_box(plant.x_box, 1000)
r = hjb_residual(sol.V_x, sol.u0_star, model, cost, xs, eps=0.01)
print(f"max HJB residual over 1000 samples  {np.max(np.abs(r)):.2e}")
