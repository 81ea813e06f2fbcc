"""The rank metric a4_c on extrapolation grids of different density.

A 2x2 grid on a symmetric box is degenerate for the quadratic basis: the
regressor is the same at x and -x, so only two distinct directions appear
and the metric is zero.  From 3x3 up the metric is positive, but it can
never exceed 1 / (l gamma lambda_min(Gamma)), because rho_i grows with the
same Gamma that the learner pushes toward sigma1.
Run:  python3 demos/grid_rank.py
"""
import numpy as np

from esorl.dynamics import make_example1
from esorl.learner import LearnerGains, a4_metric, get_basis, make_grid

plant, model, cost = make_example1()
basis = get_basis("quad2")
gains = LearnerGains(1, 5, 100, 0.1, 100, 0.5, 2000)
theta = np.array([1.5, 2.0, 1.0])

print("   a   a4 at Gamma=100 I   a4 at Gamma=2000 I")
for a in (2, 3, 5, 9):
    grid = make_grid(plant.x_box, a)
    c = [a4_metric(grid, theta, g * np.eye(3), basis, model, cost, gains, 0.02) for g in (100.0, 2000.0)]
    print(f"{a:4d}   {c[0]:17.3e}   {c[1]:18.3e}")

for g in (100.0, 2000.0):
    print(f"upper bound 1/(l gamma lambda_min) at {g:g} I: {1 / (basis.l * gains.gamma * g):.3e}")
