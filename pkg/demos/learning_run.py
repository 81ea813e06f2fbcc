"""Learn the optimal value of the second-order benchmark online.

Runs the bundled known-basis configuration (horizon shortened by default)
and prints the actor weights against the closed-form optimum
(1.5, 2, 1).  Pass a horizon in seconds as the first argument, e.g. 100
for the full run (about a minute).  Writes trace and plots to
demos/out/learning_run/.
Run:  python3 demos/learning_run.py [T]
"""
import sys
from pathlib import Path

import numpy as np

from esorl import config
from esorl.oracle import example1_analytic, weight_error
from esorl.sim import write_trace, write_weights
from esorl.svgplot import plot_trace

T = float(sys.argv[1]) if len(sys.argv) > 1 else 20.0
raw = config.load("example1_known_basis")
raw["sim"]["T"] = T
exp = config.build(config.resolve(raw))


def progress(t):
    if abs(t % 5.0) < 1e-9 or abs(t % 5.0 - 5.0) < 1e-9:
        print(f"  t = {t:5.1f} s", flush=True)


res = exp.run(progress)
s = res.summary
theta_star = example1_analytic().theta_star
mx, l2 = weight_error(s["final_theta_c"], theta_star)
print("actor weights at T:", np.round(s["final_theta_c"], 4), " ideal:", theta_star)
print(f"max weight error {mx:.4f}, |x(T)| {s['final_x_norm']:.4f}, inf a4_c {s['inf_a4_c']:.2e}")

out = Path(__file__).parent / "out" / "learning_run"
out.mkdir(parents=True, exist_ok=True)
write_trace(res.trace, out / "trace.csv")
write_weights(res.trace, out / "weights.csv")
for p in plot_trace(out / "trace.csv", out, out / "weights.csv", refs=theta_star):
    print("wrote", p)
