# Euler products on the critical line and the chaos integral they define.

import math

import numpy as np

from rmflab import MomentSpec, build_prime_table, chaos_integral, evaluate_grid, sample_model
from rmflab.products import expected_moment_formula, expected_moment_oracle, monte_carlo_moment

X = 1e4
table = build_prime_table(100_000)
f = sample_model("steinhaus", 11, int(X), table)

# log |F(1/2 + it)| over a short window; the fastest oscillation is on scale 1/log X
ts = np.linspace(-1, 1, 401)
grid = evaluate_grid(f, 0.0, ts, [0], X, table)
logabs = grid.row(0).real
print(f"max log|F| on [-1, 1]: {logabs.max():.2f} at t={ts[logabs.argmax()]:.3f}")
print(f"log X = {math.log(X):.2f}")

# int_{1/3}^{1/2} |F|^2 dt, and the same with half the step
a = chaos_integral(f, 0.0, 1 / 3, 1 / 2, X, table)
b = chaos_integral(f, 0.0, 1 / 3, 1 / 2, X, table, step=1 / (40 * math.log(X)))
print(f"chaos integral {a:.5f}, half step {b:.5f}")

# a mixed moment over primes in (1e4, 1e5]: closed form, exact product, Monte Carlo
spec = MomentSpec(alphas=(0.5, 0.5), ts=(0.0, 2.0), sigma=0.0, x=1e4, y=1e5)
formula = expected_moment_formula("steinhaus", spec, table)
oracle = expected_moment_oracle("steinhaus", spec, table)
mc = monte_carlo_moment("steinhaus", spec, 20_000, 5, table)
print(f"formula {formula.value:.5f} (+- {formula.error_radius:.1e} in log), oracle {oracle:.5f}, MC {mc.estimate:.5f} +- {mc.stderr:.5f}")
