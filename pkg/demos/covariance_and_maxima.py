# Conditioned on the small primes, the large-prime sums are a Gaussian-like
# vector whose covariance we can write down exactly.

import numpy as np

from rmflab import XGrid, build_prime_table, sample_model
from rmflab.gaussian import (
    covariance_matrix,
    covariance_survey,
    max_comparison_experiment,
    normal_approx_experiment,
)

X = 50
table = build_prime_table(X * X)
f = sample_model("steinhaus", 3, X * X, table)
grid = XGrid.log_spaced(X, 8)

cov = covariance_matrix(f, grid, X, table)
np.set_printoptions(precision=3, suppress=True)
print("conditional covariance:\n", cov.matrix)
print("eigenvalues:", np.linalg.eigvalsh(cov.matrix))

# redraw f(p) for p > X many times and compare max_x Re Z_x with the Gaussian model
rep = normal_approx_experiment(f, grid, X, 10_000, seed=9, table=table)
print(f"sup CDF distance between the two maxima: {rep.sup_distance:.4f}")

# how many grid points correlate strongly with each anchor
survey = covariance_survey(f, grid, X, table)
print("exceeders per anchor:", [a.count for a in survey.anchors], "threshold", round(survey.anchors[0].threshold, 3))

# maxima of n standard normals sit well below sqrt(2 log n) at moderate n
for n in (64, 1024, 4096):
    res = max_comparison_experiment(n, 0.0, 0.01, 5000, seed=1)
    print(f"n={n:5d}  median max {res.median_max:.3f}  sqrt(2 log n) {np.sqrt(2 * np.log(n)):.3f}")
