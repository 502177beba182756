# Partial sums of a random multiplicative function, split at a prime X.
#
# Every n <= X^2 is either X-smooth or has exactly one prime factor above X,
# so S(x) = (smooth part) + sum_{X<p<=x} f(p) S_X(x/p) holds exactly.

import math

import numpy as np

from rmflab import XGrid, build_prime_table, partial_sums, sample_model
from rmflab.rmf import values_up_to

X = 100
table = build_prime_table(X * X)
f = sample_model("steinhaus", 2024, X * X, table)

grid = XGrid.log_spaced(X, 6, 1.05, 2.0)
series = partial_sums(f, grid, table)

for x, total, smooth, large in zip(grid.points, series.totals, series.smooth_parts, series.large_prime_parts):
    print(f"x={x:9.1f}  |S|/sqrt(x)={abs(total) / math.sqrt(x):.3f}  smooth={abs(smooth):7.2f}  large={abs(large):7.2f}")

# the split is exact up to rounding
print("max residual:", float(np.max(series.residuals)))

# Rademacher samples live on squarefree n only
g = sample_model("rademacher", 7, 50, table)
print("f(1..12):", values_up_to(g, 12, table).values[1:].real.astype(int).tolist())
