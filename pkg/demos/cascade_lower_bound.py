"""Square function of the Poisson extension of a binary cascade measure.

Builds a [0.7, 0.3] cascade on 8 unit intervals, evaluates A^2(v)(x, y) at a
few random base points and prints A^2 / log(1/y) down a dyadic height ladder,
alongside the Harnack ratio y |grad v| / v at the smallest height.
"""
import math

import numpy as np

from lil_lab import cascade

P = cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 12, 4))
heights = [2.0**-k for k in range(4, 11)]
X = np.random.default_rng(1).uniform(0, 1, size=(5, 1))
prof = cascade.a_squared_profile(P, X, heights)

print("x        " + "  ".join(f"2^-{k:<3d}" for k in range(4, 11)))
for x, row in zip(X[:, 0], prof):
    ratios = row / np.log(1 / np.array(heights))
    print(f"{x:.4f}   " + "  ".join(f"{r:6.3f}" for r in ratios))
h = cascade.harnack_ratio(P, X[:, 0], np.full(len(X), heights[-1]))
print(f"Harnack ratio at y = {heights[-1]}: max {h.max():.3f}")
print(f"resolution floor y >= {P.y_floor:.3g}, log(1/floor) = {math.log(1 / P.y_floor):.2f}")
