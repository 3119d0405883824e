"""Hyperbolic square function of finite Blaschke products.

For products of degree 1, 3 and 6 prints the infimum over 16 directions of
A^2(f)(xi, r) / log(1/(1 - r)) as r approaches the circle, and checks the
Schwarz-Pick contraction at a handful of points.
"""
import numpy as np

from lil_lab import disc

radii = [0.9, 0.99, 0.999, 0.9999]
dirs = disc.directions(16)
for degree in (1, 3, 6):
    f = disc.identity() if degree == 1 else disc.random_blaschke(11, degree)
    grid = np.array([[disc.a_squared_f(f, xi, r) / -np.log1p(-r) for r in radii] for xi in dirs])
    print(f"degree {degree}: inf ratio by radius " + "  ".join(f"{v:.3f}" for v in grid.min(axis=0)))

f = disc.random_blaschke(11, 6)
z = 0.9 * np.exp(1j * np.linspace(0, 6, 7))
print("max hyperbolic derivative on |z| = 0.9:", f"{max(disc.hyperbolic_derivative(f, w) for w in z):.4f}")
