"""Random-sign dyadic martingales and their iterated-logarithm ratio.

Simulates 2000 deep paths of a one-dimensional dyadic martingale with unit
scales and prints how often the running maximum of
|M_n| / sqrt(<M>_n log log <M>_n) exceeds a few thresholds.
"""
import numpy as np

from lil_lab import martingale

DEPTH, PATHS, SEED = 4096, 2000, 7

digits = martingale.random_digits(1, DEPTH, PATHS, SEED)
paths = martingale.simulate_paths(1, DEPTH, 1.0, SEED, digits)
stats = martingale.lil_statistics(paths, 256, DEPTH)

print(f"{PATHS} paths, generations 256..{DEPTH}")
print(f"median terminal ratio   {stats.median_terminal:.4f}")
for t in (0.5, 1.0, 1.5, 3.0):
    print(f"running max above {t:3.1f}   {np.mean(stats.running_max > t):.4f}")
