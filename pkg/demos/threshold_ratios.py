"""Improvement ratio sqrt(S2 log log S2) / S1 for a few positive sequences.

A power-of-index sequence satisfies the regularity conditions and its ratio
tends to zero; a geometric sequence fails them and its ratio grows.
"""
import numpy as np

from lil_lab import threshold

ns = 2 ** np.arange(6, 21, 2)
print("n = " + ", ".join(str(n) for n in ns))
for label, seq in (("constant", threshold.constant(1.0)),
                   ("k^1", threshold.power_of_index(1.0)),
                   ("2^(k/2)", threshold.geometric(0.5))):
    r = threshold.improvement_ratio_ladder(seq, ns)
    rep = threshold.check_conditions(seq)
    print(f"{label:8s} all conditions hold: {rep.all_hold!s:5s}  " + "  ".join(f"{v:.3g}" for v in r))
