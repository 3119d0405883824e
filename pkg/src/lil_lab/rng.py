"""Counter-based random streams.

Every random quantity in the lab is a pure function of the run seed and a
label (generation, cube, path number, ...), so results never depend on the
order in which work is scheduled.  Two flavours are provided:

* ``mix64`` / ``uniform01``: a vectorized SplitMix64 finalizer on ``uint64``
  arrays, used where millions of keyed draws are needed (dyadic trees).
* ``stream``: a ``numpy.random.Generator`` over the Philox counter-based bit
  generator, keyed by ``(seed, *labels)``, for object-level draws.
"""
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def mix64(z):
    """SplitMix64 finalizer applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        z = z ^ (z >> np.uint64(31))
    return z


def combine(key, label):
    """Derive a child key from ``key`` and an integer (or uint64 array) label."""
    label = np.asarray(label, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.asarray(key, dtype=np.uint64) ^ mix64(label * _GOLDEN + np.uint64(1)))


def root_key(seed):
    return mix64(np.uint64(int(seed) & _MASK64))


def uniform01(key):
    """Map uint64 keys to floats in [0, 1) using the top 53 bits."""
    return (np.asarray(key, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def stream(seed, *labels):
    """A Philox-backed Generator keyed by the seed and any integer labels."""
    words = [int(seed) & _MASK64] + [int(lab) & _MASK64 for lab in labels]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
