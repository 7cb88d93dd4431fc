"""SplitMix64 pseudo-random stream.

Every random draw in the package (synthetic data, k-means++ seeding, SMOTE
interpolation) comes from this generator so that equal seeds reproduce
equal bytes independently of numpy's own bit generators.

Algorithm (Steele, Lea & Flood 2014)::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

all arithmetic modulo 2**64. Doubles take the top 53 bits.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z):
    """SplitMix64 output finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z):
    # uint64 array arithmetic wraps modulo 2**64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & MASK64
    return h


def derive_seed(seed: int, label: str) -> int:
    """Seed of the substream named ``label`` under ``seed``."""
    return mix64((seed & MASK64) ^ mix64(fnv1a64(label.encode("utf-8"))))


class Rng:
    """Sequential SplitMix64 stream with a few numpy-returning helpers.

    Parameters
    ----------
    seed : int
        Any integer; reduced modulo 2**64.
    """

    def __init__(self, seed: int = 0):
        self.state = int(seed) & MASK64

    def derive(self, label: str) -> "Rng":
        """Independent substream keyed by ``(current state, label)``."""
        return Rng(derive_seed(self.state, label))

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def u64(self, size: int) -> np.ndarray:
        """``size`` consecutive outputs; identical to repeated ``next_u64``."""
        size = int(size)
        if size < 0:
            raise ValueError("size must be non-negative")
        counters = np.arange(1, size + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + counters * np.uint64(GAMMA)
            out = _mix64_array(z)
        self.state = (self.state + size * GAMMA) & MASK64
        return out

    def uniform(self, size=None):
        """Doubles in [0, 1) built from the top 53 bits."""
        n = 1 if size is None else int(np.prod(size))
        u = (self.u64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def normal(self, size):
        """Standard normal draws via Box-Muller, consumed in pairs."""
        n = int(np.prod(size))
        m = (n + 1) // 2
        u = self.uniform(2 * m)
        u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
        u2 = u[1::2]
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        z = np.empty(2 * m)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:n].reshape(size)

    def integers(self, high: int, size=None):
        """Integers in [0, high) by multiply-shift on the top 32 bits."""
        if not 1 <= high <= 1 << 32:
            raise ValueError("high must lie in [1, 2**32]")
        n = 1 if size is None else int(np.prod(size))
        top = self.u64(n) >> np.uint64(32)
        out = ((top * np.uint64(high)) >> np.uint64(32)).astype(np.int64)
        if size is None:
            return int(out[0])
        return out.reshape(size)

    def weighted_index(self, weights) -> int:
        """One index drawn with probability proportional to ``weights``."""
        w = np.asarray(weights, dtype=np.float64)
        cum = np.cumsum(w)
        total = cum[-1]
        if not total > 0:
            return self.integers(len(w))
        idx = int(np.searchsorted(cum, self.uniform() * total, side="right"))
        return min(idx, len(w) - 1)
