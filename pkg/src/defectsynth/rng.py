"""Seeded random streams.

Every stochastic operation in the package draws from a `SeededRng`. Child
streams are derived purely from the parent seed and an integer stream id so
that results do not depend on how many values were drawn elsewhere.
"""

import numpy as np

from defectsynth.constants import MASK64, SPLITMIX_GAMMA, SPLITMIX_MUL1, SPLITMIX_MUL2
from defectsynth.exceptions import InvalidInputError


def splitmix64_mix(value: int) -> int:
    """SplitMix64 finalizer applied to a 64 bit integer."""
    z = value & MASK64
    z ^= z >> 30
    z = (z * SPLITMIX_MUL1) & MASK64
    z ^= z >> 27
    z = (z * SPLITMIX_MUL2) & MASK64
    z ^= z >> 31
    return z


def derive_seed(seed: int, stream_id: int) -> int:
    """Returns the seed of child stream `stream_id` of `seed`."""
    if stream_id < 0:
        msg = f"Stream id must be non negative, got {stream_id=}"
        raise InvalidInputError(msg)
    return splitmix64_mix(seed + (stream_id + 1) * SPLITMIX_GAMMA)


class SeededRng:
    """Random stream identified by a 64 bit seed.

    Parameters
    ----------

    seed: int
        Non negative seed, reduced modulo 2**64.

    Examples
    --------

    >>> rng = SeededRng(7)
    >>> child = rng.derive(3)
    >>> child.uniform(0, 1)
    """

    def __init__(self, seed: int):
        if seed < 0:
            msg = f"Seed must be non negative, got {seed=}"
            raise InvalidInputError(msg)
        self.seed = seed & MASK64
        self.generator = np.random.Generator(np.random.Philox(key=self.seed))

    def derive(self, stream_id: int) -> "SeededRng":
        """Returns an independent child stream."""
        return SeededRng(derive_seed(self.seed, stream_id))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        """Integers in [low, high], both inclusive."""
        return self.generator.integers(low, high, size=size, endpoint=True)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def bernoulli(self, p: float) -> bool:
        return bool(self.generator.uniform() < p)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def choice(self, n: int, size: int) -> np.ndarray:
        """`size` distinct indices from range(n)."""
        return self.generator.choice(n, size=size, replace=False)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed:#018x})"


def derive_rng(parent: SeededRng, stream_id: int) -> SeededRng:
    """Derives child stream `stream_id` of `parent`."""
    return parent.derive(stream_id)
