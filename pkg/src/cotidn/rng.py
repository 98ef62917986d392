"""splitmix64 pseudorandom stream.

Every random draw in the package goes through this generator so that runs are
bit-reproducible across platforms and across implementations in other
languages.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """The splitmix64 output finalizer applied to a 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    """Independent stream seed for cell ``index``: splitmix64(base ^ index)."""
    return mix64(((base_seed ^ index) + GOLDEN_GAMMA) & MASK64)


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        """Float in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self.uniform() * n), n - 1)

    def choice_weighted(self, weights) -> int:
        """Index drawn with probability proportional to ``weights``."""
        total = float(sum(weights))
        if total <= 0.0:
            return self.randbelow(len(weights))
        target = self.uniform() * total
        acc = 0.0
        last_positive = 0
        for i, w in enumerate(weights):
            if w > 0.0:
                last_positive = i
                acc += w
                if target < acc:
                    return i
        return last_positive

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        # Box-Muller on two draws; 1 - u keeps the log argument in (0, 1].
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
