"""Self-contained 64-bit PRNG so golden files are portable across platforms.

xoshiro256** with the state seeded by splitmix64. The uniform, gaussian, and
poisson draws below are part of the stream contract: changing how many raw
words an operation consumes would move every downstream golden value.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1


def _splitmix64(x: int):
    while True:
        x = (x + 0x9E3779B97F4A7C15) & MASK64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        yield (z ^ (z >> 31)) & MASK64


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** generator with deterministic derived draws."""

    def __init__(self, seed: int):
        sm = _splitmix64(seed & MASK64)
        self._s = [next(sm) for _ in range(4)]
        if not any(self._s):  # all-zero state is the one forbidden state
            self._s[0] = 1

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection, unbiased."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Box-Muller using two uniforms; the sine branch is discarded."""
        u1 = self.random()
        u2 = self.random()
        while u1 <= 0.0:
            u1 = self.random()
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def poisson(self, lam: float) -> int:
        """Multiplication method; adequate for the small rates used here."""
        if lam < 0.0:
            raise ValueError("rate must be non-negative")
        if lam == 0.0:
            return 0
        limit = math.exp(-lam)
        k = 0
        p = 1.0
        while True:
            p *= self.random()
            if p <= limit:
                return k
            k += 1

    def shuffle(self, items: list) -> None:
        """Fisher-Yates, in place."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]
