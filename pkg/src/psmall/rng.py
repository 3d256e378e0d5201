"""Counter-based reproducible random streams.

Every Monte Carlo component draws from a :class:`CounterRNG` keyed by
``(seed, *tags)``, e.g. ``(seed, instance_id, trial_index)``.  Streams with
different keys are independent and a stream's output depends only on its key
and the draw counter, never on program order, so serial and parallel runs
produce identical results.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1

# splitmix64 increment and mixing constants
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    """One splitmix64 mixing step of a 64-bit value."""
    x = (x + _GAMMA) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _mix_key(seed: int, tags: tuple) -> int:
    """Fold an arbitrary key tuple into a 64-bit stream base."""
    h = splitmix64(seed & _MASK64)
    for tag in tags:
        if isinstance(tag, str):
            for byte in tag.encode("utf-8"):
                h = splitmix64(h ^ byte)
        elif isinstance(tag, int):
            h = splitmix64(h ^ (tag & _MASK64))
        else:
            raise TypeError(f"stream tags must be int or str, got {type(tag)!r}")
    return h


def derive_seed(seed: int, *tags) -> int:
    """Stable 64-bit sub-seed for a tagged component of a larger run."""
    return _mix_key(seed, tags)


class CounterRNG:
    """Deterministic stream of variates addressed by (key, counter).

    The n-th draw of a stream is ``splitmix64(base + n)`` where ``base`` is
    derived from the key; skipping ahead or re-creating the stream replays
    the identical sequence.
    """

    def __init__(self, seed: int, *tags):
        self._base = _mix_key(seed, tags)
        self._counter = 0

    def _next64(self) -> int:
        v = splitmix64((self._base + self._counter) & _MASK64)
        self._counter += 1
        return v

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self._next64() >> 11) * (1.0 / (1 << 53))

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        span = (_MASK64 + 1) - ((_MASK64 + 1) % n)
        while True:
            v = self._next64()
            if v < span:
                return v % n

    def poisson(self, lam: float) -> int:
        """Poisson variate via Knuth's product method (fine for small rates)."""
        if lam < 0:
            raise ValueError("rate must be nonnegative")
        if lam == 0:
            return 0
        if lam > 60:
            # normal approximation would bias tail checks; split the rate instead
            half = self.poisson(lam / 2.0)
            return half + self.poisson(lam - lam / 2.0)
        limit = math.exp(-lam)
        count = 0
        prod = self.uniform()
        while prod > limit:
            count += 1
            prod *= self.uniform()
        return count

    def sample_without_replacement(self, n: int, k: int) -> list:
        """Uniform k-subset of range(n), returned sorted."""
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        # partial Fisher-Yates on an index map keeps this O(k) in memory
        chosen = []
        swaps = {}
        for i in range(k):
            j = i + self.randint(n - i)
            vi = swaps.get(i, i)
            vj = swaps.get(j, j)
            swaps[j] = vi
            chosen.append(vj)
        return sorted(chosen)
