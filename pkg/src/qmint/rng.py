"""Seeded, splittable random source with a draw counter.

Every stochastic operation in the package takes a :class:`SeededRng`
explicitly; nothing touches global random state. The draw counter feeds
the ``rng_draws`` field of the event log.
"""

from __future__ import annotations

import numpy as np


class SeededRng:
    def __init__(self, seed: int | np.random.SeedSequence = 0):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed) & (2**64 - 1))
        self._gen = np.random.Generator(np.random.PCG64(self._seq))
        self.draws = 0

    @property
    def seed(self) -> int:
        """Root entropy of this stream (shared by all children split from it)."""
        return int(self._seq.entropy)

    def split(self, n: int = 1) -> list[SeededRng]:
        """Independent child streams; deterministic in the parent seed and call order."""
        return [SeededRng(s) for s in self._seq.spawn(n)]

    def random(self, size=None):
        self.draws += 1 if size is None else int(np.prod(size))
        return self._gen.random(size)

    def integers(self, low, high=None, size=None):
        self.draws += 1 if size is None else int(np.prod(size))
        return self._gen.integers(low, high, size=size)

    def choice_index(self, probs) -> int:
        """Sample an index from a discrete distribution (one draw)."""
        p = np.asarray(probs, dtype=float)
        cdf = np.cumsum(p)
        u = self.random() * cdf[-1]
        return int(min(np.searchsorted(cdf, u, side="right"), len(p) - 1))

    def multinomial(self, n: int, probs):
        p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
        self.draws += int(n)
        return self._gen.multinomial(int(n), p / p.sum())

    def normal(self, size=None):
        self.draws += 1 if size is None else int(np.prod(size))
        return self._gen.normal(size=size)

    def token_bytes(self, n: int) -> bytes:
        self.draws += 1
        return self._gen.bytes(n)
