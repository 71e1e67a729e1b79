"""Seeded, stream-splittable random source.

Raw bits come from numpy's counter-based Philox generator keyed by a
``SeedSequence(seed, spawn_key=path)``; child streams extend the path, so
work fanned out over rows or columns is reproducible regardless of order.
Gaussians are produced by Box-Muller from the uniform stream so they do not
depend on numpy's sampling algorithms.
"""
from __future__ import annotations

import numpy as np

# top-level stream identifiers
STATES = 1
EVOLUTIONS = 2
MASK = 3
NOISE = 4
TRAIN = 5
CHANNELS = 6


class Rng:
    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self.path})"

    def child(self, *index: int) -> "Rng":
        return Rng(self.seed, self.path + tuple(index))

    def uniform(self, size=None, low=0.0, high=1.0):
        """Uniform on [low, high)."""
        u = self._gen.random(size)
        return low + (high - low) * u

    def uniform_open(self, size=None, low=-1.0, high=1.0):
        """Uniform on the open interval (low, high)."""
        while True:
            u = self._gen.random(size)
            if np.all(u > 0.0):
                return low + (high - low) * u

    def normal(self, size):
        """Standard real normals via Box-Muller."""
        n = int(np.prod(size))
        m = (n + 1) // 2
        u1 = 1.0 - self._gen.random(m)
        u2 = self._gen.random(m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:n].reshape(size)

    def complex_normal(self, size):
        """Standard complex normals, E|z|^2 = 1."""
        n = int(np.prod(size))
        u1 = 1.0 - self._gen.random(n)
        u2 = self._gen.random(n)
        r = np.sqrt(-np.log(u1))
        z = r * np.exp(2j * np.pi * u2)
        return z.reshape(size)

    def choice_index(self, n: int) -> int:
        return min(int(self._gen.random() * n), n - 1)

    def permutation_prefix(self, n: int, k: int) -> np.ndarray:
        """First ``k`` entries of a uniform random permutation of range(n)."""
        keys = self._gen.random(n)
        return np.argsort(keys, kind="stable")[:k]


def as_rng(seed_or_rng) -> Rng:
    if isinstance(seed_or_rng, Rng):
        return seed_or_rng
    return Rng(int(seed_or_rng))
