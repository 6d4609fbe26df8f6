"""Seeded, splittable random streams shared by generators and solvers.

Streams are Philox4x64-10 counter-based generators keyed by
(seed, label), with standard normals produced by Box-Muller on the
uniform stream. Both choices are versioned algorithms with published
definitions, so fixtures generated here are reproducible bit-for-bit
across platforms and reimplementable outside Python.
"""

from __future__ import annotations

import hashlib

import numpy as np


class Stream:
    """Uniform stream plus Box-Muller normal sampling."""

    def __init__(self, seed: int, label: str):
        digest = hashlib.sha256(f"alpd/v1/{label}".encode()).digest()
        key = int.from_bytes(digest[:16], "little")
        self._gen = np.random.Generator(np.random.Philox(key=key ^ (int(seed) << 64)))
        self.seed = int(seed)
        self.label = label

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        return low + (high - low) * self._gen.random(size)

    def normal(self, size=None) -> np.ndarray:
        """Standard normals via Box-Muller on the uniform stream."""
        n = 1 if size is None else int(np.prod(size))
        pairs = (n + 1) // 2
        u1 = self._gen.random(pairs)
        u2 = self._gen.random(pairs)
        r = np.sqrt(-2.0 * np.log1p(-u1))  # 1−u1 ∈ (0,1], avoids log(0)
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        if size is None:
            return float(out[0])
        return out.reshape(size)


def stream(seed: int, label: str) -> Stream:
    """Independent stream for the given (seed, label) pair."""
    return Stream(seed, label)
