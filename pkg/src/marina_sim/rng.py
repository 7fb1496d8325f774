"""Named, reproducible random streams on top of the counter-based Philox generator.

A stream is identified by a (seed, label) pair.  The Philox key is derived
from SHA-256 of the pair, so distinct labels give statistically independent,
never-overlapping streams and the same pair replays bit-identically on any
platform.  Label hierarchy used by the simulator:

    coin, compressor/worker-<i>, minibatch/worker-<i>, clients,
    output-select, data-gen
"""

from __future__ import annotations

import hashlib

import numpy as np


class RngStream:
    """A labelled, replayable random stream (uniforms, integers, Bernoulli, Gaussians)."""

    def __init__(self, seed: int, label: str):
        self.seed = int(seed)
        self.label = label
        digest = hashlib.sha256(f"{self.seed}:{label}".encode()).digest()
        key = int.from_bytes(digest[:16], "little")
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def uniform(self, size=None):
        """Uniform reals in [0, 1)."""
        return self._gen.random(size)

    def integers(self, n: int, size=None):
        """Uniform integers in {0, ..., n-1}."""
        return self._gen.integers(0, n, size=size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def bernoulli(self, p: float, size=None):
        """Bernoulli(p) draw(s); p=1 always yields True since uniforms live in [0, 1)."""
        u = self._gen.random(size)
        return u < p

    def __repr__(self):
        return f"RngStream(seed={self.seed}, label={self.label!r})"


def stream(seed: int, label: str) -> RngStream:
    return RngStream(seed, label)
