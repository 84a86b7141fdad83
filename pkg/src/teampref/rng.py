"""Named random streams derived from a single master seed.

Every subsystem (environment, human actions, oracle tie-breaks, policy
learning, reward training, query selection, ...) draws from its own stream.
Consuming one stream never perturbs another, which is what makes the
algorithm-variant reduction identities (and replayable runs in general)
bit-exact: a variant-specific feature may burn through its own stream
without shifting anybody else's.
"""

from __future__ import annotations

import zlib

import numpy as np


class RngPool:
    """Factory of independent ``np.random.Generator`` streams keyed by name."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        """Return the generator for ``name``, creating it on first use."""
        if name not in self._streams:
            self._streams[name] = np.random.default_rng(self._seq(name))
        return self._streams[name]

    def child_seed(self, name: str, index: int) -> int:
        """A stable 64-bit seed for short-lived generators (e.g. one evaluation)."""
        seq = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(_name_key(name), int(index))
        )
        return int(seq.generate_state(1, dtype=np.uint64)[0])

    def _seq(self, name: str) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.seed, spawn_key=(_name_key(name),))


def _name_key(name: str) -> int:
    # crc32 is stable across platforms and runs, unlike hash().
    return zlib.crc32(name.encode("utf-8"))
