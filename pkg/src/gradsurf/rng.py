"""Counter-addressed random streams.

Every draw is a pure function of (seed, stream_id, counter), which is what
coupling-from-the-past needs: randomness at absolute time -t must be
reproducible when the algorithm looks further into the past, and distinct
chains get independent streams by stream_id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_MASK128 = (1 << 128) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def at(self, counter: int) -> np.random.Generator:
        """Deterministic generator addressed by a 128-bit counter."""
        c = counter & _MASK128
        entropy = (
            self.seed & _MASK64,
            self.stream_id & _MASK64,
            c & _MASK64,
            (c >> 64) & _MASK64,
        )
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

    def substream(self, k: int) -> "RngStream":
        return RngStream(self.seed, (self.stream_id * 1_000_003 + k + 1) & _MASK64)
