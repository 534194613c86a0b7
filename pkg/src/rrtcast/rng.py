"""Seedable, splittable random streams.

Every randomized operation in this package takes an explicit RngStream.
A stream is identified by a (seed, stream_id) pair; the same pair always
reproduces the same draws, and distinct pairs give statistically
independent PCG64 generators (via numpy's SeedSequence).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1

# stream_id bit layout used by the experiment harness: low 40 bits are the
# trial index, next 8 bits the estimator slot, next 16 bits the q slot.
_TRIAL_BITS = 40
_EST_BITS = 8


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream keyed by (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh numpy Generator for this stream (always the same draws)."""
        ss = np.random.SeedSequence(entropy=(self.seed & _MASK64, self.stream_id & _MASK64))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        """Derived stream; distinct indices give independent streams."""
        mixed = (self.stream_id * 0x9E3779B97F4A7C15 + index + 1) & _MASK64
        return RngStream(self.seed, mixed)


def pack_stream_id(q_index: int, estimator_index: int, trial: int) -> int:
    """Pack experiment coordinates into a single 64-bit stream id.

    Collision-free for trial < 2**40, estimator_index < 2**8,
    q_index < 2**16.
    """
    if not (0 <= trial < 1 << _TRIAL_BITS):
        raise ValueError(f"trial index {trial} out of packing range")
    if not (0 <= estimator_index < 1 << _EST_BITS):
        raise ValueError(f"estimator index {estimator_index} out of packing range")
    if not (0 <= q_index < 1 << 16):
        raise ValueError(f"q index {q_index} out of packing range")
    return (q_index << (_TRIAL_BITS + _EST_BITS)) | (estimator_index << _TRIAL_BITS) | trial
