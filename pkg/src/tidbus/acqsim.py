"""Simulated data acquisition block clock.

Stands in for a real acquisition system: hardware sampling at some rate
and handing data to the host in fixed-size blocks numbers those blocks
at rate/block_size per second.  Only the numbering is modeled, no sample
data.  Plugs into the server as its block source.
"""

from __future__ import annotations

import time
from typing import Callable

from .message import MicroDuration


class SimAcquisition:
    """Derives the current block number from elapsed time.

    At 500 Hz with blocks of 10 samples, blocks arrive at 50 per second,
    so one second after start the current block is 50.  Counting starts
    at block 0 at construction time.
    """

    def __init__(
        self,
        sampling_rate_hz: float,
        block_size_samples: int,
        clock: Callable[[], float] = time.monotonic,
    ):
        if sampling_rate_hz <= 0:
            raise ValueError("sampling_rate_hz must be positive")
        if block_size_samples <= 0:
            raise ValueError("block_size_samples must be positive")
        self.sampling_rate_hz = sampling_rate_hz
        self.block_size_samples = block_size_samples
        self._clock = clock
        self._start = clock()

    @property
    def blocks_per_second(self) -> float:
        return self.sampling_rate_hz / self.block_size_samples

    def current_block(self) -> int:
        elapsed = max(0.0, self._clock() - self._start)
        return self.current_block_at(MicroDuration.from_seconds(elapsed))

    def current_block_at(self, elapsed: MicroDuration) -> int:
        """Pure variant with injected elapsed time: floor(t * rate / block_size).

        Integer rates stay in exact integer arithmetic, so block boundaries
        land precisely.
        """
        scaled = elapsed.total_micros() * self.sampling_rate_hz
        return int(scaled // (self.block_size_samples * 1_000_000))
