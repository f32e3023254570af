"""Latency benchmark harness and jitter analysis for the bus.

Measures per-message latency for a configurable number of messages over
variable message lengths, against a local or remote server.  Two modes:

* ``dispatch``: two clients on this host, sender and receiver, connected
  through the bus.  Latency is receive minus send timestamp on this
  host's monotonic clock, so no cross-host clock discipline is needed;
  with a remote server the figure includes both network legs.  Messages
  are sent stop-and-wait (each must arrive before the next goes out) so
  queueing never inflates the numbers, and a message that fails to
  arrive is an error, not noise.
* ``loopback``: one client; the sample is the duration of the send call
  itself.

Raw samples can be reduced to a latency histogram and to the jitter
transfer function: the attenuation a sinusoid at frequency f suffers
when N epochs aligned on event timestamps are averaged while those
timestamps carry the measured jitter.  Offsets are centered on their
mean first, so constant transport delay (which shifts an average without
smearing it) does not register as attenuation.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from queue import Empty, Queue
from typing import Iterable, Sequence, TextIO

import numpy as np

from .client import TidClient
from .message import FAMILY_CUSTOM
from .wire import DEFAULT_MAX_FRAME_BYTES

# Room for the fixed attributes around the padded description.
_FRAME_OVERHEAD = 512
MAX_PAYLOAD_LENGTH = DEFAULT_MAX_FRAME_BYTES - _FRAME_OVERHEAD

MODES = ("loopback", "dispatch")


class BenchError(RuntimeError):
    pass


class ServerUnreachable(BenchError):
    pass


class MessageLost(BenchError):
    def __init__(self, sequence: int):
        super().__init__(f"message {sequence} was never observed by the receiver")
        self.sequence = sequence


class EmptySamples(ValueError):
    pass


@dataclass
class BenchConfig:
    message_count: int = 1000
    payload_lengths: list[int] = field(default_factory=lambda: [32])
    mode: str = "dispatch"
    host: str = "127.0.0.1"
    port: int = 9001
    warmup_count: int = 100
    per_message_timeout: float = 5.0

    def __post_init__(self):
        if self.message_count <= 0:
            raise ValueError("message_count must be positive")
        if self.warmup_count < 0:
            raise ValueError("warmup_count must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.payload_lengths:
            raise ValueError("payload_lengths must be non-empty")
        for length in self.payload_lengths:
            if not 0 < length <= MAX_PAYLOAD_LENGTH:
                raise ValueError(
                    f"payload length {length} outside (0, {MAX_PAYLOAD_LENGTH}]"
                )


@dataclass(frozen=True)
class LatencySample:
    sequence: int
    payload_length: int
    latency_micros: float


@dataclass(frozen=True)
class TransferCurve:
    frequencies_hz: list[float]
    attenuation: list[float]


def _connect(config: BenchConfig, on_message=None) -> TidClient:
    try:
        return TidClient.connect(config.host, config.port, on_message=on_message)
    except OSError as exc:
        raise ServerUnreachable(
            f"no server at {config.host}:{config.port}: {exc}"
        ) from exc


def run_latency_test(config: BenchConfig) -> list[LatencySample]:
    """Run the configured measurement; returns samples in measurement order.

    Per payload length, ``warmup_count`` unmeasured messages go first to
    absorb connection and allocator cold-start cost, then
    ``message_count`` measured ones.  No sample is ever dropped: a lost
    message raises MessageLost.
    """
    if config.mode == "loopback":
        return _run_loopback(config)
    return _run_dispatch(config)


def _run_loopback(config: BenchConfig) -> list[LatencySample]:
    sender = _connect(config)
    samples: list[LatencySample] = []
    try:
        for length in config.payload_lengths:
            description = "x" * length
            for seq in range(config.warmup_count + config.message_count):
                msg = sender.new_event(description, FAMILY_CUSTOM, seq)
                t0 = time.monotonic_ns()
                sender.send(msg)
                t1 = time.monotonic_ns()
                if seq >= config.warmup_count:
                    samples.append(
                        LatencySample(seq - config.warmup_count, length, (t1 - t0) / 1000)
                    )
    finally:
        sender.close()
    return samples


def _run_dispatch(config: BenchConfig) -> list[LatencySample]:
    arrivals: Queue[tuple[int, int]] = Queue()

    def _stamp_arrival(msg):
        arrivals.put((msg.event, time.monotonic_ns()))

    receiver = _connect(config, on_message=_stamp_arrival)
    sender = _connect(config)
    samples: list[LatencySample] = []
    try:
        for length in config.payload_lengths:
            description = "x" * length
            for seq in range(config.warmup_count + config.message_count):
                msg = sender.new_event(description, FAMILY_CUSTOM, seq)
                t0 = time.monotonic_ns()
                sender.send(msg)
                t1 = _await_arrival(arrivals, seq, config.per_message_timeout)
                if seq >= config.warmup_count:
                    samples.append(
                        LatencySample(seq - config.warmup_count, length, (t1 - t0) / 1000)
                    )
    finally:
        sender.close()
        receiver.close()
    return samples


def _await_arrival(arrivals: Queue, expected_seq: int, timeout: float) -> int:
    try:
        event, t_recv = arrivals.get(timeout=timeout)
    except Empty:
        raise MessageLost(expected_seq) from None
    if event != expected_seq:
        raise MessageLost(expected_seq)
    return t_recv


# -- analysis ------------------------------------------------------------


def _latency_values(samples: Iterable) -> list[float]:
    return [
        s.latency_micros if isinstance(s, LatencySample) else float(s) for s in samples
    ]


def histogram(samples: Iterable, bin_width_micros: float) -> list[tuple[float, int]]:
    """Fixed-width bins [k*w, (k+1)*w) covering min..max, empty bins included.

    Accepts raw microsecond values or LatencySamples.  Counts always sum
    to the number of samples; empty input gives an empty list.
    """
    if bin_width_micros <= 0:
        raise ValueError("bin_width_micros must be positive")
    values = _latency_values(samples)
    if not values:
        return []
    lo = math.floor(min(values) / bin_width_micros)
    hi = math.floor(max(values) / bin_width_micros)
    counts = [0] * (hi - lo + 1)
    for v in values:
        counts[math.floor(v / bin_width_micros) - lo] += 1
    return [((lo + k) * bin_width_micros, count) for k, count in enumerate(counts)]


def jitter_transfer_function(
    jitter_samples: Iterable, frequencies_hz: Sequence[float]
) -> TransferCurve:
    """Attenuation of a sinusoid averaged across epochs with timing jitter.

    For each frequency f the curve holds ``|mean(exp(-2j*pi*f*tau))|``
    where tau are the jitter offsets in seconds, centered on their mean.
    1.0 means the average preserves the component, 0.0 means the jitter
    cancels it entirely.  Always exactly 1 at f=0 and when every offset
    is identical.
    """
    offsets = np.asarray(_latency_values(jitter_samples), dtype=float)
    if offsets.size == 0:
        raise EmptySamples("jitter_samples must be non-empty")
    tau_seconds = (offsets - offsets.mean()) * 1e-6
    attenuation = [
        min(1.0, float(abs(np.exp(-2j * np.pi * f * tau_seconds).mean())))
        for f in frequencies_hz
    ]
    return TransferCurve([float(f) for f in frequencies_hz], attenuation)


# -- CSV export ----------------------------------------------------------

CSV_HEADERS = {
    "latency": ("sequence", "payload_length", "latency_micros"),
    "histogram": ("bin_start_micros", "count"),
    "transfer": ("frequency_hz", "attenuation"),
}


def _rows_for(records, kind: str | None):
    if isinstance(records, TransferCurve):
        return "transfer", list(zip(records.frequencies_hz, records.attenuation))
    records = list(records)
    if kind is None:
        if not records:
            raise ValueError("cannot infer CSV kind from empty input; pass kind=")
        kind = "latency" if isinstance(records[0], LatencySample) else "histogram"
    if kind == "latency":
        return kind, [(s.sequence, s.payload_length, s.latency_micros) for s in records]
    if kind == "histogram":
        return kind, records
    raise ValueError(f"unknown CSV kind {kind!r}")


def export_csv(records, destination: TextIO | str, kind: str | None = None) -> int:
    """Write samples, histogram bins or a transfer curve as CSV.

    Header row plus one row per record; numbers use "." as decimal
    separator (unlike the wire format) for toolchain compatibility.
    Returns the data row count.  ``kind`` ("latency", "histogram",
    "transfer") overrides type-based dispatch; required for empty input.
    """
    kind, rows = _rows_for(records, kind)
    if hasattr(destination, "write"):
        return _write_rows(destination, kind, rows)
    with open(destination, "w", newline="") as sink:
        return _write_rows(sink, kind, rows)


def _write_rows(sink, kind: str, rows) -> int:
    writer = csv.writer(sink)
    writer.writerow(CSV_HEADERS[kind])
    for row in rows:
        writer.writerow(row)
    return len(rows)
