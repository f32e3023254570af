"""Operator entry points: serve, send, monitor, bench.

The TID_PORT environment variable overrides the built-in default port;
an explicit --port flag wins over both.
"""

from __future__ import annotations

import argparse
import math
import os
import signal
import statistics
import sys
import threading
from pathlib import Path

from .acqsim import SimAcquisition
from .bench import (
    BenchConfig,
    BenchError,
    LatencySample,
    export_csv,
    histogram,
    jitter_transfer_function,
    run_latency_test,
)
from .client import Disconnected, connect
from .message import FAMILY_CUSTOM, TidMessage, serialize_message
from .server import DEFAULT_PORT, DispatchHub, ServerStartError


def _default_port() -> int:
    try:
        return int(os.environ.get("TID_PORT", DEFAULT_PORT))
    except ValueError:
        return DEFAULT_PORT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tidbus",
        description="Event-marker distribution bus: server, ad-hoc sender, monitor and benchmark.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--host", default="127.0.0.1", help="server host (default: %(default)s)")
    common.add_argument(
        "--port", type=int, default=_default_port(),
        help="server TCP port (default: %(default)s; TID_PORT overrides)",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    serve = sub.add_parser(
        "serve", parents=[common],
        help="run the bus server with a simulated acquisition clock",
    )
    serve.add_argument(
        "--rate-hz", type=float, default=500.0,
        help="simulated sampling rate (default: %(default)s)",
    )
    serve.add_argument(
        "--block-size", type=int, default=10,
        help="samples per acquisition block (default: %(default)s)",
    )
    serve.add_argument(
        "--save-path", default=None,
        help="write stored events here on shutdown, one message per line",
    )
    serve.set_defaults(func=_cmd_serve)

    send = sub.add_parser("send", parents=[common], help="send one event to the bus")
    send.add_argument("--description", required=True, help="human-readable event label")
    send.add_argument("--family", default=FAMILY_CUSTOM, help="event family (default: %(default)s)")
    send.add_argument("--event", type=int, required=True, help="integer event code")
    send.add_argument("--value", type=float, default=None, help="optional decimal value")
    send.add_argument("--source", default=None, help="optional event origin label")
    send.set_defaults(func=_cmd_send)

    monitor = sub.add_parser(
        "monitor", parents=[common],
        help="print every event dispatched on the bus until interrupted",
    )
    monitor.add_argument(
        "--pretty", action="store_true",
        help="human-oriented one-line format instead of canonical serialization",
    )
    monitor.set_defaults(func=_cmd_monitor)

    bench = sub.add_parser(
        "bench", parents=[common],
        help="measure per-message latency and write CSV + figures",
    )
    bench.add_argument(
        "--count", type=int, default=1000,
        help="measured messages per payload length (default: %(default)s)",
    )
    bench.add_argument(
        "--lengths", default="32",
        help="comma-separated description payload lengths in bytes (default: %(default)s)",
    )
    bench.add_argument(
        "--mode", choices=("loopback", "dispatch"), default="loopback",
        help="loopback self-hosts a server and times the send call; "
        "dispatch measures sender-to-receiver through the server at --host/--port",
    )
    bench.add_argument(
        "--out-dir", default=".",
        help="directory for latency.csv, histogram.csv, transfer.csv and figures",
    )
    bench.add_argument(
        "--warmup", type=int, default=100,
        help="unmeasured messages per length before sampling (default: %(default)s)",
    )
    bench.add_argument(
        "--bin-width", type=float, default=0.0,
        help="histogram bin width in microseconds (default: auto)",
    )
    bench.add_argument(
        "--freq-max", type=float, default=500.0,
        help="upper frequency of the transfer curve in Hz (default: %(default)s)",
    )
    bench.add_argument(
        "--freq-points", type=int, default=201,
        help="points on the transfer curve (default: %(default)s)",
    )
    bench.add_argument(
        "--no-figures", action="store_true",
        help="write only the CSV files, skip figure rendering",
    )
    bench.set_defaults(func=_cmd_bench)

    return parser


def _cmd_serve(args) -> int:
    sim = SimAcquisition(args.rate_hz, args.block_size)
    hub = DispatchHub(host=args.host, port=args.port, block_source=sim)
    try:
        hub.start()
    except ServerStartError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"listening on {args.host}:{hub.port} "
        f"({sim.blocks_per_second:g} blocks/s simulated)",
        flush=True,
    )
    stopping = threading.Event()
    for signum in (signal.SIGINT, signal.SIGTERM):
        signal.signal(signum, lambda *_: stopping.set())
    stopping.wait()
    if args.save_path:
        count = hub.save_events(args.save_path)
        print(f"saved {count} events to {args.save_path}", flush=True)
    hub.stop()
    return 0


def _cmd_send(args) -> int:
    try:
        client = connect(args.host, args.port)
    except OSError as exc:
        print(f"error: cannot reach {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 1
    try:
        msg = client.new_event(
            args.description, args.family, args.event,
            source=args.source, value=args.value,
        )
        client.send(msg)
        print(serialize_message(msg))
    finally:
        client.close()
    return 0


def _pretty(msg: TidMessage) -> str:
    extras = []
    if msg.source is not None:
        extras.append(f"source={msg.source!r}")
    if msg.value is not None:
        extras.append(f"value={msg.value}")
    absolute = msg.absolute.to_wire() if msg.absolute else "-"
    relative = msg.relative.to_wire() if msg.relative else "-"
    tail = (" " + " ".join(extras)) if extras else ""
    return (
        f"[{msg.family}:{msg.event}] block={msg.block} abs={absolute} "
        f"rel={relative} {msg.description!r}{tail}"
    )


def _cmd_monitor(args) -> int:
    try:
        client = connect(args.host, args.port)
    except OSError as exc:
        print(f"error: cannot reach {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 1
    print(f"connected to {args.host}:{args.port}", file=sys.stderr, flush=True)
    try:
        while True:
            try:
                msg = client.receive(timeout=0.5)
            except Disconnected:
                print("error: disconnected from server", file=sys.stderr)
                return 1
            if msg is None:
                continue
            print(_pretty(msg) if args.pretty else serialize_message(msg), flush=True)
    except KeyboardInterrupt:
        return 0
    finally:
        client.close()


def _cmd_bench(args) -> int:
    try:
        lengths = [int(part) for part in args.lengths.split(",") if part.strip()]
    except ValueError:
        print(f"error: --lengths must be comma-separated integers, got {args.lengths!r}",
              file=sys.stderr)
        return 2
    internal: DispatchHub | None = None
    host, port = args.host, args.port
    if args.mode == "loopback":
        internal = DispatchHub(
            host="127.0.0.1", port=0, block_source=SimAcquisition(500, 10)
        ).start()
        host, port = "127.0.0.1", internal.port
    try:
        config = BenchConfig(
            message_count=args.count,
            payload_lengths=lengths,
            mode=args.mode,
            host=host,
            port=port,
            warmup_count=args.warmup,
        )
        samples = run_latency_test(config)
    except (BenchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if internal is not None:
            internal.stop()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    values = [s.latency_micros for s in samples]
    width = args.bin_width or _auto_bin_width(values)
    bins = histogram(values, width)
    curve = jitter_transfer_function(
        values,
        [args.freq_max * i / (args.freq_points - 1) for i in range(args.freq_points)],
    )
    export_csv(samples, out_dir / "latency.csv", kind="latency")
    export_csv(bins, out_dir / "histogram.csv", kind="histogram")
    export_csv(curve, out_dir / "transfer.csv", kind="transfer")
    if not args.no_figures:
        from . import report  # deferred: matplotlib is slow to import

        report.render_latency_timeline(samples, out_dir / "latency.png")
        report.render_histogram(bins, out_dir / "histogram.png")
        report.render_transfer_curve(curve, out_dir / "transfer.png")
    _print_summary(samples)
    print(f"results written to {out_dir}", flush=True)
    return 0


def _auto_bin_width(values: list[float]) -> float:
    spread = max(values) - min(values)
    return max(1.0, spread / 60)


def _print_summary(samples: list[LatencySample]) -> None:
    by_length: dict[int, list[float]] = {}
    for sample in samples:
        by_length.setdefault(sample.payload_length, []).append(sample.latency_micros)
    for length in sorted(by_length):
        values = sorted(by_length[length])
        n = len(values)
        p99 = values[min(n - 1, math.ceil(0.99 * n) - 1)]
        print(
            f"payload {length}B: n={n} min={values[0]:.1f}us "
            f"median={statistics.median(values):.1f}us "
            f"p99={p99:.1f}us max={values[-1]:.1f}us",
            flush=True,
        )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
