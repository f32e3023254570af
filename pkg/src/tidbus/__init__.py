"""tidbus: an event-marker distribution bus for signal-processing pipelines.

A server dispatches every incoming event message to every other
connected client, stamping unknown block numbers and missing timestamps
on the way through.  Messages are single-line XML ``<tid .../>``
elements, newline-framed over TCP with Nagle's algorithm disabled.
"""

from .acqsim import SimAcquisition
from .bench import (
    BenchConfig,
    BenchError,
    EmptySamples,
    LatencySample,
    MessageLost,
    ServerUnreachable,
    TransferCurve,
    export_csv,
    histogram,
    jitter_transfer_function,
    run_latency_test,
)
from .client import Disconnected, EmptyField, NegativeBlock, TidClient, connect
from .message import (
    FAMILY_BIOSIG,
    FAMILY_CUSTOM,
    PROTOCOL_VERSION,
    BadNumber,
    BadVersionFormat,
    MalformedXml,
    MessageError,
    MicroDuration,
    MicroTime,
    MissingMandatory,
    ProtocolVersion,
    TidMessage,
    parse_message,
    parse_microtime,
    serialize_message,
    versions_compatible,
)
from .server import (
    DEFAULT_PORT,
    BindFailure,
    BlockSource,
    DispatchHub,
    FixedBlockSource,
    PortInUse,
    ServerStartError,
)
from .wire import (
    DEFAULT_MAX_FRAME_BYTES,
    ContainsNewline,
    FrameDecoder,
    FrameTooLarge,
    FramingError,
    InvalidUtf8,
    encode_frame,
)

__version__ = "0.1.0"

__all__ = [
    "BadNumber",
    "BadVersionFormat",
    "BenchConfig",
    "BenchError",
    "BindFailure",
    "BlockSource",
    "ContainsNewline",
    "DEFAULT_MAX_FRAME_BYTES",
    "DEFAULT_PORT",
    "Disconnected",
    "DispatchHub",
    "EmptyField",
    "EmptySamples",
    "FAMILY_BIOSIG",
    "FAMILY_CUSTOM",
    "FixedBlockSource",
    "FrameDecoder",
    "FrameTooLarge",
    "FramingError",
    "InvalidUtf8",
    "LatencySample",
    "MalformedXml",
    "MessageError",
    "MessageLost",
    "MicroDuration",
    "MicroTime",
    "MissingMandatory",
    "NegativeBlock",
    "PROTOCOL_VERSION",
    "PortInUse",
    "ProtocolVersion",
    "ServerStartError",
    "ServerUnreachable",
    "SimAcquisition",
    "TidClient",
    "TidMessage",
    "TransferCurve",
    "connect",
    "encode_frame",
    "export_csv",
    "histogram",
    "jitter_transfer_function",
    "parse_message",
    "parse_microtime",
    "run_latency_test",
    "serialize_message",
    "versions_compatible",
]
