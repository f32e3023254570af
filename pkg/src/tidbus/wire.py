"""Newline-delimited framing of serialized messages on a TCP byte stream.

One frame is the UTF-8 bytes of a single-line message followed by LF
(0x0A).  There is no length prefix and no CR handling; the decoder is
deterministic regardless of how the stream is chunked by the transport.
Framing failures are fatal for the connection that produced them.
"""

from __future__ import annotations

DEFAULT_MAX_FRAME_BYTES = 65536


class ContainsNewline(ValueError):
    """Frame payload may not contain a newline (it is the frame terminator)."""


class FramingError(Exception):
    """Fatal stream corruption; close the connection."""


class FrameTooLarge(FramingError):
    """Buffered bytes exceed the frame size limit without a terminator."""


class InvalidUtf8(FramingError):
    """A completed frame is not valid UTF-8."""


def encode_frame(serialized: str) -> bytes:
    """UTF-8 bytes of ``serialized`` plus a single LF terminator.

    An empty string yields the lone terminator byte; upstream never
    produces it, but the degenerate case is well defined.
    """
    if "\n" in serialized:
        raise ContainsNewline("frame payload must not contain LF")
    return serialized.encode("utf-8") + b"\n"


class FrameDecoder:
    """Incremental frame reassembly; one instance per connection."""

    def __init__(self, max_frame_bytes: int = DEFAULT_MAX_FRAME_BYTES):
        if max_frame_bytes <= 0:
            raise ValueError("max_frame_bytes must be positive")
        self.max_frame_bytes = max_frame_bytes
        self._buffer = bytearray()

    def feed(self, chunk: bytes) -> list[str]:
        """Buffer ``chunk`` and return every newly completed frame, LF stripped.

        Partial trailing data stays buffered for the next call.
        """
        self._buffer.extend(chunk)
        frames: list[str] = []
        while (end := self._buffer.find(b"\n")) >= 0:
            raw = bytes(self._buffer[:end])
            del self._buffer[: end + 1]
            if len(raw) > self.max_frame_bytes:
                raise FrameTooLarge(
                    f"frame of {len(raw)} bytes exceeds limit of {self.max_frame_bytes}"
                )
            try:
                frames.append(raw.decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise InvalidUtf8(f"frame is not valid UTF-8: {exc}") from exc
        if len(self._buffer) > self.max_frame_bytes:
            raise FrameTooLarge(
                f"{len(self._buffer)} bytes buffered without a terminator "
                f"(limit {self.max_frame_bytes})"
            )
        return frames

    @property
    def pending(self) -> int:
        """Bytes buffered towards an incomplete frame."""
        return len(self._buffer)
