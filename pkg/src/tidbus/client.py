"""Client side of the bus: connect, build and send events, consume events.

A client never receives its own events back; the server fans each
message out to everyone else.  Inbound messages arrive in dispatch order
on a dedicated receiver thread and are either queued for ``receive()``
or handed to a registered consumer callback, never both.

A client outside the data processing chain leaves the block number
blank (-1) and lets the server fill it; one inside the chain forwards
the block number it is currently processing via ``set_current_block``.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
from typing import Callable

from .message import (
    PROTOCOL_VERSION,
    MessageError,
    MicroTime,
    ProtocolVersion,
    TidMessage,
    parse_message,
    serialize_message,
    versions_compatible,
)
from .wire import FrameDecoder, FramingError, encode_frame

log = logging.getLogger(__name__)

DEFAULT_PORT = 9001

_EOF = object()


class Disconnected(ConnectionError):
    """The connection to the server is gone."""


class EmptyField(ValueError):
    """description and family must be non-empty."""


class NegativeBlock(ValueError):
    """Block numbers forwarded by clients must be >= 0."""


class TidClient:
    """One connection to the bus.

    ``on_message``, when given, receives every inbound message on the
    receiver thread (in arrival order); otherwise messages queue up for
    ``receive()``.  ``send`` may be called from any thread.
    """

    def __init__(
        self,
        sock: socket.socket,
        library_version: ProtocolVersion = PROTOCOL_VERSION,
        on_message: Callable[[TidMessage], None] | None = None,
    ):
        self.library_version = library_version
        self._sock = sock
        self._sink = on_message
        self._inbox: queue.Queue = queue.Queue()
        self._send_lock = threading.Lock()
        self._dead = threading.Event()
        self._last_block = -1
        self._version_warnings = 0
        self._reader = threading.Thread(
            target=self._receive_loop, name="tid-client-recv", daemon=True
        )
        self._reader.start()

    @classmethod
    def connect(
        cls,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        timeout: float = 5.0,
        library_version: ProtocolVersion = PROTOCOL_VERSION,
        on_message: Callable[[TidMessage], None] | None = None,
    ) -> TidClient:
        """Open a connection to the server; Nagle is disabled on this side too.

        Raises the usual socket errors (ConnectionRefusedError, TimeoutError)
        when the server is unreachable.
        """
        sock = socket.create_connection((host, port), timeout=timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.settimeout(None)
        return cls(sock, library_version=library_version, on_message=on_message)

    # -- outbound --------------------------------------------------------

    def new_event(
        self,
        description: str,
        family: str,
        event_code: int,
        source: str | None = None,
        value: float | None = None,
    ) -> TidMessage:
        """Build an event ready for ``send``.

        Carries the library version, the last block number set via
        ``set_current_block`` (-1 when never set, so the server stamps it),
        the wall clock as absolute time, and no relative timestamp (the
        server fills that in).
        """
        if not description:
            raise EmptyField("description must be non-empty")
        if not family:
            raise EmptyField("family must be non-empty")
        return TidMessage(
            version=self.library_version,
            description=description,
            family=family,
            event=event_code,
            block=self._last_block,
            absolute=MicroTime.now(),
            relative=None,
            source=source,
            value=value,
        )

    def set_current_block(self, block: int) -> None:
        """Forward the block number this client is currently processing."""
        if block < 0:
            raise NegativeBlock(f"block must be >= 0, got {block}")
        self._last_block = block

    @property
    def last_known_block(self) -> int:
        return self._last_block

    def send(self, msg: TidMessage) -> None:
        """Frame and write one message; returns once handed to the transport."""
        if self._dead.is_set():
            raise Disconnected("connection is closed")
        data = encode_frame(serialize_message(msg))
        try:
            with self._send_lock:
                self._sock.sendall(data)
        except OSError as exc:
            self._dead.set()
            raise Disconnected(str(exc)) from exc

    # -- inbound ---------------------------------------------------------

    def _receive_loop(self) -> None:
        decoder = FrameDecoder()
        try:
            while True:
                data = self._sock.recv(65536)
                if not data:
                    break
                for frame in decoder.feed(data):
                    msg = parse_message(frame)
                    if not versions_compatible(msg.version, self.library_version):
                        self._version_warnings += 1
                        log.warning(
                            "received version %s, library is %s",
                            msg.version, self.library_version,
                        )
                    if self._sink is not None:
                        try:
                            self._sink(msg)
                        except Exception:
                            log.exception("message consumer raised; message dropped")
                    else:
                        self._inbox.put(msg)
        except (OSError, FramingError, MessageError) as exc:
            log.debug("receive loop ended: %s", exc)
        finally:
            self._dead.set()
            self._inbox.put(_EOF)

    def receive(self, timeout: float | None = None) -> TidMessage | None:
        """Oldest undelivered inbound message, or None on timeout.

        Messages are never reordered or dropped while connected.  Once the
        connection is gone and the buffer is drained, raises Disconnected.
        """
        try:
            item = self._inbox.get(timeout=timeout)
        except queue.Empty:
            return None
        if item is _EOF:
            self._inbox.put(_EOF)  # keep the marker for subsequent calls
            raise Disconnected("connection is closed")
        return item

    # -- lifecycle ---------------------------------------------------------

    @property
    def connected(self) -> bool:
        return not self._dead.is_set()

    @property
    def version_warnings(self) -> int:
        return self._version_warnings

    def close(self) -> None:
        """Idempotent; buffered messages stay readable until drained."""
        self._dead.set()
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass
        if self._reader is not threading.current_thread():
            self._reader.join(timeout=2.0)

    def __enter__(self) -> TidClient:
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def connect(
    host: str = "127.0.0.1",
    port: int = DEFAULT_PORT,
    timeout: float = 5.0,
    library_version: ProtocolVersion = PROTOCOL_VERSION,
    on_message: Callable[[TidMessage], None] | None = None,
) -> TidClient:
    """Module-level alias for :meth:`TidClient.connect`."""
    return TidClient.connect(
        host, port, timeout=timeout, library_version=library_version, on_message=on_message
    )
