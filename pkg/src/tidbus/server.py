"""The event bus server: accept clients, stamp events, fan them out.

Every incoming message is completed before dispatch: an unknown block
number (-1) is replaced from the block source, a missing absolute
timestamp gets the server wall clock, a missing relative timestamp gets
the time elapsed since a resettable monotonic reference (server start by
default).  The stamped message then goes to every connected client
except its sender, and its canonical serialization is appended to an
in-memory event store for later saving.

Each connection is serviced by its own receiver and writer threads.
Ordering is guaranteed per sender only; there is no global order across
senders.  Any protocol error on a connection closes that connection and
leaves the rest of the bus untouched.  A client whose outbound queue
overflows (it stopped reading) is disconnected rather than allowed to
stall the bus.
"""

from __future__ import annotations

import errno
import itertools
import logging
import queue
import socket
import threading
import time
from collections import deque
from dataclasses import replace
from typing import BinaryIO, Protocol

from .message import (
    PROTOCOL_VERSION,
    MessageError,
    MicroDuration,
    MicroTime,
    ProtocolVersion,
    TidMessage,
    parse_message,
    serialize_message,
    versions_compatible,
)
from .wire import DEFAULT_MAX_FRAME_BYTES, FrameDecoder, FramingError, encode_frame

log = logging.getLogger(__name__)

DEFAULT_PORT = 9001
DEFAULT_OUTBOUND_QUEUE_SIZE = 1024
DEFAULT_EVENT_STORE_CAP = 1_000_000


class ServerStartError(OSError):
    """The listener could not be brought up."""


class PortInUse(ServerStartError):
    pass


class BindFailure(ServerStartError):
    pass


class BlockSource(Protocol):
    """Whatever knows the current data block number (acquisition system)."""

    def current_block(self) -> int: ...


class FixedBlockSource:
    """Block source pinned to one value; default when no acquisition is attached."""

    def __init__(self, block: int = 0):
        if block < 0:
            raise ValueError("block must be >= 0")
        self._block = block

    def current_block(self) -> int:
        return self._block


class _Connection:
    __slots__ = ("conn_id", "sock", "addr", "outbox", "reader", "writer")

    def __init__(self, conn_id: int, sock: socket.socket, addr, queue_size: int):
        self.conn_id = conn_id
        self.sock = sock
        self.addr = addr
        self.outbox: queue.Queue[bytes | None] = queue.Queue(maxsize=queue_size)
        self.reader: threading.Thread | None = None
        self.writer: threading.Thread | None = None


class DispatchHub:
    """The bus itself: listener, client registry, stamping and event store."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        block_source: BlockSource | None = None,
        server_version: ProtocolVersion = PROTOCOL_VERSION,
        outbound_queue_size: int = DEFAULT_OUTBOUND_QUEUE_SIZE,
        event_store_cap: int = DEFAULT_EVENT_STORE_CAP,
        max_frame_bytes: int = DEFAULT_MAX_FRAME_BYTES,
    ):
        self.host = host
        self.port = port
        self.server_version = server_version
        self.outbound_queue_size = outbound_queue_size
        self.max_frame_bytes = max_frame_bytes
        self._block_source: BlockSource = block_source or FixedBlockSource(0)
        self._events: deque[str] = deque(maxlen=event_store_cap)
        self._clients: dict[int, _Connection] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._relative_ref = time.monotonic()
        self._version_warnings = 0
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._running = False

    # -- lifecycle ----------------------------------------------------

    def start(self) -> DispatchHub:
        """Bind the listener and start accepting clients.

        With port 0 the OS picks an ephemeral port; ``self.port`` is
        updated to the actual one either way.
        """
        if self._running:
            raise RuntimeError("server already started")
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((self.host, self.port))
        except OSError as exc:
            sock.close()
            if exc.errno == errno.EADDRINUSE:
                raise PortInUse(f"port {self.port} is already in use") from exc
            raise BindFailure(f"cannot bind {self.host}:{self.port}: {exc}") from exc
        sock.listen(128)
        self.port = sock.getsockname()[1]
        self._listener = sock
        self._running = True
        self._relative_ref = time.monotonic()
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="tid-accept", daemon=True
        )
        self._accept_thread.start()
        log.info("listening on %s:%d", self.host, self.port)
        return self

    def stop(self) -> None:
        """Close the listener and disconnect every client."""
        self._running = False
        if self._listener is not None:
            try:
                # shutdown() wakes a thread blocked in accept(); close() alone
                # can leave it stuck in the kernel.
                self._listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                self._listener.close()
            except OSError:
                pass
            self._listener = None
        with self._lock:
            ids = list(self._clients)
        for conn_id in ids:
            self.disconnect(conn_id, "server shutdown")
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2.0)
            self._accept_thread = None

    def __enter__(self) -> DispatchHub:
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()

    # -- connection service threads ------------------------------------

    def _accept_loop(self) -> None:
        listener = self._listener
        while self._running:
            try:
                sock, addr = listener.accept()
            except OSError:
                break  # listener closed
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = _Connection(next(self._ids), sock, addr, self.outbound_queue_size)
            with self._lock:
                self._clients[conn.conn_id] = conn
            conn.reader = threading.Thread(
                target=self._reader_loop, args=(conn,),
                name=f"tid-reader-{conn.conn_id}", daemon=True,
            )
            conn.writer = threading.Thread(
                target=self._writer_loop, args=(conn,),
                name=f"tid-writer-{conn.conn_id}", daemon=True,
            )
            conn.reader.start()
            conn.writer.start()
            log.debug("client %d connected from %s", conn.conn_id, addr)

    def _reader_loop(self, conn: _Connection) -> None:
        decoder = FrameDecoder(self.max_frame_bytes)
        try:
            while True:
                data = conn.sock.recv(65536)
                if not data:
                    self.disconnect(conn.conn_id, "peer closed")
                    return
                for frame in decoder.feed(data):
                    self.on_message(conn.conn_id, parse_message(frame))
        except (FramingError, MessageError) as exc:
            self.disconnect(conn.conn_id, f"protocol error: {exc}")
        except OSError:
            self.disconnect(conn.conn_id, "socket error")

    def _writer_loop(self, conn: _Connection) -> None:
        while True:
            item = conn.outbox.get()
            if item is None:
                return
            try:
                conn.sock.sendall(item)
            except OSError:
                self.disconnect(conn.conn_id, "send failed")
                return

    # -- the bus -------------------------------------------------------

    def on_message(self, sender_id: int, msg: TidMessage) -> TidMessage:
        """Stamp ``msg``, store it, deliver to everyone except the sender.

        Fire and forget: delivery failures disconnect the failing
        recipient only and are never surfaced to the sender.  Returns the
        stamped message.
        """
        with self._lock:
            stamped = self._stamp_locked(msg)
            line = serialize_message(stamped)
            self._events.append(line)
            if not versions_compatible(msg.version, self.server_version):
                self._version_warnings += 1
                log.warning(
                    "client %s speaks version %s, server is %s; dispatching anyway",
                    sender_id, msg.version, self.server_version,
                )
            targets = [c for cid, c in self._clients.items() if cid != sender_id]
        frame = encode_frame(line)
        for conn in targets:
            try:
                conn.outbox.put_nowait(frame)
            except queue.Full:
                self.disconnect(conn.conn_id, "outbound queue overflow")
        return stamped

    def _stamp_locked(self, msg: TidMessage) -> TidMessage:
        block = msg.block if msg.block != -1 else self._block_source.current_block()
        absolute = msg.absolute if msg.absolute is not None else MicroTime.now()
        relative = msg.relative
        if relative is None:
            relative = MicroDuration.from_seconds(
                max(0.0, time.monotonic() - self._relative_ref)
            )
        return replace(msg, block=block, absolute=absolute, relative=relative)

    def reset_relative_reference(self) -> None:
        """Restart the relative clock; later stamps count from now."""
        with self._lock:
            self._relative_ref = time.monotonic()

    def disconnect(self, client_id: int, cause: str | None = None) -> None:
        """Drop one client; idempotent, other clients unaffected."""
        with self._lock:
            conn = self._clients.pop(client_id, None)
        if conn is None:
            return
        log.info("client %d disconnected (%s)", client_id, cause or "requested")
        try:
            conn.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            conn.sock.close()
        except OSError:
            pass
        try:
            conn.outbox.put_nowait(None)  # wake the writer; closed socket otherwise
        except queue.Full:
            pass

    # -- event store -----------------------------------------------------

    def save_events(self, destination: BinaryIO | str) -> int:
        """Write one canonical serialized message per line; returns the count.

        ``destination`` is a binary file object or a path.  The output is
        valid replay input: every line parses back into a stamped message.
        """
        with self._lock:
            lines = list(self._events)
        if hasattr(destination, "write"):
            for line in lines:
                destination.write(encode_frame(line))
        else:
            with open(destination, "wb") as sink:
                for line in lines:
                    sink.write(encode_frame(line))
        return len(lines)

    # -- introspection ---------------------------------------------------

    @property
    def client_count(self) -> int:
        with self._lock:
            return len(self._clients)

    def client_ids(self) -> list[int]:
        with self._lock:
            return sorted(self._clients)

    @property
    def events(self) -> list[str]:
        """Snapshot of the stored canonical serializations, oldest first."""
        with self._lock:
            return list(self._events)

    @property
    def version_warnings(self) -> int:
        return self._version_warnings
