"""Framed, byte-accounted channels between the parties.

Wire format of a frame (big-endian)::

    type tag  1 byte
    session   8 bytes
    length    4 bytes
    payload   ``length`` bytes (at most 64 MiB)

Two channel kinds share one interface: an in-memory loopback pair for
single-process runs and a TCP socket channel.  Every frame is logged to a
:class:`Transcript`, which also keeps per-direction, per-type byte totals.
"""

import queue
import socket
import struct
import threading
from collections import defaultdict
from dataclasses import dataclass
from enum import IntEnum

from . import errors
from .errors import (
    BindFailure,
    ChannelClosed,
    ChannelFailure,
    ConnectFailure,
    FrameTooLarge,
    ProtocolError,
    UnknownType,
)

HEADER = struct.Struct(">BQI")
HEADER_BYTES = HEADER.size
MAX_PAYLOAD = 64 * 1024 * 1024
DEFAULT_TIMEOUT = 600.0


class MessageType(IntEnum):
    TREE_UPLOAD = 1
    TREE_ACK = 2
    QUERY_START = 3
    MASKED_VALUE = 4
    GARBLED_CIRCUIT = 5
    OT_RECEIVER_MSG = 6
    OT_SENDER_MSG = 7
    RESULT = 8
    ERROR = 9


@dataclass(frozen=True)
class Frame:
    type: MessageType
    session: int
    payload: bytes = b""

    def __post_init__(self):
        if len(self.payload) > MAX_PAYLOAD:
            raise FrameTooLarge(f"payload of {len(self.payload)} bytes exceeds {MAX_PAYLOAD}")

    @property
    def size(self):
        return HEADER_BYTES + len(self.payload)

    def to_bytes(self):
        return HEADER.pack(int(self.type), self.session, len(self.payload)) + self.payload

    @classmethod
    def from_bytes(cls, data):
        mtype, session, length = decode_header(data[:HEADER_BYTES])
        payload = bytes(data[HEADER_BYTES:])
        if len(payload) != length:
            raise ProtocolError(f"header announces {length} payload bytes, got {len(payload)}")
        return cls(mtype, session, payload)


def decode_header(header):
    if len(header) != HEADER_BYTES:
        raise ProtocolError("short frame header")
    tag, session, length = HEADER.unpack(header)
    try:
        mtype = MessageType(tag)
    except ValueError:
        raise UnknownType(f"unknown frame type tag {tag}") from None
    if length > MAX_PAYLOAD:
        raise FrameTooLarge(f"announced payload of {length} bytes exceeds {MAX_PAYLOAD}")
    return mtype, session, length


def error_frame(session, exc):
    return Frame(MessageType.ERROR, session, f"{type(exc).__name__}: {exc}".encode())


def raise_remote_error(frame):
    text = frame.payload.decode("utf-8", "replace")
    name, _, message = text.partition(": ")
    cls = getattr(errors, name, None)
    if not (isinstance(cls, type) and issubclass(cls, errors.SnpVaultError)):
        cls = ProtocolError
    raise cls(f"remote: {message or text}")


@dataclass
class TranscriptEntry:
    direction: str
    type: MessageType
    nbytes: int
    session: int
    annotation: str = None
    payload: bytes = None


class ByteCounter:
    """Cumulative bytes per ``(direction, message type)``, headers included."""

    def __init__(self):
        self._lock = threading.Lock()
        self._totals = defaultdict(int)

    def add(self, direction, mtype, nbytes):
        with self._lock:
            self._totals[(direction, mtype)] += nbytes

    def get(self, direction=None, mtype=None):
        with self._lock:
            return sum(
                v for (d, t), v in self._totals.items()
                if (direction is None or d == direction) and (mtype is None or t == mtype)
            )

    @property
    def total(self):
        return self.get()

    def snapshot(self):
        with self._lock:
            return dict(self._totals)


class Transcript:
    """Ordered log of every frame that crossed a channel.

    Annotations mark protocol events such as the tree position behind a
    comparison; they never carry plaintext values.  Payloads are retained
    only with ``keep_payloads=True`` (leakage audits).
    """

    def __init__(self, keep_payloads=False):
        self.keep_payloads = keep_payloads
        self.entries = []
        self.counter = ByteCounter()
        self._lock = threading.Lock()

    def record(self, direction, frame, annotation=None):
        entry = TranscriptEntry(
            direction, frame.type, frame.size, frame.session, annotation,
            frame.payload if self.keep_payloads else None,
        )
        with self._lock:
            self.entries.append(entry)
        self.counter.add(direction, frame.type, frame.size)

    @property
    def total_bytes(self):
        return sum(e.nbytes for e in self.entries)

    def of_type(self, *types):
        return [e for e in self.entries if e.type in types]

    def between(self, sender, receiver):
        d = f"{sender}->{receiver}"
        return [e for e in self.entries if e.direction == d]

    def bytes_between(self, a, b):
        """Bytes exchanged in both directions between parties ``a`` and ``b``."""
        return self.counter.get(f"{a}->{b}") + self.counter.get(f"{b}->{a}")

    def signature(self):
        """Timing-free view used to compare runs."""
        return [(e.direction, e.type, e.nbytes, e.annotation) for e in self.entries]

    def __len__(self):
        return len(self.entries)


class Channel:
    """One endpoint of a bidirectional frame stream."""

    def __init__(self, name, peer, transcript=None, timeout=DEFAULT_TIMEOUT):
        self.name = name
        self.peer = peer
        self.transcript = transcript if transcript is not None else Transcript()
        self.timeout = timeout
        self.closed = False

    @property
    def outbound(self):
        return f"{self.name}->{self.peer}"

    @property
    def inbound(self):
        return f"{self.peer}->{self.name}"

    def send(self, frame, annotation=None):
        raise NotImplementedError

    def receive(self, timeout=None):
        raise NotImplementedError

    def close(self):
        self.closed = True

    def expect(self, *types):
        """Receive one frame of an allowed type; a peer ERROR frame is re-raised."""
        frame = self.receive()
        if frame.type == MessageType.ERROR and MessageType.ERROR not in types:
            raise_remote_error(frame)
        if frame.type not in types:
            names = ", ".join(t.name for t in types)
            raise ProtocolError(f"expected {names}, got {frame.type.name}")
        return frame

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


_EOF = object()


class LoopbackChannel(Channel):
    """In-memory endpoint; frames are logged once, by the sender."""

    def __init__(self, name, peer, transcript=None, timeout=DEFAULT_TIMEOUT):
        super().__init__(name, peer, transcript, timeout)
        self._inbox = queue.Queue()
        self._other = None

    @classmethod
    def pair(cls, a="CS", b="R", transcript=None, timeout=DEFAULT_TIMEOUT):
        transcript = transcript if transcript is not None else Transcript()
        left, right = cls(a, b, transcript, timeout), cls(b, a, transcript, timeout)
        left._other, right._other = right, left
        return left, right

    def send(self, frame, annotation=None):
        if self.closed or self._other is None or self._other.closed:
            raise ChannelClosed(f"{self.outbound} is closed")
        # round-trip through the wire encoding so both channel kinds validate alike
        wire = frame.to_bytes()
        self.transcript.record(self.outbound, frame, annotation)
        self._other._inbox.put(wire)

    def receive(self, timeout=None):
        if self.closed:
            raise ChannelClosed(f"{self.inbound} is closed")
        try:
            item = self._inbox.get(timeout=timeout or self.timeout)
        except queue.Empty:
            raise ChannelFailure(f"timed out waiting on {self.inbound}") from None
        if item is _EOF:
            self.closed = True
            raise ChannelClosed(f"{self.inbound} closed by peer")
        return Frame.from_bytes(item)

    def close(self):
        if not self.closed:
            self.closed = True
            if self._other is not None:
                self._other._inbox.put(_EOF)


class SocketChannel(Channel):
    """TCP endpoint that counts raw wire bytes.

    Outbound frames are always logged, before they hit the socket, so a
    transcript shared by both ends stays causally ordered.  Inbound frames
    are logged too unless ``record_inbound`` is off (the shared case).
    """

    def __init__(self, sock, name, peer, transcript=None, timeout=DEFAULT_TIMEOUT,
                 record_inbound=True):
        super().__init__(name, peer, transcript, timeout)
        self.record_inbound = record_inbound
        self.sock = sock
        self.sock.settimeout(timeout)
        self.bytes_sent = 0
        self.bytes_received = 0
        self._send_lock = threading.Lock()

    def send(self, frame, annotation=None):
        if self.closed:
            raise ChannelClosed(f"{self.outbound} is closed")
        data = frame.to_bytes()
        self.transcript.record(self.outbound, frame, annotation)
        try:
            with self._send_lock:
                self.sock.sendall(data)
        except OSError as exc:
            raise ChannelFailure(f"send failed: {exc}") from exc
        self.bytes_sent += len(data)

    def _read_exact(self, k):
        buf = bytearray()
        while len(buf) < k:
            try:
                chunk = self.sock.recv(min(k - len(buf), 1 << 20))
            except socket.timeout:
                raise ChannelFailure(f"timed out waiting on {self.inbound}") from None
            except OSError as exc:
                raise ChannelFailure(f"receive failed: {exc}") from exc
            if not chunk:
                self.closed = True
                raise ChannelClosed(f"{self.inbound} closed by peer")
            buf += chunk
        self.bytes_received += k
        return bytes(buf)

    def receive(self, timeout=None):
        if self.closed:
            raise ChannelClosed(f"{self.inbound} is closed")
        if timeout is not None:
            self.sock.settimeout(timeout)
        mtype, session, length = decode_header(self._read_exact(HEADER_BYTES))
        frame = Frame(mtype, session, self._read_exact(length) if length else b"")
        if self.record_inbound:
            self.transcript.record(self.inbound, frame)
        return frame

    def close(self):
        if not self.closed:
            self.closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def parse_address(address):
    if isinstance(address, tuple):
        return address
    host, _, port = address.rpartition(":")
    return (host or "127.0.0.1", int(port))


class Listener:
    """Accepts TCP connections; each one becomes an independent channel."""

    def __init__(self, address, name="CS", peer="R", timeout=DEFAULT_TIMEOUT):
        self.name, self.peer, self.timeout = name, peer, timeout
        try:
            self.sock = socket.create_server(parse_address(address))
        except OSError as exc:
            raise BindFailure(f"cannot bind {address}: {exc}") from exc
        self._threads = []
        self._stopping = threading.Event()

    @property
    def address(self):
        host, port = self.sock.getsockname()[:2]
        return (host, port)

    def accept(self, transcript=None, record_inbound=True):
        conn, _ = self.sock.accept()
        return SocketChannel(conn, self.name, self.peer, transcript, self.timeout, record_inbound)

    def serve_forever(self, handler, transcript_factory=None, record_inbound=True):
        """Run ``handler(channel)`` on a new thread for every connection."""
        while not self._stopping.is_set():
            try:
                conn, _ = self.sock.accept()
            except OSError:
                break
            transcript = transcript_factory() if transcript_factory else None
            chan = SocketChannel(
                conn, self.name, self.peer, transcript, self.timeout, record_inbound
            )
            t = threading.Thread(target=self._run, args=(handler, chan), daemon=True)
            t.start()
            self._threads.append(t)

    def serve_in_background(self, handler, transcript_factory=None, record_inbound=True):
        t = threading.Thread(
            target=self.serve_forever,
            args=(handler, transcript_factory, record_inbound),
            daemon=True,
        )
        t.start()
        return t

    @staticmethod
    def _run(handler, chan):
        try:
            handler(chan)
        finally:
            chan.close()

    def close(self):
        self._stopping.set()
        try:
            self.sock.close()
        except OSError:
            pass
        for t in self._threads:
            t.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def listen(address, name="CS", peer="R", timeout=DEFAULT_TIMEOUT):
    return Listener(address, name, peer, timeout)


def connect(address, name="R", peer="CS", transcript=None, timeout=DEFAULT_TIMEOUT,
            record_inbound=True):
    try:
        sock = socket.create_connection(parse_address(address), timeout=timeout)
    except OSError as exc:
        raise ConnectFailure(f"cannot connect to {address}: {exc}") from exc
    return SocketChannel(sock, name, peer, transcript, timeout, record_inbound)
