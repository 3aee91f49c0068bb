"""Collective transports: every round each process contributes one
equally-sized integer message and receives the rank-ordered concatenation
of all contributions (all-gather semantics).

Two backends ship: an in-process group for tests and single-machine runs
(virtual ranks synchronizing over a shared rendezvous), and a TCP backend
where rank 0 doubles as the rendezvous point for connection setup and
frame routing. Frames on the wire are length-prefixed sequences of 32-bit
little-endian integers.
"""
from __future__ import annotations

import socket
import struct
import threading
import time
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence

PROTOCOL_VERSION = 1
_INT32_MIN, _INT32_MAX = -(1 << 31), (1 << 31) - 1


class TransportError(RuntimeError):
    """Collective communication failed (peer loss, protocol violation)."""


class Transport(ABC):
    rank: int
    size: int

    @abstractmethod
    def allgather(self, values: Sequence[int]) -> List[int]:
        """Exchange equally-sized contributions; returns all of them in rank order."""

    @abstractmethod
    def close(self) -> None:
        ...


# ----------------------------------------------------------------------
# in-process virtual ranks

class _Rendezvous:
    def __init__(self, size: int):
        self.size = size
        self.slots: List[Optional[list]] = [None] * size
        self.barrier = threading.Barrier(size)


class InProcessTransport(Transport):
    """One virtual rank of an in-process group sharing a rendezvous."""

    def __init__(self, rendezvous: _Rendezvous, rank: int, timeout: float = 120.0):
        self._rendezvous = rendezvous
        self.rank = rank
        self.size = rendezvous.size
        self.timeout = timeout
        self._closed = False

    def allgather(self, values: Sequence[int]) -> List[int]:
        if self._closed:
            raise TransportError("transport closed")
        r = self._rendezvous
        r.slots[self.rank] = list(values)
        self._wait(r.barrier)
        slots = list(r.slots)
        self._wait(r.barrier)  # everyone has read; slots may be reused
        length = len(values)
        if any(s is None or len(s) != length for s in slots):
            raise TransportError("contribution lengths differ across ranks")
        result: List[int] = []
        for s in slots:
            result.extend(s)
        return result

    def _wait(self, barrier: threading.Barrier) -> None:
        try:
            barrier.wait(self.timeout)
        except threading.BrokenBarrierError:
            raise TransportError("rendezvous broken (peer gone or timeout)") from None

    def close(self) -> None:
        # unblock any peer still waiting on us
        if not self._closed:
            self._closed = True
            self._rendezvous.barrier.abort()


def create_inprocess_group(size: int, timeout: float = 120.0) -> List[InProcessTransport]:
    if size < 1:
        raise ValueError("group size must be >= 1")
    rendezvous = _Rendezvous(size)
    return [InProcessTransport(rendezvous, rank, timeout) for rank in range(size)]


# ----------------------------------------------------------------------
# TCP star

def _send_frame(sock: socket.socket, values: Sequence[int]) -> None:
    n = len(values)
    try:
        payload = struct.pack("<I%di" % n, n, *values)
    except struct.error as exc:
        raise TransportError("frame value outside 32-bit range") from exc
    sock.sendall(payload)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except OSError as exc:
            raise TransportError("peer connection failed: %s" % exc) from exc
        if not chunk:
            raise TransportError("peer disconnected")
        buf.extend(chunk)
    return bytes(buf)


def _recv_frame(sock: socket.socket) -> List[int]:
    (n,) = struct.unpack("<I", _recv_exact(sock, 4))
    if n > (1 << 26):
        raise TransportError("oversized frame (%d ints)" % n)
    return list(struct.unpack("<%di" % n, _recv_exact(sock, 4 * n)))


class TcpTransport(Transport):
    """All-gather over TCP with rank 0 as hub.

    Every rank sends its contribution to rank 0, which concatenates all
    contributions in rank order and sends the result back. The handshake
    frame carries (protocol version, rank, process count, buffer size,
    config checksum); any mismatch aborts the run, which guards the
    assumption that all processes derived the same global configuration.
    """

    def __init__(self, rank: int, size: int, checksum: int, buffer_ints: int):
        self.rank = rank
        self.size = size
        self._checksum = checksum & 0x7FFFFFFF
        self._buffer_ints = buffer_ints
        self._hub: Optional[socket.socket] = None  # used by rank > 0
        self._peers: dict = {}  # rank -> socket, used by rank 0
        self._server: Optional[socket.socket] = None

    def _hello(self) -> List[int]:
        return [PROTOCOL_VERSION, self.rank, self.size, self._buffer_ints, self._checksum]

    def _check_hello(self, frame: Sequence[int], expected_rank: Optional[int] = None) -> int:
        if len(frame) != 5:
            raise TransportError("bad handshake frame")
        version, rank, size, buffer_ints, checksum = frame
        if version != PROTOCOL_VERSION:
            raise TransportError("protocol version mismatch: %d" % version)
        if size != self.size:
            raise TransportError("process count mismatch: %d != %d" % (size, self.size))
        if buffer_ints != self._buffer_ints:
            raise TransportError("buffer size mismatch: %d != %d" % (buffer_ints, self._buffer_ints))
        if checksum != self._checksum:
            raise TransportError("configuration checksum mismatch")
        if expected_rank is not None and rank != expected_rank:
            raise TransportError("unexpected rank %d" % rank)
        return rank

    @classmethod
    def listen(cls, host: str, port: int, size: int, checksum: int, buffer_ints: int,
               timeout: float = 120.0) -> "TcpTransport":
        """Run rank 0: accept the other size-1 ranks and handshake each."""
        t = cls(0, size, checksum, buffer_ints)
        server = socket.create_server((host, port))
        server.settimeout(timeout)
        t._server = server
        try:
            while len(t._peers) < size - 1:
                conn, _ = server.accept()
                conn.settimeout(timeout)
                rank = t._check_hello(_recv_frame(conn))
                if rank in t._peers or not 0 < rank < size:
                    raise TransportError("duplicate or invalid rank %d" % rank)
                t._peers[rank] = conn
            for conn in t._peers.values():
                _send_frame(conn, t._hello())
        except Exception:
            t.close()
            raise
        return t

    @classmethod
    def connect(cls, host: str, port: int, rank: int, size: int, checksum: int,
                buffer_ints: int, timeout: float = 120.0) -> "TcpTransport":
        """Run rank > 0: dial the hub, retrying until it is up."""
        if not 0 < rank < size:
            raise ValueError("connect is for ranks 1..size-1")
        t = cls(rank, size, checksum, buffer_ints)
        give_up = time.monotonic() + timeout
        last_error: Optional[Exception] = None
        sock = None
        while time.monotonic() < give_up:
            try:
                sock = socket.create_connection((host, port), timeout=5.0)
                break
            except OSError as exc:
                last_error = exc
                time.sleep(0.05)
        if sock is None:
            raise TransportError("could not reach hub: %s" % last_error)
        sock.settimeout(timeout)
        t._hub = sock
        try:
            _send_frame(sock, t._hello())
            t._check_hello(_recv_frame(sock), expected_rank=0)
        except Exception:
            t.close()
            raise
        return t

    def allgather(self, values: Sequence[int]) -> List[int]:
        length = len(values)
        if self.rank == 0:
            contributions: List[Optional[list]] = [None] * self.size
            contributions[0] = list(values)
            for rank, conn in self._peers.items():
                frame = _recv_frame(conn)
                if len(frame) != length:
                    raise TransportError("contribution lengths differ across ranks")
                contributions[rank] = frame
            result: List[int] = []
            for part in contributions:
                result.extend(part)  # type: ignore[arg-type]
            for conn in self._peers.values():
                _send_frame(conn, result)
            return result
        assert self._hub is not None
        _send_frame(self._hub, list(values))
        result = _recv_frame(self._hub)
        if len(result) != length * self.size:
            raise TransportError("gather result has wrong size")
        return result

    def close(self) -> None:
        for conn in list(self._peers.values()):
            try:
                conn.close()
            except OSError:
                pass
        self._peers.clear()
        if self._hub is not None:
            try:
                self._hub.close()
            except OSError:
                pass
            self._hub = None
        if self._server is not None:
            try:
                self._server.close()
            except OSError:
                pass
            self._server = None
