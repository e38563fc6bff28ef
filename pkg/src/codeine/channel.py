"""Newline-framed duplex text channels: TCP sockets and in-process pairs.

The driver and its analyzer exchange UTF-8 lines.  ``recv_line`` takes a
timeout: ``None`` blocks, ``0`` polls.  A closed peer raises
:class:`ChannelClosed` on send and returns via the same exception on
receive once the buffer drains.
"""

from __future__ import annotations

import queue
import socket


class ChannelClosed(ConnectionError):
    """The peer is gone."""


class MemoryChannel:
    """One endpoint of an in-process duplex pipe (see :func:`memory_pipe`)."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False
        self._peer_done = False

    def send_line(self, line: str) -> None:
        if self._closed:
            raise ChannelClosed("channel closed")
        self._outbox.put(line)

    def recv_line(self, timeout=None):
        if self._peer_done:
            raise ChannelClosed("peer closed")
        try:
            item = self._inbox.get(block=timeout != 0, timeout=timeout or None)
        except queue.Empty:
            return None
        if item is None:
            self._peer_done = True
            raise ChannelClosed("peer closed")
        return item

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(None)


def memory_pipe() -> tuple[MemoryChannel, MemoryChannel]:
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return MemoryChannel(b_to_a, a_to_b), MemoryChannel(a_to_b, b_to_a)


class SocketChannel:
    """Line framing over a connected TCP socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buf = bytearray()
        self._eof = False

    def send_line(self, line: str) -> None:
        try:
            self._sock.sendall(line.encode("utf-8") + b"\n")
        except (OSError, BrokenPipeError) as exc:
            raise ChannelClosed(str(exc)) from None

    def recv_line(self, timeout=None):
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                raw = bytes(self._buf[:nl])
                del self._buf[: nl + 1]
                return raw.decode("utf-8")
            if self._eof:
                raise ChannelClosed("peer closed")
            self._sock.settimeout(timeout if timeout != 0 else 0.0)
            try:
                chunk = self._sock.recv(65536)
            except (socket.timeout, BlockingIOError):
                return None
            except OSError as exc:
                raise ChannelClosed(str(exc)) from None
            if not chunk:
                self._eof = True
                continue
            self._buf.extend(chunk)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


def connect(host: str, port: int) -> SocketChannel:
    sock = socket.create_connection((host, port))
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return SocketChannel(sock)


class Listener:
    """Bound server socket; ``port`` is known before the first accept."""

    def __init__(self, host: str, port: int):
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._server.bind((host, port))
        self._server.listen(1)
        self.host = host
        self.port = self._server.getsockname()[1]

    def accept_one(self) -> SocketChannel:
        conn, _addr = self._server.accept()
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return SocketChannel(conn)

    def close(self) -> None:
        try:
            self._server.close()
        except OSError:
            pass
