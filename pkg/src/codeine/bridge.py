"""Relay between a web-socket client and the driver's line protocol.

One text frame carries exactly one protocol line (without the newline).
Binary frames are refused with close code 1003; pings are answered; a
close from either side closes the other.  The implementation covers just
enough of RFC 6455 for a browser client: HTTP upgrade, masked client
frames, 7/16/64-bit lengths.
"""

from __future__ import annotations

import base64
import hashlib
import socket
import struct
import threading

from . import channel as channels
from .channel import ChannelClosed

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WebSocketError(ConnectionError):
    pass


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise WebSocketError("socket closed mid-frame")
        buf += chunk
    return buf


def accept_websocket(sock: socket.socket) -> None:
    """Perform the server side of the HTTP upgrade handshake."""
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            raise WebSocketError("client closed during handshake")
        data += chunk
    headers = {}
    for line in data.split(b"\r\n")[1:]:
        if b":" in line:
            k, v = line.split(b":", 1)
            headers[k.strip().lower()] = v.strip()
    key = headers.get(b"sec-websocket-key")
    if key is None or b"websocket" not in headers.get(b"upgrade", b"").lower():
        sock.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        raise WebSocketError("not a websocket upgrade request")
    accept = base64.b64encode(
        hashlib.sha1(key + _WS_GUID.encode()).digest()
    ).decode()
    sock.sendall(
        (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
        ).encode()
    )


def send_frame(sock: socket.socket, opcode: int, payload: bytes, mask: bool = False) -> None:
    head = bytes([0x80 | opcode])
    length = len(payload)
    if length < 126:
        len_byte = length
        ext = b""
    elif length < 65536:
        len_byte = 126
        ext = struct.pack(">H", length)
    else:
        len_byte = 127
        ext = struct.pack(">Q", length)
    if mask:
        key = struct.pack(">I", 0x12345678)
        masked = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        sock.sendall(head + bytes([0x80 | len_byte]) + ext + key + masked)
    else:
        sock.sendall(head + bytes([len_byte]) + ext + payload)


def recv_frame(sock: socket.socket) -> tuple[int, bytes]:
    """Returns (opcode, payload); raises WebSocketError on a dead socket."""
    first = _recv_exact(sock, 2)
    opcode = first[0] & 0x0F
    masked = first[1] & 0x80
    length = first[1] & 0x7F
    if length == 126:
        length = struct.unpack(">H", _recv_exact(sock, 2))[0]
    elif length == 127:
        length = struct.unpack(">Q", _recv_exact(sock, 8))[0]
    key = _recv_exact(sock, 4) if masked else b""
    payload = _recv_exact(sock, length) if length else b""
    if masked:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return opcode, payload


def _close_frame(code: int) -> bytes:
    return struct.pack(">H", code)


def relay(ws_sock: socket.socket, driver: channels.SocketChannel) -> None:
    """Pump frames to lines and back until either side closes."""
    done = threading.Event()

    def driver_to_ws():
        try:
            while not done.is_set():
                line = driver.recv_line(None)
                if line is None:
                    continue
                send_frame(ws_sock, OP_TEXT, line.encode("utf-8"))
        except (ChannelClosed, OSError, WebSocketError):
            pass
        finally:
            done.set()
            try:
                send_frame(ws_sock, OP_CLOSE, _close_frame(1000))
            except OSError:
                pass
            try:
                ws_sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass

    pump = threading.Thread(target=driver_to_ws, daemon=True)
    pump.start()
    try:
        while not done.is_set():
            opcode, payload = recv_frame(ws_sock)
            if opcode == OP_TEXT:
                driver.send_line(payload.decode("utf-8").rstrip("\n"))
            elif opcode == OP_BINARY:
                send_frame(ws_sock, OP_CLOSE, _close_frame(1003))
                break
            elif opcode == OP_PING:
                send_frame(ws_sock, OP_PONG, payload)
            elif opcode == OP_CLOSE:
                try:
                    send_frame(ws_sock, OP_CLOSE, payload or _close_frame(1000))
                except OSError:
                    pass
                break
    except (WebSocketError, ChannelClosed, OSError):
        pass
    finally:
        done.set()
        driver.close()
        try:
            ws_sock.close()
        except OSError:
            pass
        pump.join(timeout=2)


def serve_bridge(listen_host: str, listen_port: int, target_host: str,
                 target_port: int, *, ready=None) -> None:
    """Accept one web-socket client and relay it to one driver connection."""
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind((listen_host, listen_port))
    server.listen(1)
    if ready is not None:
        ready(server.getsockname()[1])
    conn, _addr = server.accept()
    server.close()
    try:
        accept_websocket(conn)
        driver = channels.connect(target_host, target_port)
    except (WebSocketError, OSError):
        conn.close()
        raise
    relay(conn, driver)
