"""Minimal WebSocket (RFC 6455) transport over blocking sockets.

Text frames only, which is all the viewer protocol needs; binary payloads
travel base64-encoded inside JSON.  Bytes that arrive in the same segment as
the handshake are kept in a connection buffer, so messages sent immediately
after the upgrade are never lost.
"""
from __future__ import annotations

import base64
import hashlib
import socket
import struct

GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class WsError(Exception):
    pass


def _accept_key(key: str) -> str:
    digest = hashlib.sha1((key + GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


class WsConnection:
    """One WebSocket endpoint (either side) with buffered reads."""

    def __init__(self, sock: socket.socket, mask_outgoing: bool):
        self.sock = sock
        self.mask_outgoing = mask_outgoing
        self._buf = b""

    # --- byte plumbing ---------------------------------------------------

    def _fill(self) -> None:
        chunk = self.sock.recv(4096)
        if not chunk:
            raise WsError("connection closed")
        self._buf += chunk

    def _read_exact(self, n: int) -> bytes:
        while len(self._buf) < n:
            self._fill()
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def _read_until(self, marker: bytes) -> bytes:
        while marker not in self._buf:
            self._fill()
        idx = self._buf.index(marker) + len(marker)
        out, self._buf = self._buf[:idx], self._buf[idx:]
        return out

    # --- handshakes --------------------------------------------------------

    def handshake_server(self) -> None:
        request = self._read_until(b"\r\n\r\n")
        headers = {}
        for line in request.split(b"\r\n")[1:]:
            if b":" in line:
                k, v = line.split(b":", 1)
                headers[k.strip().lower().decode()] = v.strip().decode()
        key = headers.get("sec-websocket-key")
        if key is None:
            raise WsError("missing Sec-WebSocket-Key")
        response = ("HTTP/1.1 101 Switching Protocols\r\n"
                    "Upgrade: websocket\r\n"
                    "Connection: Upgrade\r\n"
                    f"Sec-WebSocket-Accept: {_accept_key(key)}\r\n\r\n")
        self.sock.sendall(response.encode("ascii"))

    def handshake_client(self, host: str, port: int, path: str = "/") -> None:
        key = base64.b64encode(b"thurston-viewer0").decode("ascii")
        request = (f"GET {path} HTTP/1.1\r\n"
                   f"Host: {host}:{port}\r\n"
                   "Upgrade: websocket\r\n"
                   "Connection: Upgrade\r\n"
                   f"Sec-WebSocket-Key: {key}\r\n"
                   "Sec-WebSocket-Version: 13\r\n\r\n")
        self.sock.sendall(request.encode("ascii"))
        response = self._read_until(b"\r\n\r\n")
        if b"101" not in response.split(b"\r\n", 1)[0]:
            raise WsError("handshake rejected")

    # --- frames --------------------------------------------------------------

    def send_text(self, payload: str) -> None:
        data = payload.encode("utf-8")
        header = bytearray([0x81])
        n = len(data)
        mask_bit = 0x80 if self.mask_outgoing else 0x00
        if n < 126:
            header.append(mask_bit | n)
        elif n < (1 << 16):
            header.append(mask_bit | 126)
            header += struct.pack(">H", n)
        else:
            header.append(mask_bit | 127)
            header += struct.pack(">Q", n)
        if self.mask_outgoing:
            key = b"\x12\x34\x56\x78"
            header += key
            data = bytes(b ^ key[i % 4] for i, b in enumerate(data))
        self.sock.sendall(bytes(header) + data)

    def recv(self) -> str | None:
        """Next text message, or None on a close frame."""
        while True:
            b0, b1 = self._read_exact(2)
            opcode = b0 & 0x0F
            masked = bool(b1 & 0x80)
            n = b1 & 0x7F
            if n == 126:
                n = struct.unpack(">H", self._read_exact(2))[0]
            elif n == 127:
                n = struct.unpack(">Q", self._read_exact(8))[0]
            key = self._read_exact(4) if masked else None
            payload = self._read_exact(n) if n else b""
            if masked and key:
                payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
            if opcode == 0x8:
                return None
            if opcode == 0x9:                      # ping -> pong
                pong = bytearray([0x8A, len(payload)])
                self.sock.sendall(bytes(pong) + payload)
                continue
            if opcode in (0x1, 0x2):
                return payload.decode("utf-8")
            # continuation frames are not used by the viewer protocol

    def send_close(self) -> None:
        try:
            self.sock.sendall(bytes([0x88, 0x00]))
        except OSError:
            pass

    def close(self) -> None:
        self.send_close()
        self.sock.close()


def accept_connection(sock: socket.socket) -> WsConnection:
    conn = WsConnection(sock, mask_outgoing=False)
    conn.handshake_server()
    return conn


class WsClient(WsConnection):
    """Blocking client used by the tests and scripted drivers."""

    def __init__(self, host: str, port: int, timeout: float = 60.0):
        sock = socket.create_connection((host, port), timeout=timeout)
        super().__init__(sock, mask_outgoing=True)
        self.handshake_client(host, port)

    def send(self, payload: str) -> None:
        self.send_text(payload)
