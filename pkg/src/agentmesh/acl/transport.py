"""TCP transport: one listener per node, cached outbound connections.

Connections are one-way pipes: a node sends on sockets it opened and
receives on sockets peers opened to it. Replies travel over the
reply-direction connection, not back down the request socket, which
keeps framing strictly sequential per direction.

Delivery guarantees: messages sent to one destination endpoint from one
node are delivered in send order (single connection, serialized writes).
A decode error poisons only the offending inbound connection.
"""

from __future__ import annotations

import logging
import socket
import threading

from .codec import CodecError, FrameDecoder, encode
from .model import Message

log = logging.getLogger("agentmesh.transport")

Endpoint = tuple[str, int]


class TransportError(Exception):
    pass


class TcpTransport:
    def __init__(self, host: str, port: int, on_message):
        self._host = host
        self._port = port
        self._on_message = on_message
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._conn_lock = threading.Lock()
        self._outbound: dict[Endpoint, tuple[socket.socket, threading.Lock]] = {}
        self._inbound: set[socket.socket] = set()
        self._closed = False

    @property
    def endpoint(self) -> Endpoint:
        return (self._host, self._port)

    def start(self):
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self._host, self._port))
        listener.listen(64)
        self._port = listener.getsockname()[1]
        self._listener = listener
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name=f"acl-accept:{self._port}",
            daemon=True)
        self._accept_thread.start()

    def _accept_loop(self):
        assert self._listener is not None
        while True:
            try:
                conn, peer = self._listener.accept()
            except OSError:
                return  # listener closed
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._conn_lock:
                if self._closed:
                    conn.close()
                    return
                self._inbound.add(conn)
            threading.Thread(
                target=self._read_loop, args=(conn, peer),
                name=f"acl-read:{peer[0]}:{peer[1]}", daemon=True).start()

    def _read_loop(self, conn: socket.socket, peer):
        decoder = FrameDecoder()
        try:
            while True:
                data = conn.recv(65536)
                if not data:
                    return
                for msg in decoder.feed(data):
                    try:
                        self._on_message(msg)
                    except Exception:
                        log.exception("message handler failed")
        except CodecError as exc:
            log.warning("dropping connection from %s: %s", peer, exc)
        except OSError:
            pass
        finally:
            with self._conn_lock:
                self._inbound.discard(conn)
            conn.close()

    def send(self, endpoint: Endpoint, message: Message):
        """Deliver one framed message; raises TransportError on failure."""
        try:
            frame = encode(message)
        except CodecError as exc:
            raise TransportError(f"cannot encode message: {exc}") from None
        sock, lock = self._connection(endpoint)
        with lock:
            try:
                sock.sendall(frame)
            except OSError as exc:
                self._drop(endpoint)
                raise TransportError(
                    f"send to {endpoint[0]}:{endpoint[1]} failed: {exc}"
                ) from None

    def _connection(self, endpoint: Endpoint):
        with self._conn_lock:
            if self._closed:
                raise TransportError("transport closed")
            cached = self._outbound.get(endpoint)
            if cached is not None:
                return cached
        try:
            sock = socket.create_connection(endpoint, timeout=5.0)
        except OSError as exc:
            raise TransportError(
                f"cannot connect to {endpoint[0]}:{endpoint[1]}: {exc}"
            ) from None
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        entry = (sock, threading.Lock())
        with self._conn_lock:
            if self._closed:
                sock.close()
                raise TransportError("transport closed")
            other = self._outbound.setdefault(endpoint, entry)
            if other is not entry:
                sock.close()
            return other

    def _drop(self, endpoint: Endpoint):
        with self._conn_lock:
            entry = self._outbound.pop(endpoint, None)
        if entry is not None:
            try:
                entry[0].close()
            except OSError:
                pass

    def close(self):
        with self._conn_lock:
            if self._closed:
                return
            self._closed = True
            listener = self._listener
            outbound = list(self._outbound.values())
            inbound = list(self._inbound)
            self._outbound.clear()
            self._inbound.clear()
        if listener is not None:
            try:
                listener.close()
            except OSError:
                pass
        for sock, _lock in outbound:
            try:
                sock.close()
            except OSError:
                pass
        for sock in inbound:
            try:
                sock.close()
            except OSError:
                pass


__all__ = ["Endpoint", "TcpTransport", "TransportError"]
