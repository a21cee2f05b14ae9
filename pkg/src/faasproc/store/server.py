"""TCP server exposing a :class:`StoreEngine` over the framed protocol."""

from __future__ import annotations

import logging
import socket
import socketserver
import threading

from ..errors import BindError, IndexOutOfRange, MalformedFrame, StoreError, Timeout, WrongType
from . import protocol as p
from .engine import StoreEngine

logger = logging.getLogger(__name__)


def error_code(exc: BaseException) -> p.ErrorCode:
    if isinstance(exc, WrongType):
        return p.ErrorCode.WRONG_TYPE
    if isinstance(exc, IndexOutOfRange):
        return p.ErrorCode.INDEX_OUT_OF_RANGE
    if isinstance(exc, Timeout):
        return p.ErrorCode.TIMEOUT
    if isinstance(exc, MalformedFrame):
        return p.ErrorCode.MALFORMED
    if isinstance(exc, StoreError):
        return p.ErrorCode.STORE
    return p.ErrorCode.INTERNAL


def parse_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep:
        raise ValueError(f"address must be host:port, got {address!r}")
    return host or "127.0.0.1", int(port)


class _Connection(socketserver.BaseRequestHandler):
    server: "_TCPServer"

    def setup(self):
        self.request.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.rfile = self.request.makefile("rb")
        self.write_lock = threading.Lock()
        self.pending_lock = threading.Lock()
        self.parked: dict[int, object] = {}
        self.resolved: set[int] = set()
        self.closed = False

    def handle(self):
        engine = self.server.engine
        while True:
            try:
                raw = p.read_frame(self.rfile.read)
                if not raw:
                    return
                request = p.decode_request(raw)
            except MalformedFrame as exc:
                logger.warning("closing %s: %s", self.client_address, exc)
                return
            except OSError:
                return
            if request.op is p.Op.POP_HEAD_BLOCKING:
                self._pop(engine, request)
                continue
            try:
                value = getattr(engine, request.name)(*p.engine_args(request))
                self._send(p.Response(request.op, request.request_id, value))
            except Exception as exc:
                self._send(p.ErrorResponse(request.request_id, error_code(exc), str(exc)))

    def _pop(self, engine: StoreEngine, request: p.Request):
        rid = request.request_id

        def deliver(value):
            with self.pending_lock:
                if self.parked.pop(rid, None) is None:
                    self.resolved.add(rid)
            if value is None:
                self._send(p.ErrorResponse(rid, p.ErrorCode.TIMEOUT, "timeout"))
            else:
                self._send(p.Response(request.op, rid, value))

        try:
            ticket = engine.pop_head_async(*p.engine_args(request), deliver)
        except Exception as exc:
            self._send(p.ErrorResponse(rid, error_code(exc), str(exc)))
            return
        if ticket is not None:
            with self.pending_lock:
                if rid in self.resolved:
                    self.resolved.discard(rid)
                else:
                    self.parked[rid] = ticket

    def _send(self, response):
        data = p.encode_response(response)
        with self.write_lock:
            if self.closed:
                return
            try:
                self.request.sendall(data)
            except OSError:
                self.closed = True

    def finish(self):
        with self.write_lock:
            self.closed = True
        with self.pending_lock:
            parked = list(self.parked.values())
            self.parked.clear()
        for ticket in parked:
            self.server.engine.cancel(ticket)
        try:
            self.rfile.close()
        except OSError:
            pass


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, engine):
        self.engine = engine
        super().__init__(address, _Connection)


class StoreServer:
    """A running store server; use :func:`serve` to start one."""

    def __init__(self, tcp: _TCPServer, engine: StoreEngine, owns_engine: bool):
        self._tcp = tcp
        self.engine = engine
        self._owns_engine = owns_engine
        self._thread = threading.Thread(target=tcp.serve_forever, args=(0.05,), name="store-server", daemon=True)
        self._thread.start()

    @property
    def address(self) -> str:
        host, port = self._tcp.server_address[:2]
        return f"{host}:{port}"

    def close(self):
        self._tcp.shutdown()
        self._tcp.server_close()
        self._thread.join(timeout=2.0)
        if self._owns_engine:
            self.engine.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(bind_address: str = "127.0.0.1:0", engine: StoreEngine | None = None, sweep_interval: float = 0.5) -> StoreServer:
    owns = engine is None
    engine = engine or StoreEngine(sweep_interval=sweep_interval)
    try:
        tcp = _TCPServer(parse_address(bind_address), engine)
    except OSError as exc:
        if owns:
            engine.close()
        raise BindError(f"cannot bind {bind_address}: {exc}") from exc
    return StoreServer(tcp, engine, owns)
