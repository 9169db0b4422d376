"""The reader-facing socket.

One WebSocket, one reader. The server pushes ``page`` and ``state``
messages and accepts ``advance``, ``choose``, and ``sim``; nothing else
crosses the wire in either direction. A second connection while one
reader is attached is turned away with a close frame, so a stale tab
cannot steal or split a session. Rejected actions (debounce, no such
choice) are silent by design: the next page message is the only truth
the client needs, and the UI enforces its own lock locally.
"""

from __future__ import annotations

import json
import threading

from websockets.exceptions import ConnectionClosed
from websockets.sync.server import serve as ws_serve

from .service import Session, SessionError

BUSY_CLOSE_CODE = 1013  # "try again later": a reader is already attached


class ReaderServer:
    def __init__(self, session: Session, host: str | None = None, port: int | None = None):
        self.session = session
        self.host = session.config.ui_host if host is None else host
        self.port = session.config.ui_port if port is None else port
        self._reader_lock = threading.Lock()
        self._reader = None
        try:
            self._server = ws_serve(self._handler, self.host, self.port)
        except OSError as exc:
            raise SessionError(f"UI address {self.host}:{self.port} is unavailable: {exc}") from exc
        # asking for port 0 binds an ephemeral one; report what we got
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="pif-ws", daemon=True
        )

    def start(self) -> "ReaderServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        with self._reader_lock:
            reader = self._reader
        if reader is not None:
            try:
                reader.close()
            except (ConnectionClosed, OSError):
                pass
        self._server.shutdown()
        self._thread.join(timeout=5.0)

    # ------------------------------------------------------------------

    def _handler(self, connection) -> None:
        with self._reader_lock:
            if self._reader is not None:
                connection.close(BUSY_CLOSE_CODE, "another reader is connected")
                return
            self._reader = connection

        send_lock = threading.Lock()

        def push(message: dict) -> None:
            try:
                with send_lock:
                    connection.send(json.dumps(message))
            except (ConnectionClosed, OSError):
                pass  # the read loop notices and detaches

        try:
            snapshot = self.session.snapshot()
            if snapshot.get("ok"):
                push(snapshot["page"])
            self.session.add_listener(push)
            try:
                for raw in connection:
                    self._dispatch(raw)
            finally:
                self.session.remove_listener(push)
        except (ConnectionClosed, OSError):
            pass
        finally:
            with self._reader_lock:
                if self._reader is connection:
                    self._reader = None

    def _dispatch(self, raw) -> None:
        try:
            message = json.loads(raw)
        except (json.JSONDecodeError, TypeError):
            return
        if not isinstance(message, dict):
            return
        kind = message.get("type")
        if kind == "advance":
            self.session.advance()
        elif kind == "choose":
            index = message.get("index")
            if isinstance(index, int) and not isinstance(index, bool):
                self.session.choose(index)
        elif kind == "sim":
            values = message.get("values")
            if isinstance(values, dict):
                self.session.sim(values)
        # anything else is not part of the protocol and is dropped


def serve_ui(session: Session) -> ReaderServer:
    return ReaderServer(session).start()
