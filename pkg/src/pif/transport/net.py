"""TCP bridge for streams: length-prefixed JSON frames on localhost.

Every frame is a 4-byte big-endian payload length followed by that many
bytes of UTF-8 JSON. The broker owns a Hub; remote outlets publish into
it and remote inlets subscribe out of it, so local and networked clients
interoperate and share one registry. Clock probes are relayed to the
connection that owns the outlet, which answers with its own clock, so
offset estimation works across process boundaries.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
import time

from .streams import DEFAULT_BUFFER, Hub, Sample, StreamInfo, TransportError, _Buffer

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 16571

MAX_FRAME = 16 * 1024 * 1024
_LEN = struct.Struct(">I")


def send_frame(sock: socket.socket, obj) -> None:
    body = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    if len(body) > MAX_FRAME:
        raise TransportError(f"frame too large ({len(body)} bytes)")
    sock.sendall(_LEN.pack(len(body)) + body)


def recv_frame(sock: socket.socket):
    """Read one frame; None on clean EOF at a frame boundary."""
    header = _recv_exact(sock, _LEN.size)
    if header is None:
        return None
    (length,) = _LEN.unpack(header)
    if length > MAX_FRAME:
        raise TransportError(f"frame too large ({length} bytes)")
    body = _recv_exact(sock, length)
    if body is None:
        raise TransportError("connection dropped mid-frame")
    return json.loads(body.decode("utf-8"))


def _recv_exact(sock: socket.socket, n: int):
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            return None if got == 0 else None
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def _sample_record(sid: str, sample: Sample) -> dict:
    record = {"op": "sample", "sid": sid, "t": sample.timestamp}
    if sample.label is not None:
        record["m"] = sample.label
    else:
        record["v"] = list(sample.values)
    return record


def _sample_from(record: dict) -> Sample:
    if "m" in record:
        return Sample(float(record["t"]), label=record["m"])
    return Sample(float(record["t"]), values=tuple(float(v) for v in record["v"]))


def _info_record(info: StreamInfo) -> dict:
    return {
        "name": info.name,
        "kind": info.kind,
        "channel_count": info.channel_count,
        "nominal_rate": info.nominal_rate,
        "channel_labels": list(info.channel_labels),
        "source_id": info.source_id,
    }


def _info_from(raw: dict) -> StreamInfo:
    return StreamInfo(
        name=raw["name"],
        kind=raw["kind"],
        channel_count=raw["channel_count"],
        nominal_rate=raw["nominal_rate"],
        channel_labels=tuple(raw["channel_labels"]),
        source_id=raw["source_id"],
    )


class TransportServer:
    """Broker for networked streams; also hosts a local Hub."""

    def __init__(self, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT, hub: Hub | None = None):
        self.hub = hub or Hub()
        self._listener = socket.create_server((host, port))
        self.host, self.port = self._listener.getsockname()[:2]
        self._lock = threading.Lock()
        self._owners: dict[str, "_Connection"] = {}  # source_id -> producing conn
        self._pending_probes: dict[int, tuple["_Connection", int]] = {}
        self._next_probe = 0
        self._conns: set["_Connection"] = set()
        self._running = True
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while self._running:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            conn = _Connection(self, sock)
            with self._lock:
                self._conns.add(conn)
            conn.start()

    def close(self) -> None:
        self._running = False
        try:
            self._listener.close()
        except OSError:
            pass
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            conn.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # connection bookkeeping

    def _register_owner(self, sid: str, conn: "_Connection") -> None:
        with self._lock:
            self._owners[sid] = conn

    def _drop_conn(self, conn: "_Connection") -> None:
        with self._lock:
            self._conns.discard(conn)
            for sid in [s for s, c in self._owners.items() if c is conn]:
                del self._owners[sid]

    def _relay_probe(self, sid: str, requester: "_Connection", probe_id: int) -> None:
        with self._lock:
            owner = self._owners.get(sid)
        if owner is None:
            # stream lives in this process; answer with the outlet's clock
            outlet = self.hub.outlet(sid)
            requester.send({"op": "probe_reply", "probe_id": probe_id, "t_remote": outlet.clock()})
            return
        with self._lock:
            relay_id = self._next_probe
            self._next_probe += 1
            self._pending_probes[relay_id] = (requester, probe_id)
        owner.send({"op": "probe", "probe_id": relay_id})

    def _route_probe_reply(self, relay_id: int, t_remote: float) -> None:
        with self._lock:
            pending = self._pending_probes.pop(relay_id, None)
        if pending is not None:
            requester, probe_id = pending
            requester.send({"op": "probe_reply", "probe_id": probe_id, "t_remote": t_remote})


class _Connection:
    def __init__(self, server: TransportServer, sock: socket.socket):
        self.server = server
        self.sock = sock
        self._write_lock = threading.Lock()
        self._outlets: dict[str, object] = {}
        self._forwarders: list[threading.Thread] = []
        self._alive = True

    def start(self) -> None:
        threading.Thread(target=self._read_loop, daemon=True).start()

    def send(self, obj) -> None:
        try:
            with self._write_lock:
                send_frame(self.sock, obj)
        except OSError:
            self._alive = False

    def shutdown(self) -> None:
        self._alive = False
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass

    def _read_loop(self) -> None:
        try:
            while self._alive:
                frame = recv_frame(self.sock)
                if frame is None:
                    break
                self._dispatch(frame)
        except (TransportError, OSError, json.JSONDecodeError):
            pass
        finally:
            for outlet in self._outlets.values():
                outlet.close()
            self.server._drop_conn(self)
            self.shutdown()

    def _dispatch(self, frame: dict) -> None:
        op = frame.get("op")
        try:
            if op == "open_outlet":
                info = _info_from(frame["info"])
                outlet = self.server.hub.open_outlet(info)
                self._outlets[info.source_id] = outlet
                self.server._register_owner(info.source_id, self)
                self.send({"op": "ok", "sid": info.source_id})
            elif op == "push":
                self._outlets[frame["sid"]].push(_sample_from(frame))
            elif op == "close_outlet":
                outlet = self._outlets.pop(frame["sid"], None)
                if outlet is not None:
                    outlet.close()
            elif op == "subscribe":
                inlet = self.server.hub.open_inlet(
                    name=frame.get("name"),
                    source_id=frame.get("sid"),
                    capacity=frame.get("capacity", DEFAULT_BUFFER),
                )
                self.send({"op": "subscribed", "info": _info_record(inlet.info)})
                thread = threading.Thread(target=self._forward, args=(inlet,), daemon=True)
                self._forwarders.append(thread)
                thread.start()
            elif op == "registry":
                self.send(
                    {"op": "registry", "streams": [_info_record(i) for i in self.server.hub.streams()]}
                )
            elif op == "probe":
                self.server._relay_probe(frame["sid"], self, frame["probe_id"])
            elif op == "probe_reply":
                self.server._route_probe_reply(frame["probe_id"], float(frame["t_remote"]))
            else:
                self.send({"op": "error", "message": f"unknown op {op!r}"})
        except (TransportError, KeyError, TypeError, ValueError) as exc:
            self.send({"op": "error", "message": str(exc)})

    def _forward(self, inlet) -> None:
        sid = inlet.info.source_id
        while self._alive:
            batch = inlet.pull(max_n=1024, timeout=0.25)
            if not batch:
                if inlet.closed:
                    self.send({"op": "closed", "sid": sid})
                    return
                continue
            for sample in batch:
                self.send(_sample_record(sid, sample))


class _Client:
    """Shared socket plumbing: reader thread plus routed replies."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(None)
        self._write_lock = threading.Lock()
        self._replies = _Buffer(256)
        self._errors = _Buffer(256)
        self._alive = True

    def _start_reader(self) -> None:
        threading.Thread(target=self._read_loop, daemon=True).start()

    def _read_loop(self) -> None:
        try:
            while self._alive:
                frame = recv_frame(self.sock)
                if frame is None:
                    break
                self._handle(frame)
        except (TransportError, OSError, json.JSONDecodeError):
            pass
        finally:
            self._alive = False
            self._on_disconnect()

    def _handle(self, frame: dict) -> None:
        raise NotImplementedError

    def _on_disconnect(self) -> None:
        self._replies.close()
        self._errors.close()

    def _send(self, obj) -> None:
        with self._write_lock:
            send_frame(self.sock, obj)

    def _wait_reply(self, timeout: float = 5.0) -> dict:
        deadline = time.monotonic() + timeout
        while True:
            errors = self._errors.get(1, 0.0)
            if errors:
                raise TransportError(errors[0]["message"])
            frames = self._replies.get(1, 0.05)
            if frames:
                return frames[0]
            if time.monotonic() >= deadline:
                raise TransportError("no reply from transport server")

    def close(self) -> None:
        self._alive = False
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class NetOutlet(_Client):
    """Publish one stream to a broker; answers its clock probes."""

    def __init__(
        self,
        info: StreamInfo,
        host: str = DEFAULT_HOST,
        port: int = DEFAULT_PORT,
        clock=time.monotonic,
    ):
        super().__init__(host, port)
        self.info = info
        self.clock = clock
        self._last_ts: float | None = None
        self._start_reader()
        self._send({"op": "open_outlet", "info": _info_record(info)})
        reply = self._wait_reply()
        if reply.get("op") != "ok":
            raise TransportError(f"outlet rejected: {reply}")

    def _handle(self, frame: dict) -> None:
        op = frame.get("op")
        if op == "probe":
            self._send(
                {"op": "probe_reply", "probe_id": frame["probe_id"], "t_remote": self.clock()}
            )
        elif op == "error":
            self._errors.put(frame)
        else:
            self._replies.put(frame)

    def push(self, sample: Sample) -> None:
        pending = self._errors.get(1, 0.0)
        if pending:
            raise TransportError(pending[0]["message"])
        if sample.label is None and len(sample.values) != self.info.channel_count:
            raise TransportError(
                f"arity mismatch: got {len(sample.values)} values on "
                f"{self.info.channel_count}-channel stream {self.info.name!r}"
            )
        if self._last_ts is not None and sample.timestamp < self._last_ts:
            raise TransportError(
                f"timestamp regression on {self.info.name!r}: "
                f"{sample.timestamp} after {self._last_ts}"
            )
        self._last_ts = sample.timestamp
        self._send(_sample_record(self.info.source_id, sample) | {"op": "push"})

    def push_values(self, values, timestamp: float | None = None) -> None:
        ts = self.clock() if timestamp is None else timestamp
        self.push(Sample(ts, values=tuple(float(v) for v in values)))

    def push_marker(self, label: str, timestamp: float | None = None) -> None:
        ts = self.clock() if timestamp is None else timestamp
        self.push(Sample(ts, label=label))

    def close(self) -> None:
        if self._alive:
            try:
                self._send({"op": "close_outlet", "sid": self.info.source_id})
            except (TransportError, OSError):
                pass
        super().close()


class NetInlet(_Client):
    """Subscribe to one stream on a broker."""

    def __init__(
        self,
        host: str = DEFAULT_HOST,
        port: int = DEFAULT_PORT,
        name: str | None = None,
        source_id: str | None = None,
        capacity: int = DEFAULT_BUFFER,
    ):
        super().__init__(host, port)
        self._samples = _Buffer(capacity)
        self._probe_lock = threading.Lock()
        self._start_reader()
        request = {"op": "subscribe", "capacity": capacity}
        if name is not None:
            request["name"] = name
        if source_id is not None:
            request["sid"] = source_id
        self._send(request)
        reply = self._wait_reply()
        if reply.get("op") != "subscribed":
            raise TransportError(f"subscribe rejected: {reply}")
        self.info = _info_from(reply["info"])

    def _handle(self, frame: dict) -> None:
        op = frame.get("op")
        if op == "sample":
            self._samples.put(_sample_from(frame))
        elif op == "closed":
            self._samples.close()
        elif op == "error":
            self._errors.put(frame)
        else:
            self._replies.put(frame)

    def pull(self, max_n: int = 1024, timeout: float | None = 0.0) -> list[Sample]:
        return self._samples.get(max_n, timeout)

    @property
    def stats(self):
        return self._samples.stats

    @property
    def closed(self) -> bool:
        return self._samples.closed and not self._samples.items

    def probe(self, local_clock=time.monotonic) -> tuple[float, float, float]:
        """One relayed clock exchange against the stream's producer."""
        with self._probe_lock:
            t_send = local_clock()
            self._send({"op": "probe", "sid": self.info.source_id, "probe_id": 0})
            reply = self._wait_reply()
            t_reply = local_clock()
        if reply.get("op") != "probe_reply":
            raise TransportError(f"unexpected probe reply: {reply}")
        return t_send, float(reply["t_remote"]), t_reply

    def _on_disconnect(self) -> None:
        super()._on_disconnect()
        self._samples.close()


def registry(host: str = DEFAULT_HOST, port: int = DEFAULT_PORT) -> list[StreamInfo]:
    """One-shot stream discovery against a broker."""
    with socket.create_connection((host, port), timeout=5.0) as sock:
        send_frame(sock, {"op": "registry"})
        reply = recv_frame(sock)
    if not reply or reply.get("op") != "registry":
        raise TransportError(f"bad registry reply: {reply}")
    return [_info_from(raw) for raw in reply["streams"]]
