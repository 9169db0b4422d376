"""Named, typed, timestamped sample and marker streams.

In-process outlets and inlets share a Hub; pushes fan out under one lock,
so the global arrival order seen by taps is total and deterministic for a
single producer thread. Inlet buffers are bounded: a slow consumer loses
the oldest samples and the loss is counted, never silent.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace

SIGNAL = "signal"
MARKER = "marker"

DEFAULT_BUFFER = 65536


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True)
class StreamInfo:
    name: str
    kind: str  # signal | marker
    channel_count: int = 1
    nominal_rate: float = 0.0  # Hz; 0 = irregular
    channel_labels: tuple[str, ...] = ()
    source_id: str = ""

    def __post_init__(self):
        if self.kind not in (SIGNAL, MARKER):
            raise TransportError(f"unknown stream kind {self.kind!r}")
        if self.kind == MARKER:
            # markers are single-channel and irregular by definition
            object.__setattr__(self, "channel_count", 1)
            object.__setattr__(self, "nominal_rate", 0.0)
        if self.channel_count < 1:
            raise TransportError("channel_count must be positive")
        if not self.channel_labels:
            object.__setattr__(
                self,
                "channel_labels",
                tuple(f"ch{i}" for i in range(self.channel_count)),
            )
        if len(self.channel_labels) != self.channel_count:
            raise TransportError("channel_labels length must equal channel_count")
        if not self.source_id:
            object.__setattr__(self, "source_id", f"{self.name}-{id(self):x}")


@dataclass(frozen=True)
class Sample:
    timestamp: float
    values: tuple[float, ...] = ()
    label: str | None = None

    @property
    def is_marker(self) -> bool:
        return self.label is not None


@dataclass
class InletStats:
    received: int = 0
    dropped: int = 0


class _Buffer:
    """Bounded FIFO shared by inlets and taps; drop-oldest on overflow."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: deque = deque()
        self.cond = threading.Condition()
        self.stats = InletStats()
        self.closed = False

    def put(self, item) -> None:
        with self.cond:
            if len(self.items) >= self.capacity:
                self.items.popleft()
                self.stats.dropped += 1
            self.items.append(item)
            self.stats.received += 1
            self.cond.notify()

    def close(self) -> None:
        with self.cond:
            self.closed = True
            self.cond.notify_all()

    def get(self, max_n: int, timeout: float | None):
        deadline = None if timeout is None else time.monotonic() + timeout
        with self.cond:
            while not self.items and not self.closed:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    return []
                self.cond.wait(remaining)
            out = []
            while self.items and len(out) < max_n:
                out.append(self.items.popleft())
            return out


class Inlet:
    """Consumer end of one stream. Not safe for concurrent pulls."""

    def __init__(self, info: StreamInfo, buffer: _Buffer):
        self.info = info
        self._buffer = buffer

    def pull(self, max_n: int = 1024, timeout: float | None = 0.0) -> list[Sample]:
        return self._buffer.get(max_n, timeout)

    @property
    def stats(self) -> InletStats:
        return self._buffer.stats

    @property
    def closed(self) -> bool:
        return self._buffer.closed and not self._buffer.items


class Tap:
    """Merged consumer over several streams, in global push order."""

    def __init__(self, buffer: _Buffer):
        self._buffer = buffer

    def pull(self, max_n: int = 1024, timeout: float | None = 0.0) -> list[tuple[str, Sample]]:
        return self._buffer.get(max_n, timeout)

    @property
    def stats(self) -> InletStats:
        return self._buffer.stats

    @property
    def closed(self) -> bool:
        return self._buffer.closed and not self._buffer.items


class Outlet:
    """Producer end of one stream."""

    def __init__(self, hub: "Hub", info: StreamInfo, clock):
        self.hub = hub
        self.info = info
        self.clock = clock
        self._last_ts: float | None = None
        self.closed = False

    def push(self, sample: Sample) -> None:
        if self.closed:
            raise TransportError(f"outlet {self.info.source_id!r} is closed")
        if self.info.kind == MARKER:
            if sample.label is None:
                raise TransportError("marker sample needs a label")
        elif len(sample.values) != self.info.channel_count:
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
        self.hub._fan_out(self.info.source_id, sample)

    def push_values(self, values, timestamp: float | None = None) -> None:
        ts = self.clock() if timestamp is None else timestamp
        self.push(Sample(ts, values=tuple(float(v) for v in values)))

    def push_marker(self, label: str, timestamp: float | None = None) -> None:
        ts = self.clock() if timestamp is None else timestamp
        self.push(Sample(ts, label=label))

    def probe(self, local_clock=time.monotonic) -> tuple[float, float, float]:
        """One clock exchange: (t_send_local, t_remote, t_reply_local)."""
        t_send = local_clock()
        t_remote = self.clock()
        return t_send, t_remote, local_clock()

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self.hub._close_stream(self.info.source_id)


class Hub:
    """Local stream registry and fan-out fabric."""

    def __init__(self):
        self._lock = threading.Lock()
        self._outlets: dict[str, Outlet] = {}
        self._subscribers: dict[str, list[_Buffer]] = {}
        self._taps: list[tuple[set[str] | None, _Buffer]] = []

    def open_outlet(self, info: StreamInfo, clock=time.monotonic) -> Outlet:
        with self._lock:
            if info.source_id in self._outlets and not self._outlets[info.source_id].closed:
                raise TransportError(f"duplicate source_id {info.source_id!r}")
            outlet = Outlet(self, info, clock)
            self._outlets[info.source_id] = outlet
            self._subscribers.setdefault(info.source_id, [])
            return outlet

    def streams(self) -> list[StreamInfo]:
        with self._lock:
            return [o.info for o in self._outlets.values()]

    def resolve(self, name: str | None = None, kind: str | None = None) -> list[StreamInfo]:
        return [
            info
            for info in self.streams()
            if (name is None or info.name == name) and (kind is None or info.kind == kind)
        ]

    def outlet(self, source_id: str) -> Outlet:
        with self._lock:
            if source_id not in self._outlets:
                raise TransportError(f"unknown stream {source_id!r}")
            return self._outlets[source_id]

    def open_inlet(
        self, name: str | None = None, source_id: str | None = None, capacity: int = DEFAULT_BUFFER
    ) -> Inlet:
        with self._lock:
            candidates = [
                o.info
                for o in self._outlets.values()
                if (source_id is None or o.info.source_id == source_id)
                and (name is None or o.info.name == name)
            ]
            if not candidates:
                raise TransportError(f"no stream matching name={name!r} source_id={source_id!r}")
            if len(candidates) > 1:
                raise TransportError(f"ambiguous stream name {name!r}")
            info = candidates[0]
            buffer = _Buffer(capacity)
            self._subscribers[info.source_id].append(buffer)
            return Inlet(info, buffer)

    def open_tap(self, source_ids: list[str] | None = None, capacity: int = DEFAULT_BUFFER) -> Tap:
        """Subscribe to several streams at once, merged in push order."""
        with self._lock:
            wanted = None if source_ids is None else set(source_ids)
            if wanted is not None:
                unknown = wanted - set(self._outlets)
                if unknown:
                    raise TransportError(f"unknown streams {sorted(unknown)!r}")
            buffer = _Buffer(capacity)
            self._taps.append((wanted, buffer))
            return Tap(buffer)

    def _fan_out(self, source_id: str, sample: Sample) -> None:
        with self._lock:
            buffers = list(self._subscribers.get(source_id, ()))
            taps = [b for wanted, b in self._taps if wanted is None or source_id in wanted]
        for buffer in buffers:
            buffer.put(sample)
        for buffer in taps:
            buffer.put((source_id, sample))

    def _close_stream(self, source_id: str) -> None:
        with self._lock:
            buffers = list(self._subscribers.get(source_id, ()))
            open_ids = {sid for sid, o in self._outlets.items() if not o.closed}
            taps_to_close = []
            for wanted, buffer in self._taps:
                watched = open_ids if wanted is None else (wanted & open_ids)
                if not watched:
                    taps_to_close.append(buffer)
        for buffer in buffers:
            buffer.close()
        for buffer in taps_to_close:
            buffer.close()
