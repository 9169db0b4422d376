"""Session recording and replay (.pifrec files).

A recording is JSON Lines: one recording header, one header per stream,
then samples in arrival order. Sample lines carry the source id, the
timestamp as produced, and either a value array or a marker label. Floats
survive the JSON round trip exactly (shortest-repr serialization), so a
replayed-and-re-recorded file reproduces payloads bit for bit and
inter-sample deltas to well under a microsecond.

A truncated or garbled line raises CorruptRecording with the byte offset
of the bad line; everything before it has already been replayed.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field

from .streams import MARKER, Hub, Sample, StreamInfo, TransportError

FORMAT_VERSION = 1

REALTIME = "realtime"
MAX_SPEED = "max"


class CorruptRecording(TransportError):
    def __init__(self, path: str, byte_offset: int, reason: str, samples_recovered: int = 0):
        super().__init__(f"{path}: corrupt at byte {byte_offset}: {reason}")
        self.path = path
        self.byte_offset = byte_offset
        self.reason = reason
        self.samples_recovered = samples_recovered


@dataclass
class RecordingSummary:
    path: str
    n_samples: int = 0
    n_dropped: int = 0
    per_stream: dict[str, int] = field(default_factory=dict)
    t_first: float | None = None
    t_last: float | None = None

    @property
    def duration(self) -> float:
        if self.t_first is None or self.t_last is None:
            return 0.0
        return self.t_last - self.t_first


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class Recorder:
    """Writes every sample from a set of streams to a .pifrec file.

    By default the stream set is snapshotted at construction; headers go
    out immediately so the file is self-describing even if recording
    stops early. With ``follow=True`` the recorder also admits streams
    that appear later, writing their headers mid-file just before their
    first sample (replay applies headers wherever they occur, so such a
    file stays valid). Call poll() from a service loop, or drain() to
    block until all recorded streams have closed.
    """

    def __init__(
        self, hub: Hub, path: str, source_ids: list[str] | None = None, follow: bool = False
    ):
        if follow and source_ids is not None:
            raise TransportError("follow mode records everything; no source list allowed")
        infos = hub.streams()
        if source_ids is not None:
            by_id = {i.source_id: i for i in infos}
            missing = [sid for sid in source_ids if sid not in by_id]
            if missing:
                raise TransportError(f"cannot record unknown streams {missing!r}")
            infos = [by_id[sid] for sid in source_ids]
        if not infos and not follow:
            raise TransportError("nothing to record: no streams on hub")
        self._hub = hub
        self._follow = follow
        self._infos = {i.source_id: i for i in infos}
        self._tap = hub.open_tap(None if follow else [i.source_id for i in infos])
        self.path = str(path)
        self._file = open(self.path, "w", encoding="utf-8")
        self.summary = RecordingSummary(path=self.path, per_stream={i.source_id: 0 for i in infos})
        # no wall-clock stamp: a recording must be a pure function of the
        # samples so re-recording identical streams gives identical bytes
        self._file.write(_dump({"type": "recording", "version": FORMAT_VERSION}) + "\n")
        for info in self._infos.values():
            self._write_stream_header(info)
        self._closed = False

    def _write_stream_header(self, info: StreamInfo) -> None:
        self._file.write(
            _dump(
                {
                    "type": "stream",
                    "info": {
                        "name": info.name,
                        "kind": info.kind,
                        "channel_count": info.channel_count,
                        "nominal_rate": info.nominal_rate,
                        "channel_labels": list(info.channel_labels),
                        "source_id": info.source_id,
                    },
                }
            )
            + "\n"
        )

    def _admit(self, sid: str) -> bool:
        """Register a stream first seen mid-recording (follow mode only)."""
        if not self._follow:
            return False
        for info in self._hub.streams():
            if info.source_id == sid:
                self._infos[sid] = info
                self.summary.per_stream[sid] = 0
                self._write_stream_header(info)
                return True
        return False

    def poll(self, timeout: float = 0.0) -> int:
        """Write whatever has arrived; return the number of samples written."""
        wrote = 0
        while True:
            batch = self._tap.pull(max_n=4096, timeout=timeout if wrote == 0 else 0.0)
            if not batch:
                return wrote
            for sid, sample in batch:
                if sid not in self._infos and not self._admit(sid):
                    continue
                self._write_sample(sid, sample)
                wrote += 1

    def _write_sample(self, sid: str, sample: Sample) -> None:
        record = {"type": "sample", "sid": sid, "t": sample.timestamp}
        if sample.label is not None:
            record["m"] = sample.label
        else:
            record["v"] = list(sample.values)
        self._file.write(_dump(record) + "\n")
        s = self.summary
        s.n_samples += 1
        s.per_stream[sid] += 1
        if s.t_first is None:
            s.t_first = sample.timestamp
        s.t_last = sample.timestamp

    def drain(self, poll_timeout: float = 0.5) -> RecordingSummary:
        """Block until every recorded stream closes, then finalize."""
        while not self._tap.closed:
            self.poll(timeout=poll_timeout)
        self.poll(timeout=0.0)
        return self.close()

    def close(self) -> RecordingSummary:
        if not self._closed:
            self.poll(timeout=0.0)
            self.summary.n_dropped = self._tap.stats.dropped
            self._file.close()
            self._closed = True
        return self.summary


def record(hub: Hub, path: str, source_ids: list[str] | None = None) -> Recorder:
    return Recorder(hub, path, source_ids)


def _parse_info(raw: dict) -> StreamInfo:
    return StreamInfo(
        name=raw["name"],
        kind=raw["kind"],
        channel_count=raw["channel_count"],
        nominal_rate=raw["nominal_rate"],
        channel_labels=tuple(raw["channel_labels"]),
        source_id=raw["source_id"],
    )


def replay(
    path: str,
    hub: Hub,
    speed: str = MAX_SPEED,
    rebase: bool = True,
    clock=time.monotonic,
    sleep=time.sleep,
    on_ready=None,
    id_prefix: str = "",
) -> RecordingSummary:
    """Re-emit a recording through fresh outlets on ``hub``.

    ``speed`` is ``"max"`` (no pacing) or ``"realtime"`` (sleep out the
    original inter-sample gaps). With ``rebase`` the first sample lands at
    the current clock reading and all deltas are preserved; without it the
    original timestamps go out untouched.

    ``on_ready`` fires once, after every stream header has been applied
    and before the first sample goes out, so a consumer (say, a second
    Recorder) can subscribe without missing anything.

    ``id_prefix`` is prepended to every re-emitted source id; a session
    replaying a recording of another session needs that so the old
    session's streams cannot collide with its own.

    On a corrupt line, everything before it has already been emitted and
    the outlets are closed before CorruptRecording is raised, so consumers
    keep the recovered prefix.
    """
    if speed not in (REALTIME, MAX_SPEED):
        raise TransportError(f"unknown replay speed {speed!r}")
    outlets: dict[str, object] = {}
    summary = RecordingSummary(path=str(path))
    offset = 0.0
    have_offset = not rebase
    prev_t = None
    n_emitted = 0
    ready_fired = on_ready is None

    def fire_ready():
        nonlocal ready_fired
        if not ready_fired:
            ready_fired = True
            on_ready()

    def bail(byte_offset: int, reason: str):
        raise CorruptRecording(str(path), byte_offset, reason, samples_recovered=n_emitted)

    try:
        with open(path, "r", encoding="utf-8") as fh:
            line_start = 0
            saw_header = False
            for raw_line in fh:
                this_start = line_start
                line_start += len(raw_line.encode("utf-8"))
                line = raw_line.strip()
                if not line:
                    continue
                try:
                    record_obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    bail(this_start, f"bad JSON ({exc.msg})")
                kind = record_obj.get("type")
                if not saw_header:
                    if kind != "recording":
                        bail(this_start, "missing recording header")
                    if record_obj.get("version") != FORMAT_VERSION:
                        bail(this_start, f"unsupported version {record_obj.get('version')!r}")
                    saw_header = True
                    continue
                if kind == "stream":
                    try:
                        info = _parse_info(record_obj["info"])
                    except (KeyError, TypeError) as exc:
                        bail(this_start, f"bad stream header ({exc})")
                    if id_prefix:
                        info = dataclasses.replace(info, source_id=id_prefix + info.source_id)
                    # keyed by the recorded id: sample lines refer to that
                    outlets[record_obj["info"]["source_id"]] = hub.open_outlet(info)
                elif kind == "sample":
                    fire_ready()
                    try:
                        sid = record_obj["sid"]
                        t = float(record_obj["t"])
                        outlet = outlets[sid]
                    except (KeyError, TypeError, ValueError):
                        bail(this_start, "bad sample record")
                    if not have_offset:
                        offset = clock() - t
                        have_offset = True
                    if speed == REALTIME and prev_t is not None and t > prev_t:
                        sleep(t - prev_t)
                    prev_t = t
                    out_t = t + offset if rebase else t
                    if "m" in record_obj:
                        sample = Sample(out_t, label=record_obj["m"])
                    elif "v" in record_obj:
                        sample = Sample(out_t, values=tuple(float(v) for v in record_obj["v"]))
                    else:
                        bail(this_start, "sample has neither values nor marker")
                    outlet.push(sample)
                    n_emitted += 1
                    summary.n_samples += 1
                    summary.per_stream[sid] = summary.per_stream.get(sid, 0) + 1
                    if summary.t_first is None:
                        summary.t_first = out_t
                    summary.t_last = out_t
                else:
                    bail(this_start, f"unknown record type {kind!r}")
            if not saw_header:
                bail(0, "empty file: missing recording header")
            fire_ready()
    finally:
        for outlet in outlets.values():
            outlet.close()
    return summary


class RecordingReader:
    """Incremental .pifrec parser: feed lines, receive typed records.

    replay() drives a hub; this reader serves consumers that want the
    records themselves, such as a classifier fed line by line over a
    pipe, without standing up transport plumbing. Validation matches
    replay(): the same defects raise the same CorruptRecording.

    feed() returns ``("recording", dict)`` for the file header,
    ``("stream", StreamInfo)`` for stream headers, ``("sample",
    (source_id, Sample))`` for data, or None for a blank line.
    """

    def __init__(self, name: str = "<recording>"):
        self.name = str(name)
        self.infos: dict[str, StreamInfo] = {}
        self._saw_header = False
        self._offset = 0
        self._n_samples = 0

    @property
    def started(self) -> bool:
        return self._saw_header

    def feed(self, raw_line: str):
        this_start = self._offset
        self._offset += len(raw_line.encode("utf-8"))
        line = raw_line.strip()
        if not line:
            return None

        def bail(reason: str):
            raise CorruptRecording(
                self.name, this_start, reason, samples_recovered=self._n_samples
            )

        try:
            record_obj = json.loads(line)
        except json.JSONDecodeError as exc:
            bail(f"bad JSON ({exc.msg})")
        kind = record_obj.get("type")
        if not self._saw_header:
            if kind != "recording":
                bail("missing recording header")
            if record_obj.get("version") != FORMAT_VERSION:
                bail(f"unsupported version {record_obj.get('version')!r}")
            self._saw_header = True
            return ("recording", record_obj)
        if kind == "stream":
            try:
                info = _parse_info(record_obj["info"])
            except (KeyError, TypeError) as exc:
                bail(f"bad stream header ({exc})")
            self.infos[info.source_id] = info
            return ("stream", info)
        if kind == "sample":
            try:
                sid = record_obj["sid"]
                t = float(record_obj["t"])
            except (KeyError, TypeError, ValueError):
                bail("bad sample record")
            if sid not in self.infos:
                bail(f"sample for undeclared stream {sid!r}")
            if "m" in record_obj:
                sample = Sample(t, label=str(record_obj["m"]))
            elif "v" in record_obj:
                try:
                    sample = Sample(t, values=tuple(float(v) for v in record_obj["v"]))
                except (TypeError, ValueError):
                    bail("bad value array")
            else:
                bail("sample has neither values nor marker")
            self._n_samples += 1
            return ("sample", (sid, sample))
        bail(f"unknown record type {kind!r}")
