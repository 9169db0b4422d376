"""Analysis windows cut from recorded sessions.

A recording plays readings back to back; ``SEGMENT:<label>`` markers in
any marker stream name the stretches. This module reassembles the signal
streams into fixed-rate blocks and cuts them at those markers, so a
recorded session goes through the same extractors as anything else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..transport import RecordingReader
from .extract import FeatureRow
from .registry import extract_features
from .windows import STREAM_CHANNELS, PhysioWindow, SeriesBlock

SEGMENT_PREFIX = "SEGMENT:"


@dataclass(frozen=True)
class RecordedSignals:
    blocks: dict[str, SeriesBlock]  # keyed by stream name
    markers: list[tuple[float, str]]  # (timestamp, label), in time order


def _as_block(t: list[float], rows: list, nominal_rate: float) -> SeriesBlock:
    # headers that declare no rate fall back to the observed spacing
    fs = nominal_rate
    if fs <= 0.0:
        fs = (len(t) - 1) / (t[-1] - t[0]) if len(t) > 1 and t[-1] > t[0] else 1.0
    return SeriesBlock(fs, np.asarray(rows), t0=t[0])


class _Accumulator:
    """Signal samples binned by stream name as recording lines arrive.

    Recordings produced here never carry two signal streams under one
    name, so no collision handling.
    """

    def __init__(self, name: str):
        self.reader = RecordingReader(name)
        self.times: dict[str, list[float]] = {}
        self.rows: dict[str, list[tuple[float, ...]]] = {}
        self.rates: dict[str, float] = {}

    def feed(self, raw_line: str):
        """Returns the (timestamp, label) of a marker sample, else None."""
        event = self.reader.feed(raw_line)
        if event is None or event[0] == "recording":
            return None
        kind, payload = event
        if kind == "stream":
            if payload.kind != "marker":
                self.rates.setdefault(payload.name, payload.nominal_rate)
            return None
        sid, sample = payload
        if sample.is_marker:
            return (sample.timestamp, sample.label)
        stream = self.reader.infos[sid].name
        self.times.setdefault(stream, []).append(sample.timestamp)
        self.rows.setdefault(stream, []).append(sample.values)
        return None

    def blocks(self) -> dict[str, SeriesBlock]:
        return {
            stream: _as_block(t, self.rows[stream], self.rates.get(stream, 0.0))
            for stream, t in self.times.items()
        }

    def data_end(self) -> float:
        """Where the shortest stream runs out."""
        return min(
            block.t0 + len(block) / block.fs for block in self.blocks().values()
        )


def read_signals(lines, name: str = "<recording>") -> RecordedSignals:
    """Collect every signal stream and marker from recording lines.

    ``lines`` is any iterable of .pifrec lines (an open file does).
    """
    acc = _Accumulator(name)
    markers = [mark for raw in lines if (mark := acc.feed(raw)) is not None]
    markers.sort(key=lambda m: m[0])
    return RecordedSignals(blocks=acc.blocks(), markers=markers)


def load_signals(path) -> RecordedSignals:
    with open(path, encoding="utf-8") as fh:
        return read_signals(fh, name=str(path))


@dataclass(frozen=True)
class SegmentWindow:
    label: str
    t_start: float
    t_end: float
    window: PhysioWindow


def slice_window(
    blocks: dict[str, SeriesBlock], t_start: float, t_end: float
) -> PhysioWindow:
    """The physiology between two instants, as one analysis window."""
    sliced = {}
    for stream, block in blocks.items():
        if stream not in STREAM_CHANNELS:
            continue  # truth/targets streams are annotations, not physiology
        a = max(int(round((t_start - block.t0) * block.fs)), 0)
        b = min(int(round((t_end - block.t0) * block.fs)), len(block))
        sliced[stream] = SeriesBlock(block.fs, block.data[a:b], t0=t_start)
    return PhysioWindow(duration=t_end - t_start, **sliced)


def segment_windows(signals: RecordedSignals) -> list[SegmentWindow]:
    """Cut the signal blocks at SEGMENT markers.

    Each marker opens a window that runs to the next one; the last runs
    to the end of the shortest stream. No markers, no windows.
    """
    marks = [
        (t, label[len(SEGMENT_PREFIX):])
        for t, label in signals.markers
        if label.startswith(SEGMENT_PREFIX)
    ]
    if not marks or not signals.blocks:
        return []
    data_end = min(
        block.t0 + len(block) / block.fs for block in signals.blocks.values()
    )
    edges = [t for t, _ in marks] + [data_end]
    return [
        SegmentWindow(label, t0, t1, slice_window(signals.blocks, t0, t1))
        for (t0, label), t1 in zip(marks, edges[1:])
        if t1 > t0
    ]


def feature_rows(signals: RecordedSignals, subject: str) -> list[FeatureRow]:
    """One labeled feature row per recorded segment."""
    return [
        FeatureRow(
            features=extract_features(piece.window),
            subject=subject,
            label=piece.label,
            t_start=piece.t_start,
            t_end=piece.t_end,
        )
        for piece in segment_windows(signals)
    ]


class SegmentStream:
    """Incremental segment_windows() for line-by-line input.

    feed() returns the window a new SEGMENT marker just closed, if any;
    finish() closes the last one where the shortest stream runs out. A
    consumer on the end of a pipe gets each window the moment its
    boundary arrives instead of waiting for the file to end.
    """

    def __init__(self, name: str = "<recording>"):
        self._acc = _Accumulator(name)
        self._open: tuple[float, str] | None = None  # (t_start, label)

    def feed(self, raw_line: str) -> SegmentWindow | None:
        mark = self._acc.feed(raw_line)
        if mark is None or not mark[1].startswith(SEGMENT_PREFIX):
            return None
        t, label = mark
        closed = self._close(t)
        self._open = (t, label[len(SEGMENT_PREFIX):])
        return closed

    def finish(self) -> SegmentWindow | None:
        if self._open is None or not self._acc.times:
            return None
        return self._close(self._acc.data_end())

    def _close(self, t_end: float) -> SegmentWindow | None:
        if self._open is None or t_end <= self._open[0]:
            return None
        t_start, label = self._open
        self._open = None
        window = slice_window(self._acc.blocks(), t_start, t_end)
        return SegmentWindow(label, t_start, t_end, window)
