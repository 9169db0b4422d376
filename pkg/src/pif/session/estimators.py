"""Estimators: raw samples in, construct estimates out.

Three strategies cover the three input sources. A sliding mean maps a
single channel straight onto a variable, which keeps the sample-to-story
path short enough to measure honestly. A model estimator runs the full
feature extraction and classifier over a trailing window at a slow
cadence, the way a live study would. The simulator target holder is not
an estimator at all: the reader's sliders are already construct levels.

All of them speak StateUpdate and are driven by explicit timestamps, so
they behave identically under replay.
"""

from __future__ import annotations

import threading
from collections import deque

import numpy as np

from ..classify.pipeline import PipelineModel, predict
from ..director import StateUpdate
from ..features.registry import FEATURE_NAMES, extract_features
from ..features.windows import STREAM_CHANNELS, PhysioWindow, SeriesBlock


class SlidingEstimator:
    """phys_<key> = running mean of one channel over a short horizon.

    Emits on every sample. The sum is maintained incrementally, so cost
    per sample does not grow with the horizon.
    """

    def __init__(self, taps: dict[str, tuple[str, int]], horizon: float = 1.0) -> None:
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        self.horizon = horizon
        self._taps = dict(taps)  # key -> (stream name, channel index)
        self._buffers: dict[str, deque] = {key: deque() for key in taps}
        self._sums: dict[str, float] = {key: 0.0 for key in taps}

    def consume(self, stream: str, timestamp: float, values) -> StateUpdate | None:
        out: dict[str, float] = {}
        for key, (name, channel) in self._taps.items():
            if name != stream:
                continue
            buf = self._buffers[key]
            value = float(values[channel])
            buf.append((timestamp, value))
            self._sums[key] += value
            while buf and buf[0][0] < timestamp - self.horizon:
                self._sums[key] -= buf.popleft()[1]
            out[key] = self._sums[key] / len(buf)
        if not out:
            return None
        return StateUpdate(timestamp=timestamp, values=out, source="sliding")

    def flush(self, timestamp: float) -> StateUpdate | None:
        return None


# Joint ranking against a single prior row carries sign information only
# (two rows straddle the subject mean by construction), so it misleads on
# back-to-back windows of the same state. Until this many context rows
# exist, lone windows are placed on the training quantiles instead.
MIN_CONTEXT = 2


class ModelEstimator:
    """Trailing-window feature extraction plus fitted classifiers.

    Samples accumulate in per-stream rings holding ``window_seconds`` of
    data. Every ``1 / cadence`` seconds of stream time the estimator cuts
    a window, extracts features, and reports each construct's posterior
    for its positive class. Early in a session the window is short and
    the features noisy; that is the honest cost of a cold start. Each
    evaluation joins the rows seen so far, so the within-subject ranking
    sharpens as evidence accumulates.
    """

    MIN_WINDOW = 10.0  # seconds of data before the first estimate
    CONTEXT_CAP = 64  # feature rows kept for within-subject ranking

    def __init__(
        self,
        models: dict[str, PipelineModel],
        window_seconds: float = 70.0,
        cadence: float = 1.0,
    ) -> None:
        if not models:
            raise ValueError("model estimator needs at least one fitted model")
        if cadence <= 0:
            raise ValueError("cadence must be positive")
        self.models = dict(models)
        self.window_seconds = window_seconds
        self.cadence = cadence
        self._streams: dict[str, dict] = {}
        self._rows: list[np.ndarray] = []
        self._next_eval: float | None = None

    def consume(self, stream: str, timestamp: float, values) -> StateUpdate | None:
        if stream not in STREAM_CHANNELS:
            return None
        ring = self._streams.setdefault(stream, {"t": deque(), "rows": deque()})
        ring["t"].append(timestamp)
        ring["rows"].append(tuple(float(v) for v in values))
        horizon = timestamp - self.window_seconds
        while ring["t"] and ring["t"][0] < horizon:
            ring["t"].popleft()
            ring["rows"].popleft()
        if self._next_eval is None:
            self._next_eval = timestamp + self.MIN_WINDOW
        if timestamp < self._next_eval:
            return None
        self._next_eval = timestamp + 1.0 / self.cadence
        return self._evaluate(timestamp)

    def flush(self, timestamp: float) -> StateUpdate | None:
        """Force one final estimate, replay's way of closing the books."""
        if not self._streams:
            return None
        return self._evaluate(timestamp)

    def _evaluate(self, timestamp: float) -> StateUpdate | None:
        blocks: dict[str, SeriesBlock] = {}
        t_lo = timestamp
        for name, ring in self._streams.items():
            ts = ring["t"]
            if len(ts) < 8:
                continue
            # nominal rate from the buffered span; robust to jitter
            fs = (len(ts) - 1) / max(ts[-1] - ts[0], 1e-9)
            blocks[name] = SeriesBlock(fs=fs, data=np.array(ring["rows"]), t0=ts[0])
            t_lo = min(t_lo, ts[0])
        if not blocks:
            return None
        window = PhysioWindow(duration=max(timestamp - t_lo, 0.0), **blocks)
        vector = extract_features(window).as_array()

        self._rows.append(vector)
        if len(self._rows) > self.CONTEXT_CAP:
            self._rows.pop(0)
        context = np.array(self._rows[:-1]) if len(self._rows) > 1 else None

        out: dict[str, float] = {}
        for construct, model in self.models.items():
            row = _reorder(vector, model.names)
            ctx = _reorder_rows(context, model.names) if context is not None else None
            if ctx is not None and len(ctx) >= MIN_CONTEXT:
                p = predict(model, row, subject_context=ctx, normalize="subject")
            else:
                p = predict(model, row, normalize="train-quantiles")
            # posteriors track classes[0]; report "how aroused", not "which label"
            out[construct] = float(p.posterior)
        return StateUpdate(timestamp=timestamp, values=out, source="model")


def _reorder(vector: np.ndarray, names) -> np.ndarray:
    index = {n: i for i, n in enumerate(FEATURE_NAMES)}
    return np.array([vector[index[n]] for n in names], dtype=float)


def _reorder_rows(rows: np.ndarray, names) -> np.ndarray:
    index = {n: i for i, n in enumerate(FEATURE_NAMES)}
    cols = [index[n] for n in names]
    return rows[:, cols]


class SimTargets:
    """Slider-set construct levels, published at a fixed cadence.

    The reader's sliders are the signal source, so there is nothing to
    estimate; this holds the latest targets and turns them into the same
    StateUpdate stream the estimators produce. A scenario can supply a
    moving base (set_base, called by the session loop), but a touched
    slider overrides its key for the rest of the run: manual beats
    scripted. Thread-safe because slider messages arrive on a socket
    thread while the session loop ticks.
    """

    def __init__(self, cadence: float = 1.0, initial: dict[str, float] | None = None) -> None:
        if cadence <= 0:
            raise ValueError("cadence must be positive")
        self.cadence = cadence
        self._lock = threading.Lock()
        self._base: dict[str, float] = dict(initial or {})
        self._overrides: dict[str, float] = {}
        self._dirty = bool(initial)
        self._next_tick: float | None = None

    def set_target(self, key: str, value: float) -> None:
        with self._lock:
            self._overrides[key] = float(value)
            self._dirty = True

    def set_targets(self, values: dict[str, float]) -> None:
        with self._lock:
            for key, value in values.items():
                self._overrides[key] = float(value)
            self._dirty = bool(values) or self._dirty

    def set_base(self, values: dict[str, float]) -> None:
        with self._lock:
            for key, value in values.items():
                if self._base.get(key) != float(value):
                    self._base[key] = float(value)
                    self._dirty = True

    def tick(self, now: float) -> StateUpdate | None:
        """An update at most every 1/cadence seconds, sooner only when a
        target changed since the last one."""
        with self._lock:
            merged = {**self._base, **self._overrides}
            if not merged:
                return None
            due = self._next_tick is None or now >= self._next_tick
            if not due and not self._dirty:
                return None
            self._next_tick = now + 1.0 / self.cadence
            self._dirty = False
            return StateUpdate(timestamp=now, values=merged, source="sim")
