"""The running session: clocks, threads, and plumbing around the core.

Layout: one loop thread owns every session mutation. Socket handlers and
input pumps never touch the core directly; reader actions go through an
inbox queue and physiological samples ride the hub into a tap the loop
drains. That single-writer rule is what makes the debounce, the director
merge order, and the recording all agree about what happened when.

Input sources differ only in who feeds the hub:

* replay: a pump thread re-emits a recording (paced or flat out)
* live: pump threads mirror a broker's signal streams into the hub
* simulator: nobody; construct levels come from slider targets, with an
  optional scenario supplying the moving baseline

The session's own markers are a stream on the same hub, so a recording
of a session holds its physiology and its story events side by side.
Replayed or mirrored marker streams are recorded but never routed into
the director: tags belong to this session's engine, not to whatever the
input happened to contain.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from collections import deque

from ..classify.model_io import load_model
from ..director import MARKER_STREAM, StateUpdate
from ..features.windows import STREAM_CHANNELS
from ..sim.scenario import CONSTRUCTS, Scenario
from ..story.parser import parse_file
from ..transport.net import NetInlet, registry
from ..transport.recording import Recorder, replay
from ..transport.streams import Hub, StreamInfo, TransportError
from .config import LiveSource, ReplaySource, SessionConfig, SimSource
from .core import SessionCore
from .estimators import ModelEstimator, SimTargets, SlidingEstimator

# raw-signal feedback for live sessions without fitted models: smoothed
# channel means, named after the streams so nobody mistakes them for
# construct estimates
DEFAULT_TAPS = {"eda": ("eda", 0), "breath": ("breath", 0)}

LOOP_WAIT = 0.01  # seconds the loop blocks on the tap when idle
STATE_PUSH_INTERVAL = 0.2  # throttle for state messages to the UI

_log = logging.getLogger("pif.session")


class SessionError(RuntimeError):
    pass


class _Stopped(Exception):
    """Raised inside an input pump to abandon a paced replay mid-sleep."""


class _Box:
    __slots__ = ("event", "result")

    def __init__(self):
        self.event = threading.Event()
        self.result = None


class Session:
    """A session wired up and ready to run. start() spins the threads."""

    def __init__(self, config: SessionConfig, clock=time.monotonic):
        self.config = config.validated()
        self.clock = clock
        self.hub = Hub()
        self._stop = threading.Event()
        self._inbox: queue.Queue = queue.Queue()
        self._threads: list[threading.Thread] = []
        self._listeners: list = []
        self._listener_lock = threading.Lock()
        self._recorder: Recorder | None = None
        self._mirrors: list[NetInlet] = []
        self.faults: list[str] = []
        self.summary = None
        self.latencies: deque = deque(maxlen=4096)  # sample arrival -> visibility
        self._state_dirty = False
        self._last_state_push = 0.0
        self._started = False

        graph = parse_file(self.config.story_path)
        self._epoch = clock()
        self._marker_outlet = self.hub.open_outlet(
            StreamInfo(name=MARKER_STREAM, kind="marker", source_id="session-markers"),
            clock=clock,
        )
        if self.config.record_path:
            # armed before the core pushes its opening markers; follow mode
            # admits whatever streams the input source registers later
            self._recorder = Recorder(self.hub, self.config.record_path, follow=True)
        self.core = SessionCore(
            graph,
            policy=self.config.policy,
            allow_covert=self.config.allow_covert,
            window=self.config.window,
            debounce=self.config.debounce,
            reset_tags=self.config.reset_tags,
            start_time=self._epoch,
            marker_sink=lambda t, label: self._marker_outlet.push_marker(label, t),
        )

        self.targets: SimTargets | None = None
        self._targets_outlet = None
        self._schedule: Scenario | None = None
        self.estimator = None
        source = self.config.source
        if isinstance(source, SimSource):
            if source.scenario_path:
                self._schedule = Scenario.load(source.scenario_path)
                initial = self._schedule.levels_at(0.0)
            else:
                initial = {c: 0.5 for c in CONSTRUCTS}
            self.targets = SimTargets(cadence=source.cadence, initial=initial)
            # targets ride the hub like any signal, so a recording of a
            # simulator session replays with the exact same construct levels
            self._targets_outlet = self.hub.open_outlet(
                StreamInfo(
                    name="targets",
                    kind="signal",
                    channel_count=len(CONSTRUCTS),
                    channel_labels=CONSTRUCTS,
                    source_id="session-targets",
                ),
                clock=clock,
            )
        elif self.config.model_paths:
            models = {c: load_model(p) for c, p in sorted(self.config.model_paths.items())}
            self.estimator = ModelEstimator(models)
        else:
            self.estimator = SlidingEstimator(DEFAULT_TAPS)

        # the tap must exist before any input lands so nothing is missed
        self._tap = self.hub.open_tap()
        self._names: dict[str, str] = {"session-markers": MARKER_STREAM}

    # ------------------------------------------------------------------
    # lifecycle

    def start(self) -> "Session":
        if self._started:
            raise SessionError("session already started")
        self._started = True
        source = self.config.source
        if isinstance(source, ReplaySource):
            self._spawn(self._pump_replay, "pif-replay")
        elif isinstance(source, LiveSource):
            self._connect_live(source)
        self._spawn(self._loop, "pif-session")
        return self

    def stop(self):
        """Wind the session down; returns the recording summary if any."""
        if self._stop.is_set():
            return self.summary
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=10.0)
        for inlet in self._mirrors:
            inlet.close()
        self._marker_outlet.close()
        if self._targets_outlet is not None:
            self._targets_outlet.close()
        if self._recorder is not None:
            self._recorder.poll(timeout=0.2)
            self.summary = self._recorder.close()
        return self.summary

    def _spawn(self, fn, name: str) -> None:
        thread = threading.Thread(target=fn, name=name, daemon=True)
        self._threads.append(thread)
        thread.start()

    # ------------------------------------------------------------------
    # reader API (thread-safe; blocks until the loop has handled the action)

    def advance(self) -> dict:
        return self._ask("advance", None)

    def choose(self, index: int) -> dict:
        return self._ask("choose", int(index))

    def sim(self, values: dict) -> dict:
        if self.targets is None:
            return {"ok": False, "error": "sim input is only available on simulator sessions"}
        clean = {}
        for key, value in values.items():
            if key not in CONSTRUCTS:
                return {"ok": False, "error": f"sim targets must be one of {CONSTRUCTS}"}
            try:
                clean[str(key)] = float(value)
            except (TypeError, ValueError):
                return {"ok": False, "error": f"sim value for {key!r} is not a number"}
        return self._ask("sim", clean)

    def snapshot(self) -> dict:
        """The current page message; what a (re)connecting client gets."""
        return self._ask("snapshot", None)

    def _ask(self, kind: str, payload) -> dict:
        if self._stop.is_set():
            return {"ok": False, "error": "session is shutting down"}
        box = _Box()
        self._inbox.put((kind, payload, box))
        if not box.event.wait(timeout=10.0):
            return {"ok": False, "error": "session loop did not answer"}
        return box.result

    def add_listener(self, fn) -> None:
        """fn(message dict) on every page turn and throttled state change.

        Called from the loop thread; listeners must hand work off quickly.
        """
        with self._listener_lock:
            self._listeners.append(fn)

    def remove_listener(self, fn) -> None:
        with self._listener_lock:
            if fn in self._listeners:
                self._listeners.remove(fn)

    # ------------------------------------------------------------------
    # the loop

    def _loop(self) -> None:
        while not self._stop.is_set():
            progressed = self._drain_inbox()
            progressed += self._drain_tap(timeout=0.0 if progressed else LOOP_WAIT)
            if self.targets is not None:
                now = self.clock()
                if self._schedule is not None:
                    self.targets.set_base(self._schedule.levels_at(now - self._epoch))
                update = self.targets.tick(now)
                if update is not None:
                    self._targets_outlet.push_values(
                        [update.values.get(c, 0.5) for c in CONSTRUCTS], update.timestamp
                    )
            if self._recorder is not None:
                self._recorder.poll(0.0)
            self._maybe_push_state()
        # one final sweep so a stop right after an action loses nothing
        self._drain_inbox()
        self._drain_tap(timeout=0.0)

    def _drain_inbox(self) -> int:
        handled = 0
        while True:
            try:
                kind, payload, box = self._inbox.get_nowait()
            except queue.Empty:
                return handled
            box.result = self._handle_action(kind, payload)
            box.event.set()
            handled += 1

    def _handle_action(self, kind: str, payload) -> dict:
        if kind == "snapshot":
            return {"ok": True, "page": self._page_view()}
        if kind == "sim":
            assert self.targets is not None
            self.targets.set_targets(payload)
            return {"ok": True}
        now = self.clock()
        if kind == "advance":
            result = self.core.advance(now)
        elif kind == "choose":
            result = self.core.choose(now, payload)
        else:
            return {"ok": False, "error": f"unknown action {kind!r}"}
        if result.accepted:
            page = self._page_view()
            self._notify(page)
            return {"ok": True, "page": page}
        return {"ok": False, "rejected": result.reason}

    def _page_view(self) -> dict:
        # the core's page plus session facts a client needs to mirror
        # server policy: whether sliders apply, and how long to lock the
        # advance control after each accepted turn
        page = self.core.page_message()
        page["sim_enabled"] = self.targets is not None
        page["debounce_s"] = self.config.debounce
        return page

    def _drain_tap(self, timeout: float) -> int:
        n = 0
        for sid, sample in self._tap.pull(max_n=4096, timeout=timeout):
            n += 1
            if sample.is_marker:
                continue  # pass-through: recorded, never re-driven
            name = self._name_of(sid)
            if name == "targets":
                # slider levels, live or replayed; no estimation involved
                self._feed(
                    StateUpdate(
                        timestamp=sample.timestamp,
                        values=dict(zip(CONSTRUCTS, sample.values)),
                        source="sim",
                    )
                )
                continue
            if name is None or self.estimator is None:
                continue
            update = self.estimator.consume(name, sample.timestamp, sample.values)
            if update is not None:
                self._feed(update)
                self.latencies.append(self.clock() - sample.timestamp)
        return n

    def _name_of(self, sid: str) -> str | None:
        name = self._names.get(sid)
        if name is None:
            # a stream this session did not open itself; resolve once
            for info in self.hub.streams():
                self._names.setdefault(info.source_id, info.name)
            name = self._names.get(sid)
        return name

    def _feed(self, update: StateUpdate) -> None:
        if self.core.feed(update):
            self._state_dirty = True

    def _maybe_push_state(self) -> None:
        if not self._state_dirty:
            return
        now = self.clock()
        if now - self._last_state_push < STATE_PUSH_INTERVAL:
            return
        self._last_state_push = now
        self._state_dirty = False
        message = self.core.state_message()
        if message["values"]:
            self._notify(message)

    def _notify(self, message: dict) -> None:
        with self._listener_lock:
            listeners = list(self._listeners)
        for fn in listeners:
            fn(message)

    # ------------------------------------------------------------------
    # input pumps

    def _pump_replay(self) -> None:
        source = self.config.source
        assert isinstance(source, ReplaySource)

        def interruptible_sleep(seconds: float) -> None:
            if self._stop.wait(seconds):
                raise _Stopped

        try:
            replay(
                source.path,
                self.hub,
                speed=source.speed,
                rebase=True,
                clock=self.clock,
                sleep=interruptible_sleep,
                id_prefix="replayed-",
            )
        except _Stopped:
            pass
        except TransportError as exc:
            # the recovered prefix has already been emitted; the fault is
            # kept, not swallowed, so callers can tell a clean end of
            # input from a broken one
            self._fault(f"replay input failed: {exc}")

    def _connect_live(self, source: LiveSource) -> None:
        try:
            infos = registry(source.host, source.port)
        except OSError as exc:
            raise SessionError(
                f"cannot reach stream broker at {source.host}:{source.port}: {exc}"
            ) from exc
        signal_infos = [i for i in infos if i.kind == "signal" and i.name in STREAM_CHANNELS]
        if not signal_infos:
            raise SessionError(
                f"broker at {source.host}:{source.port} offers no known signal streams"
            )
        for info in signal_infos:
            inlet = NetInlet(source.host, source.port, source_id=info.source_id)
            self._mirrors.append(inlet)
            outlet = self.hub.open_outlet(
                StreamInfo(
                    name=info.name,
                    kind=info.kind,
                    channel_count=info.channel_count,
                    nominal_rate=info.nominal_rate,
                    channel_labels=info.channel_labels,
                    source_id=f"mirror-{info.source_id}",
                ),
                clock=self.clock,
            )
            self._names[outlet.info.source_id] = info.name
            self._spawn(lambda i=inlet, o=outlet: self._pump_mirror(i, o), f"pif-{info.name}")

    def _pump_mirror(self, inlet: NetInlet, outlet) -> None:
        try:
            while not self._stop.is_set():
                for sample in inlet.pull(max_n=1024, timeout=0.02):
                    outlet.push(sample)
                if inlet.closed:
                    break
        except TransportError as exc:
            self._fault(f"live stream {outlet.info.name!r} dropped: {exc}")
        finally:
            outlet.close()

    def _fault(self, message: str) -> None:
        self.faults.append(message)
        _log.error("%s", message)


def serve(config: SessionConfig, clock=time.monotonic) -> Session:
    """Validate, wire up, and start a session."""
    return Session(config, clock=clock).start()
