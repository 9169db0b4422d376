"""The director: turns physiological state into story variables.

It consumes two event kinds: engine markers (story structure: pages,
branches, tag boundaries) and state updates (named scalar estimates from
the processing chain). Tag boundaries open and close named accumulators;
while a tag is open, every update feeds it. Closing a tag publishes the
per-key means as `phys_<tag>_<key>`, and every update also maintains the
global `phys_<key>` variables, either as latest-value or as a sliding
mean.

The director is the only writer of `phys_*` variables. Stories read
them; nothing else touches them.

Determinism matters more than throughput here: inputs are merged by
timestamp, and a marker at time t gates exactly the updates with
timestamps inside its span. Ties order markers before states, so a
window boundary never races its own edge samples.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .story.model import PHYS_PREFIX
from .story.runtime import (
    BranchTaken,
    PageShown,
    StoryEnded,
    TagClosed,
    TagOpened,
)

MARKER_STREAM = "pif-markers"

BIOFEEDBACK = "biofeedback"
NEUROADAPTIVE = "neuroadaptive"
EMPOWERING = "empowering"
COVERT = "covert"
POLICY_MODES = (BIOFEEDBACK, NEUROADAPTIVE, EMPOWERING)


class DirectorError(RuntimeError):
    pass


class PolicyError(ValueError):
    pass


def validate_policy(mode: str, allow_covert: bool = False) -> str:
    """Reject unknown modes, and the covert one unless explicitly allowed.

    Covert output (displaying a state that is not the reader's own) is
    refused by default; enabling it is a deliberate configuration choice,
    not a flag to set casually.
    """
    if mode in POLICY_MODES:
        return mode
    if mode == COVERT:
        if allow_covert:
            return mode
        raise PolicyError(
            "covert mode is refused by default; set allow_covert if you have "
            "an explicit reason and the reader's informed consent"
        )
    raise PolicyError(f"unknown policy mode {mode!r}; pick one of {POLICY_MODES}")


@dataclass(frozen=True)
class StateUpdate:
    timestamp: float
    values: dict[str, float]
    source: str = ""


@dataclass
class ContextAccumulator:
    tag: str
    open: bool = False
    sums: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    mins: dict[str, float] = field(default_factory=dict)
    maxs: dict[str, float] = field(default_factory=dict)
    opened_at: float | None = None
    closed_at: float | None = None

    def feed(self, values: dict[str, float]) -> None:
        for key, value in values.items():
            self.sums[key] = self.sums.get(key, 0.0) + value
            self.counts[key] = self.counts.get(key, 0) + 1
            self.mins[key] = min(self.mins.get(key, value), value)
            self.maxs[key] = max(self.maxs.get(key, value), value)

    def mean(self, key: str) -> float:
        count = self.counts.get(key, 0)
        if count == 0:
            raise DirectorError(f"tag {self.tag!r} accumulated no {key!r} samples")
        return self.sums[key] / count

    @property
    def total_count(self) -> int:
        return sum(self.counts.values())


def marker_labels(event) -> list[str]:
    """Transport marker labels for one engine event."""
    if isinstance(event, PageShown):
        labels = [f"KNOT:{event.knot}"] if event.page == 0 else []
        labels.append(f"PAGE:{event.page}")
        return labels
    if isinstance(event, TagOpened):
        return [f"TAG_START:{event.tag}"]
    if isinstance(event, TagClosed):
        return [f"TAG_STOP:{event.tag}"]
    if isinstance(event, BranchTaken):
        return [f"BRANCH:{event.target}"]
    if isinstance(event, StoryEnded):
        return ["STORY_END"]
    return []


class Director:
    """Accumulator state plus the `phys_*` variable store for one session.

    ``window`` selects the global-variable policy: None publishes the
    latest value, an integer n publishes the mean of the last n updates
    per key.
    """

    def __init__(self, window: int | None = None, reset_on_reopen: set[str] | None = None):
        if window is not None and window < 1:
            raise DirectorError("window must be a positive sample count")
        self.window = window
        self.reset_on_reopen = set(reset_on_reopen or ())
        self.variables: dict[str, float] = {}
        self.accumulators: dict[str, ContextAccumulator] = {}
        self.diagnostics: list[str] = []
        self._recent: dict[str, deque] = {}
        self._global_names: set[str] = set()

    # marker side

    def on_tag_opened(self, tag: str, timestamp: float) -> None:
        acc = self.accumulators.setdefault(tag, ContextAccumulator(tag))
        if acc.open:
            self.diagnostics.append(f"tag {tag!r} opened while already open; ignored")
            return
        if acc.closed_at is not None and tag in self.reset_on_reopen:
            # revisits start fresh for tags configured that way; the default
            # carries the running totals across visits
            acc = ContextAccumulator(tag)
            self.accumulators[tag] = acc
        acc.open = True
        if acc.opened_at is None:
            acc.opened_at = timestamp
        acc.closed_at = None

    def on_tag_closed(self, tag: str, timestamp: float) -> dict[str, float]:
        acc = self.accumulators.get(tag)
        if acc is None or not acc.open:
            self.diagnostics.append(f"tag {tag!r} closed without being open; ignored")
            return {}
        acc.open = False
        acc.closed_at = timestamp
        written: dict[str, float] = {}
        if acc.total_count == 0:
            self.diagnostics.append(f"tag {tag!r} closed with no samples; nothing written")
            return written
        for key, count in acc.counts.items():
            if count == 0:
                continue
            name = f"{PHYS_PREFIX}{tag.lower()}_{key}"
            value = acc.sums[key] / count
            self.variables[name] = value
            written[name] = value
        return written

    def on_marker(self, event, timestamp: float) -> dict[str, float]:
        """Apply one engine event; returns any variables it wrote."""
        if isinstance(event, TagOpened):
            self.on_tag_opened(event.tag, timestamp)
            return {}
        if isinstance(event, TagClosed):
            return self.on_tag_closed(event.tag, timestamp)
        return {}

    def on_marker_label(self, label: str, timestamp: float) -> dict[str, float]:
        """Apply one transport marker by its label (the replay path)."""
        if label.startswith("TAG_START:"):
            self.on_tag_opened(label[len("TAG_START:") :], timestamp)
        elif label.startswith("TAG_STOP:"):
            return self.on_tag_closed(label[len("TAG_STOP:") :], timestamp)
        return {}

    # state side

    def on_state(self, update: StateUpdate) -> dict[str, float]:
        finite = {}
        for key, value in update.values.items():
            if not math.isfinite(value):
                self.diagnostics.append(
                    f"non-finite {key!r} update at t={update.timestamp}; rejected"
                )
                continue
            finite[key] = float(value)
        if not finite:
            return {}
        written: dict[str, float] = {}
        for key, value in finite.items():
            name = f"{PHYS_PREFIX}{key}"
            if self.window is None:
                self.variables[name] = value
            else:
                recent = self._recent.setdefault(key, deque(maxlen=self.window))
                recent.append(value)
                self.variables[name] = sum(recent) / len(recent)
            self._global_names.add(name)
            written[name] = self.variables[name]
        for acc in self.accumulators.values():
            if acc.open:
                acc.feed(finite)
        return written

    # queries

    def displayable(self, mode: str) -> dict[str, float]:
        """The subset of variables the reader UI may show under ``mode``.

        biofeedback and empowering expose the global estimates (the
        reader sees their own state); neuroadaptive adapts silently and
        shows nothing. Tag-scoped means stay internal in every mode:
        they drive branches, not dashboards.
        """
        if mode == NEUROADAPTIVE:
            return {}
        return {name: self.variables[name] for name in sorted(self._global_names)}

    def compare(self, tag_a: str, tag_b: str, key: str) -> float:
        """Difference of closed-accumulator means: positive favors tag_a."""
        means = []
        for tag in (tag_a, tag_b):
            acc = self.accumulators.get(tag)
            if acc is None:
                raise DirectorError(f"tag {tag!r} was never recorded")
            if acc.open:
                raise DirectorError(f"tag {tag!r} is still open")
            means.append(acc.mean(key))
        return means[0] - means[1]

    def consume(self, markers, states) -> None:
        """Replay merged streams: ``markers`` is (timestamp, label-or-event)
        pairs, ``states`` a sequence of StateUpdates. Items are applied in
        timestamp order; on ties markers go first (a boundary never races
        its own edge samples), and equal-timestamp items of one kind keep
        their log order."""
        tagged = [(t, 0, i, m) for i, (t, m) in enumerate(markers)]
        tagged += [(u.timestamp, 1, i, u) for i, u in enumerate(states)]
        for timestamp, kind, _, item in sorted(tagged, key=lambda r: (r[0], r[1], r[2])):
            if kind == 1:
                self.on_state(item)
            elif isinstance(item, str):
                self.on_marker_label(item, timestamp)
            else:
                self.on_marker(item, timestamp)
