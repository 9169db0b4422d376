"""The session core: one story run wired to one director.

The core is deliberately clock-free. Every method that depends on time
takes an explicit timestamp, so a scripted run and a live run execute the
same code path and a recorded session can be replayed bit-for-bit. The
service layer owns wall clocks, sockets, and threads; by the time a call
reaches the core it is already serialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..director import (
    BIOFEEDBACK,
    Director,
    StateUpdate,
    marker_labels,
    validate_policy,
)
from ..story import runtime
from ..story.model import StoryGraph
from ..story.runtime import BranchTaken, Choose, IllegalEvent, NextPage

MarkerSink = Callable[[float, str], None]


@dataclass(frozen=True)
class TurnResult:
    """Outcome of one reader action. Rejected turns leave the page as-is."""

    accepted: bool
    reason: str | None = None
    page_turned: bool = False
    ended: bool = False


@dataclass(frozen=True)
class ScriptOutcome:
    branches: tuple[str, ...]
    variables: dict[str, float]
    markers: tuple[tuple[float, str], ...]
    rejected: tuple[tuple[float, str], ...]
    ended: bool


class SessionCore:
    def __init__(
        self,
        graph: StoryGraph,
        *,
        policy: str = BIOFEEDBACK,
        allow_covert: bool = False,
        window: int | None = None,
        debounce: float = 2.0,
        reset_tags: tuple[str, ...] = (),
        start_time: float = 0.0,
        marker_sink: MarkerSink | None = None,
    ) -> None:
        validate_policy(policy, allow_covert)
        if debounce < 0:
            raise ValueError("debounce must be nonnegative")
        self.policy = policy
        self.debounce = debounce
        self.director = Director(window=window, reset_on_reopen=set(reset_tags))
        self.markers: list[tuple[float, str]] = []
        self.branches: list[str] = []
        self._sink = marker_sink
        # the opening page arms the lock: page 0 cannot be read in under
        # the debounce interval any more than page 3 can
        self._lock_until = start_time + debounce
        self.state, events = runtime.start(graph)
        self._apply_events(events, start_time)

    # ------------------------------------------------------------------
    # reader actions

    def advance(self, now: float) -> TurnResult:
        """Turn to the next page. Debounced against the last page turn."""
        if now < self._lock_until:
            return TurnResult(
                accepted=False,
                reason=f"advance debounced; locked for another {self._lock_until - now:.3f} s",
            )
        return self._turn(NextPage(), now)

    def choose(self, now: float, index: int) -> TurnResult:
        """Take a displayed choice.

        Choices are not debounced: picking a branch is a deliberate act,
        and the buttons only exist while the page waits on one. A choice
        still arms the lock so the page it reveals cannot be skipped by
        an accidental follow-up advance.
        """
        return self._turn(Choose(index), now)

    def _turn(self, event, now: float) -> TurnResult:
        try:
            self.state, events = runtime.advance(self.state, event)
        except IllegalEvent as exc:
            return TurnResult(accepted=False, reason=str(exc))
        self._lock_until = now + self.debounce
        self._apply_events(events, now)
        return TurnResult(accepted=True, page_turned=True, ended=self.state.ended)

    # ------------------------------------------------------------------
    # physiology

    def feed(self, update: StateUpdate) -> dict[str, float]:
        """Route one estimator output through the director into the story."""
        written = self.director.on_state(update)
        if written:
            self.state = self.state.with_variables(written)
        return written

    def lock_remaining(self, now: float) -> float:
        return max(0.0, self._lock_until - now)

    # ------------------------------------------------------------------
    # views

    def page_message(self) -> dict:
        return {
            "type": "page",
            "knot": self.state.knot,
            "page_index": self.state.page,
            "text": runtime.render_page(self.state) if not self.state.ended else "",
            "choices": list(self.state.choice_labels()) if not self.state.ended else [],
            "displayable_state": self.director.displayable(self.policy),
            "ended": self.state.ended,
        }

    def state_message(self) -> dict:
        return {"type": "state", "values": self.director.displayable(self.policy)}

    @property
    def ended(self) -> bool:
        return self.state.ended

    # ------------------------------------------------------------------

    def _apply_events(self, events, now: float) -> None:
        written: dict[str, float] = {}
        for event in events:
            # tag closes write their means here; the branch that caused the
            # close was already decided on the pre-close values, so the new
            # means become visible from the next page turn onward
            written.update(self.director.on_marker(event, now))
            for label in marker_labels(event):
                self.markers.append((now, label))
                if self._sink is not None:
                    self._sink(now, label)
            if isinstance(event, BranchTaken):
                self.branches.append(event.target)
        if written:
            self.state = self.state.with_variables(written)


# ---------------------------------------------------------------------------
# scripted runs

Scripted = tuple  # (t, "advance") | (t, "choose", index) | (t, "state", StateUpdate)


def run_script(
    graph: StoryGraph, script: list[Scripted], **core_kwargs
) -> ScriptOutcome:
    """Drive a session from a timestamped event list and summarize the run.

    Items are sorted by timestamp; on ties, reader actions land before
    state updates (a page turn at t sees the samples strictly before it),
    and order within each kind follows the list. Running the same script
    twice must produce the same outcome; the reproducibility tests lean
    on this entry point.
    """
    core = SessionCore(graph, **core_kwargs)
    rejected: list[tuple[float, str]] = []

    def sort_key(pair):
        position, item = pair
        kind_rank = 1 if item[1] == "state" else 0
        return (item[0], kind_rank, position)

    for _, item in sorted(enumerate(script), key=sort_key):
        t, kind = item[0], item[1]
        if kind == "advance":
            result = core.advance(t)
        elif kind == "choose":
            result = core.choose(t, item[2])
        elif kind == "state":
            core.feed(item[2])
            continue
        else:
            raise ValueError(f"unknown script item {kind!r}")
        if not result.accepted:
            rejected.append((t, result.reason or ""))

    return ScriptOutcome(
        branches=tuple(core.branches),
        variables=dict(core.state.variables),
        markers=tuple(core.markers),
        rejected=tuple(rejected),
        ended=core.ended,
    )
