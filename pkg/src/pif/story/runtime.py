"""Story execution: session state and the advance step.

advance() is a pure function of (state, reader event); replaying an event
log against the same graph reproduces the identical engine-event sequence
and final variable store. All mutation happens by returning a new state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .expr import evaluate
from .model import (
    END,
    Assign,
    Choice,
    CondText,
    Knot,
    Literal,
    StoryGraph,
    TextLine,
    is_director_variable,
)


class IllegalEvent(ValueError):
    pass


# ---------------------------------------------------------------------------
# reader events

@dataclass(frozen=True)
class NextPage:
    pass


@dataclass(frozen=True)
class Choose:
    index: int


ReaderEvent = NextPage | Choose


# ---------------------------------------------------------------------------
# engine events

@dataclass(frozen=True)
class PageShown:
    knot: str
    page: int


@dataclass(frozen=True)
class TagOpened:
    tag: str


@dataclass(frozen=True)
class TagClosed:
    tag: str


@dataclass(frozen=True)
class ChoicePresented:
    labels: tuple[str, ...]


@dataclass(frozen=True)
class BranchTaken:
    source: str
    target: str


@dataclass(frozen=True)
class TieBroken:
    chosen: str
    candidates: tuple[str, ...]


@dataclass(frozen=True)
class StoryEnded:
    pass


EngineEvent = (
    PageShown | TagOpened | TagClosed | ChoicePresented | BranchTaken | TieBroken | StoryEnded
)


# ---------------------------------------------------------------------------
# session state

@dataclass(frozen=True)
class SessionState:
    graph: StoryGraph = field(compare=False)
    knot: str
    page: int
    variables: dict[str, float]
    ended: bool = False
    # manual choices displayable when the current page was entered, as
    # indices into the knot's choices tuple; fixed until the next page
    displayable: tuple[int, ...] = ()

    @property
    def current_knot(self) -> Knot:
        return self.graph.knot(self.knot)

    @property
    def at_last_page(self) -> bool:
        return self.page == len(self.current_knot.pages) - 1

    def choice_labels(self) -> tuple[str, ...]:
        knot = self.current_knot
        return tuple(knot.choices[i].label for i in self.displayable)

    def with_variables(self, updates: dict[str, float]) -> "SessionState":
        """Director write path; the only sanctioned mutation of phys_*."""
        merged = dict(self.variables)
        merged.update(updates)
        return replace(self, variables=merged)


def start(graph: StoryGraph) -> tuple[SessionState, list[EngineEvent]]:
    variables = {decl.name: decl.initial for decl in graph.variables}
    state = SessionState(
        graph=graph, knot=graph.entry_knot, page=-1, variables=variables
    )
    return _enter_page(state, graph.entry_knot, 0, [])


def advance(state: SessionState, event: ReaderEvent) -> tuple[SessionState, list[EngineEvent]]:
    if state.ended:
        raise IllegalEvent("story has ended")
    if isinstance(event, Choose):
        return _choose(state, event.index)
    if isinstance(event, NextPage):
        return _next_page(state)
    raise IllegalEvent(f"unknown reader event {event!r}")


def render_page(state: SessionState) -> str:
    """Current page text with inline conditionals resolved."""
    lines = []
    page = state.current_knot.pages[state.page]
    for item in page.items:
        if not isinstance(item, TextLine):
            continue
        parts = []
        for seg in item.segments:
            if isinstance(seg, Literal):
                parts.append(seg.text)
            elif isinstance(seg, CondText):
                parts.append(seg.then if evaluate(seg.cond, state.variables) else seg.other)
        lines.append("".join(parts))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# transitions

def _next_page(state: SessionState) -> tuple[SessionState, list[EngineEvent]]:
    knot = state.current_knot
    if not state.at_last_page:
        events = _close_tags_for_page(knot, state.page)
        return _enter_page(state, state.knot, state.page + 1, events)

    if knot.auto_choices:
        return _auto_branch(state, knot)
    if state.displayable:
        raise IllegalEvent("a choice is required")
    if knot.divert is not None:
        return _branch(state, knot.divert)
    if knot.manual_choices:
        raise IllegalEvent("no selectable choice")
    raise IllegalEvent(f"dead end in knot {knot.name!r}")


def _choose(state: SessionState, index: int) -> tuple[SessionState, list[EngineEvent]]:
    if not state.at_last_page or not state.displayable:
        raise IllegalEvent("no choices displayed")
    if not 0 <= index < len(state.displayable):
        raise IllegalEvent(
            f"choice {index} out of range 0..{len(state.displayable) - 1}"
        )
    choice = state.current_knot.choices[state.displayable[index]]
    return _branch(state, choice.target)


def _auto_branch(state: SessionState, knot: Knot) -> tuple[SessionState, list[EngineEvent]]:
    fired = [c for c in knot.auto_choices if _rule_fires(c, state.variables)]
    if not fired:
        if knot.divert is not None:
            return _branch(state, knot.divert)
        raise IllegalEvent(f"no automatic choice fired in knot {knot.name!r}")
    extra: list[EngineEvent] = []
    if len(fired) > 1:
        fired.sort(key=lambda c: c.target)
        extra.append(
            TieBroken(chosen=fired[0].target, candidates=tuple(c.target for c in fired))
        )
    return _branch(state, fired[0].target, extra)


def _rule_fires(choice: Choice, variables: dict[str, float]) -> bool:
    rule = choice.auto_rule
    assert rule is not None
    values = [_resolve(op.var_name, variables) for op in rule.operands]
    if rule.mode == "threshold":
        return values[0] >= rule.threshold
    if rule.mode == "argmax":
        return values[0] == max(values)
    return values[0] == min(values)


def _resolve(name: str, variables: dict[str, float]) -> float:
    if name in variables:
        return variables[name]
    if is_director_variable(name):
        return 0.0
    raise IllegalEvent(f"unbound variable {name!r} in auto rule")


def _branch(
    state: SessionState, target: str, pre_events: list[EngineEvent] | None = None
) -> tuple[SessionState, list[EngineEvent]]:
    knot = state.current_knot
    events = _close_tags_for_page(knot, state.page)
    events.extend(pre_events or [])
    events.append(BranchTaken(source=knot.name, target=target))
    if target == END:
        events.append(StoryEnded())
        return replace(state, ended=True, displayable=()), events
    return _enter_page(state, target, 0, events)


def _enter_page(
    state: SessionState, knot_name: str, page_index: int, events: list[EngineEvent]
) -> tuple[SessionState, list[EngineEvent]]:
    knot = state.graph.knot(knot_name)
    # outermost first; spans are recorded innermost-first (close order)
    for span in reversed(knot.tag_spans):
        if span.start_page == page_index:
            events.append(TagOpened(span.tag))

    variables = state.variables
    page = knot.pages[page_index]
    assigns = [it for it in page.items if isinstance(it, Assign)]
    if assigns:
        variables = dict(variables)
        for item in assigns:
            variables[item.name] = float(evaluate(item.expr, variables))

    displayable: tuple[int, ...] = ()
    if page_index == len(knot.pages) - 1:
        displayable = tuple(
            i
            for i, c in enumerate(knot.choices)
            if not c.is_auto
            and (c.condition is None or evaluate(c.condition, variables))
        )

    state = replace(
        state,
        knot=knot_name,
        page=page_index,
        variables=variables,
        displayable=displayable,
    )
    events.append(PageShown(knot=knot_name, page=page_index))
    if displayable:
        events.append(ChoicePresented(labels=state.choice_labels()))
    return state, events


def _close_tags_for_page(knot: Knot, page_index: int) -> list[EngineEvent]:
    return [
        TagClosed(span.tag) for span in knot.tag_spans if span.end_page == page_index
    ]
