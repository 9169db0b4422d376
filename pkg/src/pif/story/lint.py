"""Static story checks beyond what the parser enforces.

lint() never fails; it returns diagnostics. An empty result guarantees
every knot is reachable, every knot can terminate, and every context tag
feeds at least one rule or condition.
"""

from __future__ import annotations

from .diagnostics import ERROR, INFO, WARNING, Diagnostic
from .expr import referenced_names
from .model import END, Expr, Knot, StoryGraph, CondText, TextLine, Assign


def lint(graph: StoryGraph) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    _check_reachability(graph, out)
    _check_termination(graph, out)
    _check_exits(graph, out)
    _check_tag_consumption(graph, out)
    return out


def _diag(graph: StoryGraph, line: int, severity: str, message: str) -> Diagnostic:
    return Diagnostic(graph.origin, line, 1, severity, message)


def _targets(knot: Knot) -> list[str]:
    out = [c.target for c in knot.choices]
    if knot.divert is not None:
        out.append(knot.divert)
    return [t for t in out if t != END]


def _check_reachability(graph: StoryGraph, out: list[Diagnostic]) -> None:
    reached = {graph.entry_knot}
    frontier = [graph.entry_knot]
    while frontier:
        knot = graph.knot(frontier.pop())
        for target in _targets(knot):
            if target not in reached:
                reached.add(target)
                frontier.append(target)
    for knot in graph.knots:
        if knot.name not in reached:
            out.append(_diag(graph, knot.line, WARNING, f"unreachable knot {knot.name!r}"))


def _check_termination(graph: StoryGraph, out: list[Diagnostic]) -> None:
    """Every knot must have some path to END.

    Dead-end knots count as terminal here so that one missing exit is
    reported once (by _check_exits) instead of cascading upstream.
    """
    can_end = {
        k.name for k in graph.knots if _exits_to_end(k) or not _targets(k)
    }
    changed = True
    while changed:
        changed = False
        for knot in graph.knots:
            if knot.name in can_end:
                continue
            if any(t in can_end for t in _targets(knot)):
                can_end.add(knot.name)
                changed = True
    for knot in graph.knots:
        if knot.name not in can_end:
            out.append(
                _diag(graph, knot.line, ERROR, f"no terminating path from knot {knot.name!r}")
            )


def _exits_to_end(knot: Knot) -> bool:
    return knot.divert == END or any(c.target == END for c in knot.choices)


def _check_exits(graph: StoryGraph, out: list[Diagnostic]) -> None:
    for knot in graph.knots:
        manual = knot.manual_choices
        auto = knot.auto_choices
        if not manual and not auto and knot.divert is None:
            out.append(_diag(graph, knot.line, ERROR, f"dead end: knot {knot.name!r} has no exit"))
            continue
        if manual and auto:
            out.append(
                _diag(
                    graph,
                    knot.line,
                    WARNING,
                    f"knot {knot.name!r} mixes manual and automatic choices; automatic wins",
                )
            )
        if manual and knot.divert is not None and all(c.condition is None for c in manual):
            out.append(
                _diag(
                    graph,
                    knot.line,
                    WARNING,
                    f"divert in knot {knot.name!r} is unreachable behind unconditional choices",
                )
            )
        if manual and all(c.condition is not None for c in manual) and knot.divert is None and not auto:
            out.append(
                _diag(
                    graph,
                    knot.line,
                    WARNING,
                    f"knot {knot.name!r} may dead-end: every choice is conditional and there is no divert",
                )
            )
        if auto and knot.divert is None and all(c.auto_rule.mode == "threshold" for c in auto):
            out.append(
                _diag(
                    graph,
                    knot.line,
                    WARNING,
                    f"knot {knot.name!r} may dead-end: threshold rules with no divert fallback",
                )
            )


def _iter_exprs(graph: StoryGraph):
    for knot in graph.knots:
        for page in knot.pages:
            for item in page.items:
                if isinstance(item, TextLine):
                    for seg in item.segments:
                        if isinstance(seg, CondText):
                            yield seg.cond
                elif isinstance(item, Assign):
                    yield item.expr
        for choice in knot.choices:
            if choice.condition is not None:
                yield choice.condition


def _check_tag_consumption(graph: StoryGraph, out: list[Diagnostic]) -> None:
    consumed: set[str] = set()
    for knot in graph.knots:
        for choice in knot.auto_choices:
            for op in choice.auto_rule.operands:
                if op.tag is not None:
                    consumed.add(op.tag)
    referenced: set[str] = set()
    for expr in _iter_exprs(graph):
        referenced |= referenced_names(expr)
    for tag in graph.tags:
        prefix = f"phys_{tag.lower()}_"
        if tag in consumed or any(name.startswith(prefix) for name in referenced):
            continue
        line = next(
            (k.line for k in graph.knots if any(s.tag == tag for s in k.tag_spans)), 1
        )
        out.append(
            _diag(graph, line, INFO, f"context tag {tag!r} is recorded but never consumed")
        )
