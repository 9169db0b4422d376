"""Canonical text form of a StoryGraph.

print_story(parse(text)) reparses to a graph equal to the original
(modulo line numbers and source origin).
"""

from __future__ import annotations

from .expr import print_expr
from .model import (
    Assign,
    AutoRule,
    Choice,
    CondText,
    Knot,
    Literal,
    Operand,
    Page,
    StoryGraph,
    TextLine,
)


def _format_number(value: float) -> str:
    return str(int(value)) if value == int(value) else repr(value)


def _format_operand(op: Operand) -> str:
    return op.key if op.tag is None else f"{op.key}@{op.tag}"


def _format_auto_rule(rule: AutoRule) -> str:
    if rule.mode == "threshold":
        operand = _format_operand(rule.operands[0])
        return f"threshold: {operand} >= {_format_number(rule.threshold)}"
    operands = ", ".join(_format_operand(op) for op in rule.operands)
    return f"{rule.mode}: {operands}"


def _format_choice(choice: Choice) -> str:
    if choice.auto_rule is not None:
        return f"*auto {{{_format_auto_rule(choice.auto_rule)}}} -> {choice.target}"
    if choice.condition is not None:
        return f"* {{{print_expr(choice.condition)}}} [{choice.label}] -> {choice.target}"
    return f"* [{choice.label}] -> {choice.target}"


def _format_text_line(line: TextLine) -> str:
    parts = []
    for seg in line.segments:
        if isinstance(seg, Literal):
            parts.append(seg.text)
        elif isinstance(seg, CondText):
            body = f"{print_expr(seg.cond)}: {seg.then}"
            if seg.other:
                body += f" | {seg.other}"
            parts.append(f"{{{body}}}")
    return "".join(parts)


def _emit_knot(knot: Knot, out: list[str]) -> None:
    out.append(f"== {knot.name} ==")
    for page_index, page in enumerate(knot.pages):
        if page_index > 0:
            out.append("---")
        # outermost tags open first: spans are recorded in close order
        for span in reversed(knot.tag_spans):
            if span.start_page == page_index:
                out.append(f"##{span.tag}_START")
        for item in page.items:
            if isinstance(item, TextLine):
                out.append(_format_text_line(item))
            elif isinstance(item, Assign):
                out.append(f"~ {item.name} = {print_expr(item.expr)}")
        for span in knot.tag_spans:
            if span.end_page == page_index:
                out.append(f"##{span.tag}_STOP")
    for choice in knot.choices:
        out.append(_format_choice(choice))
    if knot.divert is not None:
        out.append(f"-> {knot.divert}")


def print_story(graph: StoryGraph) -> str:
    out: list[str] = []
    for decl in graph.variables:
        out.append(f"VAR {decl.name} = {_format_number(decl.initial)}")
    if graph.variables:
        out.append("")
    for index, knot in enumerate(graph.knots):
        if index > 0 or graph.variables:
            if out and out[-1] != "":
                out.append("")
        _emit_knot(knot, out)
    return "\n".join(out) + "\n"
