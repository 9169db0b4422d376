"""Line-based parser for .pif story files.

The language is a small Ink subset: knots, diverts, choices (manual,
conditional, automatic), variable declarations and assignments, inline
conditional text, page breaks, and physiological context tags.
"""

from __future__ import annotations

import re

from .diagnostics import ERROR, Diagnostic, ParseErrors
from .expr import ExprError, parse_expr, referenced_names, type_of
from .model import (
    END,
    Assign,
    AutoRule,
    Choice,
    CondText,
    Expr,
    Knot,
    Literal,
    Operand,
    Page,
    PageItem,
    Segment,
    StoryGraph,
    TagSpan,
    TextLine,
    VariableDecl,
    is_director_variable,
)

RE_KNOT = re.compile(r"^\s*==+\s*([A-Za-z_]\w*)\s*=*\s*$")
RE_VAR = re.compile(r"^\s*VAR\s+([A-Za-z_]\w*)\s*=\s*([-+]?\d+(?:\.\d+)?)\s*$")
RE_CHOICE = re.compile(
    r"^\s*\*\s*(?:\{(?P<cond>[^}]*)\}\s*)?\[(?P<label>[^\]]*)\]\s*->\s*(?P<target>[A-Za-z_]\w*)\s*$"
)
RE_AUTO = re.compile(
    r"^\s*\*auto\s*\{\s*(?P<mode>argmax|argmin|threshold)\s*:(?P<body>[^}]*)\}\s*->\s*(?P<target>[A-Za-z_]\w*)\s*$"
)
RE_DIVERT = re.compile(r"^\s*->\s*([A-Za-z_]\w*)\s*$")
RE_PAGE_BREAK = re.compile(r"^\s*---+\s*$")
RE_TAG = re.compile(r"^\s*##([A-Z][A-Z0-9_]*)_(START|STOP)\s*$")
RE_ASSIGN = re.compile(r"^\s*~\s*([A-Za-z_]\w*)\s*=\s*(.+?)\s*$")
RE_COMMENT = re.compile(r"^\s*//")
RE_OPERAND = re.compile(
    r"^(?:phys\.)?([A-Za-z_]\w*)(?:@([A-Z][A-Z0-9_]*))?$"
)
RE_THRESHOLD = re.compile(r"^(?P<operand>.+?)\s*>=\s*(?P<value>[-+]?\d+(?:\.\d+)?)$")


class _KnotBuilder:
    def __init__(self, name: str, line: int):
        self.name = name
        self.line = line
        self.pages: list[Page] = []
        self.items: list[PageItem] = []  # page under construction
        self.choices: list[Choice] = []
        self.divert: str | None = None
        self.divert_line = 0
        self.spans: list[TagSpan] = []
        self.open_tags: list[tuple[str, int, int]] = []  # tag, start_page, line
        self.exit_started = False

    @property
    def current_page(self) -> int:
        return len(self.pages)


class _Parser:
    def __init__(self, text: str, origin: str):
        self.origin = origin
        self.lines = text.splitlines()
        self.errors: list[Diagnostic] = []
        self.variables: list[VariableDecl] = []
        self.knots: list[_KnotBuilder] = []
        self.current: _KnotBuilder | None = None

    def error(self, line: int, message: str, col: int = 1) -> None:
        self.errors.append(Diagnostic(self.origin, line, col, ERROR, message))

    # -- expression helpers -------------------------------------------------

    def parse_checked_expr(self, src: str, lineno: int, want: str) -> Expr | None:
        try:
            expr = parse_expr(src)
            got = type_of(expr)
        except ExprError as exc:
            self.error(lineno, str(exc), col=getattr(exc, "col", 0) + 1)
            return None
        if got != want:
            self.error(lineno, f"expression {src.strip()!r} must be {want}, got {got}")
            return None
        return expr

    def check_references(self, expr: Expr, lineno: int) -> None:
        declared = {v.name for v in self.variables}
        for name in sorted(referenced_names(expr)):
            if name not in declared and not is_director_variable(name):
                self.error(lineno, f"undeclared variable {name!r}")

    # -- line handlers -------------------------------------------------------

    def run(self) -> StoryGraph:
        for lineno, raw in enumerate(self.lines, start=1):
            self.handle_line(raw, lineno)
        self.finish_knot(len(self.lines))

        if not self.knots and not self.errors:
            self.error(1, "empty story")
        self.check_targets()
        if self.errors:
            raise ParseErrors(self.errors)

        knots = tuple(
            Knot(
                name=b.name,
                pages=tuple(b.pages),
                choices=tuple(b.choices),
                divert=b.divert,
                tag_spans=tuple(b.spans),
                line=b.line,
            )
            for b in self.knots
        )
        return StoryGraph(
            knots=knots,
            entry_knot=self.knots[0].name,
            variables=tuple(self.variables),
            origin=self.origin,
        )

    def handle_line(self, raw: str, lineno: int) -> None:
        if not raw.strip() or RE_COMMENT.match(raw):
            return

        m = RE_KNOT.match(raw)
        if m:
            self.finish_knot(lineno)
            name = m.group(1)
            if any(b.name == name for b in self.knots):
                self.error(lineno, f"duplicate knot {name!r}")
            self.current = _KnotBuilder(name, lineno)
            self.knots.append(self.current)
            return

        m = RE_VAR.match(raw)
        if m:
            if self.current is not None:
                self.error(lineno, "variable declarations must precede the first knot")
                return
            name = m.group(1)
            if is_director_variable(name):
                self.error(lineno, f"cannot declare director-owned variable {name!r}")
            elif any(v.name == name for v in self.variables):
                self.error(lineno, f"variable {name!r} already declared")
            else:
                self.variables.append(VariableDecl(name, float(m.group(2)), line=lineno))
            return

        if self.current is None:
            self.error(lineno, "content before the first knot")
            return
        knot = self.current

        m = RE_AUTO.match(raw)
        if m:
            rule = self.parse_auto_rule(m.group("mode"), m.group("body"), lineno)
            if rule is not None:
                knot.choices.append(
                    Choice(target=m.group("target"), auto_rule=rule, line=lineno)
                )
            knot.exit_started = True
            return

        m = RE_CHOICE.match(raw)
        if m:
            label = m.group("label").strip()
            if not label:
                self.error(lineno, "manual choice needs a label")
            condition = None
            if m.group("cond") is not None:
                condition = self.parse_checked_expr(m.group("cond"), lineno, "bool")
                if condition is not None:
                    self.check_references(condition, lineno)
            knot.choices.append(
                Choice(target=m.group("target"), label=label, condition=condition, line=lineno)
            )
            knot.exit_started = True
            return

        m = RE_DIVERT.match(raw)
        if m:
            if knot.divert is not None:
                self.error(lineno, "knot already has a divert")
            knot.divert = m.group(1)
            knot.divert_line = lineno
            knot.exit_started = True
            return

        # everything below is page content; reject it after the exit block
        if knot.exit_started:
            self.error(lineno, "content after choices or divert")
            return

        if RE_PAGE_BREAK.match(raw):
            self.finish_page(lineno)
            return

        m = RE_TAG.match(raw)
        if m:
            tag, which = m.group(1), m.group(2)
            if which == "START":
                if any(t == tag for t, _, _ in knot.open_tags):
                    self.error(lineno, f"context tag {tag!r} already open")
                else:
                    knot.open_tags.append((tag, knot.current_page, lineno))
            else:
                if not knot.open_tags:
                    self.error(lineno, f"context tag {tag!r} closed but never opened")
                elif knot.open_tags[-1][0] != tag:
                    self.error(
                        lineno,
                        f"context tag {tag!r} closed while {knot.open_tags[-1][0]!r} is open",
                    )
                else:
                    _, start_page, _ = knot.open_tags.pop()
                    end_page = knot.current_page if knot.items else knot.current_page - 1
                    if end_page < start_page:
                        self.error(lineno, f"context tag {tag!r} spans no pages")
                    else:
                        knot.spans.append(TagSpan(tag, start_page, end_page))
            return

        m = RE_ASSIGN.match(raw)
        if m:
            name = m.group(1)
            if is_director_variable(name):
                self.error(lineno, f"stories cannot assign director-owned {name!r}")
            elif name not in {v.name for v in self.variables}:
                self.error(lineno, f"undeclared variable {name!r}")
            expr = self.parse_checked_expr(m.group(2), lineno, "num")
            if expr is not None:
                self.check_references(expr, lineno)
                knot.items.append(Assign(name, expr, line=lineno))
            return

        segments = self.parse_text(raw.strip(), lineno)
        if segments:
            knot.items.append(TextLine(tuple(segments)))

    # -- structure helpers ---------------------------------------------------

    def finish_page(self, lineno: int) -> None:
        knot = self.current
        assert knot is not None
        if not any(isinstance(it, TextLine) for it in knot.items):
            self.error(lineno, "page has no display text")
            knot.items = []
            return
        knot.pages.append(Page(tuple(knot.items)))
        knot.items = []

    def finish_knot(self, lineno: int) -> None:
        knot = self.current
        if knot is None:
            return
        if knot.items:
            self.finish_page(lineno)
        for tag, _, tag_line in knot.open_tags:
            self.error(tag_line, f"context tag {tag!r} not closed before end of knot")
        if not knot.pages:
            self.error(knot.line, f"knot {knot.name!r} has no pages")
        self.current = None

    def check_targets(self) -> None:
        names = {b.name for b in self.knots}
        for b in self.knots:
            for choice in b.choices:
                if choice.target != END and choice.target not in names:
                    self.error(choice.line, f"unknown divert target {choice.target!r}")
            if b.divert is not None and b.divert != END and b.divert not in names:
                self.error(b.divert_line, f"unknown divert target {b.divert!r}")

    # -- auto rules ------------------------------------------------------------

    def parse_operand(self, src: str, lineno: int) -> Operand | None:
        m = RE_OPERAND.match(src.strip())
        if not m:
            self.error(lineno, f"malformed auto-rule operand {src.strip()!r}")
            return None
        operand = Operand(key=m.group(1), tag=m.group(2))
        if operand.tag is None and not is_director_variable(operand.key):
            if operand.key not in {v.name for v in self.variables}:
                self.error(lineno, f"undeclared variable {operand.key!r}")
        return operand

    def parse_auto_rule(self, mode: str, body: str, lineno: int) -> AutoRule | None:
        if mode == "threshold":
            m = RE_THRESHOLD.match(body.strip())
            if not m:
                self.error(lineno, "threshold rule must be 'operand >= number'")
                return None
            operand = self.parse_operand(m.group("operand"), lineno)
            if operand is None:
                return None
            return AutoRule(mode, (operand,), threshold=float(m.group("value")))
        operands = []
        for part in body.split(","):
            operand = self.parse_operand(part, lineno)
            if operand is None:
                return None
            operands.append(operand)
        if len(operands) < 2:
            self.error(lineno, f"{mode} rule needs at least 2 operands")
            return None
        return AutoRule(mode, tuple(operands))

    # -- inline conditional text ---------------------------------------------

    def parse_text(self, text: str, lineno: int) -> list[Segment]:
        segments: list[Segment] = []
        pos = 0
        while pos < len(text):
            open_brace = text.find("{", pos)
            if open_brace == -1:
                segments.append(Literal(text[pos:]))
                break
            if open_brace > pos:
                segments.append(Literal(text[pos:open_brace]))
            close_brace = text.find("}", open_brace)
            if close_brace == -1:
                self.error(lineno, "unclosed '{' in text", col=open_brace + 1)
                return []
            body = text[open_brace + 1 : close_brace]
            colon = body.find(":")
            if colon == -1:
                self.error(lineno, "inline conditional needs '{condition: text}'", col=open_brace + 1)
                return []
            cond = self.parse_checked_expr(body[:colon], lineno, "bool")
            if cond is None:
                return []
            self.check_references(cond, lineno)
            rest = body[colon + 1 :]
            bar = rest.find("|")
            if bar == -1:
                then, other = rest.strip(), ""
            else:
                then, other = rest[:bar].strip(), rest[bar + 1 :].strip()
            segments.append(CondText(cond, then, other))
            pos = close_brace + 1
        return segments


def parse(text: str, origin: str = "<inline>") -> StoryGraph:
    """Parse story text; raise ParseErrors carrying every collected error."""
    return _Parser(text, origin).run()


def parse_file(path: str) -> StoryGraph:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), origin=path)
