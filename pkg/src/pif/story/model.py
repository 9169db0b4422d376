"""Story graph data model.

A story is a set of named knots. Each knot holds one or more pages of
display text, optional context-tag spans over those pages, and exactly one
way out: manual choices, automatic choices, a divert, or END.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# ---------------------------------------------------------------------------
# expressions

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "!"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / < <= > >= == != && ||
    lhs: "Expr"
    rhs: "Expr"


Expr = Num | Var | Unary | Binary


# ---------------------------------------------------------------------------
# page content

@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class CondText:
    """Inline conditional segment: {cond: then | else}."""

    cond: Expr
    then: str
    other: str


Segment = Literal | CondText


@dataclass(frozen=True)
class TextLine:
    segments: tuple[Segment, ...]


@dataclass(frozen=True)
class Assign:
    """Variable assignment, executed when its page is shown."""

    name: str
    expr: Expr
    line: int = field(compare=False, default=0)


PageItem = TextLine | Assign


@dataclass(frozen=True)
class Page:
    items: tuple[PageItem, ...]

    def text_lines(self) -> list[TextLine]:
        return [it for it in self.items if isinstance(it, TextLine)]


# ---------------------------------------------------------------------------
# choices and rules

@dataclass(frozen=True)
class Operand:
    """Auto-rule operand: a variable, optionally scoped to a context tag.

    ``valence@CAT`` reads the director-owned variable ``phys_cat_valence``;
    a bare name reads that variable directly.
    """

    key: str
    tag: str | None = None

    @property
    def var_name(self) -> str:
        if self.tag is None:
            return self.key
        return f"phys_{self.tag.lower()}_{self.key}"


@dataclass(frozen=True)
class AutoRule:
    mode: str  # argmax | argmin | threshold
    operands: tuple[Operand, ...]
    threshold: float | None = None


@dataclass(frozen=True)
class Choice:
    target: str
    label: str = ""  # empty for automatic choices
    condition: Expr | None = None
    auto_rule: AutoRule | None = None
    line: int = field(compare=False, default=0)

    @property
    def is_auto(self) -> bool:
        return self.auto_rule is not None


@dataclass(frozen=True)
class TagSpan:
    """Context tag covering pages start_page..end_page inclusive."""

    tag: str
    start_page: int
    end_page: int


END = "END"


@dataclass(frozen=True)
class Knot:
    name: str
    pages: tuple[Page, ...]
    choices: tuple[Choice, ...] = ()
    divert: str | None = None  # knot name or END
    tag_spans: tuple[TagSpan, ...] = ()
    line: int = field(compare=False, default=0)

    @property
    def manual_choices(self) -> tuple[Choice, ...]:
        return tuple(c for c in self.choices if not c.is_auto)

    @property
    def auto_choices(self) -> tuple[Choice, ...]:
        return tuple(c for c in self.choices if c.is_auto)


@dataclass(frozen=True)
class VariableDecl:
    name: str
    initial: float
    line: int = field(compare=False, default=0)


@dataclass(frozen=True)
class StoryGraph:
    knots: tuple[Knot, ...]
    entry_knot: str
    variables: tuple[VariableDecl, ...] = ()
    origin: str = field(compare=False, default="<inline>")

    def knot(self, name: str) -> Knot:
        for k in self.knots:
            if k.name == name:
                return k
        raise KeyError(name)

    @property
    def knot_names(self) -> list[str]:
        return [k.name for k in self.knots]

    @property
    def tags(self) -> list[str]:
        """Context tags in first-appearance order."""
        seen: list[str] = []
        for k in self.knots:
            for span in k.tag_spans:
                if span.tag not in seen:
                    seen.append(span.tag)
        return seen


PHYS_PREFIX = "phys_"


def is_director_variable(name: str) -> bool:
    return name.startswith(PHYS_PREFIX)
