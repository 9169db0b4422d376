"""Expression parsing and evaluation for story conditions and assignments.

Expressions are arithmetic/comparison/boolean trees over numeric literals
and variable names. Conditions must type-check to boolean, assignment
right-hand sides to numeric. Director-owned ``phys_*`` variables read as
0.0 until the director writes them; every other name must be declared.
"""

from __future__ import annotations

import re

from .model import Binary, Expr, Num, Unary, Var, is_director_variable


class ExprError(ValueError):
    def __init__(self, message: str, col: int = 0):
        super().__init__(message)
        self.col = col


_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>\d+(?:\.\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op><=|>=|==|!=|&&|\|\||[-+*/<>!()])"
    r")"
)

_WORD_OPS = {"and": "&&", "or": "||", "not": "!"}

# binding powers; unary "-"/"!" bind tighter than any binary operator
_BINARY_PREC = {
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6,
}

_COMPARISONS = {"<", "<=", ">", ">=", "==", "!="}
_BOOL_OPS = {"&&", "||"}


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == m.start():
            rest = text[pos:].strip()
            if not rest:
                break
            raise ExprError(f"unexpected character {rest[0]!r}", pos)
        pos = m.end()
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start()))
        elif m.group("name") is not None:
            name = m.group("name")
            if name in _WORD_OPS:
                tokens.append(("op", _WORD_OPS[name], m.start()))
            else:
                tokens.append(("name", name, m.start()))
        else:
            tokens.append(("op", m.group("op"), m.start()))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str, int]], src: str):
        self.tokens = tokens
        self.src = src
        self.i = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise ExprError("unexpected end of expression", len(self.src))
        self.i += 1
        return tok

    def parse(self, min_prec: int = 0) -> Expr:
        lhs = self.parse_atom()
        while True:
            tok = self.peek()
            if tok is None or tok[0] != "op" or tok[1] not in _BINARY_PREC:
                return lhs
            prec = _BINARY_PREC[tok[1]]
            if prec < min_prec:
                return lhs
            self.next()
            rhs = self.parse(prec + 1)  # left-associative
            lhs = Binary(tok[1], lhs, rhs)

    def parse_atom(self) -> Expr:
        kind, value, col = self.next()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            return Var(value)
        if kind == "op" and value == "(":
            inner = self.parse()
            tok = self.peek()
            if tok is None or tok[1] != ")":
                raise ExprError("missing closing parenthesis", col)
            self.next()
            return inner
        if kind == "op" and value in ("-", "!"):
            return Unary(value, self.parse_atom())
        raise ExprError(f"unexpected {value!r}", col)


def parse_expr(text: str) -> Expr:
    tokens = tokenize(text)
    if not tokens:
        raise ExprError("empty expression")
    parser = _Parser(tokens, text)
    expr = parser.parse()
    leftover = parser.peek()
    if leftover is not None:
        raise ExprError(f"unexpected {leftover[1]!r}", leftover[2])
    return expr


# ---------------------------------------------------------------------------
# static checks

def type_of(expr: Expr) -> str:
    """Return "num" or "bool"; raise ExprError on a type mismatch."""
    if isinstance(expr, Num):
        return "num"
    if isinstance(expr, Var):
        return "num"
    if isinstance(expr, Unary):
        inner = type_of(expr.operand)
        want = "num" if expr.op == "-" else "bool"
        if inner != want:
            raise ExprError(f"operator {expr.op!r} needs a {want} operand")
        return want
    if expr.op in _COMPARISONS:
        if type_of(expr.lhs) != "num" or type_of(expr.rhs) != "num":
            raise ExprError(f"comparison {expr.op!r} needs numeric operands")
        return "bool"
    if expr.op in _BOOL_OPS:
        if type_of(expr.lhs) != "bool" or type_of(expr.rhs) != "bool":
            raise ExprError(f"operator {expr.op!r} needs boolean operands")
        return "bool"
    if type_of(expr.lhs) != "num" or type_of(expr.rhs) != "num":
        raise ExprError(f"operator {expr.op!r} needs numeric operands")
    return "num"


def referenced_names(expr: Expr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Unary):
        return referenced_names(expr.operand)
    if isinstance(expr, Binary):
        return referenced_names(expr.lhs) | referenced_names(expr.rhs)
    return set()


# ---------------------------------------------------------------------------
# evaluation

class EvalError(ValueError):
    pass


def evaluate(expr: Expr, variables: dict[str, float]) -> float | bool:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        if expr.name in variables:
            return variables[expr.name]
        if is_director_variable(expr.name):
            return 0.0  # director has not written it yet
        raise EvalError(f"unbound variable {expr.name!r}")
    if isinstance(expr, Unary):
        val = evaluate(expr.operand, variables)
        return -val if expr.op == "-" else not val
    lhs = evaluate(expr.lhs, variables)
    rhs = evaluate(expr.rhs, variables)
    op = expr.op
    if op == "+":
        return lhs + rhs
    if op == "-":
        return lhs - rhs
    if op == "*":
        return lhs * rhs
    if op == "/":
        if rhs == 0:
            raise EvalError("division by zero")
        return lhs / rhs
    if op == "<":
        return lhs < rhs
    if op == "<=":
        return lhs <= rhs
    if op == ">":
        return lhs > rhs
    if op == ">=":
        return lhs >= rhs
    if op == "==":
        return lhs == rhs
    if op == "!=":
        return lhs != rhs
    if op == "&&":
        return bool(lhs) and bool(rhs)
    if op == "||":
        return bool(lhs) or bool(rhs)
    raise EvalError(f"unknown operator {op!r}")


def print_expr(expr: Expr, parent_prec: int = 0) -> str:
    if isinstance(expr, Num):
        value = expr.value
        return str(int(value)) if value == int(value) else repr(value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        inner = print_expr(expr.operand, parent_prec=99)
        return f"{expr.op}{inner}"
    prec = _BINARY_PREC[expr.op]
    lhs = print_expr(expr.lhs, prec)
    rhs = print_expr(expr.rhs, prec + 1)
    body = f"{lhs} {expr.op} {rhs}"
    if prec < parent_prec:
        return f"({body})"
    return body
