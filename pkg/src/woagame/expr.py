"""A small arithmetic-expression language for payoff functions.

Grammar (``^`` binds tighter than unary minus and associates to the right)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("-" | "+") unary | power
    power := atom ("^" unary)?
    atom  := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Names are the variable ``x``, the constants ``pi`` and ``e``, and the
functions listed in :data:`FUNCTIONS`.  Expressions compile to vectorized
numpy closures; nothing is ever passed to ``eval``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable

import numpy as np

from .errors import ExpressionError

FUNCTIONS: dict[str, tuple[Callable, int | None]] = {
    "exp": (np.exp, 1),
    "log": (np.log, 1),
    "sqrt": (np.sqrt, 1),
    "abs": (np.abs, 1),
    "sin": (np.sin, 1),
    "cos": (np.cos, 1),
    "min": (lambda *a: reduce(np.minimum, a), None),
    "max": (lambda *a: reduce(np.maximum, a), None),
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(.))")


def _tokenize(src: str) -> list[tuple[str, str]]:
    src = src.replace("−", "-").replace("**", "^")
    out, pos = [], 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:  # only trailing whitespace is left
            break
        pos = m.end()
        num, name, op = m.groups()
        if num is not None:
            out.append(("num", num))
        elif name is not None:
            out.append(("name", name))
        elif op is not None and not op.isspace():
            if op not in "+-*/^(),":
                raise ExpressionError("unexpected character", op)
            out.append(("op", op))
    out.append(("end", ""))
    return out


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, op: str):
        kind, val = self.take()
        if (kind, val) != ("op", op):
            raise ExpressionError(f"expected {op!r}", val or "<end>")

    def parse(self):
        node = self.expr()
        kind, val = self.peek()
        if kind != "end":
            raise ExpressionError("unexpected trailing input", val)
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = (lambda a, b: lambda x: a(x) + b(x))(node, rhs) if op == "+" else \
                (lambda a, b: lambda x: a(x) - b(x))(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            node = (lambda a, b: lambda x: a(x) * b(x))(node, rhs) if op == "*" else \
                (lambda a, b: lambda x: a(x) / b(x))(node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return lambda x: -inner(x)
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            exp_ = self.unary()
            return lambda x: np.power(base(x), exp_(x))
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            c = float(val)
            return lambda x: np.full(np.shape(x), c)
        if kind == "name":
            if self.peek() == ("op", "("):
                if val not in FUNCTIONS:
                    raise ExpressionError("unknown function", val)
                fn, arity = FUNCTIONS[val]
                self.take()
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if arity is not None and len(args) != arity:
                    raise ExpressionError(f"{val} takes {arity} argument(s)", val)
                if arity is None and len(args) < 2:
                    raise ExpressionError(f"{val} needs at least two arguments", val)
                return lambda x: fn(*(a(x) for a in args))
            if val == "x":
                return lambda x: np.asarray(x, float)
            if val in CONSTANTS:
                c = CONSTANTS[val]
                return lambda x: np.full(np.shape(x), c)
            raise ExpressionError("unknown name", val)
        if (kind, val) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError("unexpected token", val or "<end>")


@dataclass(frozen=True, eq=False)
class Expression:
    """Compiled expression in the variable ``x``.

    Examples
    --------
    >>> Expression("1 + x^2")(np.array([0.0, 2.0]))
    array([1., 5.])
    """

    source: str
    _fn: Callable = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", _Parser(self.source).parse())

    def __call__(self, x):
        with np.errstate(all="ignore"):
            out = self._fn(np.asarray(x, float))
        return out if np.ndim(x) else float(out)

    def __eq__(self, other):
        return isinstance(other, Expression) and other.source == self.source

    def __hash__(self):
        return hash(self.source)


def compile_expression(source: str) -> Expression:
    if not isinstance(source, str):
        source = repr(float(source)) if isinstance(source, (int, float)) else str(source)
    return Expression(source)
