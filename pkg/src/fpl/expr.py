"""Recursive-descent parser and evaluator for operator expressions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := unary ('^' factor)?
    unary  := '-'? atom
    atom   := number | variable | func '(' expr ')' | '(' expr ')'

``^`` is right-associative. A negated operand may not be the base of ``^``:
``-x^2`` is rejected, write ``(-x)^2`` or ``-(x^2)``.

Evaluation goes through numpy, so a compiled expression accepts scalars and
arrays alike.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

FUNCTIONS: dict[str, Callable] = {
    "cos": np.cos,
    "sin": np.sin,
    "exp": np.exp,
    "abs": np.abs,
    "sqrt": np.sqrt,
}

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


class ExpressionError(ValueError):
    """Syntax, identifier or arity error; ``offset`` is the byte offset in the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvaluationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float

    def evaluate(self, env):
        return self.value

    def __str__(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Var:
    name: str

    def evaluate(self, env):
        return env[self.name]

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg:
    operand: "Node"

    def evaluate(self, env):
        return -self.operand.evaluate(env)

    def __str__(self):
        inner = str(self.operand)
        if isinstance(self.operand, (Binary, Neg)):
            inner = f"({inner})"
        return f"-{inner}"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"

    def evaluate(self, env):
        lhs = self.left.evaluate(env)
        rhs = self.right.evaluate(env)
        if self.op == "+":
            return lhs + rhs
        if self.op == "-":
            return lhs - rhs
        if self.op == "*":
            return lhs * rhs
        if self.op == "/":
            return np.divide(lhs, rhs)
        return np.power(lhs, rhs)

    def __str__(self):
        prec = _PRECEDENCE[self.op]
        left, right = str(self.left), str(self.right)
        if self.op == "^":
            # base must bind tighter than '^'; a negated base needs parentheses
            if isinstance(self.left, (Binary, Neg)):
                left = f"({left})"
            if isinstance(self.right, Binary) and _PRECEDENCE[self.right.op] < prec:
                right = f"({right})"
        else:
            if isinstance(self.left, Binary) and _PRECEDENCE[self.left.op] < prec:
                left = f"({left})"
            # left-associative: equal precedence on the right needs parentheses
            if isinstance(self.right, Binary) and _PRECEDENCE[self.right.op] <= prec:
                right = f"({right})"
        return f"{left} {self.op} {right}"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"

    def evaluate(self, env):
        return FUNCTIONS[self.func](self.arg.evaluate(env))

    def __str__(self):
        return f"{self.func}({self.arg})"


Node = Union[Num, Var, Neg, Binary, Call]


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            offset = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExpressionError(f"unexpected character {src[offset]!r}", offset)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, variables: Sequence[str]):
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = set(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, offset = self.take()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionError(f"expected {value!r}, found {found}", offset)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected token {text!r}", offset)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Node:
        first_kind, first_text, start = self.peek()
        negated = first_kind == "op" and first_text == "-"
        base = self.unary()
        kind, text, offset = self.peek()
        if kind == "op" and text == "^":
            if negated:
                raise ExpressionError(
                    "negated base of '^' is ambiguous, write (-a)^b or -(a^b)", start
                )
            self.take()
            return Binary("^", base, self.factor())
        return base

    def unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.atom())
        return self.atom()

    def atom(self) -> Node:
        kind, text, offset = self.take()
        if kind == "number":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                nxt_kind, nxt_text, nxt_offset = self.peek()
                if nxt_kind == "op" and nxt_text == ",":
                    raise ExpressionError(f"{text}() takes exactly one argument", nxt_offset)
                self.expect(")")
                return Call(text, arg)
            if text in self.variables:
                if self.peek()[1] == "(" and self.peek()[0] == "op":
                    raise ExpressionError(f"{text!r} is not a function", offset)
                return Var(text)
            raise ExpressionError(f"unknown identifier {text!r}", offset)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionError(f"unexpected {found}", offset)


def parse_expression(src: str, variables: Sequence[str] = ("x",)) -> Node:
    if not src or not src.strip():
        raise ExpressionError("empty expression", 0)
    return _Parser(src, variables).parse()


def evaluate(node: Node, env: Mapping[str, object]):
    """Evaluate ``node``; raises EvaluationError on non-finite results."""
    with np.errstate(all="ignore"):
        value = node.evaluate(env)
    if not np.all(np.isfinite(value)):
        raise EvaluationError(f"expression {node} is not finite for {dict(env)}")
    return value


class CompiledExpression:
    """Callable wrapper: positional arguments bind to ``variables`` in order."""

    def __init__(self, src: str, variables: Sequence[str] = ("x",)):
        self.src = src
        self.variables = tuple(variables)
        self.ast = parse_expression(src, self.variables)

    def __call__(self, *args):
        if len(args) != len(self.variables):
            raise TypeError(f"expected {len(self.variables)} arguments, got {len(args)}")
        value = evaluate(self.ast, dict(zip(self.variables, args)))
        if all(np.ndim(a) == 0 for a in args):
            return float(value)
        # constant subexpressions may not broadcast on their own
        shape = np.broadcast_shapes(*(np.shape(a) for a in args))
        return np.broadcast_to(value, shape).astype(float)

    def __repr__(self):
        return f"CompiledExpression({self.src!r})"
