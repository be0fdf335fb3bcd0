"""A small expression language for amplitudes h(p).

Grammar (all binary operators left-associative)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | atom
    atom   := NUMBER | NUMBER "i" | "i" | "p" | "s" | "(" expr ")"

``NUMBER`` is a decimal literal with optional fraction and exponent.  A
complex constant ``a+bi`` is written as the sum of a real and an imaginary
literal.  ``s`` stands for sqrt(p/(1-p)).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import ExprSyntaxError, UnknownSymbolError
from .field import FieldElement


@dataclass(frozen=True)
class Num:
    value: float
    imag: bool = False

    def __post_init__(self):
        if not (self.value >= 0.0 and math.isfinite(self.value)):
            raise ValueError("numeric literals are finite and nonnegative; use Unary for negation")


@dataclass(frozen=True)
class Sym:
    name: str

    def __post_init__(self):
        if self.name not in ("p", "s"):
            raise ValueError(f"unknown symbol {self.name!r}")


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/()]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        val = m.group(kind)
        if kind == "num" and m.end() < n and text[m.end()] == "i":
            # "2.5i": imaginary literal, unless the i starts a longer name
            tail = re.match(r"[A-Za-z_]\w*", text[m.end():]).group(0)
            if tail == "i":
                out.append(("imag", val, start))
                pos = m.end() + 1
                continue
        out.append((kind, val, start))
        pos = m.end()
    out.append(("end", "", n))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, val):
        t = self.take()
        if t[1] != val or t[0] != "op":
            raise ExprSyntaxError(f"expected {val!r}, found {t[1] or 'end of input'!r}", t[2])

    def parse(self):
        e = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ExprSyntaxError(f"unexpected {t[1]!r}", t[2])
        return e

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            pos = self.peek()[2]
            right = self.unary()
            if op == "/" and _literal_zero(right):
                raise ExprSyntaxError("division by literal zero", pos)
            node = Binary(op, node, right)
        return node

    def unary(self):
        t = self.peek()
        if t[0] == "op" and t[1] == "-":
            self.take()
            return Unary("-", self.unary())
        return self.atom()

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "imag":
            return Num(float(val), True)
        if kind == "name":
            if val == "i":
                return Num(1.0, True)
            if val in ("p", "s"):
                return Sym(val)
            raise UnknownSymbolError(f"unknown symbol {val!r}", pos)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", pos)


def _literal_zero(node) -> bool:
    while isinstance(node, Unary):
        node = node.operand
    return isinstance(node, Num) and node.value == 0.0


def parse_expression(text: str):
    """Parse ``text`` into a tree of Num / Sym / Unary / Binary nodes."""
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    return _Parser(text).parse()


def _prec(node) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary):
        return 3
    return 4


def to_string(node) -> str:
    """Canonical printer using the fewest parentheses that re-parse identically."""
    if isinstance(node, Num):
        return repr(node.value) + ("i" if node.imag else "")
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Unary):
        inner = to_string(node.operand)
        if _prec(node.operand) < 3:
            inner = f"({inner})"
        return "-" + inner
    if isinstance(node, Binary):
        prec = _PREC[node.op]
        left, right = to_string(node.left), to_string(node.right)
        if _prec(node.left) < prec:
            left = f"({left})"
        if _prec(node.right) <= prec:
            right = f"({right})"
        return f"{left}{node.op}{right}"
    raise TypeError(f"not an expression node: {node!r}")


def has_symbols(node) -> bool:
    if isinstance(node, Sym):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, Unary):
        return has_symbols(node.operand)
    return has_symbols(node.left) or has_symbols(node.right)


def depth(node) -> int:
    if isinstance(node, (Num, Sym)):
        return 1
    if isinstance(node, Unary):
        return 1 + depth(node.operand)
    return 1 + max(depth(node.left), depth(node.right))


def evaluate(node, p: float) -> complex:
    """Direct numeric evaluation at p (independent of the field code)."""
    if isinstance(node, Num):
        return complex(0, node.value) if node.imag else complex(node.value)
    if isinstance(node, Sym):
        if node.name == "p":
            return complex(p)
        return complex(math.sqrt(p / (1.0 - p)))
    if isinstance(node, Unary):
        return -evaluate(node.operand, p)
    a, b = evaluate(node.left, p), evaluate(node.right, p)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    return a / b


def to_field(node) -> FieldElement:
    """Compile a tree to its element of M (raises on division by zero)."""
    if isinstance(node, str):
        node = parse_expression(node)
    if isinstance(node, Num):
        return FieldElement.const(complex(0, node.value) if node.imag else node.value)
    if isinstance(node, Sym):
        return FieldElement.p() if node.name == "p" else FieldElement.s()
    if isinstance(node, Unary):
        return -to_field(node.operand)
    a, b = to_field(node.left), to_field(node.right)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    return a / b


__all__ = [
    "Num",
    "Sym",
    "Unary",
    "Binary",
    "parse_expression",
    "to_string",
    "to_field",
    "evaluate",
    "has_symbols",
    "depth",
]
