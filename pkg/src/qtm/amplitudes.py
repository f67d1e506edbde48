"""Textual amplitude expressions and their formatting.

The accepted grammar is deliberately small:

    amplitude := product | product '+' product 'i' | product '-' product 'i'
               | product 'i'
    product   := ['-'] factor (('*' | '/') factor)*
    factor    := decimal | 'sqrt' '(' decimal ')'

so machine files can spell entries like ``1/sqrt(2)`` or ``0.5 - 0.5i``
without dragging in a general expression evaluator.
"""

from __future__ import annotations

import math
import re

from .errors import ParseError

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>sqrt|i)"
    r"|(?P<op>[-+*/()]))"
)


def _tokenize(text: str, line: int | None):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos:].strip()[0]!r} in amplitude",
                             line, pos + 1)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return tokens


class _Cursor:
    def __init__(self, tokens, line):
        self.tokens = tokens
        self.line = line
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, None)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def fail(self, expected):
        kind, text, col = self.peek()
        got = repr(text) if kind else "end of expression"
        raise ParseError(f"expected {expected}, got {got} in amplitude", self.line,
                         (col + 1) if col is not None else None)


def _factor(cur: _Cursor) -> float:
    kind, text, _ = cur.peek()
    if kind == "num":
        cur.next()
        return float(text)
    if kind == "name" and text == "sqrt":
        cur.next()
        if cur.peek()[:2] != ("op", "("):
            cur.fail("'(' after sqrt")
        cur.next()
        if cur.peek()[0] != "num":
            cur.fail("decimal inside sqrt(...)")
        value = float(cur.next()[1])
        if cur.peek()[:2] != ("op", ")"):
            cur.fail("')'")
        cur.next()
        return math.sqrt(value)
    cur.fail("a decimal or sqrt(...)")


def _product(cur: _Cursor) -> float:
    sign = 1.0
    if cur.peek()[:2] == ("op", "-"):
        cur.next()
        sign = -1.0
    value = _factor(cur)
    while cur.peek()[0] == "op" and cur.peek()[1] in "*/":
        op = cur.next()[1]
        rhs = _factor(cur)
        value = value * rhs if op == "*" else value / rhs
    return sign * value


def parse_amplitude(text: str, *, line: int | None = None) -> complex:
    """Evaluate one amplitude expression to a complex number."""
    cur = _Cursor(_tokenize(text, line), line)
    if cur.peek()[0] is None:
        cur.fail("an amplitude expression")
    first = _product(cur)
    kind, tok, _ = cur.peek()
    if kind is None:
        return complex(first, 0.0)
    if kind == "name" and tok == "i":
        cur.next()
        if cur.peek()[0] is not None:
            cur.fail("end of expression after i")
        return complex(0.0, first)
    if kind == "op" and tok in "+-":
        joiner = cur.next()[1]
        imag = _product(cur)
        if cur.peek()[:2] != ("name", "i"):
            cur.fail("'i' after the imaginary part")
        cur.next()
        if cur.peek()[0] is not None:
            cur.fail("end of expression after i")
        if joiner == "-":
            imag = -imag
        return complex(first, imag)
    cur.fail("'*', '/', '+', '-', or 'i'")


def serialize_amplitude(z: complex) -> str:
    """Render an amplitude so that parsing it back reproduces the exact floats."""
    z = complex(z)
    re_, im = z.real, z.imag
    if im == 0.0:
        return repr(re_)
    if re_ == 0.0:
        return f"{repr(im)}i"
    if im < 0:
        return f"{repr(re_)} - {repr(-im)}i"
    return f"{repr(re_)} + {repr(im)}i"


def format_amplitude(z: complex, digits: int = 12) -> str:
    """Human display at a fixed number of significant digits."""
    re_, im = z.real, z.imag
    if abs(im) < 10.0 ** (-digits - 3):
        return f"{re_:.{digits}g}"
    if abs(re_) < 10.0 ** (-digits - 3):
        return f"{im:.{digits}g}i"
    sign = "+" if im >= 0 else "-"
    return f"{re_:.{digits}g}{sign}{abs(im):.{digits}g}i"
