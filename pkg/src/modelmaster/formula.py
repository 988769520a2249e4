"""Spreadsheet formula syntax: parsing A1/R1C1 text into Expr and rendering it back."""

from __future__ import annotations

import re
from decimal import Decimal

from . import model as m
from .diagnostics import FormulaSyntaxError

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>[0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?|\.[0-9]+(?:[eE][+-]?[0-9]+)?)
  | (?P<str>"(?:[^"]|"")*")
  | (?P<op><=|>=|<>|[-+*/^&=<>(),;:])
  | (?P<word>\$?[A-Za-z_][A-Za-z0-9_.]*(?:\$?[0-9]+)?(?:\[-?[0-9]+\])?(?:C(?:\[-?[0-9]+\]|[0-9]+)?)?)
""", re.X)

_A1_REF = re.compile(r"\$?([A-Za-z]{1,3})\$?([0-9]+)\Z")
_R1C1_REF = re.compile(r"R(\[-?[0-9]+\]|[0-9]+)?C(\[-?[0-9]+\]|[0-9]+)?\Z", re.I)

# binding strength, loosest first
_PREC = {"=": 1, "<": 1, ">": 1, "<=": 1, ">=": 1, "<>": 1, "&": 2,
         "+": 3, "-": 3, "*": 4, "/": 4, "^": 6}
_NEG = 5


def _tokens(text: str):
    out = []
    i = 0
    while i < len(text):
        mt = _TOKEN.match(text, i)
        if not mt:
            raise FormulaSyntaxError(f"Unexpected character {text[i]!r}", i)
        if mt.lastgroup != "ws":
            out.append((mt.lastgroup, mt.group(), i))
        i = mt.end()
    out.append(("end", "", len(text)))
    return out


class _FormulaParser:
    def __init__(self, text: str, style: str, origin: m.CellAddr | None):
        self.toks = _tokens(text)
        self.i = 0
        self.style = style
        self.origin = origin

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def at_op(self, *ops):
        kind, text, _ = self.peek()
        return kind == "op" and text in ops

    def expect_op(self, op):
        kind, text, pos = self.take()
        if kind != "op" or text != op:
            raise FormulaSyntaxError(f"Expected {op!r}", pos)

    def parse(self):
        e = self.binary(1)
        kind, text, pos = self.peek()
        if kind != "end":
            raise FormulaSyntaxError(f"Unexpected {text!r}", pos)
        return e

    def binary(self, level):
        if level == _NEG:
            return self.unary()
        left = self.binary(level + 1)
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and _PREC.get(text) == level:
                self.take()
                left = m.BinOp(text, left, self.binary(level + 1))
            else:
                return left

    def unary(self):
        if self.at_op("-"):
            self.take()
            return m.Neg(self.unary())
        if self.at_op("+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        left = self.primary()
        while self.at_op("^"):
            self.take()
            if self.at_op("-"):
                self.take()
                right = m.Neg(self.primary())
            else:
                right = self.primary()
            left = m.BinOp("^", left, right)
        return left

    def primary(self):
        kind, text, pos = self.take()
        if kind == "num":
            return m.NumLit(Decimal(text))
        if kind == "str":
            return m.StrLit(text[1:-1].replace('""', '"'))
        if kind == "op" and text == "(":
            e = self.binary(1)
            self.expect_op(")")
            return e
        if kind == "word":
            if self.at_op("("):
                self.take()
                args = []
                if not self.at_op(")"):
                    while True:
                        args.append(self.binary(1))
                        if self.at_op(",", ";"):
                            self.take()
                            continue
                        break
                self.expect_op(")")
                return m.Call(text.upper(), tuple(args))
            addr = self.ref(text, pos)
            if addr is None:
                if text.upper() in ("TRUE", "FALSE"):
                    return m.Call(text.upper(), ())
                raise FormulaSyntaxError(f"Unknown name {text!r}", pos)
            if self.at_op(":"):
                self.take()
                kind2, text2, pos2 = self.take()
                end = self.ref(text2, pos2) if kind2 == "word" else None
                if end is None:
                    raise FormulaSyntaxError("Expected cell reference after ':'", pos2)
                return m.CellRange(addr, end)
            return m.CellRef(addr)
        raise FormulaSyntaxError("Expected operand" if kind != "end" else "Unexpected end of formula", pos)

    def ref(self, text, pos):
        if self.style == "R1C1":
            mt = _R1C1_REF.match(text)
            if not mt:
                return None
            row = self._axis(mt.group(1), self.origin.row if self.origin else None, pos)
            col = self._axis(mt.group(2), self.origin.col if self.origin else None, pos)
        else:
            mt = _A1_REF.match(text)
            if not mt:
                return None
            row, col = int(mt.group(2)), m.col_number(mt.group(1))
        if row < 1 or col < 1:
            raise FormulaSyntaxError(f"Reference {text} lies outside the sheet", pos)
        return m.CellAddr(row, col)

    @staticmethod
    def _axis(part, base, pos):
        if part is not None and not part.startswith("["):
            return int(part)
        if base is None:
            raise FormulaSyntaxError("Relative reference needs the formula's own cell", pos)
        return base + (int(part[1:-1]) if part else 0)


def parse_formula(text: str, style: str = "A1", origin: m.CellAddr | None = None):
    """Parse formula text (no leading ``=``) into an expression tree.

    ``origin`` is the address of the cell holding the formula; it is only
    needed for relative R1C1 references such as ``R[-1]C``.
    """
    if style not in ("A1", "R1C1"):
        raise ValueError(f"unknown reference style {style}")
    if not text.strip():
        raise FormulaSyntaxError("Empty formula", 0)
    return _FormulaParser(text, style, origin).parse()


def decimal_text(d: Decimal) -> str:
    """Plain positional notation for a decimal, no exponent and no trailing zeros."""
    if not isinstance(d, Decimal):
        d = Decimal(str(d))
    if d == d.to_integral_value():
        return str(int(d))
    return format(d.normalize(), "f")


def quote_text(s: str) -> str:
    return '"' + s.replace('"', '""') + '"'


def _relative(addr: m.CellAddr, origin: m.CellAddr) -> str:
    dr, dc = addr.row - origin.row, addr.col - origin.col
    return ("R" + (f"[{dr}]" if dr else "")) + ("C" + (f"[{dc}]" if dc else ""))


def render_formula(e, style: str = "A1", origin: m.CellAddr | None = None) -> str:
    """Render an expression as spreadsheet formula text (without ``=``).

    With ``style="R1C1"`` and an ``origin``, references are written relative
    to that cell, so copies of one formula down a column render identically.
    """
    if style == "R1C1" and origin is not None:
        ref = lambda a: _relative(a, origin)  # noqa: E731
    else:
        ref = (lambda a: a.r1c1) if style == "R1C1" else (lambda a: a.a1)

    def r(node, ctx: int) -> str:
        if isinstance(node, m.NumLit):
            return decimal_text(node.value)
        if isinstance(node, m.StrLit):
            return quote_text(node.text)
        if isinstance(node, m.CellRef):
            return ref(node.addr)
        if isinstance(node, m.CellRange):
            return f"{ref(node.start)}:{ref(node.end)}"
        if isinstance(node, m.Call):
            if not node.args and node.fn.upper() in ("TRUE", "FALSE"):
                return node.fn.upper()
            return node.fn.upper() + "(" + ",".join(r(a, 0) for a in node.args) + ")"
        if isinstance(node, m.Neg):
            s = "-" + r(node.operand, _NEG)
            return f"({s})" if ctx > _NEG else s
        if isinstance(node, m.BinOp):
            p = _PREC[node.op]
            s = r(node.left, p) + node.op + r(node.right, p + 1)
            return f"({s})" if ctx > p else s
        raise TypeError(f"cannot render {type(node).__name__} in a formula")

    return r(e, 0)
