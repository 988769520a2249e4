"""Reading and writing the SYLK subset used as the spreadsheet interchange medium.

See ``docs/sylk-subset.md`` for the exact record grammar.
"""

from __future__ import annotations

import re
import warnings
from decimal import Decimal, InvalidOperation

from . import model as m
from .diagnostics import FormulaSyntaxError, MalformedRecord, MissingTerminator, Unrepresentable
from .formula import decimal_text, parse_formula, quote_text, render_formula


class UnsupportedRecord(UserWarning):
    """A record type outside the subset was skipped."""


def _escape(field: str) -> str:
    return field.replace(";", ";;")


def _split(line: str) -> list:
    """Split a record on single ``;``; a doubled ``;;`` stands for a literal one."""
    fields, cur, i = [], [], 0
    while i < len(line):
        ch = line[i]
        if ch == ";":
            if line.startswith(";;", i):
                cur.append(";")
                i += 2
                continue
            fields.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
        i += 1
    fields.append("".join(cur))
    return fields


def constant_text(v) -> str:
    """Encode a constant value as it appears after ``K`` (also used by .cells)."""
    if isinstance(v, m.Number):
        d = v.value if isinstance(v.value, Decimal) else Decimal(repr(float(v.value)))
        return decimal_text(d)
    if isinstance(v, m.Text):
        return quote_text(v.text)
    if isinstance(v, m.Boolean):
        return "TRUE" if v.value else "FALSE"
    raise Unrepresentable(f"{v!r} has no SYLK encoding")


def write_sylk(cm: m.CellMap, plan=None) -> bytes:
    """Serialise a cellmap as SYLK text (UTF-8, LF line ends)."""
    entries = cm.items()
    formats: list = []
    for _, entry in entries:
        if entry.format is not None and entry.format not in formats:
            formats.append(entry.format)
    lines = ["ID;PMM"]
    lines += ["P;P" + _escape(f) for f in formats]
    for addr, entry in entries:
        yx = f"Y{addr.row};X{addr.col}"
        if entry.format is not None:
            lines.append(f"F;{yx};P{formats.index(entry.format)}")
        if isinstance(entry.content, m.Formula):
            body = "E" + _escape(render_formula(entry.content.expr, "R1C1"))
        else:
            body = "K" + _escape(constant_text(entry.content.value))
        lines.append(f"C;{yx};{body}")
    lines.append("E")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_constant(text: str, lineno: int):
    if text.startswith('"'):
        if len(text) < 2 or not text.endswith('"'):
            raise MalformedRecord(f"unterminated string {text}", lineno)
        return m.Text(text[1:-1].replace('""', '"'))
    if text.upper() in ("TRUE", "FALSE"):
        return m.Boolean(text.upper() == "TRUE")
    try:
        d = Decimal(text)
    except InvalidOperation:
        raise MalformedRecord(f"bad constant {text!r}", lineno) from None
    if not d.is_finite():
        raise MalformedRecord(f"bad constant {text!r}", lineno)
    return m.Number(d)


def _coord(fields, key, lineno):
    for f in fields:
        if f.startswith(key):
            try:
                v = int(f[1:])
            except ValueError:
                break
            if v < 1:
                raise MalformedRecord(f"{key} must be at least 1, got {v}", lineno)
            return v
    return None


def read_sylk(data) -> m.CellMap:
    """Parse SYLK text into a cellmap; formulas go through :func:`parse_formula`."""
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    formats: list = []
    pending_format: dict = {}
    cells: dict = {}
    cur_row = None
    terminated = False
    saw_id = False
    for lineno, line in enumerate(lines, start=1):
        if not line:
            continue
        if terminated:
            raise MalformedRecord("record after E terminator", lineno)
        fields = _split(line)
        kind = fields[0]
        if kind == "ID":
            saw_id = True
        elif kind == "E":
            terminated = True
        elif kind == "P":
            fmt = next((f[1:] for f in fields[1:] if f.startswith("P")), None)
            if fmt is None:
                raise MalformedRecord("P record without a format", lineno)
            formats.append(fmt)
        elif kind == "F":
            y = _coord(fields[1:], "Y", lineno) or cur_row
            x = _coord(fields[1:], "X", lineno)
            p = next((f[1:] for f in fields[1:] if f.startswith("P")), None)
            if p is None:
                continue
            if y is None or x is None:
                raise MalformedRecord("F record needs Y and X", lineno)
            try:
                pending_format[m.CellAddr(y, x)] = formats[int(p)]
            except (ValueError, IndexError):
                raise MalformedRecord(f"unknown format index {p}", lineno) from None
        elif kind == "C":
            y = _coord(fields[1:], "Y", lineno)
            y = y if y is not None else cur_row
            x = _coord(fields[1:], "X", lineno)
            if y is None or x is None:
                raise MalformedRecord("C record needs Y and X", lineno)
            cur_row = y
            addr = m.CellAddr(y, x)
            const = next((f[1:] for f in fields[1:] if f.startswith("K")), None)
            formula = next((f[1:] for f in fields[1:] if f.startswith("E")), None)
            if formula is not None:
                try:
                    content = m.Formula(parse_formula(formula, "R1C1", addr))
                except FormulaSyntaxError as err:
                    raise MalformedRecord(f"bad formula {formula!r}: {err}", lineno) from None
            elif const is not None:
                content = m.Constant(_parse_constant(const, lineno))
            else:
                continue
            if addr in cells:
                raise MalformedRecord(f"cell {addr.a1} given twice", lineno)
            cells[addr] = m.CellEntry(content, pending_format.pop(addr, None))
        else:
            warnings.warn(f"line {lineno}: skipped unsupported record {kind}", UnsupportedRecord)
    if not saw_id and cells:
        raise MalformedRecord("missing ID record", 1)
    if not terminated:
        raise MissingTerminator("file does not end with an E record", len(lines))
    for addr, fmt in pending_format.items():
        if addr in cells:
            cells[addr] = m.CellEntry(cells[addr].content, fmt)
    return m.CellMap(cells)
