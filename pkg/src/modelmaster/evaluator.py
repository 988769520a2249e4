"""Deterministic evaluation of cellmaps, value formatting and CSV export."""

from __future__ import annotations

import csv
import io
import math
import re
import warnings
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

from . import model as m
from .diagnostics import CyclicDependency, UnknownFunction
from .graph import build_dependency_graph

MASK64 = (1 << 64) - 1
LCG_MULT = 6364136223846793005
LCG_INC = 1442695040888963407


class Rng:
    """64-bit linear congruential generator; outputs lie in [0, 1) on a 2**-53 grid."""

    def __init__(self, seed: int):
        self.state = (seed | 1) & MASK64

    def next(self) -> float:
        self.state = (LCG_MULT * self.state + LCG_INC) & MASK64
        return (self.state >> 11) / float(1 << 53)


class UnknownFormat(UserWarning):
    pass


@dataclass
class EvalState:
    values: dict = field(default_factory=dict)
    rng_state: int = 0

    def __getitem__(self, addr):
        return self.values.get(addr, m.EMPTY)


@dataclass(frozen=True)
class _Drawn:
    """A RAND() call site whose value was drawn ahead of evaluation."""
    value: float


# -- scalar helpers ---------------------------------------------------------

def _num(v):
    """Coerce to float, or return an ErrorVal."""
    if isinstance(v, m.Number):
        return float(v.value)
    if v is m.EMPTY:
        return 0.0
    if isinstance(v, m.Boolean):
        return 1.0 if v.value else 0.0
    if isinstance(v, m.ErrorVal):
        return v
    try:
        return float(v.text)
    except ValueError:
        return m.ErrorVal("VALUE")


def _finite(x: float):
    return m.Number(x) if math.isfinite(x) else m.ErrorVal("VALUE")


def to_text(v) -> str:
    if isinstance(v, m.Text):
        return v.text
    if v is m.EMPTY:
        return ""
    if isinstance(v, m.Boolean):
        return "TRUE" if v.value else "FALSE"
    if isinstance(v, m.ErrorVal):
        return m.ERROR_KINDS[v.kind]
    return shortest(float(v.value))


def shortest(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _truth(v):
    if isinstance(v, m.ErrorVal):
        return v
    if isinstance(v, m.Boolean):
        return v.value
    if v is m.EMPTY:
        return False
    if isinstance(v, m.Number):
        return float(v.value) != 0
    return m.ErrorVal("VALUE")


def _rank(v):
    # numbers sort before text, text before booleans
    if isinstance(v, m.Number) or v is m.EMPTY:
        return 0
    return 1 if isinstance(v, m.Text) else 2


def _compare(op, a, b):
    if a is m.EMPTY and isinstance(b, m.Text):
        a = m.Text("")
    if b is m.EMPTY and isinstance(a, m.Text):
        b = m.Text("")
    ra, rb = _rank(a), _rank(b)
    if ra != rb:
        x, y = ra, rb
    elif ra == 0:
        x, y = _num(a), _num(b)
    elif ra == 1:
        x, y = a.text, b.text
    else:
        x, y = a.value, b.value
    return m.Boolean({"=": x == y, "<>": x != y, "<": x < y, ">": x > y,
                      "<=": x <= y, ">=": x >= y}[op])


def binary(op: str, a, b):
    """Apply a binary operator to two evaluated operands."""
    if isinstance(a, m.ErrorVal):
        return a
    if isinstance(b, m.ErrorVal):
        return b
    if op == "&":
        return m.Text(to_text(a) + to_text(b))
    if op in m.COMPARISONS:
        return _compare(op, a, b)
    x, y = _num(a), _num(b)
    if isinstance(x, m.ErrorVal):
        return x
    if isinstance(y, m.ErrorVal):
        return y
    if op == "+":
        return _finite(x + y)
    if op == "-":
        return _finite(x - y)
    if op == "*":
        return _finite(x * y)
    if op == "/":
        return m.ErrorVal("DIV0") if y == 0 else _finite(x / y)
    if op == "^":
        try:
            r = math.pow(x, y)
        except (OverflowError, ValueError):
            return m.ErrorVal("VALUE")
        return _finite(r)
    raise ValueError(f"unknown operator {op}")


def negate(a):
    x = _num(a)
    return x if isinstance(x, m.ErrorVal) else m.Number(-x)


def _flatten(args):
    """Yield (value, from_range) for aggregate arguments."""
    for a in args:
        if isinstance(a, list):
            for v in a:
                yield v, True
        else:
            yield a, False


def _numbers(args):
    out = []
    for v, in_range in _flatten(args):
        if isinstance(v, m.ErrorVal):
            return v
        if in_range:
            if isinstance(v, m.Number):
                out.append(float(v.value))
            continue
        x = _num(v)
        if isinstance(x, m.ErrorVal):
            return x
        out.append(x)
    return out


def _round_half_away(x: float, digits: int) -> float:
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def _scalar(v):
    if isinstance(v, list):
        return v[0] if len(v) == 1 else m.ErrorVal("VALUE")
    return v


def call(fn: str, args: list):
    """Apply a builtin to evaluated arguments (ranges arrive as lists)."""
    fn = fn.upper()
    if fn in ("MIN", "MAX", "SUM", "AVERAGE"):
        xs = _numbers(args)
        if isinstance(xs, m.ErrorVal):
            return xs
        if fn == "SUM":
            return _finite(sum(xs, 0.0))
        if fn == "AVERAGE":
            return m.ErrorVal("DIV0") if not xs else _finite(sum(xs, 0.0) / len(xs))
        if not xs:
            return m.Number(0.0)
        return m.Number(min(xs) if fn == "MIN" else max(xs))
    if fn == "MATCH":
        if len(args) != 3 or _num(_scalar(args[2])) != 0:
            raise UnknownFunction("MATCH supports only match_type 0 (exact match)")
        x = _scalar(args[0])
        if isinstance(x, m.ErrorVal):
            return x
        seq = args[1] if isinstance(args[1], list) else [args[1]]
        for i, v in enumerate(seq, start=1):
            if isinstance(v, m.ErrorVal):
                continue
            if _rank(v) == _rank(x) and _compare("=", v, x).value and v is not m.EMPTY:
                return m.Number(float(i))
        return m.ErrorVal("NA")
    args = [_scalar(a) for a in args]
    if fn == "ISERR":
        return m.Boolean(isinstance(args[0], m.ErrorVal))
    if fn in ("TRUE", "FALSE"):
        return m.Boolean(fn == "TRUE")
    for a in args:
        if isinstance(a, m.ErrorVal):
            return a
    if fn in ("AND", "OR"):
        ts = [_truth(a) for a in args]
        for t in ts:
            if isinstance(t, m.ErrorVal):
                return t
        return m.Boolean(all(ts) if fn == "AND" else any(ts))
    if fn == "NOT":
        t = _truth(args[0])
        return t if isinstance(t, m.ErrorVal) else m.Boolean(not t)
    xs = [_num(a) for a in args]
    for x in xs:
        if isinstance(x, m.ErrorVal):
            return x
    if fn == "ABS":
        return m.Number(abs(xs[0]))
    if fn == "INT":
        return m.Number(float(math.floor(xs[0])))
    if fn == "ROUND":
        return _finite(_round_half_away(xs[0], int(xs[1])))
    if fn == "SQRT":
        return m.ErrorVal("VALUE") if xs[0] < 0 else m.Number(math.sqrt(xs[0]))
    if fn == "MOD":
        return m.ErrorVal("DIV0") if xs[1] == 0 else _finite(xs[0] - xs[1] * math.floor(xs[0] / xs[1]))
    if fn == "EXP":
        try:
            return _finite(math.exp(xs[0]))
        except OverflowError:
            return m.ErrorVal("VALUE")
    if fn == "LN":
        return m.ErrorVal("VALUE") if xs[0] <= 0 else m.Number(math.log(xs[0]))
    raise UnknownFunction(f"Unknown function {fn}")


KNOWN_FUNCTIONS = frozenset("""MIN MAX SUM AVERAGE MATCH ISERR TRUE FALSE AND OR NOT ABS
    INT ROUND SQRT MOD EXP LN IF RAND""".split())


# -- evaluation -------------------------------------------------------------

def _predraw(expr, rng: Rng):
    """Replace RAND() calls by drawn values, pre-order, left to right."""
    if isinstance(expr, m.Call):
        if expr.fn.upper() == "RAND" and not expr.args:
            return _Drawn(rng.next())
        return m.Call(expr.fn, tuple(_predraw(a, rng) for a in expr.args))
    if isinstance(expr, m.BinOp):
        left = _predraw(expr.left, rng)
        return m.BinOp(expr.op, left, _predraw(expr.right, rng))
    if isinstance(expr, m.Neg):
        return m.Neg(_predraw(expr.operand, rng))
    return expr


def eval_expr(e, lookup):
    """Evaluate a cell expression; ``lookup(addr)`` returns a cell's value."""
    if isinstance(e, m.NumLit):
        return m.Number(float(e.value))
    if isinstance(e, m.StrLit):
        return m.Text(e.text)
    if isinstance(e, _Drawn):
        return m.Number(e.value)
    if isinstance(e, m.CellRef):
        return lookup(e.addr)
    if isinstance(e, m.CellRange):
        return [lookup(a) for a in e.cells()]
    if isinstance(e, m.Neg):
        return negate(_scalar(eval_expr(e.operand, lookup)))
    if isinstance(e, m.BinOp):
        a = _scalar(eval_expr(e.left, lookup))
        b = _scalar(eval_expr(e.right, lookup))
        return binary(e.op, a, b)
    if isinstance(e, m.Call):
        fn = e.fn.upper()
        if fn == "IF":
            cond = _truth(_scalar(eval_expr(e.args[0], lookup)))
            if isinstance(cond, m.ErrorVal):
                return cond
            if cond:
                return _scalar(eval_expr(e.args[1], lookup))
            return _scalar(eval_expr(e.args[2], lookup)) if len(e.args) > 2 else m.Boolean(False)
        if fn == "RAND":
            raise ValueError("RAND() must be drawn before evaluation")
        if fn not in KNOWN_FUNCTIONS:
            raise UnknownFunction(f"Unknown function {e.fn}")
        return call(fn, [eval_expr(a, lookup) for a in e.args])
    raise TypeError(f"cannot evaluate {type(e).__name__}")


def evaluate(cm: m.CellMap, inputs: dict | None = None, seed: int = 1) -> EvalState:
    """Evaluate every formula cell.

    RAND() values are drawn in row-major cell order and left to right
    within a formula, before any evaluation, so the same seed always gives
    the same numbers whatever branches IF takes.
    """
    g = build_dependency_graph(cm)
    cycles = g.cycles
    if cycles:
        raise CyclicDependency(cycles[0])
    rng = Rng(seed)
    exprs = {}
    for addr, entry in cm.items():
        if isinstance(entry.content, m.Formula):
            exprs[addr] = _predraw(entry.content.expr, rng)
    state = EvalState(rng_state=rng.state)
    for addr, entry in cm.cells.items():
        if isinstance(entry.content, m.Constant):
            state.values[addr] = entry.content.value
    for addr, v in (inputs or {}).items():
        state.values[addr] = v

    def lookup(a):
        return state.values.get(a, m.EMPTY)

    for addr in g.evaluation_order():
        state.values[addr] = eval_expr(exprs[addr], lookup)
    return state


# -- display ----------------------------------------------------------------

_FIXED = re.compile(r"0(?:\.(0+))?\Z")


def format_value(v, fmt: str | None = None) -> str:
    """Render a value for display under an optional cell format."""
    if not isinstance(v, m.Number):
        return to_text(v)
    x = float(v.value)
    if fmt is None:
        return shortest(x)
    mt = _FIXED.match(fmt)
    if mt:
        digits = len(mt.group(1) or "")
        q = Decimal(1).scaleb(-digits)
        return str(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))
    if fmt.lower() == "hh:mm":
        minutes = math.floor(x * 1440 + 1e-9)
        return f"{(minutes // 60) % 24:02d}:{minutes % 60:02d}"
    warnings.warn(f"unknown format {fmt!r}; showing the plain value", UnknownFormat)
    return shortest(x)


def to_csv(cm: m.CellMap, state: EvalState) -> str:
    """Row-major grid of formatted values covering the sheet's extent."""
    rows, cols = cm.extent
    for a in state.values:
        rows, cols = max(rows, a.row), max(cols, a.col)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in range(1, rows + 1):
        line = []
        for c in range(1, cols + 1):
            addr = m.CellAddr(r, c)
            entry = cm.cells.get(addr)
            line.append(format_value(state[addr], entry.format if entry else None))
        w.writerow(line)
    return buf.getvalue()
