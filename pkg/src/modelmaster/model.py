"""Shared domain types: bases, units, expressions, objects, programs, cellmaps.

Every other module of the toolchain builds on these.  All node classes are
frozen dataclasses; source positions ride along as ``pos`` but never take
part in equality, so two programs parsed from differently-formatted text
compare equal when their structure is the same.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterator, Mapping, Union

Pos = tuple  # (line, col), both 1-based

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def is_ident(text: str) -> bool:
    return bool(IDENT_RE.match(text))


class OutOfBase(ValueError):
    """A point lies outside the base of the attribute it indexes."""


# ---------------------------------------------------------------------------
# Bases

@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    @property
    def cardinality(self) -> int:
        return self.hi - self.lo + 1

    def ordinal(self, coord: int) -> int:
        if not self.lo <= coord <= self.hi:
            raise OutOfBase(f"{coord} not in [{self.lo}:{self.hi}]")
        return coord - self.lo + 1

    def coords(self) -> range:
        return range(self.lo, self.hi + 1)

    def __str__(self) -> str:
        return f"[{self.lo}:{self.hi}]"


@dataclass(frozen=True)
class EnumBase:
    labels: tuple

    def __post_init__(self):
        if not self.labels:
            raise ValueError("enumerated base needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("enumerated base labels must be distinct")

    @property
    def cardinality(self) -> int:
        return len(self.labels)

    def ordinal(self, coord: int) -> int:
        # enum coordinates are already 1-based label ordinals
        if not 1 <= coord <= len(self.labels):
            raise OutOfBase(f"label ordinal {coord} out of range")
        return coord

    def coords(self) -> range:
        return range(1, len(self.labels) + 1)

    def label_ordinal(self, label: str) -> int:
        try:
            return self.labels.index(label) + 1
        except ValueError:
            raise OutOfBase(f"{label!r} is not a label of this base") from None

    def __str__(self) -> str:
        return "{ " + ", ".join(_quote(s) for s in self.labels) + " }"


@dataclass(frozen=True)
class Product:
    factors: tuple

    def __post_init__(self):
        flat = []
        for f in self.factors:
            flat.extend(f.factors if isinstance(f, Product) else [f])
        object.__setattr__(self, "factors", tuple(flat))

    @property
    def cardinality(self) -> int:
        return math.prod(f.cardinality for f in self.factors)

    def __str__(self) -> str:
        return " * ".join(str(f) for f in self.factors)


# Unresolved base terms, as written in source before constants and base
# names are looked up.

@dataclass(frozen=True)
class RangeSpec:
    lo: "Expr"
    hi: "Expr"


@dataclass(frozen=True)
class BaseRef:
    name: str
    pos: Pos | None = field(default=None, compare=False, kw_only=True)


Base = Union[IntRange, EnumBase, Product]
BaseTerm = Union[IntRange, EnumBase, Product, RangeSpec, BaseRef]


def base_factors(base: Base | None) -> tuple:
    """The one-dimensional factors of ``base``; ``()`` for a scalar."""
    if base is None:
        return ()
    if isinstance(base, Product):
        return base.factors
    return (base,)


def base_cardinality(base: Base | None) -> int:
    """Number of points in ``base`` (a scalar has exactly one)."""
    if base is None:
        return 1
    return base.cardinality


def make_base(factors) -> Base | None:
    factors = tuple(factors)
    if not factors:
        return None
    if len(factors) == 1:
        return factors[0]
    return Product(factors)


def iter_points(base: Base | None) -> Iterator[tuple]:
    """All points of ``base`` in lexicographic order.

    Coordinates are integers for ranges and 1-based label ordinals for
    enumerated bases.
    """
    return itertools.product(*(f.coords() for f in base_factors(base)))


# ---------------------------------------------------------------------------
# Units

@dataclass(frozen=True)
class UnitExpr:
    """A product of unit symbols raised to nonzero integer powers.

    Stored sorted by symbol so equality ignores order; :meth:`render` takes
    the declaration order for display.
    """

    exponents: tuple = ()

    @classmethod
    def of(cls, mapping: Mapping[str, int] | None = None, **kw) -> "UnitExpr":
        items = dict(mapping or {}, **kw)
        return cls(tuple(sorted((k, v) for k, v in items.items() if v != 0)))

    @classmethod
    def symbol(cls, name: str) -> "UnitExpr":
        return cls(((name, 1),))

    def as_dict(self) -> dict:
        return dict(self.exponents)

    @property
    def dimensionless(self) -> bool:
        return not self.exponents

    def render(self, order=None) -> str:
        if not self.exponents:
            return "1"
        rank = {s: i for i, s in enumerate(order or ())}
        items = sorted(self.exponents,
                       key=lambda kv: (rank.get(kv[0], len(rank)), kv[0]))
        return " * ".join(s if k == 1 else f"{s}^{k}" for s, k in items)

    def __str__(self) -> str:
        return self.render()


DIMENSIONLESS = UnitExpr()


def unit_combine(op: str, left: UnitExpr, right) -> UnitExpr:
    """Combine units under ``*``, ``/`` or ``^`` (``right`` an int for ``^``)."""
    acc = left.as_dict()
    if op == "^":
        return UnitExpr.of({s: k * right for s, k in acc.items()})
    sign = {"*": 1, "/": -1}[op]
    for s, k in right.exponents:
        acc[s] = acc.get(s, 0) + sign * k
    return UnitExpr.of(acc)


# ---------------------------------------------------------------------------
# Cell addresses

@dataclass(frozen=True, order=True)
class CellAddr:
    row: int
    col: int

    def __post_init__(self):
        if self.row < 1 or self.col < 1:
            raise ValueError(f"cell address must be 1-based, got {self.row},{self.col}")

    @property
    def a1(self) -> str:
        return f"{col_letters(self.col)}{self.row}"

    @property
    def r1c1(self) -> str:
        return f"R{self.row}C{self.col}"

    @classmethod
    def from_a1(cls, text: str) -> "CellAddr":
        m = re.fullmatch(r"\$?([A-Za-z]{1,3})\$?([0-9]+)", text)
        if not m:
            raise ValueError(f"not an A1 address: {text!r}")
        return cls(int(m.group(2)), col_number(m.group(1)))

    def __str__(self) -> str:
        return self.a1


def col_letters(col: int) -> str:
    out = ""
    while col:
        col, rem = divmod(col - 1, 26)
        out = chr(ord("A") + rem) + out
    return out


def col_number(letters: str) -> int:
    n = 0
    for ch in letters.upper():
        n = n * 26 + ord(ch) - ord("A") + 1
    return n


# ---------------------------------------------------------------------------
# Expressions

def _pos():
    return field(default=None, compare=False, kw_only=True, repr=False)


@dataclass(frozen=True)
class NumLit:
    value: Decimal
    unit: UnitExpr | None = None
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class StrLit:
    text: str
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class AttrRef:
    attr: str
    indices: tuple = ()
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Span:
    """``lo:hi`` inside a slice subscript."""
    lo: "Expr"
    hi: "Expr"


@dataclass(frozen=True)
class RangeRef:
    attr: str
    slice: tuple | None = None
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class VarRef:
    name: str
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class ConstRef:
    name: str
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple = ()
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class CellRef:
    addr: CellAddr
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class CellRange:
    start: CellAddr
    end: CellAddr
    pos: Pos | None = _pos()

    def cells(self) -> Iterator[CellAddr]:
        for r in range(min(self.start.row, self.end.row), max(self.start.row, self.end.row) + 1):
            for c in range(min(self.start.col, self.end.col), max(self.start.col, self.end.col) + 1):
                yield CellAddr(r, c)


Expr = Union[NumLit, StrLit, AttrRef, RangeRef, VarRef, ConstRef, BinOp, Neg,
             Call, CellRef, CellRange]

BINARY_OPS = ("+", "-", "*", "/", "^", "&", "=", "<", ">", "<=", ">=", "<>")
COMPARISONS = ("=", "<", ">", "<=", ">=", "<>")


def children(e) -> tuple:
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, Neg):
        return (e.operand,)
    if isinstance(e, Call):
        return e.args
    if isinstance(e, AttrRef):
        return e.indices
    if isinstance(e, RangeRef):
        out = []
        for s in e.slice or ():
            out.extend((s.lo, s.hi) if isinstance(s, Span) else (s,))
        return tuple(out)
    return ()


def walk(e) -> Iterator:
    """Pre-order, left-to-right traversal of an expression tree."""
    yield e
    for c in children(e):
        yield from walk(c)


def num(value, unit=None) -> NumLit:
    return NumLit(Decimal(str(value)) if not isinstance(value, Decimal) else value, unit)


# ---------------------------------------------------------------------------
# Declarations, equations, objects

@dataclass(frozen=True)
class AttributeDecl:
    name: str
    base: BaseTerm | None = None
    unit: UnitExpr | None = None
    display_name: tuple | None = None
    cell_format: str | None = None
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class PointIdx:
    expr: Expr


@dataclass(frozen=True)
class AllIdx:
    var: str
    op: str | None = None
    bound: Expr | None = None
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Equation:
    lhs_attr: str
    lhs_patterns: tuple
    rhs: Expr
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Literal:
    attrs: tuple = ()
    equations: tuple = ()


@dataclass(frozen=True)
class NamedRef:
    name: str
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class TemplateApply:
    name: str
    args: tuple = ()
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Plus:
    base: "ObjectExpr"
    extra: tuple


@dataclass(frozen=True)
class Where:
    base: "ObjectExpr"
    extra: tuple


ObjectExpr = Union[Literal, NamedRef, TemplateApply, Plus, Where]


@dataclass(frozen=True)
class ConstantDef:
    expr: Expr
    unit: UnitExpr | None = None
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Template:
    params: tuple  # of (name, type) with type in {"integer", "string"}
    body: ObjectExpr
    pos: Pos | None = _pos()


# Layout tree

@dataclass(frozen=True)
class StaticText:
    text: str


@dataclass(frozen=True)
class AttrSlot:
    attr: str
    direction: str = "down"
    step: int = 1
    pos: Pos | None = _pos()


@dataclass(frozen=True)
class Row:
    cells: tuple = ()  # of StaticText | AttrSlot | None (an empty cell)


@dataclass(frozen=True)
class LayoutSpec:
    rows: tuple = ()


@dataclass
class Program:
    includes: list = field(default_factory=list)
    units: list = field(default_factory=list)
    bases: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    templates: dict = field(default_factory=dict)
    objects: dict = field(default_factory=dict)
    root: ObjectExpr | None = None       # the unnamed object, if any
    root_name: str | None = None         # otherwise the last named object
    layout: LayoutSpec | None = None

    def root_object(self) -> ObjectExpr | None:
        if self.root is not None:
            return self.root
        if self.root_name is not None:
            return NamedRef(self.root_name)
        return None


# ---------------------------------------------------------------------------
# Values and cellmaps

@dataclass(frozen=True)
class Number:
    value: Decimal | float


@dataclass(frozen=True)
class Text:
    text: str


@dataclass(frozen=True)
class Boolean:
    value: bool


ERROR_KINDS = {"DIV0": "#DIV/0!", "VALUE": "#VALUE!", "NA": "#N/A", "REF": "#REF!"}


@dataclass(frozen=True)
class ErrorVal:
    kind: str

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise ValueError(f"unknown error kind {self.kind}")


@dataclass(frozen=True)
class _Empty:
    def __repr__(self) -> str:
        return "EMPTY"


EMPTY = _Empty()
Value = Union[Number, Text, Boolean, ErrorVal, _Empty]


@dataclass(frozen=True)
class Constant:
    """Cell content holding a value."""
    value: Value


@dataclass(frozen=True)
class Formula:
    expr: Expr


@dataclass(frozen=True)
class CellEntry:
    content: Constant | Formula
    format: str | None = None
    # presentation metadata only: SYLK cannot carry it, so it is excluded
    # from equality to keep write/read round trips exact
    is_header: bool = field(default=False, compare=False)


@dataclass
class CellMap:
    cells: dict = field(default_factory=dict)

    def __getitem__(self, addr: CellAddr) -> CellEntry:
        return self.cells[addr]

    def __contains__(self, addr) -> bool:
        return addr in self.cells

    def __len__(self) -> int:
        return len(self.cells)

    def __eq__(self, other) -> bool:
        return isinstance(other, CellMap) and self.cells == other.cells

    def addresses(self) -> list:
        """Occupied addresses in row-major order."""
        return sorted(self.cells)

    def items(self):
        return sorted(self.cells.items())

    @property
    def extent(self) -> tuple:
        if not self.cells:
            return (0, 0)
        return (max(a.row for a in self.cells), max(a.col for a in self.cells))


@dataclass(frozen=True)
class Allocation:
    """Affine placement of one attribute on the grid."""
    origin: CellAddr
    deltas: tuple = ()  # one (drow, dcol) per base dimension
    base: Base | None = None
    header_cell: CellAddr | None = None


def point_to_addr(alloc: Allocation, point: tuple) -> CellAddr:
    """Grid address of ``point``: origin plus each delta scaled by ordinal-1."""
    factors = base_factors(alloc.base)
    if len(point) != len(factors):
        raise OutOfBase(f"point {point} has arity {len(point)}, base has {len(factors)}")
    row, col = alloc.origin.row, alloc.origin.col
    for coord, factor, (dr, dc) in zip(point, factors, alloc.deltas):
        k = factor.ordinal(coord) - 1
        row += dr * k
        col += dc * k
    return CellAddr(row, col)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def rebuild(e, fn):
    """Rebuild ``e`` bottom-up, applying ``fn`` to every node after its children.

    ``fn`` returns a replacement node (or the node itself).
    """
    if isinstance(e, BinOp):
        e = BinOp(e.op, rebuild(e.left, fn), rebuild(e.right, fn), pos=e.pos)
    elif isinstance(e, Neg):
        e = Neg(rebuild(e.operand, fn), pos=e.pos)
    elif isinstance(e, Call):
        e = Call(e.fn, tuple(rebuild(a, fn) for a in e.args), pos=e.pos)
    elif isinstance(e, AttrRef) and e.indices:
        e = AttrRef(e.attr, tuple(rebuild(i, fn) for i in e.indices), pos=e.pos)
    elif isinstance(e, RangeRef) and e.slice:
        items = tuple(Span(rebuild(s.lo, fn), rebuild(s.hi, fn)) if isinstance(s, Span)
                      else rebuild(s, fn) for s in e.slice)
        e = RangeRef(e.attr, items, pos=e.pos)
    return fn(e)
