"""Compiler passes 5-7: storage allocation, unrolling, and output."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from dataclasses import dataclass, field

from . import model as m
from .diagnostics import CodegenError, IndexOutOfBase, LayoutCollision, at
from .semantics import Env, FlatObject, NotConstant, equation_points, index_coord, instantiate_rhs
from .sylk import constant_text, write_sylk  # noqa: F401  (re-exported)
from .formula import render_formula


@dataclass
class GridPlan:
    alloc: dict = field(default_factory=dict)     # attribute name -> Allocation
    headers: dict = field(default_factory=dict)   # CellAddr -> text
    formats: dict = field(default_factory=dict)   # CellAddr -> format string

    def cells_of(self, name: str) -> list:
        a = self.alloc[name]
        return [m.point_to_addr(a, p) for p in m.iter_points(a.base)]


def header_text(decl: m.AttributeDecl) -> str:
    return " ".join(decl.display_name) if decl.display_name else decl.name


def _cross_deltas(factors, step: int, along: tuple, across: tuple) -> tuple:
    """First dimension runs ``along`` (scaled by ``step``); the rest fill ``across`` in mixed radix."""
    if not factors:
        return ()
    deltas = [(along[0] * step, along[1] * step)]
    rest = [f.cardinality for f in factors[1:]]
    for i in range(len(rest)):
        stride = math.prod(rest[i + 1:])
        deltas.append((across[0] * stride, across[1] * stride))
    return tuple(deltas)


def _width(factors) -> int:
    return math.prod(f.cardinality for f in factors[1:]) if factors else 1


def allocate_default(flat: FlatObject, start_col: int = 1, names=None) -> GridPlan:
    """Attributes side by side from ``start_col``, headers in row 1, data from row 2."""
    plan = GridPlan()
    col = start_col
    for name in (names if names is not None else list(flat.attrs)):
        decl = flat.attrs[name]
        factors = m.base_factors(decl.base)
        origin = m.CellAddr(2, col)
        header = m.CellAddr(1, col)
        plan.alloc[name] = m.Allocation(origin, _cross_deltas(factors, 1, (1, 0), (0, 1)),
                                        decl.base, header)
        plan.headers[header] = header_text(decl)
        if decl.cell_format:
            for addr in plan.cells_of(name):
                plan.formats[addr] = decl.cell_format
        col += _width(factors)
    return plan


def allocate_from_layout(flat: FlatObject, layout: m.LayoutSpec) -> GridPlan:
    """Place attributes where the layout's ``<attr>`` slots say; the rest go to the right."""
    plan = GridPlan()
    max_col = 0
    for r, row in enumerate(layout.rows, start=1):
        for c, cell in enumerate(row.cells, start=1):
            if cell is None:
                continue
            max_col = max(max_col, c)
            addr = m.CellAddr(r, c)
            if isinstance(cell, m.StaticText):
                if cell.text:
                    plan.headers[addr] = cell.text
                continue
            decl = flat.attrs.get(cell.attr)
            if decl is None:
                raise CodegenError(at(cell.pos, f"Layout names unknown attribute {cell.attr}",
                                      "UnknownAttrName"))
            factors = m.base_factors(decl.base)
            if cell.direction == "down":
                deltas = _cross_deltas(factors, cell.step, (1, 0), (0, 1))
            else:
                deltas = _cross_deltas(factors, cell.step, (0, 1), (1, 0))
            plan.alloc[cell.attr] = m.Allocation(addr, deltas, decl.base)
            if decl.cell_format:
                for a in plan.cells_of(cell.attr):
                    plan.formats[a] = decl.cell_format
            max_col = max([max_col] + [a.col for a in plan.cells_of(cell.attr)])
    rest = [n for n in flat.attrs if n not in plan.alloc]
    if rest:
        extra = allocate_default(flat, max_col + 1, rest)
        plan.alloc.update(extra.alloc)
        plan.headers.update(extra.headers)
        plan.formats.update(extra.formats)
    _check_disjoint(plan, flat, layout)
    return plan


def _check_disjoint(plan: GridPlan, flat: FlatObject, layout=None):
    owner = {addr: "static text" for addr in plan.headers}
    slot_pos = {}
    if layout is not None:
        for row in layout.rows:
            for cell in row.cells:
                if isinstance(cell, m.AttrSlot):
                    slot_pos[cell.attr] = cell.pos
    for name in plan.alloc:
        for addr in plan.cells_of(name):
            if addr in owner:
                raise LayoutCollision(at(slot_pos.get(name) or flat.attrs[name].pos,
                                         f"Attribute {name} overlaps {owner[addr]} at {addr.a1}",
                                         "LayoutCollision"))
            owner[addr] = f"attribute {name}"


def allocate(flat: FlatObject, layout: m.LayoutSpec | None = None) -> GridPlan:
    if layout is not None:
        return allocate_from_layout(flat, layout)
    plan = allocate_default(flat)
    _check_disjoint(plan, flat)
    return plan


# ---------------------------------------------------------------------------
# Unrolling

def _literal_constant(e):
    if isinstance(e, m.NumLit):
        return m.Number(e.value)
    if isinstance(e, m.Neg) and isinstance(e.operand, m.NumLit):
        return m.Number(-e.operand.value)
    if isinstance(e, m.StrLit):
        return m.Text(e.text)
    if isinstance(e, m.Call) and not e.args and e.fn.upper() in ("TRUE", "FALSE"):
        return m.Boolean(e.fn.upper() == "TRUE")
    return None


def _coords(flat, attr, literals):
    out = []
    for f, lit in zip(flat.factors(attr), literals):
        out.append(index_coord(f, lit.text if isinstance(lit, m.StrLit) else _frac(lit)))
    return tuple(out)


def _frac(lit):
    if isinstance(lit, m.Neg):
        return -_frac(lit.operand)
    return Fraction(lit.value)


def to_cells(e, flat: FlatObject, plan: GridPlan):
    """Replace attribute references in an instantiated expression by cell references."""
    def fn(node):
        if isinstance(node, m.AttrRef):
            alloc = plan.alloc[node.attr]
            return m.CellRef(m.point_to_addr(alloc, _coords(flat, node.attr, node.indices)))
        if isinstance(node, m.RangeRef):
            return _range_cells(node, flat, plan)
        if isinstance(node, m.NumLit) and node.unit is not None:
            return m.NumLit(node.value)
        if isinstance(node, m.Call):
            return m.Call(node.fn.upper(), node.args)
        return node

    def walk(node):
        if isinstance(node, (m.AttrRef, m.RangeRef)):
            return fn(node)
        if isinstance(node, m.BinOp):
            return m.BinOp(node.op, walk(node.left), walk(node.right))
        if isinstance(node, m.Neg):
            return m.Neg(walk(node.operand))
        if isinstance(node, m.Call):
            return fn(m.Call(node.fn, tuple(walk(a) for a in node.args)))
        if isinstance(node, (m.VarRef, m.ConstRef)):
            raise CodegenError(at(getattr(node, "pos", None), f"Unresolved name {node.name}"))
        return fn(node)
    return walk(e)


def _range_cells(node: m.RangeRef, flat: FlatObject, plan: GridPlan):
    factors = flat.factors(node.attr)
    alloc = plan.alloc[node.attr]
    spans = []
    for k, f in enumerate(factors):
        s = node.slice[k] if node.slice and k < len(node.slice) else None
        if s is None:
            spans.append(list(f.coords()))
        elif isinstance(s, m.Span):
            lo = index_coord(f, s.lo.text if isinstance(s.lo, m.StrLit) else _frac(s.lo))
            hi = index_coord(f, s.hi.text if isinstance(s.hi, m.StrLit) else _frac(s.hi))
            spans.append([c for c in f.coords() if f.ordinal(lo) <= f.ordinal(c) <= f.ordinal(hi)])
        else:
            spans.append([index_coord(f, s.text if isinstance(s, m.StrLit) else _frac(s))])
    addrs = {m.point_to_addr(alloc, p) for p in itertools.product(*spans)}
    if not addrs:
        raise CodegenError(at(node.pos, f"Empty range over {node.attr}"))
    rows = [a.row for a in addrs]
    cols = [a.col for a in addrs]
    start, end = m.CellAddr(min(rows), min(cols)), m.CellAddr(max(rows), max(cols))
    if len(addrs) != (end.row - start.row + 1) * (end.col - start.col + 1):
        raise CodegenError(at(node.pos, f"Range over {node.attr} is not a rectangle of cells",
                              "NonRectangularRange"))
    return m.CellRange(start, end)


def unroll(flat: FlatObject, plan: GridPlan, env: Env) -> m.CellMap:
    """Instantiate every equation at every point it covers."""
    cells: dict = {}
    for addr, text in plan.headers.items():
        cells[addr] = m.CellEntry(m.Constant(m.Text(text)), None, is_header=True)
    for eq in flat.equations:
        alloc = plan.alloc[eq.lhs_attr]
        for point, bindings in equation_points(eq, flat, env):
            try:
                rhs = instantiate_rhs(eq.rhs, bindings, flat, env)
                expr = to_cells(rhs, flat, plan)
            except (m.OutOfBase, NotConstant) as err:
                shown = ",".join(str(v) for v in _point_values(flat, eq.lhs_attr, point))
                raise IndexOutOfBase(at(eq.pos, f"Equation for {eq.lhs_attr} at point [{shown}] "
                                                f"refers outside a base: {err}", "IndexOutOfBase")) from None
            addr = m.point_to_addr(alloc, point)
            const = _literal_constant(expr)
            content = m.Constant(const) if const is not None else m.Formula(expr)
            cells[addr] = m.CellEntry(content, plan.formats.get(addr))
    return m.CellMap(cells)


def _point_values(flat, attr, point):
    from .semantics import coordinate_value
    return [coordinate_value(f, c) for f, c in zip(flat.factors(attr), point)]


# ---------------------------------------------------------------------------
# Text output

def write_cellmap_text(cm: m.CellMap) -> str:
    """One tab-separated line per cell: address, content, format (``-`` if none)."""
    out = []
    for addr, entry in cm.items():
        if isinstance(entry.content, m.Formula):
            body = "=" + render_formula(entry.content.expr, "A1")
        else:
            body = constant_text(entry.content.value)
        out.append(f"{addr.a1}\t{body}\t{entry.format or '-'}")
    return "".join(line + "\n" for line in out)


def read_cellmap_text(text: str) -> m.CellMap:
    """Inverse of :func:`write_cellmap_text`."""
    from .formula import parse_formula
    from .sylk import _parse_constant
    cells = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        addr_s, body, fmt = line.split("\t")
        addr = m.CellAddr.from_a1(addr_s)
        if body.startswith("="):
            content = m.Formula(parse_formula(body[1:], "A1"))
        else:
            content = m.Constant(_parse_constant(body, lineno))
        cells[addr] = m.CellEntry(content, None if fmt == "-" else fmt)
    return m.CellMap(cells)

