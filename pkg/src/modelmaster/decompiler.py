"""Spreadsheet to MM: trivial lifting and the structure-recovering transformations.

A cellmap is first lifted into a *trivial* program: one scalar attribute per
cell, named after its address, with a layout that reproduces the sheet.  The
commands below then rewrite that program step by step.  Each command preserves
the compiled cellmap, so ``compile(transform(lift(cm)))`` always equals ``cm``.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, replace
from decimal import Decimal

from . import model as m
from .diagnostics import NothingToRoll, RebaseShapeMismatch, TransformError, UnknownName
from .graph import references
from .lexer import KEYWORDS, tokenize
from .parser import Parser
from .semantics import Env, NotConstant, literal_of

ROLL_VARS = ("i", "j", "k", "l", "n", "p", "q")


# ---------------------------------------------------------------------------
# Working representation

@dataclass
class _Work:
    """Mutable view of a lifted program: attribute list, equations, layout grid."""
    attrs: list
    equations: list
    grid: dict          # CellAddr -> StaticText | AttrSlot
    program: m.Program

    @classmethod
    def of(cls, p: m.Program) -> "_Work":
        root = p.root
        if isinstance(root, m.Where) and isinstance(root.base, m.Literal):
            root = m.Literal(root.base.attrs, root.base.equations + tuple(root.extra))
        if not isinstance(root, m.Literal):
            raise TransformError("Transformations need a program whose root is a single attribute list")
        grid = {}
        if p.layout is not None:
            for r, row in enumerate(p.layout.rows, start=1):
                for c, cell in enumerate(row.cells, start=1):
                    if cell is not None:
                        grid[m.CellAddr(r, c)] = cell
        return cls(list(root.attrs), list(root.equations), grid, p)

    def build(self) -> m.Program:
        layout = None
        if self.grid:
            nrows = max(a.row for a in self.grid)
            rows = []
            for r in range(1, nrows + 1):
                cols = [a.col for a in self.grid if a.row == r]
                width = max(cols) if cols else 0
                rows.append(m.Row(tuple(self.grid.get(m.CellAddr(r, c)) for c in range(1, width + 1))))
            layout = m.LayoutSpec(tuple(rows))
        return replace(self.program, root=m.Literal(tuple(self.attrs), tuple(self.equations)),
                       root_name=None, layout=layout)

    def decl(self, name: str) -> m.AttributeDecl:
        for a in self.attrs:
            if a.name == name:
                return a
        raise UnknownName(f"No attribute named {name}")

    def names(self) -> set:
        return {a.name for a in self.attrs}

    def factors(self, name: str) -> tuple:
        try:
            base = Env(self.program).resolve_base(self.decl(name).base)
        except (KeyError, ValueError, NotConstant) as err:
            raise TransformError(f"Cannot resolve the base of {name}: {err}") from None
        return m.base_factors(base)

    def slot_of(self, name: str):
        for addr, cell in self.grid.items():
            if isinstance(cell, m.AttrSlot) and cell.attr == name:
                return addr, cell
        return None, None

    def occupancy(self) -> dict:
        """Grid address -> attribute name, for every cell a placed attribute fills."""
        out = {}
        for addr, cell in self.grid.items():
            if not isinstance(cell, m.AttrSlot):
                continue
            factors = self.factors(cell.attr)
            for point in _slot_points(factors):
                out[_slot_addr(addr, cell, factors, point)] = cell.attr
        return out

    def referenced(self) -> set:
        """Attribute names some equation reads, including via raw cell ranges."""
        names = set()
        occ = None
        for eq in self.equations:
            for node in m.walk(eq.rhs):
                if isinstance(node, (m.AttrRef, m.RangeRef)):
                    names.add(node.attr)
                elif isinstance(node, (m.CellRef, m.CellRange)):
                    if occ is None:
                        occ = self.occupancy()
                    for a in references(node):
                        if a in occ:
                            names.add(occ[a])
        return names


def _slot_points(factors):
    return list(m.iter_points(m.make_base(factors))) if factors else [()]


def _slot_addr(origin: m.CellAddr, slot: m.AttrSlot, factors, point) -> m.CellAddr:
    from .codegen import _cross_deltas
    if slot.direction == "down":
        deltas = _cross_deltas(factors, slot.step, (1, 0), (0, 1))
    else:
        deltas = _cross_deltas(factors, slot.step, (0, 1), (1, 0))
    alloc = m.Allocation(origin, deltas, m.make_base(factors))
    return m.point_to_addr(alloc, point)


def _map_rhs(eq: m.Equation, fn) -> m.Equation:
    return replace(eq, rhs=m.rebuild(eq.rhs, fn))


# ---------------------------------------------------------------------------
# Trivial lifting

def cell_name(addr: m.CellAddr) -> str:
    return addr.a1.lower()


def _value_expr(v) -> m.Expr:
    if isinstance(v, m.Text):
        return m.StrLit(v.text)
    if isinstance(v, m.Boolean):
        return m.Call("true" if v.value else "false")
    if isinstance(v, m.Number):
        d = v.value if isinstance(v.value, Decimal) else Decimal(repr(v.value))
        return m.Neg(m.NumLit(-d)) if d < 0 else m.NumLit(d)
    raise TransformError(f"Cannot lift value {v!r}")


def _lift_expr(e) -> m.Expr:
    def fn(node):
        if isinstance(node, m.CellRef):
            return m.AttrRef(cell_name(node.addr))
        if isinstance(node, m.Call):
            return m.Call(node.fn.lower(), node.args)
        if isinstance(node, m.NumLit) and node.value < 0:
            return m.Neg(m.NumLit(-node.value))
        return node
    return m.rebuild(e, fn)


def lift_trivial(cm: m.CellMap) -> m.Program:
    """One scalar attribute per cell, in column-major order, laid out where the cell was."""
    cells = set(cm.cells)
    for entry in cm.cells.values():
        if isinstance(entry.content, m.Formula):
            cells.update(references(entry.content.expr))
    attrs, equations, rows = [], [], {}
    for addr in sorted(cells, key=lambda a: (a.col, a.row)):
        name = cell_name(addr)
        entry = cm.cells.get(addr)
        attrs.append(m.AttributeDecl(name, cell_format=entry.format if entry else None))
        if entry is not None:
            content = entry.content
            rhs = (_lift_expr(content.expr) if isinstance(content, m.Formula)
                   else _value_expr(content.value))
            equations.append(m.Equation(name, (), rhs))
        rows.setdefault(addr.row, {})[addr.col] = m.AttrSlot(name)
    layout = None
    if rows:
        layout = m.LayoutSpec(tuple(
            m.Row(tuple(rows.get(r, {}).get(c) for c in range(1, max(rows.get(r, {0: 0})) + 1)))
            for r in range(1, max(rows) + 1)))
    return m.Program(root=m.Literal(tuple(attrs), tuple(equations)), layout=layout)


# ---------------------------------------------------------------------------
# Header stripping

def _text_constants(w: _Work) -> dict:
    """Scalar attributes defined by one non-empty string literal: name -> text."""
    eqs = defaultdict(list)
    for eq in w.equations:
        eqs[eq.lhs_attr].append(eq)
    out = {}
    for a in w.attrs:
        found = eqs.get(a.name, [])
        if (a.base is None and len(found) == 1 and isinstance(found[0].rhs, m.StrLit)
                and found[0].rhs.text and not found[0].lhs_patterns):
            out[a.name] = found[0].rhs.text
    return out


def _to_static(w: _Work, names: set) -> m.Program:
    for addr, cell in list(w.grid.items()):
        if isinstance(cell, m.AttrSlot) and cell.attr in names:
            w.grid[addr] = m.StaticText(_text_constants(w)[cell.attr])
    w.attrs = [a for a in w.attrs if a.name not in names]
    w.equations = [eq for eq in w.equations if eq.lhs_attr not in names]
    return w.build()


def strip_headers(p: m.Program) -> m.Program:
    """Every placed, unreferenced text constant becomes static layout text."""
    w = _Work.of(p)
    texts = _text_constants(w)
    used = w.referenced()
    placed = {c.attr for c in w.grid.values() if isinstance(c, m.AttrSlot)}
    return _to_static(w, {n for n in texts if n not in used and n in placed})


def auto_static(p: m.Program) -> m.Program:
    """Like :func:`strip_headers`, but only for text that labels a non-text cell
    below it in its column or to its right in its row."""
    w = _Work.of(p)
    texts = _text_constants(w)
    used = w.referenced()
    occ = w.occupancy()
    data = [a for a, n in occ.items() if n not in texts]
    chosen = set()
    for addr, cell in w.grid.items():
        if not isinstance(cell, m.AttrSlot) or cell.attr not in texts or cell.attr in used:
            continue
        if any((d.col == addr.col and d.row > addr.row) or (d.row == addr.row and d.col > addr.col)
               for d in data):
            chosen.add(cell.attr)
    return _to_static(w, chosen)


# ---------------------------------------------------------------------------
# Renaming

def _check_new_name(new: str):
    if not m.is_ident(new) or new in KEYWORDS:
        raise TransformError(f"{new!r} is not a valid attribute name")


def rename(p: m.Program, old: str, new: str) -> m.Program:
    w = _Work.of(p)
    w.decl(old)
    _check_new_name(new)
    if new != old and (new in w.names() or new in p.constants):
        raise TransformError(f"Cannot rename {old} to {new}: that name is already in use")

    def fn(node):
        if isinstance(node, m.AttrRef) and node.attr == old:
            return replace(node, attr=new)
        if isinstance(node, m.RangeRef) and node.attr == old:
            return replace(node, attr=new)
        return node

    w.attrs = [replace(a, name=new) if a.name == old else a for a in w.attrs]
    w.equations = [_map_rhs(replace(eq, lhs_attr=new) if eq.lhs_attr == old else eq, fn)
                   for eq in w.equations]
    w.grid = {addr: replace(c, attr=new) if isinstance(c, m.AttrSlot) and c.attr == old else c
              for addr, c in w.grid.items()}
    return w.build()


# ---------------------------------------------------------------------------
# Rebasing

def _coord_literal(factor, coord) -> m.Expr:
    if isinstance(factor, m.EnumBase):
        return m.StrLit(factor.labels[coord - 1])
    return literal_of(coord)


def _expand_cells(spec: str, order: str, ndims: int = 1) -> list:
    """``b5..c9`` -> addresses in point order; a bare name -> that name.

    ``order`` says which way the first dimension runs: down a column or
    along a row.  With two dimensions the second runs the other way.
    """
    if ".." not in spec:
        return [spec]
    a, b = spec.split("..", 1)
    try:
        start, end = m.CellAddr.from_a1(a), m.CellAddr.from_a1(b)
    except ValueError:
        raise TransformError(f"Bad cell range {spec}") from None
    r0, r1 = sorted((start.row, end.row))
    c0, c1 = sorted((start.col, end.col))
    if (order == "column") == (ndims == 1):
        return [m.CellAddr(r, c) for c in range(c0, c1 + 1) for r in range(r0, r1 + 1)]
    return [m.CellAddr(r, c) for r in range(r0, r1 + 1) for c in range(c0, c1 + 1)]


def rebase(p: m.Program, new: str, base, cells, order: str = "column") -> m.Program:
    """Fold scalar attributes into one attribute ``new`` over ``base``.

    ``cells`` lists the members in point order (row-major over the index
    space); each item is an attribute name or a ``b5..b9`` cell range, which is
    expanded in ``order``.  Blank positions become points with no equation.
    """
    if order not in ("column", "row"):
        raise TransformError(f"Rebase order must be column or row, not {order}")
    if isinstance(cells, str):
        cells = [cells]
    w = _Work.of(p)
    factors = m.base_factors(base)
    if not 1 <= len(factors) <= 2:
        raise TransformError("Rebase takes a base of one or two factors")
    _check_new_name(new)
    occ = w.occupancy()
    members = []                       # (addr, name or None)
    for spec in cells:
        for item in _expand_cells(spec, order, len(factors)):
            if isinstance(item, m.CellAddr):
                cell = w.grid.get(item)
                if isinstance(cell, m.StaticText):
                    raise TransformError(f"Cell {item.a1} holds static text, not an attribute")
                name = occ.get(item)
                members.append((item, name))
            else:
                addr, slot = w.slot_of(item)
                w.decl(item)
                if slot is None:
                    raise TransformError(f"Attribute {item} has no place in the layout")
                members.append((addr, item))
    points = list(m.iter_points(m.make_base(factors)))
    if len(members) != len(points):
        raise RebaseShapeMismatch(f"Base has {len(points)} points but {len(members)} cells were given")
    named = [n for _, n in members if n is not None]
    if not named:
        raise TransformError("Rebase needs at least one attribute")
    if len(set(named)) != len(named):
        raise TransformError("Rebase lists the same attribute twice")
    decls = {n: w.decl(n) for n in named}
    for n, d in decls.items():
        if d.base is not None:
            raise TransformError(f"Attribute {n} is not scalar")
        if d.unit != decls[named[0]].unit:
            raise TransformError(f"Attributes {named[0]} and {n} have different units")
    formats = {d.cell_format for d in decls.values()}
    if len(formats) > 1:
        raise RebaseShapeMismatch("Rebased cells carry different formats: " + ", ".join(
            sorted(str(f) for f in formats)))
    if new in w.names() and new not in decls:
        raise TransformError(f"Attribute {new} already exists")
    for addr, n in members:
        if n is None and addr in w.grid:
            raise TransformError(f"Cell {addr.a1} is occupied")

    slot = _fit_slot(factors, points, [a for a, _ in members])
    origin = members[0][0]
    point_of = {n: pt for (_, n), pt in zip(members, points) if n is not None}
    addr_point = {a: pt for (a, _), pt in zip(members, points)}

    def index_of(pt):
        return tuple(_coord_literal(f, c) for f, c in zip(factors, pt))

    def fn(node):
        if isinstance(node, m.AttrRef) and node.attr in point_of and not node.indices:
            return m.AttrRef(new, index_of(point_of[node.attr]), pos=node.pos)
        if isinstance(node, m.CellRange):
            return _range_to_slice(node, new, factors, addr_point, index_of) or node
        return node

    new_decl = m.AttributeDecl(new, m.make_base(factors), decls[named[0]].unit,
                               cell_format=formats.pop())
    attrs = []
    for a in w.attrs:
        if a.name not in decls:
            attrs.append(a)
        elif new_decl not in attrs:
            attrs.append(new_decl)
    w.attrs = attrs
    eqs = []
    for eq in w.equations:
        if eq.lhs_attr in point_of and not eq.lhs_patterns:
            pts = tuple(m.PointIdx(x) for x in index_of(point_of[eq.lhs_attr]))
            eq = replace(eq, lhs_attr=new, lhs_patterns=pts)
        eqs.append(_map_rhs(eq, fn))
    w.equations = eqs
    for addr, _ in members:
        w.grid.pop(addr, None)
    w.grid[origin] = m.AttrSlot(new, slot[0], slot[1])
    return w.build()


def _fit_slot(factors, points, addrs) -> tuple:
    """The (direction, step) whose allocation puts each point at its address."""
    for direction in ("down", "right"):
        for step in _candidate_steps(addrs):
            slot = m.AttrSlot("_", direction, step)
            try:
                if all(_slot_addr(addrs[0], slot, factors, pt) == a for pt, a in zip(points, addrs)):
                    return direction, step
            except ValueError:
                continue
    raise RebaseShapeMismatch("The cells do not form a regular column or row the base can map onto")


def _candidate_steps(addrs) -> list:
    if len(addrs) < 2:
        return [1]
    d = abs(addrs[1].row - addrs[0].row) + abs(addrs[1].col - addrs[0].col)
    return sorted({1, max(d, 1)})


def _range_to_slice(node: m.CellRange, new, factors, addr_point, index_of):
    cells = list(node.cells())
    if not all(a in addr_point for a in cells):
        return None
    pts = [addr_point[a] for a in cells]
    spans = []
    for k, f in enumerate(factors):
        ords = sorted({f.ordinal(pt[k]) if isinstance(f, m.IntRange) else pt[k] for pt in pts})
        lo, hi = ords[0], ords[-1]
        if ords != list(range(lo, hi + 1)):
            return None
        spans.append((lo, hi))
    if len(pts) != _box_size(spans):
        return None
    items = []
    for f, (lo, hi) in zip(factors, spans):
        clo, chi = _ord_coord(f, lo), _ord_coord(f, hi)
        if lo == hi:
            items.append(_coord_literal(f, clo))
        else:
            items.append(m.Span(_coord_literal(f, clo), _coord_literal(f, chi)))
    while items and spans[len(items) - 1] == (1, factors[len(items) - 1].cardinality):
        items.pop()
    return m.RangeRef(new, tuple(items) if items else None, pos=node.pos)


def _box_size(spans) -> int:
    n = 1
    for lo, hi in spans:
        n *= hi - lo + 1
    return n


def _ord_coord(f, ordinal):
    return f.lo + ordinal - 1 if isinstance(f, m.IntRange) else ordinal


# ---------------------------------------------------------------------------
# Rolling

def _int_leaf(e):
    """The integer a literal leaf denotes, or None."""
    if isinstance(e, m.Neg):
        v = _int_leaf(e.operand)
        return -v if v is not None else None
    if isinstance(e, m.NumLit) and (e.unit is None or e.unit.dimensionless) \
            and e.value == e.value.to_integral_value():
        return int(e.value)
    return None


def _offset(var: str, k: int) -> m.Expr:
    if k == 0:
        return m.VarRef(var)
    if k > 0:
        return m.BinOp("+", m.VarRef(var), literal_of(k))
    return m.BinOp("-", m.VarRef(var), literal_of(-k))


def anti_unify(e1, c1, e2, c2, var: str, factor):
    """Generalise two instances (at coordinates ``c1`` and ``c2``) into one
    template over ``var``, or return None if they differ in shape."""
    if isinstance(factor, m.IntRange):
        v1, v2 = _int_leaf(e1), _int_leaf(e2)
        if v1 is not None and v2 is not None:
            if v1 == v2:
                return e1
            if v1 - c1 == v2 - c2:
                return _offset(var, v1 - c1)
            return None
    elif isinstance(e1, m.StrLit) and isinstance(e2, m.StrLit):
        if e1.text == e2.text:
            return e1
        if e1.text == factor.labels[c1 - 1] and e2.text == factor.labels[c2 - 1]:
            return m.VarRef(var)
        return None
    if type(e1) is not type(e2):
        return None

    def sub(a, b):
        return anti_unify(a, c1, b, c2, var, factor)

    if isinstance(e1, m.BinOp):
        if e1.op != e2.op:
            return None
        left, right = sub(e1.left, e2.left), sub(e1.right, e2.right)
        return None if left is None or right is None else m.BinOp(e1.op, left, right)
    if isinstance(e1, m.Neg):
        inner = sub(e1.operand, e2.operand)
        return None if inner is None else m.Neg(inner)
    if isinstance(e1, m.Call):
        if e1.fn != e2.fn or len(e1.args) != len(e2.args):
            return None
        args = [sub(a, b) for a, b in zip(e1.args, e2.args)]
        return None if any(a is None for a in args) else m.Call(e1.fn, tuple(args))
    if isinstance(e1, m.AttrRef):
        if e1.attr != e2.attr or len(e1.indices) != len(e2.indices):
            return None
        ix = [sub(a, b) for a, b in zip(e1.indices, e2.indices)]
        return None if any(x is None for x in ix) else m.AttrRef(e1.attr, tuple(ix))
    if isinstance(e1, m.RangeRef):
        if e1.attr != e2.attr or (e1.slice is None) != (e2.slice is None):
            return None
        if e1.slice is None:
            return e1
        if len(e1.slice) != len(e2.slice):
            return None
        items = []
        for a, b in zip(e1.slice, e2.slice):
            if isinstance(a, m.Span) != isinstance(b, m.Span):
                return None
            if isinstance(a, m.Span):
                lo, hi = sub(a.lo, b.lo), sub(a.hi, b.hi)
                if lo is None or hi is None:
                    return None
                items.append(m.Span(lo, hi))
            else:
                x = sub(a, b)
                if x is None:
                    return None
                items.append(x)
        return m.RangeRef(e1.attr, tuple(items))
    return e1 if e1 == e2 else None


def _pattern_coord(pattern, factor):
    if not isinstance(pattern, m.PointIdx):
        return None
    if isinstance(factor, m.EnumBase):
        if isinstance(pattern.expr, m.StrLit) and pattern.expr.text in factor.labels:
            return factor.label_ordinal(pattern.expr.text)
        return None
    v = _int_leaf(pattern.expr)
    return v if v is not None and factor.lo <= v <= factor.hi else None


def _guard(factor, var, lo, hi):
    """The ``all`` pattern covering coordinates lo..hi, or None if none exists."""
    first, last = (1, factor.cardinality) if isinstance(factor, m.EnumBase) else (factor.lo, factor.hi)
    if lo == first and hi == last:
        return m.AllIdx(var)
    if isinstance(factor, m.EnumBase):
        return None
    if hi == last:
        return m.AllIdx(var, ">", literal_of(lo - 1))
    if lo == first:
        return m.AllIdx(var, "<", literal_of(hi + 1))
    return None


def roll(p: m.Program, attr: str, var: str, dim: int = 1) -> m.Program:
    """Replace runs of point equations along dimension ``dim`` (1-based) by
    quantified equations over ``var``."""
    w = _Work.of(p)
    factors = w.factors(attr)
    if not 1 <= dim <= len(factors):
        raise TransformError(f"Attribute {attr} has no dimension {dim}")
    if not m.is_ident(var) or var in KEYWORDS or var in w.names() or var in p.constants:
        raise TransformError(f"Cannot use {var} as a quantifier variable")
    factor = factors[dim - 1]
    k = dim - 1
    groups = defaultdict(list)
    for idx, eq in enumerate(w.equations):
        if eq.lhs_attr != attr or len(eq.lhs_patterns) != len(factors):
            continue
        c = _pattern_coord(eq.lhs_patterns[k], factor)
        if c is None:
            continue
        if any(isinstance(q, m.AllIdx) and q.var == var for q in eq.lhs_patterns):
            continue
        if any(isinstance(n, m.VarRef) and n.name == var for n in m.walk(eq.rhs)):
            continue
        key = eq.lhs_patterns[:k] + eq.lhs_patterns[k + 1:]
        groups[key].append((factor.ordinal(c) if isinstance(factor, m.IntRange) else c, c, idx))

    replaced, removed = {}, set()
    for key, items in groups.items():
        items.sort()
        for run, template in _runs(items, w.equations, var, factor):
            lo, hi = run[0][1], run[-1][1]
            g = _guard(factor, var, lo, hi)
            if g is None:
                continue
            first = min(i for _, _, i in run)
            pats = key[:k] + (g,) + key[k:]
            replaced[first] = m.Equation(attr, pats, template, pos=w.equations[first].pos)
            removed.update(i for _, _, i in run if i != first)
    if not replaced:
        raise NothingToRoll(f"No run of equations for {attr} along dimension {dim} can be rolled")
    w.equations = [replaced.get(i, eq) for i, eq in enumerate(w.equations) if i not in removed]
    return w.build()


def _runs(items, equations, var, factor):
    """Greedy maximal runs of consecutive coordinates sharing one template."""
    out = []
    i = 0
    while i < len(items):
        run, template = [items[i]], None
        j = i + 1
        while j < len(items) and items[j][0] == run[-1][0] + 1:
            _, c0, i0 = run[0]
            _, cj, ij = items[j]
            t = anti_unify(equations[i0].rhs, c0, equations[ij].rhs, cj, var, factor)
            if t is None or (template is not None and t != template):
                break
            template = t
            run.append(items[j])
            j += 1
        if len(run) >= 2:
            out.append((run, template))
        i = j
    return out


def auto_roll(p: m.Program) -> tuple:
    """Roll every dimension of every multi-point attribute; returns (program, notes)."""
    notes = []
    w = _Work.of(p)
    taken = w.names() | set(p.constants)
    for a in list(w.attrs):
        factors = w.factors(a.name)
        vars_ = [v for v in ROLL_VARS if v not in taken]
        for dim in range(1, len(factors) + 1):
            var = vars_[dim - 1] if dim - 1 < len(vars_) else f"v{dim}"
            try:
                p = roll(p, a.name, var, dim)
                notes.append(f"rolled {a.name} along dimension {dim}")
            except NothingToRoll:
                pass
    return p, notes


# ---------------------------------------------------------------------------
# Transformation scripts

@dataclass(frozen=True)
class Command:
    name: str
    args: tuple
    line: int


_NAME = r"[A-Za-z_][A-Za-z0-9_]*"


def _split_base(text: str) -> tuple:
    """Split ``[1:5]*[1:3] rest`` into the base text and the rest."""
    i, n = 0, len(text)
    while True:
        while i < n and text[i].isspace():
            i += 1
        if i >= n or text[i] not in "[{(":
            break
        depth = 0
        while i < n:
            depth += text[i] in "[{("
            depth -= text[i] in "]})"
            i += 1
            if depth == 0:
                break
        j = i
        while j < n and text[j].isspace():
            j += 1
        if j < n and text[j] == "*":
            i = j + 1
            continue
        break
    return text[:i].strip(), text[i:].strip()


def parse_base(text: str):
    """A literal base such as ``[1:5]`` or ``[1:3]*{"a","b"}``."""
    try:
        parser = Parser(tokenize(text))
        term = parser.base_expr()
        if parser.peek() is not None:
            raise TransformError(f"Unexpected text after base: {text}")
        return Env(m.Program()).resolve_base(term)
    except TransformError:
        raise
    except Exception as err:
        raise TransformError(f"Bad base {text!r}: {err}") from None


def parse_script(text: str) -> list:
    cmds = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        args = rest.split()
        if word in ("strip-headers", "auto-static", "auto-roll"):
            if args:
                raise TransformError(f"line {lineno}: {word} takes no arguments")
            cmds.append(Command(word, (), lineno))
        elif word == "rename":
            if len(args) != 2:
                raise TransformError(f"line {lineno}: usage: rename OLD NEW")
            cmds.append(Command(word, tuple(args), lineno))
        elif word == "roll":
            if len(args) not in (2, 3) or (len(args) == 3 and not args[2].isdigit()):
                raise TransformError(f"line {lineno}: usage: roll ATTR VAR [DIM]")
            dim = int(args[2]) if len(args) == 3 else 1
            cmds.append(Command(word, (args[0], args[1], dim), lineno))
        elif word == "rebase":
            mt = re.match(rf"({_NAME})\s+(.*)$", rest)
            if not mt:
                raise TransformError(f"line {lineno}: usage: rebase NEW BASE [from] CELLS [column|row]")
            base_text, tail = _split_base(mt.group(2))
            parts = tail.replace(",", " ").split()
            order = "column"
            if parts and parts[-1] in ("column", "row"):
                order = parts.pop()
            if parts and parts[0] == "from":
                parts.pop(0)
            if not parts:
                raise TransformError(f"line {lineno}: rebase needs cells")
            try:
                base = parse_base(base_text)
            except TransformError as err:
                raise TransformError(f"line {lineno}: {err}") from None
            cmds.append(Command(word, (mt.group(1), base, tuple(parts), order), lineno))
        else:
            raise TransformError(f"line {lineno}: unknown command {word!r}")
    return cmds


def apply_command(p: m.Program, cmd: Command) -> tuple:
    """Apply one command; returns (program, notes)."""
    if cmd.name == "strip-headers":
        return strip_headers(p), []
    if cmd.name == "auto-static":
        return auto_static(p), []
    if cmd.name == "rename":
        return rename(p, *cmd.args), []
    if cmd.name == "rebase":
        new, base, cells, order = cmd.args
        return rebase(p, new, base, cells, order), []
    if cmd.name == "roll":
        return roll(p, *cmd.args), []
    if cmd.name == "auto-roll":
        return auto_roll(p)
    raise TransformError(f"unknown command {cmd.name}")


def run_script(p: m.Program, text: str) -> tuple:
    """Apply a transformation script.  Returns (program, notes).

    A ``roll`` that finds nothing to roll is recorded as a note, not an error.
    """
    notes = []
    for cmd in parse_script(text):
        try:
            p, more = apply_command(p, cmd)
            notes += more
        except NothingToRoll as err:
            notes.append(f"line {cmd.line}: {err}")
        except TransformError as err:
            raise type(err)(f"line {cmd.line}: {err}") from None
    return p, notes


def decompile(cm: m.CellMap, script: str | None = None) -> tuple:
    """Lift a cellmap and optionally run a script; returns (program, notes)."""
    p = lift_trivial(cm)
    if script:
        return run_script(p, script)
    return p, []
