"""Canonical MM source text for programs, objects and expressions."""

from __future__ import annotations

import re

from . import model as m
from .formula import decimal_text
from .lexer import escape_text

WIDTH = 72

_PREC = {"=": 1, "<": 1, ">": 1, "<=": 1, ">=": 1, "<>": 1, "&": 2,
         "+": 3, "-": 3, "*": 4, "/": 4, "^": 6}
_NEG = 5
_INDEX = 3  # subscripts and guard bounds are additive expressions
_BARE_FORMAT = re.compile(r"[A-Za-z0-9.:#]+\Z")


def unit_text(u: m.UnitExpr, order=None) -> str:
    return u.render(order)


def expr_text(e, order=None, ctx: int = 0) -> str:
    """Render an MM expression, parenthesising only where precedence demands."""
    def r(node, ctx: int) -> str:
        if isinstance(node, m.NumLit):
            s = decimal_text(node.value)
            if node.unit is not None and not node.unit.dimensionless:
                u = unit_text(node.unit, order)
                s += f" ({u})" if " " in u or "^" in u else f" {u}"
                if ctx >= _PREC["^"]:
                    s = f"({s})"
            return s
        if isinstance(node, m.StrLit):
            return m._quote(node.text)
        if isinstance(node, m.AttrRef):
            if not node.indices:
                return node.attr
            return f"{node.attr}[" + ", ".join(r(i, _INDEX) for i in node.indices) + "]"
        if isinstance(node, m.RangeRef):
            if not node.slice:
                return f"range {node.attr}"
            items = [f"{r(s.lo, _INDEX)}:{r(s.hi, _INDEX)}" if isinstance(s, m.Span) else r(s, _INDEX)
                     for s in node.slice]
            return f"range {node.attr}[" + ", ".join(items) + "]"
        if isinstance(node, m.CellRange):
            return f"range {node.start.a1.lower()}:{node.end.a1.lower()}"
        if isinstance(node, m.CellRef):
            return node.addr.a1.lower()
        if isinstance(node, (m.VarRef, m.ConstRef)):
            return node.name
        if isinstance(node, m.Call):
            return f"{node.fn}(" + ", ".join(r(a, 0) for a in node.args) + ")"
        if isinstance(node, m.Neg):
            s = "-" + r(node.operand, _NEG)
            return f"({s})" if ctx > _NEG else s
        if isinstance(node, m.BinOp):
            p = _PREC[node.op]
            sep = "" if node.op == "^" else " "
            s = r(node.left, p) + sep + node.op + sep + r(node.right, p + 1)
            return f"({s})" if ctx > p else s
        raise TypeError(f"cannot print {type(node).__name__}")

    return r(e, ctx)


def base_text(b, order=None) -> str:
    if isinstance(b, m.IntRange):
        return f"[{b.lo}:{b.hi}]"
    if isinstance(b, m.EnumBase):
        return "{ " + ", ".join(m._quote(x) for x in b.labels) + " }"
    if isinstance(b, m.Product):
        return " * ".join(base_text(f, order) for f in b.factors)
    if isinstance(b, m.BaseRef):
        return b.name
    if isinstance(b, m.RangeSpec):
        return f"[{expr_text(b.lo)}:{expr_text(b.hi)}]"
    raise TypeError(b)


def attr_text(a: m.AttributeDecl, order=None) -> str:
    if a.base is None:
        s = a.name
    elif isinstance(a.base, (m.IntRange, m.RangeSpec)):
        s = a.name + base_text(a.base)
    else:
        s = f"{a.name} : {base_text(a.base)}"
    if a.display_name:
        s += " name " + " br ".join(m._quote(x) for x in a.display_name)
    if a.cell_format:
        fmt = a.cell_format
        s += " format " + (fmt if _BARE_FORMAT.match(fmt) else m._quote(fmt))
    if a.unit is not None:
        s += " unit " + unit_text(a.unit, order)
    return s


def _pattern_text(p) -> str:
    if isinstance(p, m.PointIdx):
        return expr_text(p.expr, ctx=_INDEX)
    if p.op is None:
        return f"all {p.var}"
    return f"all {p.var} {p.op} {expr_text(p.bound, ctx=_INDEX)}"


def equation_text(eq: m.Equation, order=None) -> tuple:
    """(left-hand side, right-hand side) texts."""
    lhs = eq.lhs_attr
    if eq.lhs_patterns:
        lhs += "[" + ", ".join(_pattern_text(p) for p in eq.lhs_patterns) + "]"
    return lhs, expr_text(eq.rhs, order)


def _break_points(text: str) -> list:
    """Indices of spaces outside string literals."""
    out, in_str, i = [], False, 0
    while i < len(text):
        ch = text[i]
        if in_str and ch == "\\":
            i += 2
            continue
        if ch == '"':
            in_str = not in_str
        elif ch == " " and not in_str:
            out.append(i)
        i += 1
    return out


def _wrap(text: str, indent: int, cont: int) -> list:
    """Greedy wrap of ``text`` at spaces outside strings."""
    lines = []
    first = True
    while True:
        pad = indent if first else cont
        if pad + len(text) <= WIDTH:
            lines.append(" " * pad + text)
            return lines
        cut = None
        for bp in _break_points(text):
            if pad + bp <= WIDTH:
                cut = bp
            else:
                break
        if cut is None:
            bps = _break_points(text)
            if not bps:
                lines.append(" " * pad + text)
                return lines
            cut = bps[0]
        lines.append(" " * pad + text[:cut])
        text = text[cut + 1:]
        first = False


def _equation_lines(eq, last: bool, order) -> list:
    lhs, rhs = equation_text(eq, order)
    tail = "" if last else " and"
    one = f"  {lhs} = {rhs}{tail}"
    if len(one) <= WIDTH:
        return [one]
    body = _wrap(rhs + tail, 4, 6)
    if tail and len(body) > 1 and body[-1].strip() == "and":
        # never leave a lone "and": carry the previous line's last word down
        prev = body[-2]
        bps = [b for b in _break_points(prev) if prev[:b].strip()]
        if bps:
            body[-2], body[-1] = prev[:bps[-1]], " " * 6 + prev[bps[-1] + 1:] + tail
    return [f"  {lhs} ="] + body


def layout_text(layout: m.LayoutSpec) -> list:
    lines = ["layout", "<table>"]
    for row in layout.rows:
        cells = list(row.cells)
        while cells and cells[-1] is None:
            cells.pop()
        parts = []
        for c in cells:
            if c is None:
                parts.append("<td></td>")
            elif isinstance(c, m.StaticText):
                parts.append(f"<td>{escape_text(c.text)}</td>")
            else:
                extra = ""
                if c.direction != "down":
                    extra += f' direction="{c.direction}"'
                if c.step != 1:
                    extra += f' step="{c.step}"'
                parts.append(f'<td><attr name="{c.attr}"{extra}/></td>')
        parts = ["<tr>"] + parts
        parts[-1] += "</tr>"
        line = "  "
        for part in parts:
            if len(line) + len(part) > WIDTH and "<td" in line:
                lines.append(line)
                line = "      "
            line += part
        lines.append(line)
    lines.append("</table>")
    return lines


def object_lines(obj, order=None) -> list:
    if isinstance(obj, m.Literal):
        lines = ["attributes <"]
        for a in obj.attrs:
            lines += _wrap(attr_text(a, order), 2, 4)
        lines.append(">")
        if obj.equations:
            lines.append("where")
            for i, eq in enumerate(obj.equations):
                lines += _equation_lines(eq, i == len(obj.equations) - 1, order)
        return lines
    if isinstance(obj, m.NamedRef):
        return [obj.name]
    if isinstance(obj, m.TemplateApply):
        return [f"{obj.name}(" + ", ".join(expr_text(a) for a in obj.args) + ")"]
    if isinstance(obj, m.Plus):
        inner = object_lines(obj.base, order)
        inner[-1] += " plus attributes <"
        for a in obj.extra:
            inner += _wrap(attr_text(a, order), 2, 4)
        return inner + [">"]
    if isinstance(obj, m.Where):
        if isinstance(obj.base, m.Literal):
            return object_lines(m.Literal(obj.base.attrs, obj.base.equations + tuple(obj.extra)), order)
        lines = object_lines(obj.base, order) + ["where"]
        for i, eq in enumerate(obj.extra):
            lines += _equation_lines(eq, i == len(obj.extra) - 1, order)
        return lines
    raise TypeError(obj)


def pretty_print(p: m.Program) -> str:
    """Canonical source text for a whole program; re-parses to an equal program."""
    order = list(p.units)
    out = [f'include "{name}"' for name in p.includes]
    out += [f"unit {u}" for u in p.units]
    for name, b in p.bases.items():
        out.append(f"base {name} = {base_text(b)}")
    for name, c in p.constants.items():
        unit = f": {unit_text(c.unit, order)} " if c.unit is not None else ""
        out.append(f"constant {name} {unit}= {expr_text(c.expr, order)}")
    for name, t in p.templates.items():
        params = ", ".join(f"{n}:{ty}" for n, ty in t.params)
        body = object_lines(t.body, order)
        out.append(f"{name}( {params} ) = {body[0]}")
        out += body[1:]
    for name, obj in p.objects.items():
        body = object_lines(obj, order)
        out.append(f"{name} = {body[0]}")
        out += body[1:]
    if p.root is not None:
        out += object_lines(p.root, order)
    if p.layout is not None:
        out += layout_text(p.layout)
    return "\n".join(out) + "\n"
