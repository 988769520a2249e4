"""Recursive-descent parser from MM tokens to a :class:`Program`.

The grammar is the union of every form the MM corpus uses; the full EBNF
lives in ``docs/grammar.ebnf``.  Statement terminators are optional, the
attribute block may be written ``attributes < ... >``, ``attribute < ... >``
or bare ``< ... >``, and ``name [ base ]`` means the same as ``name : base``.
"""

from __future__ import annotations

import re
from decimal import Decimal

from . import model as m
from .diagnostics import Diagnostic, MMSyntaxError
from .lexer import Token, tokenize

_A1 = re.compile(r"[A-Za-z]{1,3}[0-9]+\Z")
_TOP_LEVEL = {"include", "unit", "base", "constant", "layout"}
_CMP = ("=", "<>", "<", ">", "<=", ">=")


class _Fail(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


class Parser:
    def __init__(self, tokens):
        self.toks = [t for t in tokens if t.kind != "comment"]
        self.i = 0
        self.diags: list[Diagnostic] = []
        self.units: set[str] = set()
        self.bound: set[str] = set()

    # -- token helpers -----------------------------------------------------

    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, kind: str, text: str | None = None, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.is_(kind, text)

    def at_punct(self, *texts, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.kind == "punctuation" and t.text in texts

    def at_kw(self, *words, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.kind == "keyword" and t.text in words

    def next(self) -> Token:
        t = self.peek()
        if t is None:
            self.fail("Unexpected end of input")
        self.i += 1
        return t

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.next()
        return None

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> Token:
        if self.at(kind, text):
            return self.next()
        self.fail("Expected " + (what or (repr(text) if text else kind)))

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else None
            line, col = (last.line, last.end_col) if last else (1, 1)
            found = "end of input"
        else:
            line, col = tok.line, tok.col
            found = repr(tok.text)
        raise _Fail(Diagnostic(line, col, f"{message}, found {found}", "error", "SyntaxError"))

    def semicolon(self):
        while self.accept("punctuation", ";"):
            pass

    # -- program -----------------------------------------------------------

    def program(self) -> m.Program:
        prog = m.Program()
        last_named = None
        while self.peek() is not None:
            start = self.i
            try:
                t = self.peek()
                if t.is_("keyword", "include"):
                    self.next()
                    prog.includes.append(self.expect("string", what="file name").value)
                elif t.is_("keyword", "unit"):
                    self.next()
                    sym = self.unit_symbol()
                    self.units.add(sym)
                    prog.units.append(sym)
                elif t.is_("keyword", "base"):
                    self.next()
                    name = self.expect("ident", what="base name")
                    self.expect("punctuation", "=")
                    self.define(prog.bases, name, self.base_expr())
                elif t.is_("keyword", "constant"):
                    self.next()
                    name = self.expect("ident", what="constant name")
                    unit = None
                    if self.accept("punctuation", ":"):
                        unit = self.unit_expr()
                    self.expect("punctuation", "=")
                    expr = self.expr()
                    self.define(prog.constants, name, m.ConstantDef(expr, unit, pos=name.pos))
                elif t.is_("keyword", "layout"):
                    prog.layout = self.layout()
                elif t.kind == "ident" and self.at_punct("=", k=1):
                    name = self.next()
                    self.next()
                    self.define(prog.objects, name, self.object_expr())
                    last_named = name.text
                elif t.kind == "ident" and self.at_punct("(", k=1) and self.is_template_def():
                    name = self.next()
                    params = self.template_params()
                    self.expect("punctuation", "=")
                    body = self.object_expr()
                    self.define(prog.templates, name, m.Template(params, body, pos=name.pos))
                else:
                    obj = self.object_expr()
                    if prog.root is not None:
                        self.diags.append(Diagnostic(t.line, t.col, "A program may have only one unnamed object",
                                                     "error", "SyntaxError"))
                    prog.root = obj
                self.semicolon()
            except _Fail as f:
                self.diags.append(f.diag)
                self.sync_top(start)
        if prog.root is None:
            prog.root_name = last_named
        return prog

    def define(self, table: dict, name: Token, value):
        if name.text in table:
            self.diags.append(Diagnostic(name.line, name.col, f"Duplicate definition of {name.text}",
                                         "error", "DuplicateDefinition"))
            return
        table[name.text] = value

    def sync_top(self, start: int):
        if self.i == start:
            self.i += 1
        while self.peek() is not None:
            t = self.peek()
            if t.kind == "keyword" and t.text in _TOP_LEVEL:
                return
            if t.kind == "ident" and self.at_punct("=", k=1) and self.i > 0 \
                    and not self.at_kw("and", k=-1) and self.toks[self.i - 1].line < t.line \
                    and t.col == 1:
                return
            self.i += 1

    def is_template_def(self) -> bool:
        depth = 0
        j = self.i + 1
        while j < len(self.toks):
            t = self.toks[j]
            if t.is_("punctuation", "("):
                depth += 1
            elif t.is_("punctuation", ")"):
                depth -= 1
                if depth == 0:
                    return j + 1 < len(self.toks) and self.toks[j + 1].is_("punctuation", "=")
            j += 1
        return False

    def template_params(self) -> tuple:
        self.expect("punctuation", "(")
        params = []
        while not self.at_punct(")"):
            name = self.expect("ident", what="parameter name").text
            self.expect("punctuation", ":")
            ty = self.expect("ident", what="parameter type")
            if ty.text not in ("integer", "string"):
                self.fail("Expected parameter type integer or string", ty)
            params.append((name, ty.text))
            if not self.accept("punctuation", ","):
                break
        self.expect("punctuation", ")")
        return tuple(params)

    # -- objects -----------------------------------------------------------

    def object_expr(self):
        obj = self.object_term()
        while True:
            if self.accept("keyword", "plus"):
                obj = m.Plus(obj, self.attr_block())
            elif self.accept("keyword", "where"):
                eqs = self.equations()
                if isinstance(obj, m.Literal):
                    obj = m.Literal(obj.attrs, obj.equations + eqs)
                else:
                    obj = m.Where(obj, eqs)
            else:
                return obj

    def object_term(self):
        if self.at_kw("attributes", "attribute") or self.at_punct("<", "<>"):
            return m.Literal(self.attr_block())
        if self.accept("punctuation", "("):
            obj = self.object_expr()
            self.expect("punctuation", ")")
            return obj
        name = self.expect("ident", what="object expression")
        if self.accept("punctuation", "("):
            args = []
            while not self.at_punct(")"):
                args.append(self.expr())
                if not self.accept("punctuation", ","):
                    break
            self.expect("punctuation", ")")
            return m.TemplateApply(name.text, tuple(args), pos=name.pos)
        return m.NamedRef(name.text, pos=name.pos)

    def attr_block(self) -> tuple:
        self.accept("keyword", "attributes") or self.accept("keyword", "attribute")
        if self.accept("punctuation", "<>"):
            return ()
        self.expect("punctuation", "<")
        attrs = []
        while not self.at_punct(">"):
            if self.peek() is None:
                self.fail("Expected '>' closing the attribute list")
            attrs.append(self.attr_decl())
            self.accept("punctuation", ",") or self.accept("punctuation", ";")
        self.next()
        return tuple(attrs)

    def attr_decl(self) -> m.AttributeDecl:
        name = self.expect("ident", what="attribute name")
        base = None
        if self.at_punct("["):
            base = self.bracket_base()
            if self.at_punct("*"):
                factors = [base]
                while self.accept("punctuation", "*"):
                    factors.append(self.base_factor())
                base = m.Product(tuple(factors))
        elif self.accept("punctuation", ":"):
            base = self.base_expr()
        unit = display = fmt = None
        while True:
            if self.accept("keyword", "name"):
                parts = [self.expect("string", what="display name").value]
                while self.accept("keyword", "br"):
                    parts.append(self.expect("string", what="display name").value)
                display = tuple(parts)
            elif self.accept("keyword", "format"):
                fmt = self.format_spec()
            elif self.accept("keyword", "unit"):
                unit = self.unit_expr()
            else:
                break
        return m.AttributeDecl(name.text, base, unit, display, fmt, pos=name.pos)

    def format_spec(self) -> str:
        s = self.accept("string")
        if s:
            return s.value
        first = self.next()
        parts = [first.text]
        prev = first
        while (t := self.peek()) is not None and t.line == prev.line and t.col == prev.end_col \
                and t.kind in ("number", "ident", "punctuation", "unit-symbol") \
                and not (t.kind == "punctuation" and t.text in ("<", ">", "<>", ",", ";")):
            parts.append(t.text)
            prev = self.next()
        return "".join(parts)

    # -- bases -------------------------------------------------------------

    def bracket_base(self):
        self.expect("punctuation", "[")
        if self.at_punct("{") or (self.at("ident") and self.at_punct("]", "*", k=1)):
            base = self.base_expr()
        else:
            lo = self.expr()
            self.expect("punctuation", ":")
            hi = self.expr()
            base = fold_range(lo, hi)
        self.expect("punctuation", "]")
        return base

    def base_expr(self):
        factors = [self.base_factor()]
        while self.accept("punctuation", "*"):
            factors.append(self.base_factor())
        return factors[0] if len(factors) == 1 else m.Product(tuple(factors))

    def base_factor(self):
        if self.at_punct("["):
            return self.bracket_base()
        if self.accept("punctuation", "{"):
            labels = []
            while not self.at_punct("}"):
                labels.append(self.expect("string", what="label").value)
                if not self.accept("punctuation", ","):
                    break
            close = self.expect("punctuation", "}")
            try:
                return m.EnumBase(tuple(labels))
            except ValueError as e:
                self.fail(str(e).capitalize(), close)
        if self.accept("punctuation", "("):
            b = self.base_expr()
            self.expect("punctuation", ")")
            return b
        name = self.expect("ident", what="base")
        return m.BaseRef(name.text, pos=name.pos)

    # -- units -------------------------------------------------------------

    def unit_symbol(self) -> str:
        t = self.peek()
        if t is not None and t.kind in ("ident", "unit-symbol"):
            return self.next().text
        self.fail("Expected unit symbol")

    def starts_unit(self, k: int = 0) -> bool:
        t = self.peek(k)
        if t is None:
            return False
        if t.kind == "unit-symbol" or (t.kind == "ident" and t.text in self.units):
            return True
        return t.is_("punctuation", "(") and self.starts_unit(k + 1)

    def unit_expr(self) -> m.UnitExpr:
        u = self.unit_term()
        while self.at_punct("*", "/") and self.starts_unit(1):
            op = self.next().text
            u = m.unit_combine(op, u, self.unit_term())
        return u

    def unit_term(self) -> m.UnitExpr:
        if self.accept("punctuation", "("):
            u = self.unit_expr()
            self.expect("punctuation", ")")
        else:
            u = m.UnitExpr.symbol(self.unit_symbol())
        if self.at_punct("^") and (self.at("number", k=1) or
                                   (self.at_punct("-", k=1) and self.at("number", k=2))):
            self.next()
            sign = -1 if self.accept("punctuation", "-") else 1
            u = m.unit_combine("^", u, sign * int(self.expect("number").text))
        return u

    # -- equations -----------------------------------------------------------

    def equations(self) -> tuple:
        eqs = []
        while True:
            start = self.i
            try:
                eqs.append(self.equation())
            except _Fail as f:
                self.diags.append(f.diag)
                if not self.sync_equation(start):
                    break
                continue
            if not self.accept("keyword", "and"):
                break
        return tuple(eqs)

    def sync_equation(self, start: int) -> bool:
        if self.i == start:
            self.i += 1
        while (t := self.peek()) is not None:
            if t.is_("keyword", "and"):
                self.i += 1
                return True
            if t.kind == "keyword" and t.text in _TOP_LEVEL:
                return False
            self.i += 1
        return False

    def equation(self) -> m.Equation:
        name = self.expect("ident", what="attribute name")
        patterns = []
        bound = []
        if self.accept("punctuation", "["):
            while True:
                if self.at_kw("all"):
                    kw = self.next()
                    var = self.expect("ident", what="quantifier variable")
                    op = bound_expr = None
                    if self.at_punct(">", "<", ">=", "<="):
                        op = self.next().text
                        bound_expr = self.additive()
                    patterns.append(m.AllIdx(var.text, op, bound_expr, pos=var.pos))
                    bound.append(var.text)
                else:
                    patterns.append(m.PointIdx(self.additive()))
                if not self.accept("punctuation", ","):
                    break
            self.expect("punctuation", "]")
        self.expect("punctuation", "=")
        saved = self.bound
        self.bound = set(bound)
        try:
            rhs = self.expr()
        finally:
            self.bound = saved
        return m.Equation(name.text, tuple(patterns), rhs, pos=name.pos)

    # -- expressions -------------------------------------------------------

    def expr(self):
        left = self.concat()
        while self.at_punct(*_CMP):
            op = self.next()
            left = m.BinOp(op.text, left, self.concat(), pos=op.pos)
        return left

    def concat(self):
        left = self.additive()
        while self.at_punct("&"):
            op = self.next()
            left = m.BinOp("&", left, self.additive(), pos=op.pos)
        return left

    def additive(self):
        left = self.term()
        while self.at_punct("+", "-"):
            op = self.next()
            left = m.BinOp(op.text, left, self.term(), pos=op.pos)
        return left

    def term(self):
        left = self.unary()
        while self.at_punct("*", "/"):
            op = self.next()
            left = m.BinOp(op.text, left, self.unary(), pos=op.pos)
        return left

    def unary(self):
        if self.at_punct("-"):
            op = self.next()
            return m.Neg(self.unary(), pos=op.pos)
        if self.accept("punctuation", "+"):
            return self.unary()
        return self.power()

    def power(self):
        left = self.primary()
        while self.at_punct("^"):
            op = self.next()
            left = m.BinOp("^", left, self.power_operand(), pos=op.pos)
        return left

    def power_operand(self):
        if self.at_punct("-"):
            op = self.next()
            return m.Neg(self.power_operand(), pos=op.pos)
        return self.primary()

    def primary(self):
        t = self.peek()
        if t is None:
            self.fail("Expected expression")
        if t.kind == "number":
            self.next()
            unit = self.unit_expr() if self.starts_unit() else None
            return m.NumLit(Decimal(t.text), unit, pos=t.pos)
        if t.kind == "string":
            self.next()
            return m.StrLit(t.value, pos=t.pos)
        if t.is_("keyword", "range"):
            self.next()
            name = self.expect("ident", what="attribute after 'range'")
            if _A1.match(name.text) and self.at_punct(":") and self.at("ident", k=1) \
                    and _A1.match(self.peek(1).text):
                self.next()
                end = self.next()
                return m.CellRange(m.CellAddr.from_a1(name.text), m.CellAddr.from_a1(end.text), pos=t.pos)
            slice_ = None
            if self.accept("punctuation", "["):
                items = []
                while True:
                    lo = self.additive()
                    if self.accept("punctuation", ":"):
                        items.append(m.Span(lo, self.additive()))
                    else:
                        items.append(lo)
                    if not self.accept("punctuation", ","):
                        break
                self.expect("punctuation", "]")
                slice_ = tuple(items)
            return m.RangeRef(name.text, slice_, pos=t.pos)
        if t.kind == "ident":
            self.next()
            if self.accept("punctuation", "("):
                args = []
                while not self.at_punct(")"):
                    args.append(self.expr())
                    if not self.accept("punctuation", ","):
                        break
                self.expect("punctuation", ")")
                return m.Call(t.text, tuple(args), pos=t.pos)
            if self.accept("punctuation", "["):
                idx = [self.additive()]
                while self.accept("punctuation", ","):
                    idx.append(self.additive())
                self.expect("punctuation", "]")
                return m.AttrRef(t.text, tuple(idx), pos=t.pos)
            if t.text in self.bound:
                return m.VarRef(t.text, pos=t.pos)
            return m.AttrRef(t.text, (), pos=t.pos)
        if t.is_("punctuation", "("):
            self.next()
            e = self.expr()
            self.expect("punctuation", ")")
            return e
        self.fail("Expected expression")

    # -- layout ------------------------------------------------------------

    def layout(self) -> m.LayoutSpec:
        self.expect("keyword", "layout")
        return _LayoutParser(self).parse()


def fold_range(lo, hi):
    """A literal ``[a:b]`` becomes an :class:`IntRange` right away."""
    a, b = int_literal(lo), int_literal(hi)
    if a is not None and b is not None:
        return m.IntRange(a, b)
    return m.RangeSpec(lo, hi)


def int_literal(e) -> int | None:
    if isinstance(e, m.NumLit) and e.unit is None and e.value == e.value.to_integral_value():
        return int(e.value)
    if isinstance(e, m.Neg):
        v = int_literal(e.operand)
        return None if v is None else -v
    return None


_TAG_NAME = re.compile(r"<\s*(/?)\s*([A-Za-z]+)(.*?)(/?)\s*>\Z", re.S)
_TAG_ATTR = re.compile(r'([A-Za-z_]+)\s*=\s*"([^"]*)"')


class _LayoutParser:
    """Consumes ``tag`` and ``text`` tokens following ``layout``."""

    def __init__(self, parser: Parser):
        self.p = parser

    def tag(self):
        t = self.p.peek()
        if t is None or t.kind != "tag":
            return None
        mt = _TAG_NAME.match(t.text)
        if not mt:
            self.p.fail("Malformed tag", t)
        closing, name, rest, selfclose = mt.groups()
        return t, bool(closing), name.lower(), dict(_TAG_ATTR.findall(rest)), bool(selfclose)

    def expect_open(self, name: str):
        tg = self.tag()
        if tg is None or tg[1] or tg[2] != name:
            self.p.fail(f"Expected <{name}>")
        self.p.next()
        return tg

    def close(self, name: str):
        tg = self.tag()
        if tg is None:
            self.p.fail(f"Expected </{name}>")
        t, closing, tname, _, _ = tg
        if not closing or tname != name:
            raise _Fail(Diagnostic(t.line, t.col, f"Mismatched tag: expected </{name}>, found {t.text}",
                                   "error", "MismatchedTag"))
        self.p.next()

    def check_known(self, tg):
        t, _, name, _, _ = tg
        if name not in ("table", "tr", "td", "attr"):
            raise _Fail(Diagnostic(t.line, t.col, f"Unknown tag <{name}>", "error", "UnknownTag"))

    def parse(self) -> m.LayoutSpec:
        if self.p.peek() is None:
            return m.LayoutSpec()
        tg = self.tag()
        if tg:
            self.check_known(tg)
        self.expect_open("table")
        rows = []
        while (tg := self.tag()) is not None and not tg[1]:
            self.check_known(tg)
            if tg[2] != "tr":
                raise _Fail(Diagnostic(tg[0].line, tg[0].col, f"Mismatched tag: <{tg[2]}> outside <tr>",
                                       "error", "MismatchedTag"))
            rows.append(self.row())
        self.close("table")
        if self.p.peek() is not None:
            self.p.fail("Unexpected content after </table>")
        return m.LayoutSpec(tuple(rows))

    def row(self) -> m.Row:
        self.p.next()
        cells = []
        while (tg := self.tag()) is not None and not tg[1]:
            self.check_known(tg)
            if tg[2] != "td":
                raise _Fail(Diagnostic(tg[0].line, tg[0].col, f"Mismatched tag: <{tg[2]}> outside <td>",
                                       "error", "MismatchedTag"))
            self.p.next()
            if tg[4]:
                cells.append(None)
                continue
            cells.append(self.cell_content())
            self.close("td")
        if self.p.peek() is not None and self.p.peek().kind == "text":
            self.p.fail("Text outside <td>")
        self.close("tr")
        return m.Row(tuple(cells))

    def cell_content(self):
        t = self.p.peek()
        if t is not None and t.kind == "text":
            self.p.next()
            return m.StaticText(t.value)
        tg = self.tag()
        if tg is not None and not tg[1] and tg[2] != "td":
            self.check_known(tg)
            tok, _, name, attrs, selfclose = tg
            if name != "attr" or "name" not in attrs:
                self.p.fail("Expected <attr name=\"...\"/>", tok)
            self.p.next()
            if not selfclose:
                self.close("attr")
            direction = attrs.get("direction", "down")
            if direction not in ("down", "right"):
                self.p.fail("direction must be down or right", tok)
            step = int(attrs.get("step", "1"))
            return m.AttrSlot(attrs["name"], direction, step, pos=tok.pos)
        return None


def parse_program(tokens) -> m.Program:
    """Parse a token stream; raise :class:`MMSyntaxError` on any syntax error."""
    p = Parser(tokens)
    prog = p.program()
    if p.diags:
        raise MMSyntaxError(sorted(p.diags, key=lambda d: (d.line, d.col)))
    return prog


def parse_layout(tokens) -> m.LayoutSpec:
    """Parse a layout section; ``tokens`` start at the ``layout`` keyword."""
    p = Parser(tokens)
    try:
        spec = p.layout()
    except _Fail as f:
        raise MMSyntaxError([f.diag]) from None
    return spec


def parse(source: str) -> m.Program:
    """Tokenize and parse MM source text."""
    return parse_program(tokenize(source))


def parse_expr(source: str, bound=()) -> m.Expr:
    """Parse a single MM expression (handy in tests and transforms)."""
    p = Parser(tokenize(source))
    p.bound = set(bound)
    try:
        e = p.expr()
        if p.peek() is not None:
            p.fail("Unexpected trailing input")
    except _Fail as f:
        raise MMSyntaxError([f.diag]) from None
    return e
