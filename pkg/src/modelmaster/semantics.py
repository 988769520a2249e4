"""Compiler passes 2-4: includes, templates, object merging and checking.

The entry points take an optional ``diags`` list.  When it is given, errors
are appended and the pass carries on so a single run can report several
problems; when it is omitted the first error is raised.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

from . import model as m
from .diagnostics import (Diagnostic, IncludeError, SemanticError, TemplateError,
                          at, sort_diagnostics)
from .parser import fold_range, parse

# name -> (min args, max args or None)
BUILTINS = {
    "if": (2, 3), "iserr": (1, 1), "min": (1, None), "max": (1, None),
    "sum": (1, None), "average": (1, None), "match": (2, 3), "rand": (0, 0),
    "abs": (1, 1), "round": (2, 2), "int": (1, 1), "sqrt": (1, 1),
    "and": (1, None), "or": (1, None), "not": (1, 1), "mod": (2, 2),
    "exp": (1, 1), "ln": (1, 1), "true": (0, 0), "false": (0, 0),
}

POINT_LIMIT = 100_000


class NotConstant(Exception):
    pass


def _report(diags, diag: Diagnostic, exc=SemanticError):
    if diags is None:
        raise exc(diag)
    diags.append(diag)


# ---------------------------------------------------------------------------
# Includes

Loader = Callable[[str, "str | None"], "tuple[str, str]"]


def file_loader(name: str, including: str | None) -> tuple:
    """Resolve ``name`` relative to the including file and read it.

    ``.mm`` is appended when the bare name does not exist.
    """
    base_dir = os.path.dirname(including) if including else os.getcwd()
    path = os.path.normpath(os.path.join(base_dir, name))
    if not os.path.exists(path) and os.path.exists(path + ".mm"):
        path += ".mm"
    with open(path, encoding="utf-8") as fh:
        return path, fh.read()


def _basename(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def resolve_includes(program: m.Program, loader: Loader = file_loader,
                     path: str | None = None, _memo=None, _stack=()) -> m.Program:
    """Merge every included program's namespaces into ``program``.

    An included file's unnamed root object is bound to the file's basename.
    Each file is loaded once per resolution.
    """
    memo = {} if _memo is None else _memo
    stack = _stack + ((os.path.normpath(path),) if path else ())
    result = m.Program(list(program.includes), [], {}, {}, {}, {},
                       program.root, program.root_name, program.layout)
    for name in program.includes:
        key = ("load", name, path)
        try:
            if key not in memo:
                memo[key] = loader(name, path)
            resolved, source = memo[key]
        except OSError:
            raise IncludeError(Diagnostic(1, 1, f"Included file {name} not found",
                                          "error", "FileNotFound")) from None
        resolved = os.path.normpath(resolved)
        if resolved in stack:
            cycle = list(stack[stack.index(resolved):]) + [resolved]
            raise IncludeError(Diagnostic(1, 1, "Include cycle: " + " -> ".join(cycle),
                                          "error", "IncludeCycle"))
        if resolved not in memo:
            memo[resolved] = resolve_includes(parse(source), loader, resolved, memo, stack)
        inc = memo[resolved]
        _merge_namespace(result, inc)
        bname = _basename(resolved)
        if inc.root is not None:
            _bind(result.objects, bname, inc.root)
        elif inc.root_name is not None and inc.root_name != bname:
            _bind(result.objects, bname, m.NamedRef(inc.root_name))
    _merge_namespace(result, program)
    return result


def _merge_namespace(into: m.Program, src: m.Program):
    for u in src.units:
        if u not in into.units:
            into.units.append(u)
    for table in ("bases", "constants", "templates", "objects"):
        for k, v in getattr(src, table).items():
            _bind(getattr(into, table), k, v)


def _bind(table: dict, name: str, value):
    if name in table and table[name] != value:
        raise IncludeError(Diagnostic(1, 1, f"Name {name} is bound to two different definitions",
                                      "error", "NameClash"))
    table[name] = value


# ---------------------------------------------------------------------------
# Environment: constants and bases

class Env:
    """Read-only view of a resolved program's namespaces."""

    def __init__(self, program: m.Program):
        self.program = program
        self._values: dict = {}
        self._evaluating: set = set()

    @property
    def units(self) -> list:
        return self.program.units

    @property
    def constants(self) -> dict:
        return self.program.constants

    def constant_value(self, name: str):
        if name in self._values:
            return self._values[name]
        if name in self._evaluating:
            raise NotConstant(f"constant {name} is defined in terms of itself")
        self._evaluating.add(name)
        try:
            value = const_eval(self.constants[name].expr, self)
        finally:
            self._evaluating.discard(name)
        self._values[name] = value
        return value

    def resolve_base(self, term, params: dict | None = None):
        """Turn a source base term into a concrete :data:`model.Base`."""
        if term is None:
            return None
        if isinstance(term, m.IntRange):
            if term.lo > term.hi:
                raise ValueError(f"empty base [{term.lo}:{term.hi}]")
            return term
        if isinstance(term, m.EnumBase):
            return term
        if isinstance(term, m.RangeSpec):
            lo = _as_int(const_eval(term.lo, self, params or {}))
            hi = _as_int(const_eval(term.hi, self, params or {}))
            return self.resolve_base(m.IntRange(lo, hi))
        if isinstance(term, m.BaseRef):
            if params and term.name in params:
                raise NotConstant(f"{term.name} is not a base")
            if term.name not in self.program.bases:
                raise KeyError(term.name)
            return self.resolve_base(self.program.bases[term.name])
        if isinstance(term, m.Product):
            return m.Product(tuple(self.resolve_base(f, params) for f in term.factors))
        raise TypeError(term)


def _as_int(v) -> int:
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    raise NotConstant(f"{v} is not an integer")


def const_eval(e, env: Env | None, vars: dict | None = None):
    """Evaluate a constant expression exactly; result is a Fraction or str."""
    vars = vars or {}
    if isinstance(e, m.NumLit):
        return Fraction(e.value)
    if isinstance(e, m.StrLit):
        return e.text
    if isinstance(e, m.VarRef):
        if e.name in vars:
            v = vars[e.name]
            return Fraction(v) if isinstance(v, int) else v
        raise NotConstant(e.name)
    if isinstance(e, (m.ConstRef, m.AttrRef)):
        name = e.attr if isinstance(e, m.AttrRef) else e.name
        if isinstance(e, m.AttrRef) and e.indices:
            raise NotConstant(name)
        if name in vars:
            v = vars[name]
            return Fraction(v) if isinstance(v, int) else v
        if env is not None and name in env.constants:
            return env.constant_value(name)
        raise NotConstant(name)
    if isinstance(e, m.Neg):
        v = const_eval(e.operand, env, vars)
        if isinstance(v, str):
            raise NotConstant("arithmetic on text")
        return -v
    if isinstance(e, m.BinOp) and e.op in "+-*/^":
        a = const_eval(e.left, env, vars)
        b = const_eval(e.right, env, vars)
        if isinstance(a, str) or isinstance(b, str):
            raise NotConstant("arithmetic on text")
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0:
                raise NotConstant("division by zero")
            return a / b
        if b.denominator != 1:
            raise NotConstant("non-integer power")
        return a ** int(b)
    raise NotConstant(type(e).__name__)


def literal_of(v) -> m.Expr:
    """The MM literal for a constant value."""
    if isinstance(v, str):
        return m.StrLit(v)
    if isinstance(v, int):
        v = Fraction(v)
    if v < 0:
        return m.Neg(literal_of(-v))
    if v.denominator == 1:
        return m.NumLit(m.Decimal(v.numerator))
    return m.NumLit(m.Decimal(v.numerator) / m.Decimal(v.denominator))


# ---------------------------------------------------------------------------
# Templates

def _substitute_params(e, values: dict):
    def fn(node):
        if isinstance(node, m.AttrRef) and not node.indices and node.attr in values:
            return values[node.attr]
        return node
    return m.rebuild(e, fn)


def _subst_base(term, values):
    if isinstance(term, m.RangeSpec):
        return fold_range(_substitute_params(term.lo, values), _substitute_params(term.hi, values))
    if isinstance(term, m.Product):
        return m.Product(tuple(_subst_base(f, values) for f in term.factors))
    return term


def _subst_object(obj, values):
    if isinstance(obj, m.Literal):
        return m.Literal(tuple(replace(a, base=_subst_base(a.base, values)) for a in obj.attrs),
                         tuple(_subst_equation(q, values) for q in obj.equations))
    if isinstance(obj, m.TemplateApply):
        return m.TemplateApply(obj.name, tuple(_substitute_params(a, values) for a in obj.args), pos=obj.pos)
    if isinstance(obj, m.Plus):
        return m.Plus(_subst_object(obj.base, values),
                      tuple(replace(a, base=_subst_base(a.base, values)) for a in obj.extra))
    if isinstance(obj, m.Where):
        return m.Where(_subst_object(obj.base, values), tuple(_subst_equation(q, values) for q in obj.extra))
    return obj


def _subst_equation(eq: m.Equation, values) -> m.Equation:
    pats = []
    for p in eq.lhs_patterns:
        if isinstance(p, m.PointIdx):
            pats.append(m.PointIdx(_substitute_params(p.expr, values)))
        elif p.bound is not None:
            pats.append(replace(p, bound=_substitute_params(p.bound, values)))
        else:
            pats.append(p)
    return replace(eq, lhs_patterns=tuple(pats), rhs=_substitute_params(eq.rhs, values))


def instantiate_template(template: m.Template, args, env: Env | None = None,
                         name: str = "template", pos=None) -> m.ObjectExpr:
    """Replace every parameter of ``template`` by the matching argument."""
    pos = pos or template.pos
    if len(args) != len(template.params):
        raise TemplateError(at(pos, f"Template {name} expects {len(template.params)} arguments, "
                                    f"not {len(args)}", "ArityMismatch"))
    values = {}
    for (pname, ptype), arg in zip(template.params, args):
        try:
            v = const_eval(arg, env)
        except NotConstant:
            raise TemplateError(at(pos, f"Argument for {pname} is not a constant", "TypeMismatch")) from None
        if ptype == "integer" and not (isinstance(v, Fraction) and v.denominator == 1):
            raise TemplateError(at(pos, f"Parameter {pname} expects an integer", "TypeMismatch"))
        if ptype == "string" and not isinstance(v, str):
            raise TemplateError(at(pos, f"Parameter {pname} expects a string", "TypeMismatch"))
        values[pname] = literal_of(v)
    obj = _subst_object(template.body, values)
    _check_bases(obj, name, pos)
    return obj


def _check_bases(obj, name, pos):
    attrs = []
    if isinstance(obj, m.Literal):
        attrs = obj.attrs
    elif isinstance(obj, m.Plus):
        _check_bases(obj.base, name, pos)
        attrs = obj.extra
    elif isinstance(obj, m.Where):
        _check_bases(obj.base, name, pos)
    for a in attrs:
        for f in m.base_factors(a.base) if not isinstance(a.base, m.RangeSpec) else (a.base,):
            if isinstance(f, m.IntRange) and f.lo > f.hi:
                raise TemplateError(at(a.pos or pos, f"Instantiating {name} gives attribute {a.name} "
                                                     f"the empty base [{f.lo}:{f.hi}]", "EmptyBase"))


# ---------------------------------------------------------------------------
# Merging

@dataclass
class FlatObject:
    attrs: dict = field(default_factory=dict)       # name -> AttributeDecl, base resolved
    equations: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)  # ("attr", name) / ("eq", i) -> object chain

    def factors(self, name: str) -> tuple:
        return m.base_factors(self.attrs[name].base)


def merge_objects(root, env: Env, diags: list | None = None) -> FlatObject:
    """Expand references and templates and merge everything into one object.

    Bare names in equations are then classified: attribute references stay
    :class:`AttrRef`, named constants become :class:`ConstRef`.
    """
    flat = FlatObject()
    _expand(root, env, flat, ("<root>",), diags, set())
    flat.equations = [_classify_names(eq, flat, env) for eq in flat.equations]
    return flat


def _expand(obj, env: Env, flat: FlatObject, chain: tuple, diags, active: set):
    if isinstance(obj, m.Literal):
        seen = {}
        for a in obj.attrs:
            if a.name in seen:
                _report(diags, at(a.pos, f"Duplicate attribute {a.name} in object", "DuplicateAttribute"))
                continue
            seen[a.name] = a
            if a.unit is not None and any(c.startswith("template:") for c in chain):
                _report(diags, at(a.pos, f"Units on attribute {a.name} inside a template are not supported",
                                  "NotSupported"))
            _add_attr(a, env, flat, chain, diags)
        for q in obj.equations:
            flat.provenance[("eq", len(flat.equations))] = chain
            flat.equations.append(q)
    elif isinstance(obj, m.NamedRef):
        if obj.name in active:
            _report(diags, at(obj.pos, f"Object {obj.name} is defined in terms of itself",
                              "CyclicObjectDefinition"))
            return
        if obj.name not in env.program.objects:
            _report(diags, at(obj.pos, f"Undeclared identifier {obj.name}", "UndeclaredIdentifier"))
            return
        _expand(env.program.objects[obj.name], env, flat, chain + (obj.name,), diags, active | {obj.name})
    elif isinstance(obj, m.TemplateApply):
        if obj.name not in env.program.templates:
            _report(diags, at(obj.pos, f"Undeclared identifier {obj.name}", "UndeclaredIdentifier"))
            return
        key = "template:" + obj.name
        if key in active:
            _report(diags, at(obj.pos, f"Template {obj.name} is defined in terms of itself",
                              "CyclicObjectDefinition"))
            return
        try:
            body = instantiate_template(env.program.templates[obj.name], obj.args, env, obj.name, obj.pos)
        except TemplateError as err:
            if diags is None:
                raise
            diags.extend(err.diagnostics)
            return
        _expand(body, env, flat, chain + (key,), diags, active | {key})
    elif isinstance(obj, m.Plus):
        _expand(obj.base, env, flat, chain, diags, active)
        _expand(m.Literal(obj.extra), env, flat, chain + ("plus",), diags, active)
    elif isinstance(obj, m.Where):
        _expand(obj.base, env, flat, chain, diags, active)
        _expand(m.Literal((), obj.extra), env, flat, chain + ("where",), diags, active)
    else:
        raise TypeError(obj)


def _add_attr(a: m.AttributeDecl, env: Env, flat: FlatObject, chain, diags):
    try:
        base = env.resolve_base(a.base)
    except KeyError as e:
        _report(diags, at(a.pos, f"Undeclared identifier {e.args[0]}", "UndeclaredIdentifier"))
        base = None
    except NotConstant as e:
        _report(diags, at(a.pos, f"Base of {a.name} is not constant: {e}", "NonConstantBase"))
        base = None
    except ValueError as e:
        _report(diags, at(a.pos, f"Attribute {a.name} has an {e}", "EmptyBase"))
        base = None
    decl = replace(a, base=base)
    prev = flat.attrs.get(a.name)
    if prev is None:
        flat.attrs[a.name] = decl
        flat.provenance[("attr", a.name)] = chain
        return
    if prev.base != base:
        _report(diags, at(a.pos, f"Attribute {a.name} is redeclared with a different base", "BaseMismatch"))
        return
    flat.attrs[a.name] = replace(prev, unit=prev.unit or decl.unit,
                                 display_name=prev.display_name or decl.display_name,
                                 cell_format=prev.cell_format or decl.cell_format)


def _classify_names(eq: m.Equation, flat: FlatObject, env: Env) -> m.Equation:
    def fn(node):
        if isinstance(node, m.AttrRef) and not node.indices and node.attr not in flat.attrs \
                and node.attr in env.constants:
            return m.ConstRef(node.attr, pos=node.pos)
        return node

    pats = []
    for p in eq.lhs_patterns:
        if isinstance(p, m.PointIdx):
            pats.append(m.PointIdx(m.rebuild(p.expr, fn)))
        elif p.bound is not None:
            pats.append(replace(p, bound=m.rebuild(p.bound, fn)))
        else:
            pats.append(p)
    return replace(eq, lhs_patterns=tuple(pats), rhs=m.rebuild(eq.rhs, fn))


# ---------------------------------------------------------------------------
# Point enumeration (shared with code generation and rolling)

def coordinate_value(factor, coord):
    """The value a quantifier variable takes at ``coord``: int or label."""
    if isinstance(factor, m.EnumBase):
        return factor.labels[coord - 1]
    return coord


def index_coord(factor, value):
    """Map an evaluated subscript value onto a coordinate of ``factor``."""
    if isinstance(factor, m.EnumBase):
        if isinstance(value, str):
            return factor.label_ordinal(value)
        raise m.OutOfBase(f"{value} is not a label")
    if isinstance(value, str) or value.denominator != 1:
        raise m.OutOfBase(f"{value} is not an integer subscript")
    coord = int(value)
    factor.ordinal(coord)
    return coord


def equation_points(eq: m.Equation, flat: FlatObject, env: Env):
    """Yield ``(point, bindings)`` for every point an equation defines."""
    factors = flat.factors(eq.lhs_attr)
    choices = []
    for f, p in zip(factors, eq.lhs_patterns):
        if isinstance(p, m.PointIdx):
            choices.append([(index_coord(f, const_eval(p.expr, env)), None, None)])
            continue
        bound = const_eval(p.bound, env) if p.bound is not None else None
        opts = []
        for c in f.coords():
            if bound is not None:
                v = Fraction(c)
                if not {">": v > bound, "<": v < bound, ">=": v >= bound, "<=": v <= bound}[p.op]:
                    continue
            opts.append((c, p.var, coordinate_value(f, c)))
        choices.append(opts)
    import itertools
    for combo in itertools.product(*choices):
        point = tuple(c for c, _, _ in combo)
        bindings = {var: val for _, var, val in combo if var is not None}
        yield point, bindings


def instantiate_rhs(e, bindings: dict, flat: FlatObject, env: Env, inline_constants: bool = True):
    """Substitute quantifier values into ``e`` and fold every subscript.

    Subscripts become integer literals (or label strings for enumerated
    factors).  Raises :class:`model.OutOfBase` when one leaves its base.
    """
    def fold_index(attr, k, ix):
        factor = flat.factors(attr)[k]
        coord = index_coord(factor, const_eval(ix, env, bindings))
        return literal_of(coordinate_value(factor, coord))

    def fn(node):
        if isinstance(node, m.VarRef) and node.name in bindings:
            return literal_of(bindings[node.name])
        if isinstance(node, m.ConstRef) and inline_constants:
            return instantiate_rhs(env.constants[node.name].expr, {}, flat, env)
        return node

    def walk(node):
        if isinstance(node, m.AttrRef) and node.indices:
            return m.AttrRef(node.attr, tuple(fold_index(node.attr, k, ix)
                                              for k, ix in enumerate(node.indices)), pos=node.pos)
        if isinstance(node, m.RangeRef) and node.slice:
            items = []
            for k, s in enumerate(node.slice):
                if isinstance(s, m.Span):
                    items.append(m.Span(fold_index(node.attr, k, s.lo), fold_index(node.attr, k, s.hi)))
                else:
                    items.append(fold_index(node.attr, k, s))
            return m.RangeRef(node.attr, tuple(items), pos=node.pos)
        if isinstance(node, m.BinOp):
            return fn(m.BinOp(node.op, walk(node.left), walk(node.right), pos=node.pos))
        if isinstance(node, m.Neg):
            return fn(m.Neg(walk(node.operand), pos=node.pos))
        if isinstance(node, m.Call):
            return fn(m.Call(node.fn, tuple(walk(a) for a in node.args), pos=node.pos))
        return fn(node)

    return walk(e)


# ---------------------------------------------------------------------------
# Checking

def check_semantics(flat: FlatObject, env: Env, layout: m.LayoutSpec | None = None) -> list:
    """Return diagnostics for every semantic problem in a merged object."""
    diags: list = []
    for eq in flat.equations:
        _check_equation(eq, flat, env, diags)
    _check_overlaps(flat, env, diags)
    if layout is not None:
        seen = set()
        for row in layout.rows:
            for cell in row.cells:
                if isinstance(cell, m.AttrSlot):
                    if cell.attr not in flat.attrs:
                        diags.append(at(cell.pos, f"Layout names unknown attribute {cell.attr}",
                                        "UnknownAttrName"))
                    elif cell.attr in seen:
                        diags.append(at(cell.pos, f"Attribute {cell.attr} is placed twice in the layout",
                                        "LayoutCollision"))
                    seen.add(cell.attr)
    for name, a in flat.attrs.items():
        if m.base_cardinality(a.base) > POINT_LIMIT:
            diags.append(at(a.pos, f"Attribute {name} has more than {POINT_LIMIT} points",
                            "LargeBase", "warning"))
    return sort_diagnostics(diags)


def _check_equation(eq: m.Equation, flat: FlatObject, env: Env, diags: list):
    if eq.lhs_attr not in flat.attrs:
        diags.append(at(eq.pos, f"Undeclared identifier {eq.lhs_attr}", "UndeclaredIdentifier"))
        factors = None
    else:
        factors = flat.factors(eq.lhs_attr)
        if len(eq.lhs_patterns) != len(factors):
            diags.append(at(eq.pos, f"Attribute {eq.lhs_attr} expects {len(factors)} subscripts, "
                                    f"not {len(eq.lhs_patterns)}", "WrongArity"))
            factors = None
    var_factor = {}
    for k, p in enumerate(eq.lhs_patterns):
        f = factors[k] if factors else None
        if isinstance(p, m.AllIdx):
            if p.var in var_factor:
                diags.append(at(p.pos or eq.pos, f"Quantifier variable {p.var} is bound twice", "DuplicateVariable"))
            var_factor[p.var] = f
            if p.bound is not None:
                if isinstance(f, m.EnumBase):
                    diags.append(at(p.pos or eq.pos, f"Guard on enumerated coordinate {p.var}",
                                    "EnumArithmetic"))
                _require_constant(p.bound, env, eq, diags)
        else:
            _require_constant(p.expr, env, eq, diags)
    _check_expr(eq.rhs, eq, flat, env, var_factor, diags, in_call=False)


def _require_constant(e, env, eq, diags):
    try:
        const_eval(e, env)
    except NotConstant:
        diags.append(at(_pos_of(e) or eq.pos, "Subscript bound is not a constant expression",
                        "NonConstantBound"))
        for n in m.walk(e):
            if isinstance(n, m.AttrRef) and n.attr not in env.constants:
                diags.append(at(n.pos or eq.pos, f"Undeclared identifier {n.attr}", "UndeclaredIdentifier"))


def _pos_of(e):
    for n in m.walk(e):
        if getattr(n, "pos", None):
            return n.pos
    return None


def _check_expr(e, eq, flat, env, var_factor, diags, in_call):
    if isinstance(e, m.AttrRef):
        if e.attr not in flat.attrs:
            diags.append(at(e.pos or eq.pos, f"Undeclared identifier {e.attr}", "UndeclaredIdentifier"))
        else:
            factors = flat.factors(e.attr)
            if len(e.indices) != len(factors):
                diags.append(at(e.pos or eq.pos, f"Attribute {e.attr} expects {len(factors)} subscripts, "
                                                 f"not {len(e.indices)}", "WrongArity"))
            else:
                for f, ix in zip(factors, e.indices):
                    _check_index(ix, f, eq, env, var_factor, diags)
        return
    if isinstance(e, m.RangeRef):
        if not in_call:
            diags.append(at(e.pos or eq.pos, "A range may only be passed as a function argument",
                            "RangeOutsideCall"))
        if e.attr not in flat.attrs:
            diags.append(at(e.pos or eq.pos, f"Undeclared identifier {e.attr}", "UndeclaredIdentifier"))
        else:
            factors = flat.factors(e.attr)
            if len(e.slice or ()) > len(factors):
                diags.append(at(e.pos or eq.pos, f"Too many subscripts slicing {e.attr}", "WrongArity"))
            else:
                for f, s in zip(factors, e.slice or ()):
                    for ix in ((s.lo, s.hi) if isinstance(s, m.Span) else (s,)):
                        _check_index(ix, f, eq, env, var_factor, diags)
        return
    if isinstance(e, m.VarRef):
        if e.name not in var_factor:
            diags.append(at(e.pos or eq.pos, f"Quantifier variable {e.name} is used outside its equation",
                            "UnboundVariable"))
        return
    if isinstance(e, m.Call):
        arity = BUILTINS.get(e.fn.lower())
        if arity is None:
            diags.append(at(e.pos or eq.pos, f"Unknown function {e.fn}", "UnknownFunction"))
        else:
            lo, hi = arity
            if len(e.args) < lo or (hi is not None and len(e.args) > hi):
                diags.append(at(e.pos or eq.pos, f"Function {e.fn} does not take {len(e.args)} arguments",
                                "WrongArity"))
        for a in e.args:
            _check_expr(a, eq, flat, env, var_factor, diags, in_call=True)
        return
    for c in m.children(e):
        _check_expr(c, eq, flat, env, var_factor, diags, in_call=False)


def _check_index(ix, factor, eq, env, var_factor, diags):
    bad = False
    for n in m.walk(ix):
        if isinstance(n, m.AttrRef):
            if n.attr in env.constants and not n.indices:
                continue
            diags.append(at(n.pos or eq.pos, f"Undeclared identifier {n.attr}" if not n.indices else
                            "Subscripts must be computed from quantifier variables and constants",
                            "UndeclaredIdentifier" if not n.indices else "NonConstantIndex"))
            bad = True
        elif isinstance(n, m.VarRef):
            if n.name not in var_factor:
                diags.append(at(n.pos or eq.pos, f"Quantifier variable {n.name} is used outside its equation",
                                "UnboundVariable"))
                bad = True
        elif isinstance(n, (m.Call, m.RangeRef, m.CellRef, m.CellRange)):
            diags.append(at(getattr(n, "pos", None) or eq.pos,
                            "Subscripts must be computed from quantifier variables and constants",
                            "NonConstantIndex"))
            bad = True
    if bad:
        return
    enum_vars = [n for n in m.walk(ix) if isinstance(n, m.VarRef)
                 and isinstance(var_factor.get(n.name), m.EnumBase)]
    if enum_vars and not isinstance(ix, m.VarRef):
        diags.append(at(enum_vars[0].pos or eq.pos,
                        f"Arithmetic on enumerated coordinate {enum_vars[0].name} is not allowed",
                        "EnumArithmetic"))
    elif isinstance(factor, m.EnumBase) and isinstance(ix, m.VarRef) \
            and not isinstance(var_factor.get(ix.name), m.EnumBase):
        diags.append(at(ix.pos or eq.pos, f"Subscript {ix.name} does not range over labels",
                        "IndexTypeMismatch"))


def _check_overlaps(flat: FlatObject, env: Env, diags: list):
    owners: dict = {}
    for eq in flat.equations:
        if eq.lhs_attr not in flat.attrs or len(eq.lhs_patterns) != len(flat.factors(eq.lhs_attr)):
            continue
        try:
            points = [p for p, _ in equation_points(eq, flat, env)]
        except (NotConstant, m.OutOfBase, KeyError) as e:
            diags.append(at(eq.pos, f"Equation for {eq.lhs_attr} selects points outside its base: {e}",
                            "IndexOutOfBase"))
            continue
        table = owners.setdefault(eq.lhs_attr, {})
        clash = [p for p in points if p in table]
        if clash:
            factors = flat.factors(eq.lhs_attr)
            shown = ",".join(str(coordinate_value(f, c)) for f, c in zip(factors, clash[0]))
            diags.append(at(eq.pos, f"Equations for {eq.lhs_attr} overlap at point {shown}",
                            "OverlappingEquations"))
        for p in points:
            table.setdefault(p, eq)


# ---------------------------------------------------------------------------
# Whole front end

@dataclass
class Analysis:
    program: m.Program
    env: Env
    flat: FlatObject | None
    diagnostics: list

    @property
    def ok(self) -> bool:
        return not any(d.is_error for d in self.diagnostics)


def analyze_program(program: m.Program, *, loader: Loader = file_loader, path: str | None = None,
                    units: bool = False) -> Analysis:
    """Run passes 2-4 and collect every diagnostic."""
    from .units import check_units

    resolved = resolve_includes(program, loader, path)
    env = Env(resolved)
    diags: list = []
    root = resolved.root_object()
    _check_constants(env, diags)
    # a program of declarations only compiles to an empty sheet
    flat = merge_objects(root, env, diags) if root is not None else FlatObject()
    diags.extend(check_semantics(flat, env, resolved.layout))
    if units:
        diags.extend(check_units(flat, env))
    return Analysis(resolved, env, flat, sort_diagnostics(_dedupe(diags)))


def _check_constants(env: Env, diags: list):
    for name, c in env.constants.items():
        try:
            env.constant_value(name)
        except NotConstant as e:
            for n in m.walk(c.expr):
                if isinstance(n, m.AttrRef) and n.attr not in env.constants:
                    diags.append(at(n.pos or c.pos, f"Undeclared identifier {n.attr}", "UndeclaredIdentifier"))
                    break
            else:
                diags.append(at(c.pos, f"Constant {name} cannot be evaluated: {e}", "NonConstant"))


def _dedupe(diags):
    seen = set()
    out = []
    for d in diags:
        if d not in seen:
            seen.add(d)
            out.append(d)
    return out
