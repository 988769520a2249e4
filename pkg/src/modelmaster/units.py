"""Dimensional analysis over constants and equations (opt-in check)."""

from __future__ import annotations

from fractions import Fraction

from . import model as m
from .diagnostics import at, sort_diagnostics
from .semantics import Env, FlatObject, NotConstant, const_eval

# Builtins whose arguments must share one unit, which the result then carries.
_UNIFORM = {"min", "max", "sum", "average"}
# Builtins that return the unit of their first argument.
_FIRST = {"abs", "round", "int"}


class _Checker:
    def __init__(self, flat: FlatObject | None, env: Env):
        self.flat = flat
        self.env = env
        self.order = list(env.units)
        self.diags: list = []
        self._const_units: dict = {}
        self._busy: set = set()

    def render(self, u: m.UnitExpr) -> str:
        return u.render(self.order)

    def error(self, pos, message, code="UnitMismatch", severity="error"):
        self.diags.append(at(pos, message, code, severity))

    def const_unit(self, name: str):
        if name in self._const_units:
            return self._const_units[name]
        c = self.env.constants[name]
        if name in self._busy:
            return None
        self._busy.add(name)
        try:
            u = c.unit if c.unit is not None else self.unit_of(c.expr, report=False)
        finally:
            self._busy.discard(name)
        self._const_units[name] = u
        return u

    def attr_unit(self, name: str):
        if self.flat is not None and name in self.flat.attrs:
            return self.flat.attrs[name].unit or m.DIMENSIONLESS
        if name in self.env.constants:
            return self.const_unit(name)
        return None

    def unit_of(self, e, report: bool = True):
        """Synthesize the unit of ``e``; ``None`` means unknown or already in error."""
        if isinstance(e, m.NumLit):
            if e.unit is None:
                return m.DIMENSIONLESS
            for sym, _ in e.unit.exponents:
                if sym not in self.order and report:
                    self.error(e.pos, f"Undeclared unit {sym}", "UndeclaredUnit")
                    return None
            return e.unit
        if isinstance(e, (m.StrLit, m.CellRef, m.CellRange)):
            return None
        if isinstance(e, m.VarRef):
            return m.DIMENSIONLESS
        if isinstance(e, m.ConstRef):
            return self.const_unit(e.name)
        if isinstance(e, (m.AttrRef, m.RangeRef)):
            return self.attr_unit(e.attr)
        if isinstance(e, m.Neg):
            return self.unit_of(e.operand, report)
        if isinstance(e, m.BinOp):
            return self.binop(e, report)
        if isinstance(e, m.Call):
            return self.call(e, report)
        return None

    def binop(self, e: m.BinOp, report: bool):
        left = self.unit_of(e.left, report)
        right = self.unit_of(e.right, report)
        if e.op == "^":
            if right is not None and not right.dimensionless:
                if report:
                    self.error(e.pos, "Operator ^ expects something with no units here, "
                                      f"not units {self.render(right)}.")
                return None
            if left is None or left.dimensionless:
                return left
            try:
                k = const_eval(e.right, self.env)
            except NotConstant:
                k = None
            if not isinstance(k, Fraction) or k.denominator != 1:
                if report:
                    self.error(e.pos, "Operator ^ needs a constant integer exponent when its "
                                      f"base has units {self.render(left)}.")
                return None
            return m.unit_combine("^", left, int(k))
        if left is None or right is None:
            return None if e.op in ("*", "/", "+", "-") else m.DIMENSIONLESS
        if e.op in ("*", "/"):
            return m.unit_combine(e.op, left, right)
        if e.op == "&":
            return m.DIMENSIONLESS
        if left != right:
            if report:
                self.error(e.pos, f"The left-hand argument has units {self.render(left)}, "
                                  f"but the right-hand argument has units {self.render(right)}.")
            return None
        return left if e.op in ("+", "-") else m.DIMENSIONLESS

    def call(self, e: m.Call, report: bool):
        fn = e.fn.lower()
        units = [self.unit_of(a, report) for a in e.args]
        if fn in _UNIFORM:
            known = [u for u in units if u is not None]
            for u in known[1:]:
                if u != known[0]:
                    if report:
                        self.error(e.pos, f"Arguments of {e.fn} must share units, not "
                                          f"{self.render(known[0])} and {self.render(u)}.")
                    return None
            return known[0] if known else None
        if fn == "if":
            branches = [u for u in units[1:] if u is not None]
            if len(branches) == 2 and branches[0] != branches[1]:
                if report:
                    self.error(e.pos, f"The branches of {e.fn} have units {self.render(branches[0])} "
                                      f"and {self.render(branches[1])}.")
                return None
            return branches[0] if branches else None
        if fn in _FIRST:
            return units[0] if units else None
        if fn == "sqrt" and units and units[0] is not None:
            exps = units[0].as_dict()
            if any(k % 2 for k in exps.values()):
                if report:
                    self.error(e.pos, f"Cannot take the square root of units {self.render(units[0])}.")
                return None
            return m.UnitExpr.of({s: k // 2 for s, k in exps.items()})
        return m.DIMENSIONLESS

    def assign(self, pos, what: str, declared, actual):
        if declared is None or actual is None or declared == actual:
            return
        if actual.dimensionless:
            self.error(pos, f"{what} has units {self.render(declared)} but is given a "
                            "dimensionless value", "DimensionlessValue", "warning")
        else:
            self.error(pos, f"{what} has units {self.render(declared)}, but its value has units "
                            f"{self.render(actual)}.")


def check_units(flat: FlatObject | None, env: Env) -> list:
    """Return unit diagnostics for every constant and equation."""
    ck = _Checker(flat, env)
    for name, c in env.constants.items():
        u = ck.unit_of(c.expr)
        ck.assign(c.pos, f"Constant {name}", c.unit, u)
    if flat is not None:
        for eq in flat.equations:
            u = ck.unit_of(eq.rhs)
            decl = flat.attrs.get(eq.lhs_attr)
            if decl is not None:
                ck.assign(eq.pos, f"Attribute {eq.lhs_attr}", decl.unit, u)
    return sort_diagnostics(ck.diags)
