from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from modelmaster import model as m
from modelmaster.parser import Parser
from modelmaster.lexer import tokenize

from conftest import A


def test_cardinality():
    assert m.base_cardinality(m.IntRange(1995, 2004)) == 10
    kinds = m.EnumBase(("Managers", "Grade 1", "Grade 2", "Grade 3", "Grand Totals"))
    assert m.base_cardinality(kinds) == 5
    assert m.base_cardinality(m.Product((m.IntRange(1, 10), m.IntRange(1, 4)))) == 40
    assert m.base_cardinality(None) == 1


def test_enum_labels_must_be_distinct():
    with pytest.raises(ValueError):
        m.EnumBase(("a", "a"))


def test_ordinals_and_out_of_base():
    r = m.IntRange(1995, 2004)
    assert r.ordinal(1995) == 1 and r.ordinal(2004) == 10
    with pytest.raises(m.OutOfBase):
        r.ordinal(2005)


def test_point_to_addr_examples():
    one = m.Allocation(m.CellAddr(2, 1), ((1, 0),), m.IntRange(1995, 2004))
    assert m.point_to_addr(one, (1997,)) == m.CellAddr(4, 1)
    two = m.Allocation(m.CellAddr(2, 5), ((1, 0), (0, 1)),
                       m.Product((m.IntRange(1, 10), m.IntRange(1, 4))))
    assert m.point_to_addr(two, (3, 2)) == m.CellAddr(4, 6)
    scalar = m.Allocation(m.CellAddr(2, 14), (), None)
    assert m.point_to_addr(scalar, ()) == m.CellAddr(2, 14)
    with pytest.raises(m.OutOfBase):
        m.point_to_addr(one, (2010,))


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.booleans())
def test_point_to_addr_injective(n1, n2, n3, down):
    from modelmaster.codegen import _cross_deltas
    factors = (m.IntRange(1, n1), m.IntRange(1, n2), m.IntRange(1, n3))
    base = m.Product(factors)
    deltas = _cross_deltas(factors, 1, (1, 0) if down else (0, 1), (0, 1) if down else (1, 0))
    alloc = m.Allocation(m.CellAddr(1, 1), deltas, base)
    addrs = [m.point_to_addr(alloc, p) for p in m.iter_points(base)]
    assert len(set(addrs)) == len(addrs) == n1 * n2 * n3


units = st.dictionaries(st.sampled_from(["cm", "sec", "kg", "£"]), st.integers(-3, 3)).map(m.UnitExpr.of)


def test_unit_combine_examples():
    cm, sec = m.UnitExpr.symbol("cm"), m.UnitExpr.symbol("sec")
    assert m.unit_combine("*", cm, sec).as_dict() == {"cm": 1, "sec": 1}
    assert m.unit_combine("/", cm, sec).render(["cm", "sec", "£"]) == "cm * sec^-1"
    sq = m.unit_combine("^", cm, 2)
    assert m.unit_combine("/", sq, sq).dimensionless


@given(units, units)
def test_unit_combine_algebra(a, b):
    assert m.unit_combine("*", a, b) == m.unit_combine("*", b, a)
    assert m.unit_combine("/", m.unit_combine("*", a, b), b) == a


@given(units)
def test_unit_render_reparses(u):
    order = ["cm", "sec", "kg", "£"]
    text = u.render(order)
    if u.dimensionless:
        return
    p = Parser(tokenize(text))
    p.units = set(order)
    assert p.unit_expr() == u


def test_values_distinguish_empty():
    assert m.EMPTY != m.Text("")
    assert m.EMPTY != m.Number(Decimal(0))
    assert m.Text("") != m.Number(Decimal(0))


@given(st.integers(1, 16384), st.integers(1, 1000))
def test_a1_round_trip(col, row):
    addr = m.CellAddr(row, col)
    assert m.CellAddr.from_a1(addr.a1) == addr


def test_a1_letters():
    assert A("Z1").col == 26 and A("AA1").col == 27 and A("n2") == m.CellAddr(2, 14)
    with pytest.raises(ValueError):
        m.CellAddr(0, 1)
