import warnings
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from modelmaster import model as m
from modelmaster.diagnostics import MalformedRecord, MissingTerminator, Unrepresentable
from modelmaster.sylk import UnsupportedRecord, read_sylk, write_sylk

from conftest import A, CORPUS_OK


def test_company_records(corpus_cellmaps):
    lines = write_sylk(corpus_cellmaps["company"]).decode().split("\n")
    assert lines[0] == "ID;PMM"
    assert "C;Y2;X3;ER2C1-R2C2" in lines
    assert lines[-2:] == ["E", ""]


def test_format_records_precede_cells(corpus_cellmaps):
    lines = write_sylk(corpus_cellmaps["queue"]).decode().splitlines()
    assert lines[1:3] == ["P;P0.00", "P;Phh:mm"]
    i = lines.index("C;Y2;X3;ER2C2*24*60")
    assert lines[i - 1] == "F;Y2;X3;P0"


@pytest.mark.parametrize("name", CORPUS_OK)
def test_corpus_round_trip(name, corpus_cellmaps):
    cm = corpus_cellmaps[name]
    assert read_sylk(write_sylk(cm)) == cm


def test_crlf_and_semicolon_escapes():
    cm = m.CellMap({A("A1"): m.CellEntry(m.Constant(m.Text('a;b "c"'))),
                    A("B1"): m.CellEntry(m.Formula(m.BinOp("&", m.CellRef(A("A1")), m.StrLit(";"))))})
    data = write_sylk(cm)
    assert b'K"a;;b ""c"""' in data
    assert read_sylk(data.replace(b"\n", b"\r\n")) == cm


def test_booleans_and_numbers():
    cm = m.CellMap({A("A1"): m.CellEntry(m.Constant(m.Boolean(True))),
                    A("A2"): m.CellEntry(m.Constant(m.Number(Decimal("-2.5"))))})
    assert read_sylk(write_sylk(cm)) == cm


def test_error_values_are_unrepresentable():
    cm = m.CellMap({A("A1"): m.CellEntry(m.Constant(m.ErrorVal(sorted(m.ERROR_KINDS)[0])))})
    with pytest.raises(Unrepresentable):
        write_sylk(cm)


@pytest.mark.parametrize("text,exc", [
    ("ID;PMM\nC;Y1;X1;K1\n", MissingTerminator),
    ("ID;PMM\nC;Y1;K1\nE\n", MalformedRecord),
    ("ID;PMM\nC;Y0;X1;K1\nE\n", MalformedRecord),
    ('ID;PMM\nC;Y1;X1;K"open\nE\n', MalformedRecord),
    ("ID;PMM\nC;Y1;X1;Kabc\nE\n", MalformedRecord),
    ("ID;PMM\nC;Y1;X1;E1+\nE\n", MalformedRecord),
    ("ID;PMM\nC;Y1;X1;K1\nC;Y1;X1;K2\nE\n", MalformedRecord),
    ("ID;PMM\nF;Y1;X1;P3\nC;Y1;X1;K1\nE\n", MalformedRecord),
    ("ID;PMM\nE\nC;Y1;X1;K1\n", MalformedRecord),
])
def test_malformed_input(text, exc):
    with pytest.raises(exc):
        read_sylk(text)


def test_unknown_records_are_skipped_with_a_warning():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cm = read_sylk("ID;PMM\nB;Y3;X3\nC;Y1;X1;K7\nE\n")
    assert len(cm) == 1 and any(issubclass(w.category, UnsupportedRecord) for w in caught)


def test_row_carried_from_previous_record():
    cm = read_sylk("ID;PMM\nC;Y4;X1;K1\nC;X2;ERC[-1]*2\nE\n")
    assert cm[A("B4")].content.expr == m.BinOp("*", m.CellRef(A("A4")), m.NumLit(2))


values = st.one_of(
    st.decimals(min_value=-10**6, max_value=10**6, places=3, allow_nan=False).map(m.Number),
    st.text(st.characters(min_codepoint=32, max_codepoint=0x2FF), max_size=10).map(m.Text),
    st.booleans().map(m.Boolean))


@given(st.dictionaries(st.builds(m.CellAddr, st.integers(1, 30), st.integers(1, 30)),
                       st.tuples(values, st.sampled_from([None, "0.00", "hh:mm"])), max_size=25))
def test_random_constant_maps_round_trip(d):
    cm = m.CellMap({a: m.CellEntry(m.Constant(v), f) for a, (v, f) in d.items()})
    assert read_sylk(write_sylk(cm)) == cm
