from modelmaster import model as m
from modelmaster.graph import build_dependency_graph, references
from modelmaster.formula import parse_formula
from modelmaster.sylk import read_sylk
from modelmaster.pipeline import corpus_path

from conftest import A, compiled


def test_references_expand_ranges_in_order():
    assert references(parse_formula("B1+SUM(A1:A3)+B1")) == [A("B1"), A("A1"), A("A2"), A("A3")]


def test_company_classification():
    g = build_dependency_graph(compiled("company"))
    assert g.inputs == sorted([m.CellAddr(r, c) for r in range(2, 12) for c in (1, 2)])
    assert g.outputs == [m.CellAddr(r, 3) for r in range(2, 12)]
    assert A("A1") in g.static
    # nothing fills the yearly inputs, so every one of them is blank
    assert g.missing == g.inputs and g.cycles == []


def test_evaluation_order_is_topological_and_row_major_on_ties():
    g = build_dependency_graph(compiled("company2"))
    order = g.evaluation_order()
    pos = {a: i for i, a in enumerate(order)}
    for u, v in g.edges:
        if u in pos and v in pos:
            assert pos[u] < pos[v]
    assert order[:2] == [A("C2"), A("A3")]


def test_cycles_and_missing():
    cm = m.CellMap({A("A1"): m.CellEntry(m.Formula(parse_formula("B1"))),
                    A("B1"): m.CellEntry(m.Formula(parse_formula("A1+C9")))})
    g = build_dependency_graph(cm)
    assert g.cycles == [[A("A1"), A("B1")]]
    assert g.missing == [A("C9")]


def test_elasticity_sheet_inputs_and_outputs():
    with open(corpus_path("elasticity_sheet.slk"), "rb") as fh:
        g = build_dependency_graph(read_sylk(fh.read()))
    assert g.inputs == [A(f"C{r}") for r in range(9, 14)]
    assert A("C17") in g.outputs
