import json

import pytest

from modelmaster import model as m
from modelmaster.analysis import analyze, find_hardcoded
from modelmaster.evaluator import evaluate
from modelmaster.pipeline import corpus_path
from modelmaster.sylk import read_sylk

from conftest import (A, compiled, hardcoded_fixture, sheet_from, uninitialized_fixture,
                      unused_fixture)


def test_hardcoded_cell_is_flagged_with_its_template():
    report = analyze(hardcoded_fixture())
    (f,) = report.hardcoded
    assert f.cell == A("B4") and f.template == "RC[-1]*2" and f.expected == "A4*2" and f.run == "B2:B6"
    assert report.flagged("initialized-unused") == {A("A4")}


def test_threshold_controls_detection():
    cm = hardcoded_fixture()
    assert find_hardcoded(cm, threshold=0.9) == []
    assert [f.cell for f in find_hardcoded(cm, threshold=0.8)] == [A("B4")]


def test_short_runs_are_ignored():
    cm = sheet_from({"A1": 1, "A2": 2, "A3": 3, "B1": "=A1*2", "B2": "=A2*2", "B3": 6})
    assert find_hardcoded(cm) == []


def test_deviant_formula_is_flagged_too():
    spec = {f"A{r}": r for r in range(1, 6)}
    spec.update({f"B{r}": f"=A{r}+1" for r in range(1, 6)})
    spec["B3"] = "=A3+2"
    assert [f.cell for f in find_hardcoded(sheet_from(spec))] == [A("B3")]


def test_used_uninitialized():
    report = analyze(uninitialized_fixture())
    assert report.flagged("used-uninitialized") == {A("C3")}
    assert report.used_uninitialized[0].readers == (A("B1"),)
    assert report.initialized_unused == [] and report.hardcoded == []


def test_initialized_unused():
    report = analyze(unused_fixture())
    assert report.flagged("initialized-unused") == {A("A3")}
    assert len(report.findings) == 1


def test_cycles_are_reported():
    report = analyze(sheet_from({"A1": "=B1", "B1": "=A1"}))
    assert [f.cells for f in report.cycles] == [(A("A1"), A("B1"))]


def test_elasticity_sheet_classification():
    with open(corpus_path("elasticity_sheet.slk"), "rb") as fh:
        report = analyze(read_sylk(fh.read()))
    assert [a for a in report.inputs if a.row <= 12] == [A(f"C{r}") for r in range(9, 13)]
    assert A("C17") in report.outputs
    # the template ships blank: the four input cells and the stray C13 are all unset
    assert report.flagged("used-uninitialized") == {A(f"C{r}") for r in range(9, 14)}


def test_consistent_company_with_inputs_is_clean():
    cm = compiled("company")
    for r in range(2, 12):
        cm.cells[m.CellAddr(r, 1)] = m.CellEntry(m.Constant(m.Number(100 + r)))
        cm.cells[m.CellAddr(r, 2)] = m.CellEntry(m.Constant(m.Number(50 + r)))
    evaluate(cm)
    assert analyze(cm).findings == []


def test_json_records():
    lines = analyze(hardcoded_fixture()).to_json_lines().splitlines()
    records = [json.loads(line) for line in lines]
    assert records[0]["kind"] == "summary" and records[0]["findings"] == 2
    assert {r["kind"] for r in records[1:]} == {"hardcoded", "initialized-unused"}
    assert all("message" in r for r in records[1:])
