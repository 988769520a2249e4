"""Integrity checks over a cellmap: hard-coded cells, uninitialized reads, unused values, cycles."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from . import model as m
from .diagnostics import FormulaSyntaxError
from .formula import parse_formula, render_formula
from .graph import DependencyGraph, build_dependency_graph, references
from .sylk import constant_text

DEFAULT_THRESHOLD = 0.75
MIN_RUN = 4


@dataclass(frozen=True)
class Finding:
    kind: str                     # hardcoded | used-uninitialized | initialized-unused | cycle
    cells: tuple
    message: str
    template: str | None = None   # relative R1C1 text of the shared formula
    expected: str | None = None   # that template written at the flagged cell, A1 style
    run: str | None = None        # the run the template was learnt from, e.g. "M2:M6"
    readers: tuple = ()

    @property
    def cell(self) -> m.CellAddr:
        return self.cells[0]

    def as_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "cycle":
            d["cells"] = [a.a1 for a in self.cells]
        else:
            d["cell"] = self.cell.a1
        for key in ("template", "expected", "run"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        if self.readers:
            d["readers"] = [a.a1 for a in self.readers]
        d["message"] = self.message
        return d


@dataclass
class AnalysisReport:
    hardcoded: list = field(default_factory=list)
    used_uninitialized: list = field(default_factory=list)
    initialized_unused: list = field(default_factory=list)
    cycles: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    n_cells: int = 0
    n_formulas: int = 0

    @property
    def findings(self) -> list:
        return self.hardcoded + self.used_uninitialized + self.initialized_unused + self.cycles

    def flagged(self, kind: str) -> set:
        return {f.cell for f in self.findings if f.kind == kind}

    def summary(self) -> dict:
        return {"kind": "summary", "cells": self.n_cells, "formulas": self.n_formulas,
                "inputs": [a.a1 for a in self.inputs], "outputs": [a.a1 for a in self.outputs],
                "findings": len(self.findings)}

    def to_text(self) -> str:
        lines = [f"{self.n_cells} cells, {self.n_formulas} formulas, {len(self.findings)} findings",
                 "inputs: " + (" ".join(a.a1 for a in self.inputs) or "none"),
                 "outputs: " + (" ".join(a.a1 for a in self.outputs) or "none")]
        for f in self.findings:
            where = "->".join(a.a1 for a in f.cells) if f.kind == "cycle" else f.cell.a1
            lines.append(f"{f.kind} {where}: {f.message}")
        return "\n".join(lines) + "\n"

    def to_json_lines(self) -> str:
        records = [self.summary()] + [f.as_dict() for f in self.findings]
        return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)


def _is_text(entry) -> bool:
    return entry is not None and isinstance(entry.content, m.Constant) \
        and isinstance(entry.content.value, m.Text)


def _describe(entry) -> str:
    if isinstance(entry.content, m.Formula):
        return "formula =" + render_formula(entry.content.expr)
    return "constant " + constant_text(entry.content.value)


def _runs(addrs, axis: str) -> list:
    """Maximal runs of adjacent addresses along one column (``axis="col"``) or row."""
    lines = {}
    for a in addrs:
        key, pos = (a.col, a.row) if axis == "col" else (a.row, a.col)
        lines.setdefault(key, []).append(pos)
    out = []
    for key, positions in lines.items():
        positions.sort()
        run = [positions[0]]
        for p in positions[1:]:
            if p == run[-1] + 1:
                run.append(p)
            else:
                out.append((key, run))
                run = [p]
        out.append((key, run))
    return [[m.CellAddr(p, k) if axis == "col" else m.CellAddr(k, p) for p in run] for k, run in out]


def _instantiate(template: str, at: m.CellAddr):
    try:
        return parse_formula(template, "R1C1", origin=at)
    except (FormulaSyntaxError, ValueError):
        return None


def find_hardcoded(cm: m.CellMap, threshold: float = DEFAULT_THRESHOLD, min_run: int = MIN_RUN) -> list:
    """Cells that break a formula pattern shared by most of their column or row."""
    cells = cm.cells
    candidates = [a for a, e in cells.items() if not _is_text(e)]
    flagged = {}
    for axis in ("col", "row"):
        for run in _runs(candidates, axis):
            if len(run) < min_run:
                continue
            templates = {a: render_formula(cells[a].content.expr, "R1C1", origin=a)
                         for a in run if isinstance(cells[a].content, m.Formula)}
            if not templates:
                continue
            template, count = Counter(templates.values()).most_common(1)[0]
            if count == len(run) or count / len(run) < threshold:
                continue
            span = f"{run[0].a1}:{run[-1].a1}"
            for a in run:
                if templates.get(a) == template or a in flagged:
                    continue
                expr = _instantiate(template, a)
                if expr is None:
                    continue
                refs = references(expr)
                if not refs or not all(r in cells and not _is_text(cells[r]) for r in refs):
                    continue
                expected = render_formula(expr)
                flagged[a] = Finding(
                    "hardcoded", (a,),
                    f"{_describe(cells[a])} where {count} of {len(run)} cells in {span} "
                    f"follow ={template}; expected ={expected}",
                    template=template, expected=expected, run=span)
    return [flagged[a] for a in sorted(flagged)]


def analyze(cm: m.CellMap, graph: DependencyGraph | None = None, *,
            threshold: float = DEFAULT_THRESHOLD, min_run: int = MIN_RUN) -> AnalysisReport:
    g = graph if graph is not None else build_dependency_graph(cm)
    report = AnalysisReport(n_cells=len(cm.cells),
                            n_formulas=sum(isinstance(e.content, m.Formula) for e in cm.cells.values()),
                            inputs=g.inputs, outputs=g.outputs)
    report.hardcoded = find_hardcoded(cm, threshold, min_run)
    for a in g.missing:
        readers = tuple(g.dependents(a))
        report.used_uninitialized.append(Finding(
            "used-uninitialized", (a,), "read by " + ", ".join(r.a1 for r in readers) + " but never set",
            readers=readers))
    explained = {f.cell for f in report.hardcoded}
    for a, entry in cm.items():
        if a in explained:
            continue
        if isinstance(entry.content, m.Constant) and not _is_text(entry) and not g.dependents(a):
            report.initialized_unused.append(Finding(
                "initialized-unused", (a,), f"{_describe(entry)} is never read"))
    for comp in g.cycles:
        report.cycles.append(Finding("cycle", tuple(comp),
                                     "circular reference among " + ", ".join(a.a1 for a in comp)))
    return report
