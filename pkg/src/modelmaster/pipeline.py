"""One-call entry points chaining the compiler and decompiler passes."""

from __future__ import annotations

import os
from dataclasses import dataclass

from . import model as m
from .codegen import GridPlan, allocate, unroll
from .diagnostics import CodegenError, DiagnosticError, MMSyntaxError, has_errors, sort_diagnostics
from .parser import parse
from .semantics import Analysis, analyze_program, file_loader

CORPUS_DIR = os.path.join(os.path.dirname(__file__), "corpus")


@dataclass
class CompileResult:
    source: str
    diagnostics: list
    analysis: Analysis | None = None
    plan: GridPlan | None = None
    cellmap: m.CellMap | None = None

    @property
    def ok(self) -> bool:
        return self.cellmap is not None and not has_errors(self.diagnostics)


def compile_source(source: str, path: str | None = None, *, units: bool = False,
                   loader=file_loader) -> CompileResult:
    """Run all seven compiler passes, collecting diagnostics instead of raising."""
    try:
        program = parse(source)
    except MMSyntaxError as err:
        return CompileResult(source, sort_diagnostics(err.diagnostics))
    try:
        analysis = analyze_program(program, loader=loader, path=path, units=units)
    except DiagnosticError as err:
        return CompileResult(source, sort_diagnostics(err.diagnostics))
    result = CompileResult(source, list(analysis.diagnostics), analysis)
    if has_errors(analysis.diagnostics):
        return result
    try:
        result.plan = allocate(analysis.flat, analysis.program.layout)
        result.cellmap = unroll(analysis.flat, result.plan, analysis.env)
    except CodegenError as err:
        result.diagnostics = sort_diagnostics(result.diagnostics + err.diagnostics)
        result.plan = result.cellmap = None
    return result


def compile_file(path: str, *, units: bool = False) -> CompileResult:
    with open(path, encoding="utf-8") as fh:
        return compile_source(fh.read(), path, units=units)


def compile_text(source: str, **kw) -> m.CellMap:
    """Compile and return the cellmap, raising on the first error."""
    result = compile_source(source, **kw)
    if not result.ok:
        raise DiagnosticError([d for d in result.diagnostics if d.is_error])
    return result.cellmap


def corpus_path(name: str) -> str:
    """Path of a bundled example program (``.mm`` added when missing)."""
    if not os.path.splitext(name)[1]:
        name += ".mm"
    return os.path.join(CORPUS_DIR, name)
