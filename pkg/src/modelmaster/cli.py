"""The ``modelmaster`` command: compile, decompile, check, eval and analyze."""

from __future__ import annotations

import argparse
import os
import sys
from decimal import Decimal, InvalidOperation

from . import model as m
from .analysis import DEFAULT_THRESHOLD, analyze
from .codegen import read_cellmap_text, write_cellmap_text
from .decompiler import decompile
from .diagnostics import CyclicDependency, ModelMasterError, SylkError, has_errors
from .evaluator import evaluate, format_value, to_csv
from .graph import build_dependency_graph
from .listing import render_listing
from .pipeline import compile_source
from .printer import pretty_print
from .sylk import read_sylk, write_sylk

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err.strerror}") from None


def _write(path: str | None, data, out) -> None:
    if isinstance(data, str):
        data = data.encode("utf-8")
    if path is None or path == "-":
        out.buffer.write(data) if hasattr(out, "buffer") else out.write(data.decode("utf-8"))
        return
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as err:
        raise UsageError(f"cannot write {path}: {err.strerror}") from None


def _report(path: str, diagnostics, err) -> None:
    for d in diagnostics:
        print(f"{path}:{d}", file=err)


def _compile(path: str, units: bool, err):
    source = _read_text(path)
    result = compile_source(source, path, units=units)
    _report(path, result.diagnostics, err)
    return result


def _load_cellmap(path: str, units: bool, err):
    """A cellmap from .slk, .cells or (compiled in memory) .mm; None on compile errors."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".mm":
        result = _compile(path, units, err)
        return result.cellmap if result.ok else None
    if ext == ".cells":
        return read_cellmap_text(_read_text(path))
    try:
        with open(path, "rb") as fh:
            return read_sylk(fh.read())
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _parse_value(text: str):
    if text.upper() in ("TRUE", "FALSE"):
        return m.Boolean(text.upper() == "TRUE")
    if len(text) >= 2 and text[0] == text[-1] == '"':
        return m.Text(text[1:-1])
    try:
        return m.Number(Decimal(text))
    except InvalidOperation:
        return m.Text(text)


def _parse_sets(items, cm: m.CellMap) -> dict:
    out = {}
    for item in items or ():
        addr_s, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects CELL=VALUE, got {item!r}")
        try:
            addr = m.CellAddr.from_a1(addr_s.strip())
        except ValueError:
            raise UsageError(f"--set: {addr_s!r} is not a cell address") from None
        entry = cm.cells.get(addr)
        if entry is not None and isinstance(entry.content, m.Formula):
            raise UsageError(f"--set: {addr.a1} holds a formula, not an input")
        out[addr] = _parse_value(value)
    return out


# -- commands ---------------------------------------------------------------

def cmd_compile(a, out, err) -> int:
    result = _compile(a.input, a.units, err)
    if a.listing:
        _write(a.listing, render_listing(result.source, result.diagnostics), out)
    if not result.ok:
        return EXIT_DIAGNOSTICS
    fmt = a.format or "sylk"
    if fmt == "csv":
        raise UsageError("compile writes sylk or cells; use eval for csv")
    body = write_sylk(result.cellmap) if fmt == "sylk" else write_cellmap_text(result.cellmap)
    _write(a.output, body, out)
    if a.cells:
        _write(a.cells, write_cellmap_text(result.cellmap), out)
    return EXIT_OK


def cmd_check(a, out, err) -> int:
    result = _compile(a.input, a.units, err)
    if a.listing:
        _write(a.listing, render_listing(result.source, result.diagnostics), out)
    return EXIT_DIAGNOSTICS if has_errors(result.diagnostics) else EXIT_OK


def cmd_decompile(a, out, err) -> int:
    cm = _load_cellmap(a.input, False, err)
    if cm is None:
        return EXIT_DIAGNOSTICS
    script = _read_text(a.transforms) if a.transforms else None
    try:
        program, notes = decompile(cm, script)
    except ModelMasterError as e:
        print(f"{a.transforms or a.input}: error: {e}", file=err)
        return EXIT_DIAGNOSTICS
    for note in notes:
        print(f"{a.transforms}: note: {note}", file=err)
    _write(a.output, pretty_print(program), out)
    return EXIT_OK


def cmd_eval(a, out, err) -> int:
    cm = _load_cellmap(a.input, a.units, err)
    if cm is None:
        return EXIT_DIAGNOSTICS
    inputs = _parse_sets(a.set, cm)
    try:
        state = evaluate(cm, inputs, seed=a.seed)
    except CyclicDependency as e:
        print(f"{a.input}: error: {e}", file=err)
        return EXIT_DIAGNOSTICS
    fmt = a.format or "csv"
    if fmt == "csv":
        body = to_csv(cm, state)
    elif fmt == "cells":
        lines = []
        for addr in sorted(set(cm.cells) | set(state.values)):
            entry = cm.cells.get(addr)
            lines.append(f"{addr.a1}\t{format_value(state[addr], entry.format if entry else None)}")
        body = "".join(line + "\n" for line in lines)
    else:
        raise UsageError("eval writes csv or cells")
    _write(a.output, body, out)
    return EXIT_OK


def cmd_analyze(a, out, err) -> int:
    cm = _load_cellmap(a.input, False, err)
    if cm is None:
        return EXIT_DIAGNOSTICS
    if not 0 < a.hardcode_threshold <= 1:
        raise UsageError("--hardcode-threshold must lie in (0, 1]")
    report = analyze(cm, build_dependency_graph(cm), threshold=a.hardcode_threshold)
    body = report.to_json_lines() if a.json else report.to_text()
    _write(a.report or a.output, body, out)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modelmaster",
                                description="Compile MM programs to spreadsheets and back.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    c = sub.add_parser("compile", help="compile an .mm program to SYLK")
    c.add_argument("input")
    c.add_argument("-o", "--output", help="output file (default: standard output)")
    c.add_argument("--listing", help="write a numbered source listing with diagnostics")
    c.add_argument("--units", action="store_true", help="check units of measure")
    c.add_argument("--cells", help="also write the textual cellmap here")
    c.add_argument("--format", choices=("sylk", "cells", "csv"))
    c.set_defaults(run=cmd_compile)

    d = sub.add_parser("decompile", help="turn a spreadsheet back into MM")
    d.add_argument("input", help=".slk or .cells file")
    d.add_argument("-o", "--output")
    d.add_argument("--transforms", help="transformation script (.mmt)")
    d.set_defaults(run=cmd_decompile)

    k = sub.add_parser("check", help="report diagnostics only")
    k.add_argument("input")
    k.add_argument("--units", action="store_true")
    k.add_argument("--listing")
    k.set_defaults(run=cmd_check)

    e = sub.add_parser("eval", help="evaluate a program or spreadsheet")
    e.add_argument("input", help=".mm, .slk or .cells file")
    e.add_argument("-o", "--output")
    e.add_argument("--seed", type=int, default=1)
    e.add_argument("--set", action="append", metavar="CELL=VALUE", help="override an input cell")
    e.add_argument("--format", choices=("sylk", "cells", "csv"))
    e.add_argument("--units", action="store_true")
    e.set_defaults(run=cmd_eval)

    n = sub.add_parser("analyze", help="audit a spreadsheet for integrity errors")
    n.add_argument("input", help=".slk, .cells or .mm file")
    n.add_argument("-o", "--output")
    n.add_argument("--report", help="report file (default: standard output)")
    n.add_argument("--json", action="store_true", help="one JSON record per line")
    n.add_argument("--hardcode-threshold", type=float, default=DEFAULT_THRESHOLD)
    n.set_defaults(run=cmd_analyze)
    return p


def run(argv=None, out=None, err=None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        return args.run(args, out, err)
    except UsageError as e:
        print(f"modelmaster: {e}", file=err)
        print(parser.format_usage().rstrip(), file=err)
        return EXIT_USAGE
    except SylkError as e:
        print(f"{args.input}: error: {e}", file=err)
        return EXIT_DIAGNOSTICS
    except ModelMasterError as e:
        print(f"{args.input}: error: {e}", file=err)
        return EXIT_DIAGNOSTICS


def main() -> None:
    sys.exit(run())
