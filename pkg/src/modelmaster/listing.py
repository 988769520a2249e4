"""Numbered source listings with diagnostics shown under the lines they concern."""

from __future__ import annotations

from .diagnostics import sort_diagnostics


def render_listing(source: str, diagnostics, context: int | None = None) -> str:
    """Render ``source`` with a caret and message under each diagnosed line.

    With ``context`` set, only lines within that distance of a diagnostic
    are printed and each skipped run becomes a ``...`` line.
    """
    lines = source.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    by_line: dict = {}
    for d in sort_diagnostics(diagnostics):
        by_line.setdefault(min(max(d.line, 1), max(len(lines), 1)), []).append(d)

    if context is None:
        shown = set(range(1, len(lines) + 1))
    else:
        shown = {1}
        for ln in by_line:
            shown.update(range(max(1, ln - context), min(len(lines), ln + context) + 1))

    out = []
    skipped = False
    for n, text in enumerate(lines, start=1):
        if n not in shown:
            if not skipped:
                out.append("...")
            skipped = True
            continue
        skipped = False
        prefix = f"{n}: "
        out.append((prefix + text).rstrip())
        for d in by_line.get(n, ()):
            out.append(" " * (len(prefix) + d.col - 1) + "^")
            label = "Error" if d.is_error else "Warning"
            out.append(f"    {label}: {d.message}")
    if not lines:
        for d in sort_diagnostics(diagnostics):
            out.append(f"    {'Error' if d.is_error else 'Warning'}: {d.message}")
    return "\n".join(out) + ("\n" if out else "")
