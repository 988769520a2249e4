"""Turn a spreadsheet column back into a readable program, one step at a time."""

from decimal import Decimal

from modelmaster import model as m
from modelmaster.decompiler import decompile, lift_trivial, rebase, rename, strip_headers
from modelmaster.pipeline import compile_file, corpus_path
from modelmaster.printer import pretty_print

A = m.CellAddr.from_a1
cells = {A("B2"): m.CellEntry(m.Constant(m.Text("Staff"))),
         A("B3"): m.CellEntry(m.Constant(m.Text("Numbers")))}
for row, n in zip(range(5, 10), (1, 3, 9, 12, 25)):
    cells[m.CellAddr(row, 2)] = m.CellEntry(m.Constant(m.Number(Decimal(n))))
sheet = m.CellMap(cells)


def show(title, program):
    print(f"--- {title}")
    print(pretty_print(program).split("layout")[0])


p = lift_trivial(sheet)
show("lifted: one attribute per cell", p)
p = strip_headers(p)
show("text cells moved into the layout", p)
p = rebase(p, "b5b9", m.IntRange(1, 5), ["b5..b9"])
show("five cells become one attribute", p)
p = rename(p, "b5b9", "StaffNumbers")
show("renamed", p)

cm = compile_file(corpus_path("company2")).cellmap
with open(corpus_path("company2.mmt"), encoding="utf-8") as fh:
    program, _ = decompile(cm, fh.read())
show("company2 sheet after rebasing and rolling", program)
