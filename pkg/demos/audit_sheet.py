"""Audit two small sheets for integrity problems."""

from decimal import Decimal

from modelmaster import model as m
from modelmaster.analysis import analyze
from modelmaster.formula import parse_formula
from modelmaster.pipeline import corpus_path
from modelmaster.sylk import read_sylk

with open(corpus_path("elasticity_sheet.slk"), "rb") as fh:
    elasticity = read_sylk(fh.read())
print("Income elasticity template, as shipped with blank inputs:")
print(analyze(elasticity).to_text())

cells = {}
for row in range(2, 7):
    cells[m.CellAddr(row, 1)] = m.CellEntry(m.Constant(m.Number(Decimal(row * 10))))
    cells[m.CellAddr(row, 2)] = m.CellEntry(m.Formula(parse_formula(f"A{row}*1.175")))
# someone typed a number over one of the formulas
cells[m.CellAddr(4, 2)] = m.CellEntry(m.Constant(m.Number(Decimal("47"))))
print("Price list with one overwritten formula:")
print(analyze(m.CellMap(cells)).to_text())
