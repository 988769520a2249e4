from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from modelmaster import model as m
from modelmaster.diagnostics import MMSyntaxError, Diagnostic
from modelmaster.lexer import KEYWORDS, render_tokens, tokenize
from modelmaster.listing import render_listing
from modelmaster.parser import parse, parse_expr
from modelmaster.pipeline import corpus_path
from modelmaster.printer import expr_text, pretty_print

from conftest import golden

COMPANY = """
attributes <
  incomings [ 1995:2004 ]
  outgoings [ 1995:2004 ]
  profit    [ 1995:2004 ]
>
where
  profit[ all t ] = incomings[ t ] - outgoings[ t ]
"""


def kinds(src):
    return [(t.kind, t.text) for t in tokenize(src) if t.kind != "comment"]


def test_tokenize_examples():
    assert kinds("profit[ all t ]") == [("ident", "profit"), ("punctuation", "["), ("keyword", "all"),
                                        ("ident", "t"), ("punctuation", "]")]
    assert [k for k, _ in kinds("constant N = 4;")] == ["keyword", "ident", "punctuation", "number",
                                                         "punctuation"]


def test_comments_kept_as_tokens_with_positions():
    toks = tokenize("/* Queue.mm */\na // tail\n")
    assert toks[0].kind == "comment" and (toks[0].line, toks[0].col) == (1, 1)
    assert toks[1].text == "a" and (toks[1].line, toks[1].col) == (2, 1)


@pytest.mark.parametrize("src,code,pos", [
    ('"unclosed', "UnterminatedString", (1, 1)),
    ("a /* x", "UnterminatedComment", (1, 3)),
    ("a ` b", "IllegalCharacter", (1, 3)),
])
def test_lexical_errors(src, code, pos):
    with pytest.raises(MMSyntaxError) as exc:
        parse(src)
    d = exc.value.diagnostics[0]
    assert d.code == code and (d.line, d.col) == pos


def test_company_program():
    p = parse(COMPANY)
    root = p.root
    assert [a.name for a in root.attrs] == ["incomings", "outgoings", "profit"]
    assert all(a.base == m.IntRange(1995, 2004) for a in root.attrs)
    (eq,) = root.equations
    assert eq.lhs_attr == "profit" and eq.lhs_patterns == (m.AllIdx("t"),)
    assert eq.rhs == m.BinOp("-", m.AttrRef("incomings", (m.VarRef("t"),)),
                             m.AttrRef("outgoings", (m.VarRef("t"),)))


def test_minimal_program():
    p = parse("attributes < a > where a = 1")
    assert p.root.attrs == (m.AttributeDecl("a"),)
    assert p.root.equations == (m.Equation("a", (), m.NumLit(Decimal(1))),)


def test_block_spellings_are_equivalent():
    a = parse("attributes < x [1:3] > where x[all i] = i")
    b = parse("attribute < x : [1:3] > where x[all i] = i;")
    c = parse("< x : [1:3] > where x[all i] = i")
    assert a.root == b.root == c.root


def test_unit_literal_spellings():
    p = parse("unit cm\nunit sec\nconstant a = 2(cm/sec)\nconstant b = 3cm\nconstant c = 1 cm")
    assert p.constants["a"].expr.unit.as_dict() == {"cm": 1, "sec": -1}
    assert p.constants["b"].expr.unit.as_dict() == {"cm": 1}
    assert p.constants["c"].expr == p.constants["b"].expr.__class__(Decimal(1), m.UnitExpr.symbol("cm"))


def test_queue_bad_parses_cleanly():
    src = open(corpus_path("queue_bad"), encoding="utf-8").read()
    p = parse(src)
    assert p.root is not None


def test_layout_examples():
    p = parse('attributes < a > where a = 1 layout '
              '<table><tr><td>Value</td><td><attr name="a"/></td></tr></table>')
    (row,) = p.layout.rows
    assert row.cells == (m.StaticText("Value"), m.AttrSlot("a"))
    assert parse("attributes < a > where a = 1 layout <table></table>").layout == m.LayoutSpec(())


@pytest.mark.parametrize("layout,code", [
    ("<table><tr><td>x</td></table>", "MismatchedTag"),
    ("<table><tr><td><foo/></td></tr></table>", "UnknownTag"),
])
def test_layout_errors(layout, code):
    with pytest.raises(MMSyntaxError) as exc:
        parse("attributes < a > where a = 1 layout " + layout)
    assert exc.value.diagnostics[0].code == code


def test_attr_slot_direction_and_step():
    p = parse('attributes < a[1:3] > where a[all i] = i layout '
              '<table><tr><td><attr name="a" direction="right" step="2"/></td></tr></table>')
    assert p.layout.rows[0].cells[0] == m.AttrSlot("a", "right", 2)


def test_syntax_error_reports_position():
    with pytest.raises(MMSyntaxError) as exc:
        parse("attributes < a > where a = = 1")
    d = exc.value.diagnostics[0]
    assert d.is_error and (d.line, d.col) == (1, 28)


# -- listings -----------------------------------------------------------------

def test_listing_without_diagnostics_is_numbered_source():
    assert render_listing("a\n  b\n", []) == "1: a\n2:   b\n"


def test_listing_two_errors_on_one_line():
    src = "attributes < a >\nwhere a = x + y\n"
    diags = [Diagnostic(2, 15, "Undeclared identifier y"), Diagnostic(2, 11, "Undeclared identifier x")]
    text = render_listing(src, diags)
    assert text == golden("two_errors.lst", text)
    lines = text.splitlines()
    assert lines[2] == " " * 13 + "^"
    assert lines[3] == "    Error: Undeclared identifier x"


def test_listing_context_elides():
    src = "".join(f"line{i}\n" for i in range(1, 11))
    text = render_listing(src, [Diagnostic(6, 1, "boom", "warning")], context=1)
    assert text.splitlines() == ["1: line1", "...", "5: line5", "6: line6", "   ^",
                                 "    Warning: boom", "7: line7", "..."]


# -- pretty printing ----------------------------------------------------------

@pytest.mark.parametrize("name", ["company", "company2", "company3", "company_template", "lazydays",
                                  "lazydays_layout", "queue", "queue_bad", "elasticity", "costs",
                                  "units_bad", "value_heading", "value_attribute"])
def test_pretty_print_round_trip_and_idempotent(name):
    p = parse(open(corpus_path(name), encoding="utf-8").read())
    text = pretty_print(p)
    assert parse(text) == p
    assert pretty_print(parse(text)) == text
    assert all(len(line) <= 72 or "<td>" in line or '"' in line for line in text.splitlines())


def test_empty_literal_prints_as_empty_block():
    assert pretty_print(m.Program(root=m.Literal())) == "attributes <\n>\n"


idents = st.from_regex(r"[a-z][a-z0-9_]{0,5}", fullmatch=True).filter(lambda s: s not in KEYWORDS)
numbers = st.decimals(min_value=0, max_value=10**6, places=3, allow_nan=False).map(
    lambda d: m.NumLit(d.normalize() if d != d.to_integral_value() else Decimal(int(d))))
strings = st.text(st.characters(min_codepoint=32, max_codepoint=126), max_size=8).map(m.StrLit)


def exprs(bound):
    names = idents.filter(lambda s: s not in bound)
    leaves = st.one_of(numbers, strings, names.map(m.AttrRef),
                       st.sampled_from(sorted(bound)).map(m.VarRef))
    ops = ["+", "-", "*", "/", "^", "&", "=", "<", ">", "<=", ">=", "<>"]

    def grow(inner):
        return st.one_of(
            st.builds(m.BinOp, st.sampled_from(ops), inner, inner),
            inner.map(m.Neg),
            st.builds(lambda f, a: m.Call(f, tuple(a)), idents, st.lists(inner, max_size=3)),
            st.builds(lambda n, ix: m.AttrRef(n, tuple(ix)), names, st.lists(inner, min_size=1, max_size=2)),
        )
    return st.recursive(leaves, grow, max_leaves=12)


@settings(max_examples=300)
@given(exprs({"i", "j"}))
def test_expression_print_parse_round_trip(e):
    assert parse_expr(expr_text(e), bound={"i", "j"}) == e


@given(st.sampled_from(["company", "queue", "lazydays_layout", "units_bad"]))
def test_token_render_round_trip(name):
    toks = [t for t in tokenize(open(corpus_path(name), encoding="utf-8").read()) if t.kind != "comment"]
    again = [t for t in tokenize(render_tokens(toks)) if t.kind != "comment"]
    assert [(t.kind, t.text) for t in again] == [(t.kind, t.text) for t in toks]
