import pytest

from modelmaster.pipeline import compile_source, corpus_path


def unit_diags(src):
    r = compile_source(src, units=True)
    return [(d.code, d.message, d.severity) for d in r.diagnostics]


def test_appendix_messages_in_order():
    src = open(corpus_path("units_bad"), encoding="utf-8").read()
    r = compile_source(src, units=True)
    assert [(d.line, d.message) for d in r.diagnostics] == [
        (7, "The left-hand argument has units cm, but the right-hand argument has units sec."),
        (15, "Operator ^ expects something with no units here, not units cm."),
        (23, "The left-hand argument has units cm * sec^-1, but the right-hand argument has units cm * £."),
    ]


def test_units_mode_is_opt_in():
    src = open(corpus_path("units_bad"), encoding="utf-8").read()
    assert compile_source(src).diagnostics == []


def test_matching_units_pass():
    assert unit_diags("unit cm\nattributes < a unit cm  b unit cm > where a = 1 cm and b = a + 2 cm") == []


def test_assignment_mismatch():
    (d,) = unit_diags("unit cm\nunit sec\nattributes < a unit cm  b unit sec > where a = 1 cm and b = a")
    assert d == ("UnitMismatch", "Attribute b has units sec, but its value has units cm.", "error")


@pytest.mark.parametrize("src", ["unit cm\nattributes < a unit cm > where a = 1", "unit cm\nconstant c: cm = 1"])
def test_dimensionless_value_only_warns(src):
    (d,) = unit_diags(src)
    assert d[0] == "DimensionlessValue" and d[2] == "warning"


def test_builtin_uniform_arguments():
    (d,) = unit_diags("unit cm\nunit sec\nattributes < a unit cm  b unit sec c > "
                      "where a = 1 cm and b = 1 sec and c = min(a, b)")
    assert d[1] == "Arguments of min must share units, not cm and sec."


def test_units_inside_templates_are_refused():
    (d,) = unit_diags("unit cm\nt(n:integer) = attributes < a[1:n] unit cm >\nt(2)")
    assert d[0] == "NotSupported"


@pytest.mark.parametrize("k", ["2", "0.5", "3"])
def test_scaling_by_dimensionless_constant_keeps_acceptance(k):
    base = "unit cm\nunit sec\nattributes < v unit cm * sec^-1 > where v = {} / 2 sec"
    assert unit_diags(base.format("4 cm")) == []
    assert unit_diags(base.format(f"({k} * 4 cm)")) == []
