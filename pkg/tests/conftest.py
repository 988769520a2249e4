import os
from pathlib import Path

import pytest

from modelmaster import model as m
from modelmaster.pipeline import compile_file, corpus_path

GOLDEN = Path(__file__).parent / "golden"
UPDATE = os.environ.get("UPDATE_GOLDEN") == "1"

CORPUS_OK = ["company", "company2", "company3", "company_template", "lazydays",
             "lazydays_layout", "queue", "elasticity", "costs", "value_heading",
             "value_attribute"]
SCRIPTED = ["company", "company2", "company3", "company_template", "lazydays",
            "elasticity", "queue"]


def golden(name: str, actual: str) -> str:
    """Compare against a frozen file; UPDATE_GOLDEN=1 rewrites it."""
    path = GOLDEN / name
    if UPDATE:
        path.write_text(actual, encoding="utf-8", newline="\n")
    if not path.exists():
        pytest.fail(f"missing golden file {name}; run with UPDATE_GOLDEN=1 to create it")
    return path.read_text(encoding="utf-8")


def A(text: str) -> m.CellAddr:
    return m.CellAddr.from_a1(text)


def compiled(name: str) -> m.CellMap:
    result = compile_file(corpus_path(name))
    assert result.ok, result.diagnostics
    return result.cellmap


@pytest.fixture(scope="session")
def corpus_cellmaps():
    return {name: compiled(name) for name in CORPUS_OK}


def queue_with_servers(n: int) -> m.CellMap:
    from modelmaster.pipeline import compile_text
    src = open(corpus_path("queue"), encoding="utf-8").read().replace("constant N = 4;", f"constant N = {n};")
    return compile_text(src)


def predicted_queue_relabel(old: m.CellMap, n_old: int, n_new: int) -> m.CellMap:
    """What the queue cellmap should become when N goes from n_old to n_new.

    Columns right of the potential-start block shift by the difference,
    ranges over the block stretch, and each new server column repeats the
    last one with its server number swapped in.
    """
    first, last_old = 5, 4 + n_old
    shift = n_new - n_old

    def move(a):
        return m.CellAddr(a.row, a.col + shift) if a.col > last_old else a

    def fix(node):
        if isinstance(node, m.CellRef):
            return m.CellRef(move(node.addr))
        if isinstance(node, m.CellRange):
            end = node.end
            if node.start.col == first and end.col == last_old:
                end = m.CellAddr(end.row, first + n_new - 1)
            return m.CellRange(move(node.start), end)
        return node

    out = {}
    for a, entry in old.cells.items():
        content = entry.content
        if isinstance(content, m.Formula):
            content = m.Formula(m.rebuild(content.expr, fix))
        out[move(a)] = m.CellEntry(content, entry.format)
    for a, entry in list(out.items()):
        if a.col != last_old or a.row == 1:
            continue
        for k in range(n_old + 1, n_new + 1):
            content = entry.content
            if isinstance(content, m.Formula):
                content = m.Formula(m.rebuild(content.expr, lambda node, k=k: m.NumLit(k)
                                              if isinstance(node, m.NumLit) and node.value == n_old
                                              and node.unit is None else node))
            out[m.CellAddr(a.row, first + k - 1)] = m.CellEntry(content, entry.format)
    return m.CellMap(out)


# -- evaluator oracle ---------------------------------------------------------

class OracleError(Exception):
    pass


def random_acyclic_cellmap(rng, max_cells: int = 50) -> m.CellMap:
    """Random sheet whose formulas only read cells created before them."""
    from decimal import Decimal
    n = rng.randint(1, max_cells)
    free = [m.CellAddr(r, c) for r in range(1, 11) for c in range(1, 11)]
    rng.shuffle(free)
    made = []
    cells = {}

    def expr(depth):
        roll = rng.random()
        if depth <= 0 or roll < 0.3:
            if made and rng.random() < 0.6:
                return m.CellRef(rng.choice(made))
            return m.NumLit(Decimal(rng.randint(0, 9)))
        if roll < 0.7:
            return m.BinOp(rng.choice(["+", "-", "*", "/", "<", "=", ">="]), expr(depth - 1), expr(depth - 1))
        if roll < 0.78:
            return m.Neg(expr(depth - 1))
        fn = rng.choice(["IF", "MIN", "MAX", "ABS"])
        arity = {"IF": 3, "ABS": 1}.get(fn, rng.randint(1, 3))
        return m.Call(fn, tuple(expr(depth - 1) for _ in range(arity)))

    for addr in free[:n]:
        if made and rng.random() < 0.7:
            cells[addr] = m.CellEntry(m.Formula(expr(3)))
        else:
            cells[addr] = m.CellEntry(m.Constant(m.Number(Decimal(rng.randint(-5, 20)))))
        made.append(addr)
    return m.CellMap(cells)


def oracle_values(cm: m.CellMap) -> dict:
    """Value of every formula cell by substituting referenced cells' definitions inline.

    Written independently of the evaluator: values are floats, bools, or
    error-kind strings prefixed with ``#``.
    """
    import math
    inlined = {}  # shared subtrees keep the substituted tree a DAG

    def substitute(e):
        if isinstance(e, m.CellRef):
            if e.addr not in inlined:
                entry = cm.cells.get(e.addr)
                if entry is None:
                    inlined[e.addr] = ("blank",)
                elif isinstance(entry.content, m.Constant):
                    inlined[e.addr] = ("const", float(entry.content.value.value))
                else:
                    inlined[e.addr] = substitute(entry.content.expr)
            return inlined[e.addr]
        if isinstance(e, m.NumLit):
            return ("const", float(e.value))
        if isinstance(e, m.BinOp):
            return ("bin", e.op, substitute(e.left), substitute(e.right))
        if isinstance(e, m.Neg):
            return ("neg", substitute(e.operand))
        if isinstance(e, m.Call):
            return ("call", e.fn, tuple(substitute(a) for a in e.args))
        raise OracleError(type(e).__name__)

    def is_err(v):
        return isinstance(v, str)

    def num(v):
        return float(v) if isinstance(v, bool) else v

    def fin(x):
        return x if math.isfinite(x) else "#VALUE"

    seen = {}

    def ev(t):
        if id(t) not in seen:
            seen[id(t)] = (t, ev_node(t))
        return seen[id(t)][1]

    def ev_node(t):
        tag = t[0]
        if tag == "const":
            return t[1]
        if tag == "blank":
            return 0.0
        if tag == "neg":
            v = ev(t[1])
            return v if is_err(v) else -num(v)
        if tag == "bin":
            a, b = ev(t[2]), ev(t[3])
            if is_err(a):
                return a
            if is_err(b):
                return b
            op = t[1]
            if op in ("<", "=", ">="):
                ra, rb = isinstance(a, bool) * 2, isinstance(b, bool) * 2
                x, y = (ra, rb) if ra != rb else (a, b)
                return {"<": x < y, "=": x == y, ">=": x >= y}[op]
            x, y = num(a), num(b)
            if op == "/":
                return "#DIV0" if y == 0 else fin(x / y)
            return fin({"+": x + y, "-": x - y, "*": x * y}[op])
        fn, args = t[1], t[2]
        if fn == "IF":
            c = ev(args[0])
            if is_err(c):
                return c
            return ev(args[1]) if (c if isinstance(c, bool) else c != 0) else ev(args[2])
        vals = [ev(a) for a in args]
        for v in vals:
            if is_err(v):
                return v
        xs = [num(v) for v in vals]
        if fn == "ABS":
            return abs(xs[0])
        return min(xs) if fn == "MIN" else max(xs)

    return {a: ev(substitute(e.content.expr)) for a, e in cm.cells.items()
            if isinstance(e.content, m.Formula)}


def plain(v):
    """Evaluator value in the oracle's representation."""
    if isinstance(v, m.Number):
        return float(v.value)
    if isinstance(v, m.Boolean):
        return v.value
    if isinstance(v, m.ErrorVal):
        return "#" + v.kind
    raise AssertionError(f"unexpected value {v!r}")


LAZY_INPUTS = [(1, 17700, 0), (3, 45540, 1400), (9, 122340, 2000), (12, 102350, 0), (25, 287930, 3400)]


def lazydays_inputs() -> dict:
    from decimal import Decimal
    out = {}
    for i, row in enumerate(LAZY_INPUTS):
        for j, v in enumerate(row):
            out[m.CellAddr(3 + i, 2 + j)] = m.Number(Decimal(v))
    return out


def queue_invariant_failures(cm: m.CellMap, state, n: int = 4) -> list:
    """Broken queue invariants for one evaluated run (empty when all hold)."""
    bad = []
    val = lambda r, c: float(state[m.CellAddr(r, c)].value)  # noqa: E731
    arrivals = [val(r, 4) for r in range(2, 12)]
    if any(b < a for a, b in zip(arrivals, arrivals[1:])):
        bad.append("arrivals not monotone")
    for r in range(2, 12):
        starts = [val(r, c) for c in range(5, 5 + n)]
        server = val(r, 5 + n)
        if val(r, 6 + n) != min(starts):
            bad.append(f"row {r}: service start is not the row minimum")
        if server not in range(1, n + 1) or starts[int(server) - 1] != min(starts):
            bad.append(f"row {r}: server {server} invalid")
        if val(r, 7 + n) != val(r, 6 + n) + val(r, 8 + n):
            bad.append(f"row {r}: end != start + duration")
    return bad


# -- rolling cases ------------------------------------------------------------

def roll_case(rng):
    """A random one-dimensional program over at most 20 points and its source text."""
    n = rng.randint(2, 20)
    lo = rng.randint(-5, 1995)
    hi = lo + n - 1
    c1, c2 = rng.randint(1, 9), rng.randint(0, 9)
    d = rng.randint(1, min(3, n - 1))
    form = rng.randrange(5)
    eqs = {
        0: [f"a[all i] = b[i] * {c1} + {c2}"],
        1: [f"a[{lo}] = {c1}", f"a[all i > {lo}] = a[i-1] * {c2} + b[i]"],
        2: [f"a[all i < {hi}] = b[i+1] - {c1}", f"a[{hi}] = {c2}"],
        3: [f"a[all i] = b[i] * i + {c1}"],
        4: [f"a[all i > {lo + d - 1}] = b[i-{d}] + {c1}"] + [f"a[{lo + k}] = {c2}" for k in range(d)],
    }[form]
    src = (f"attributes < a[{lo}:{hi}] b[{lo}:{hi}] >\nwhere\n  b[all i] = i * {c1} and\n  "
           + " and\n  ".join(eqs) + "\n")
    script = (f"strip-headers\nrebase a [{lo}:{hi}] from a2..a{n + 1} column\n"
              f"rebase b [{lo}:{hi}] from b2..b{n + 1} column\nroll a i\nroll b i\n")
    return src, script, len(eqs)


# -- analysis fixtures --------------------------------------------------------

def sheet_from(spec: dict) -> m.CellMap:
    """Cells from ``{"A1": value}``; strings starting with ``=`` are A1 formulas."""
    from decimal import Decimal
    from modelmaster.formula import parse_formula
    cells = {}
    for a1, v in spec.items():
        if isinstance(v, str) and v.startswith("="):
            content = m.Formula(parse_formula(v[1:]))
        elif isinstance(v, str):
            content = m.Constant(m.Text(v))
        else:
            content = m.Constant(m.Number(Decimal(v)))
        cells[A(a1)] = m.CellEntry(content)
    return m.CellMap(cells)


def hardcoded_fixture() -> m.CellMap:
    """Five rows doubling column A; B4 was typed over with its value."""
    spec = {"A1": "qty", "B1": "double"}
    for r in range(2, 7):
        spec[f"A{r}"] = r
        spec[f"B{r}"] = f"=A{r}*2"
    spec["B4"] = 8
    return sheet_from(spec)


def uninitialized_fixture() -> m.CellMap:
    return sheet_from({"A1": 5, "B1": "=A1+C3", "B2": "=B1*2"})


def unused_fixture() -> m.CellMap:
    return sheet_from({"A1": "label", "A2": 5, "A3": 7, "B2": "=A2*2"})
