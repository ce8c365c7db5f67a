from __future__ import annotations

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from polytaint.frontend import ast as A
from polytaint.frontend.builtins import load_builtins
from polytaint.frontend.parser import ParseErrors, parse, parse_type
from polytaint.frontend.resolve import ResolveErrors, resolve
from polytaint.frontend.stubs import StubError, parse_stubs
from polytaint.frontend.unparse import type_str, unparse
from polytaint.project import load_texts, source_files

from conftest import CORPUS

PATHS = (CORPUS / "paths_demo" / "App.mj").read_text()


def test_demo_shape():
    u = parse(PATHS, "App.mj")
    [cls] = u.decls
    assert u.package == "app"
    assert len(cls.fields) == 1 and len(cls.methods) == 3


def test_empty_file():
    assert parse("", "e.mj").decls == ()


def test_missing_initializer_reports_one_error():
    with pytest.raises(ParseErrors) as ei:
        parse("class A { String f = ; }", "a.mj")
    [err] = ei.value.errors
    assert (err.span.line, err.span.col) == (1, 22)


def test_spans_nest():
    u = parse(PATHS, "App.mj")
    for m in u.decls[0].methods:
        for s in m.body.stmts:
            assert m.span.contains(s.span)
            for n in A.walk(s):
                assert s.span.contains(n.span)


@pytest.mark.parametrize("path", source_files([str(CORPUS)]), ids=lambda p: str(p.relative_to(CORPUS)))
def test_corpus_round_trip(path):
    u = parse(path.read_text(), str(path))
    again = parse(unparse(u), str(path))
    assert again == u
    assert unparse(again) == unparse(u)


def test_demo_map_get_binds_to_builtin():
    pr = load_texts({"App.mj": PATHS})
    calls = [n for m in pr.units[0].decls[0].methods for n in A.walk(m.body) if isinstance(n, A.Call)]
    get = next(c for c in calls if c.name == "get" and isinstance(c.receiver, A.Name))
    kind, owner, name, arity, static = pr.db.bindings[get.nid]
    assert (kind, owner, name, arity, static) == ("method", "Map", "get", 1, False)
    assert type_str(pr.db.classes["Map"].methods[("get", 1)].ret) == "V"


def test_empty_class():
    db = resolve([parse("package app; class A { }", "a.mj")])
    assert db.source_classes() == ["A"]
    assert db.classes["A"].methods == {}


def test_undeclared_method():
    with pytest.raises(ResolveErrors) as ei:
        resolve([parse("package app; class A { void m() { frob(); } }", "a.mj")])
    assert "frob" in str(ei.value)


@pytest.mark.parametrize("src, needle", [
    ("class A { Nope f; }", "Nope"),
    ("class A { Map<String> f; }", "Map"),
    ("class A { } class A { }", "A"),
    ("class A { void m() { x = 1; } }", "x"),
])
def test_resolve_errors(src, needle):
    with pytest.raises(ResolveErrors) as ei:
        resolve([parse("package app; " + src, "a.mj")])
    assert needle in str(ei.value)


def test_raw_types_are_marked_not_rejected():
    u = parse("package app; class A { List raw; List<String> ok; }", "a.mj")
    db = resolve([u])
    f = db.classes["A"].fields
    assert db.is_raw(f["raw"].type) and not db.is_raw(f["ok"].type)


def test_resolution_is_deterministic():
    texts = {p.name: p.read_text() for p in (CORPUS / "map_getter").glob("*.mj")}
    assert load_texts(texts).db.serialize() == load_texts(texts).db.serialize()


def test_builtins():
    units = load_builtins()
    classes = {d.name: (u, d) for u in units for d in u.decls}
    u, m = classes["Map"]
    assert u.package.startswith("lib.")
    get = next(x for x in m.methods if x.name == "get")
    assert [type_str(p.type) for p in get.params] == ["Object"] and type_str(get.ret) == "V"
    assert m.type_params == ("K", "V")
    to_array = next(x for x in classes["Collection"][1].methods if x.name == "toArray" and not x.params)
    assert type_str(to_array.ret) == "E[]"
    assert "Frobnicator" not in classes


def test_stub_shadows_builtin():
    stubs = parse_stubs("lib.lang.System#getenv(String) : @Tainted String (@Untainted String)\n")
    db = resolve([parse("package app; class A { }", "a.mj")], stubs=stubs)
    entry = db.stubs[("System", "getenv", 1)]
    assert type_str(entry.ret) == "@Tainted String"
    assert type_str(entry.params[0]) == "@Untainted String"


@pytest.mark.parametrize("line", [
    "nonsense",
    "lib.A#m(String) : String (String, String)",
    "lib.A#m(String) : Map<String (String)",
])
def test_bad_stub_lines(line):
    with pytest.raises(StubError):
        parse_stubs(line)


@pytest.mark.parametrize("text", ["@Untainted String", "Map<String, @Untainted String>", "String @Untainted []",
                                  "List<List<@Tainted String>>", "int"])
def test_type_round_trip(text):
    assert type_str(parse_type(text)) == text


# -- generated programs ----------------------------------------------------------

ANN = st.sampled_from(["", "@Tainted ", "@Untainted ", "@PolyTaint "])
NAMES = st.sampled_from(["a", "b", "s", "path", "x1"])


@st.composite
def types(draw, depth=2, ref=False):
    base = draw(st.sampled_from(["String", "Object", "List", "Map", "T", "arr"] + ([] if ref else ["int"])))
    ann = draw(ANN)
    if base == "List" and depth > 0:
        return f"{ann}List<{draw(types(depth - 1, ref=True))}>"
    if base == "Map" and depth > 0:
        return f"{ann}Map<String, {draw(types(depth - 1, ref=True))}>"
    if base == "arr":
        return f"String {draw(ANN)}[]".replace("  ", " ")
    if base in ("List", "Map"):
        base = "String"
    return ann + base


def exprs(depth=3):
    leaf = st.one_of(NAMES, st.sampled_from(['"lit"', '"a\\"b"', '"/"', "0", "42", "true", "false", "null",
                                             "this", "Color.RED", "App::class"]))
    if depth == 0:
        return leaf
    sub = exprs(depth - 1)
    return st.one_of(
        leaf,
        st.tuples(sub, st.sampled_from(["+", "-", "*", "==", "!=", "<", "&&", "||"]), sub)
          .map(lambda t: f"{t[0]} {t[1]} {t[2]}"),
        sub.map(lambda e: f"({e})"),
        sub.map(lambda e: f"!{e}"),
        st.tuples(NAMES, st.lists(sub, max_size=3)).map(lambda t: f"{t[0]}({', '.join(t[1])})"),
        st.tuples(sub, NAMES, st.lists(sub, max_size=2)).map(lambda t: f"({t[0]}).{t[1]}({', '.join(t[2])})"),
        st.tuples(NAMES, NAMES).map(lambda t: f"{t[0]}.{t[1]}"),
        st.tuples(NAMES, sub).map(lambda t: f"{t[0]}[{t[1]}]"),
        sub.map(lambda e: f"(@Untainted String) {e}"),
        st.lists(sub, max_size=2).map(lambda es: f"new ArrayList<>({', '.join(es)})"),
        st.lists(sub, max_size=3).map(lambda es: "new String[] {" + ", ".join(es) + "}"),
        sub.map(lambda e: f"x -> {e}"),
        sub.map(lambda e: f"(p, q) -> {e}"),
    )


@st.composite
def stmts(draw, depth=2):
    kind = draw(st.sampled_from(["local", "assign", "expr", "return", "if", "while"] if depth else
                                ["local", "assign", "expr", "return"]))
    e = draw(exprs(2))
    if kind == "local":
        return f"{draw(types())} {draw(NAMES)} = {e};"
    if kind == "assign":
        return f"{draw(NAMES)} = {e};"
    if kind == "expr":
        return f"{draw(NAMES)}({e});"
    if kind == "return":
        return draw(st.sampled_from([f"return {e};", "return;"]))
    body = " ".join(draw(st.lists(stmts(depth - 1), max_size=3)))
    if kind == "while":
        return f"while ({e}) {{ {body} }}"
    other = " ".join(draw(st.lists(stmts(depth - 1), max_size=2)))
    return f"if ({e}) {{ {body} }}" + (f" else {{ {other} }}" if draw(st.booleans()) else "")


@st.composite
def units(draw):
    members = []
    for i in range(draw(st.integers(0, 3))):
        mods = draw(st.sampled_from(["", "static ", "static final ", "private "]))
        init = draw(st.one_of(st.just(""), exprs(2).map(lambda e: f" = {e}")))
        members.append(f"  {mods}{draw(types())} f{i}{init};")
    for i in range(draw(st.integers(0, 3))):
        tps = draw(st.sampled_from(["", "<T> ", "<K, V> "]))
        params = ", ".join(f"{draw(types())} p{j}" for j in range(draw(st.integers(0, 3))))
        body = "\n    ".join(draw(st.lists(stmts(), max_size=4)))
        members.append(f"  {tps}{draw(types())} m{i}({params}) {{\n    {body}\n  }}")
    ext = draw(st.sampled_from(["", " extends Base", " extends Box<String>"]))
    enum = "enum Color { RED, GREEN }\n" if draw(st.booleans()) else ""
    return "package app.gen;\n\n" + enum + f"class C<T>{ext} {{\n" + "\n".join(members) + "\n}\n"


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(units())
def test_generated_round_trip(text):
    u = parse(text, "gen.mj")
    out = unparse(u)
    again = parse(out, "gen.mj")
    assert again == u
    assert unparse(again) == out


@settings(max_examples=100, deadline=None)
@given(exprs(3))
def test_generated_expression_round_trip(e):
    u = parse(f"package p; class C {{ void m() {{ f({e}); }} }}", "e.mj")
    assert parse(unparse(u), "e.mj") == u
