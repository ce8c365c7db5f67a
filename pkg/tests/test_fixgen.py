from __future__ import annotations

from dataclasses import replace

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from polytaint.checker import Checker, check_program
from polytaint.fixgen import FixGen
from polytaint.frontend import ast as A
from polytaint.sites import EMPTY, FIELD, LOCAL, PARAM, RETURN, Fix, Overlay, Site, combine, single
from polytaint.types import P, QType, T, U

from conftest import PROGRAMS, diags_of, load, program

# -- combine -----------------------------------------------------------------------

SITES = [Site(PARAM, ("A", "m", 1, 0)), Site(RETURN, ("A", "m", 1)), Site(FIELD, ("A", "f")),
         Site(FIELD, ("A", "g"), (1,))]
FIXES = st.builds(Fix, st.sampled_from(SITES), st.sampled_from([U, P, T]))
FIXSETS = st.one_of(st.none(), st.frozensets(FIXES, max_size=3).map(lambda s: combine(s)))


@given(FIXSETS, FIXSETS, FIXSETS)
def test_combine_is_associative(a, b, c):
    assert combine(combine(a, b), c) == combine(a, combine(b, c)) == combine(a, b, c)


@given(FIXSETS, FIXSETS)
def test_combine_is_commutative(a, b):
    assert combine(a, b) == combine(b, a)


@given(FIXSETS)
def test_failure_absorbs(a):
    assert combine(a, None) is None and combine(None, a) is None


@given(FIXSETS)
def test_empty_is_neutral(a):
    assert combine(a, EMPTY) == a


def test_conflicting_qualifiers_fail():
    s = SITES[0]
    assert combine(single(s, U), single(s, P)) is None
    assert combine(single(s, U), single(s, U)) == single(s, U)
    assert combine(EMPTY, EMPTY) == EMPTY


# -- helpers -------------------------------------------------------------------

def fixgen(src: str, **cfg):
    pr, c = program(src, **cfg)
    ch = Checker(pr.db, replace(c, emit_fixes=False))
    ch.check_program()
    return pr, FixGen(ch)


def method_of(pr, name, cls="A"):
    d = next(x for u in pr.units for x in u.decls if x.name == cls)
    return next(m for m in d.methods if m.name == name)


def sink_arg(m, sink="sink"):
    call = next(n for n in A.walk(m.body) if isinstance(n, A.Call) and n.name == sink)
    return call.args[0]


S = lambda q: QType.named("String", q)  # noqa: E731

# -- FindAnnots ---------------------------------------------------------------------


def test_already_target_needs_nothing():
    pr, fg = fixgen('class A { void m() { sink("x"); } void sink(@Untainted String s) { } }')
    m = method_of(pr, "m")
    assert fg.find_annots(sink_arg(m), S(U), ("A", m)) == EMPTY


def test_concat_of_params():
    pr, fg = fixgen("class A { void m(String a, String b) { sink(a + b); } void sink(@Untainted String s) { } }")
    m = method_of(pr, "m")
    got = fg.make_untainted(sink_arg(m), ("A", m))
    assert got == {Fix(Site(PARAM, ("A", "m", 2, 0)), U), Fix(Site(PARAM, ("A", "m", 2, 1)), U)}


def test_explicit_tainted_param_cannot_change():
    pr, fg = fixgen("class A { void m(@Tainted String a) { sink(a); } void sink(@Untainted String s) { } }")
    m = method_of(pr, "m")
    assert fg.make_untainted(sink_arg(m), ("A", m)) is None


def test_source_cannot_be_fixed():
    pr, fg = fixgen("class A { void m() { sink(Taint.source()); } void sink(@Untainted String s) { } }")
    m = method_of(pr, "m")
    assert fg.make_untainted(sink_arg(m), ("A", m)) is None


def test_local_gets_the_fix():
    src = "class A { void m(String a) { String x = a; sink(x); } void sink(@Untainted String s) { } }"
    pr, fg = fixgen(src)
    m = method_of(pr, "m")
    [f] = fg.make_untainted(sink_arg(m), ("A", m))
    assert f.site.kind == LOCAL and f.qual == U


PATHS_SRC = """class A {
  Map<String, String> paths = new HashMap<>();
  String parentPath(String path) {
    return path.substring(0, path.lastIndexOf("/"));
  }
  void exec(String name) {
    sink(parentPath(paths.get(name)));
    sink(paths.get(name));
  }
  void sink(@Untainted String t) {
  }
}
"""


def test_generic_receiver_gets_type_argument_fix():
    pr, fg = fixgen(PATHS_SRC)
    m = method_of(pr, "exec")
    second = [n for n in A.walk(m.body) if isinstance(n, A.Call) and n.name == "sink"][1]
    assert fg.make_untainted(second.args[0], ("A", m)) == {Fix(Site(FIELD, ("A", "paths"), (1,)), U)}


def test_generics_off_falls_back_to_nothing():
    pr, fg = fixgen(PATHS_SRC, generics_fixes=False)
    m = method_of(pr, "exec")
    second = [n for n in A.walk(m.body) if isinstance(n, A.Call) and n.name == "sink"][1]
    assert fg.make_untainted(second.args[0], ("A", m)) is None


def test_polytaint_for_unannotated_helper():
    pr, fg = fixgen(PATHS_SRC)
    m = method_of(pr, "exec")
    first = sink_arg(m)
    got = fg.make_untainted(first, ("A", m))
    assert got == {Fix(Site(RETURN, ("A", "parentPath", 1)), P), Fix(Site(PARAM, ("A", "parentPath", 1, 0)), P),
                   Fix(Site(FIELD, ("A", "paths"), (1,)), U)}


def test_polytaint_off_annotates_return():
    pr, fg = fixgen(PATHS_SRC, polytaint_fixes=False)
    m = method_of(pr, "exec")
    assert fg.make_untainted(sink_arg(m), ("A", m)) == {Fix(Site(RETURN, ("A", "parentPath", 1)), U)}


def test_literal_return_makes_return_untainted():
    src = 'class A { String k() { return "lit"; } void m() { sink(k()); } void sink(@Untainted String s) { } }'
    pr, fg = fixgen(src)
    m = method_of(pr, "m")
    assert fg.make_untainted(sink_arg(m), ("A", m)) == {Fix(Site(RETURN, ("A", "k", 0)), U)}


def test_chain_through_generic_parameter():
    cfg, pr = load("chain")
    ds = check_program(pr.db, cfg.check)
    assert [Fix(Site(PARAM, ("App", "foo", 1, 0), (1,)), U)] in [sorted(fs) for d in ds for fs in d.fixes]


def test_unannotated_class_yields_no_fixes():
    src = "package lib.x;\nclass A { void m(String a) { sink(a); } void sink(@Untainted String s) { } }"
    pr, fg = fixgen(src, path="lib/x/A.mj")
    m = method_of(pr, "m")
    assert fg.make_untainted(sink_arg(m), ("A", m)) is None


def test_cast_without_annotation_is_retyped_through():
    src = "class A { void m(String a) { sink((String) a); } void sink(@Untainted String s) { } }"
    pr, fg = fixgen(src)
    m = method_of(pr, "m")
    assert fg.make_untainted(sink_arg(m), ("A", m)) == {Fix(Site(PARAM, ("A", "m", 1, 0)), U)}


def test_diagnostic_falls_back_to_declaration():
    src = ("class A { Map<String, String> f; Map<String, @Untainted String> g() { return null; } "
           "void m() { f = g(); } }")
    [d] = diags_of(src)
    assert d.fixes == [frozenset({Fix(Site(FIELD, ("A", "f"), (1,)), U)})]


def test_explicit_declaration_blocks_every_fix():
    [d] = diags_of("class A { @Untainted String f; void m() { f = Taint.source(); } }")
    assert d.fixes == []


# -- properties over the corpus ---------------------------------------------------


@pytest.mark.parametrize("name", PROGRAMS)
def test_each_fix_set_removes_its_diagnostic(name):
    cfg, pr = load(name)
    for d in check_program(pr.db, cfg.check):
        for fs in d.fixes:
            after = check_program(pr.db, cfg.check, Overlay(fs))
            assert d.key not in {x.key for x in after}, (d.key, sorted(fs))


@pytest.mark.parametrize("name", PROGRAMS)
def test_generics_fix_excludes_callee_return(name):
    cfg, pr = load(name)
    for d in check_program(pr.db, cfg.check):
        if d.expr is None or d.cls is None:
            continue
        ch = Checker(pr.db, replace(cfg.check, emit_fixes=False))
        ch.check_program()
        fg = FixGen(ch)
        m = pr.db.classes[d.cls].methods.get(d.method)
        for call in (n for n in A.walk(d.expr) if isinstance(n, A.Call)):
            ci = ch.calls.get(call.nid)
            t = ch.types.get(call.nid)
            if ci is None or t is None or ci.category != "generic":
                continue
            g = fg.generics_annots(call, ci, t, t.with_qual(U), (d.cls, m), 0, ())
            if g is not None:
                assert not any(f.site.kind == RETURN and f.site.key[:2] == (ci.owner, ci.sig.name) for f in g)


def test_generics_needs_type_variables():
    pr, fg = fixgen(PATHS_SRC)
    m = method_of(pr, "exec")
    call = next(n for n in A.walk(m.body) if isinstance(n, A.Call) and n.name == "parentPath")
    ci = fg.c.calls[call.nid]
    t = fg.c.types[call.nid]
    assert fg.generics_annots(call, ci, t, t.with_qual(U), ("A", m), 0, ()) is None


# -- termination on recursive helpers -------------------------------------------------

BODIES = st.sampled_from(["p", '"lit"', "m{j}(p)", 'm{j}("k")', "p + m{j}(p)", "Taint.source()", "m{j}(m{j}(p))"])


@st.composite
def recursive_programs(draw):
    n = draw(st.integers(1, 8))
    methods = []
    for i in range(n):
        rets = draw(st.lists(BODIES, min_size=1, max_size=2))
        body = " ".join(
            f"if (p == null) {{ return {r.format(j=draw(st.integers(0, n - 1)))}; }}" for r in rets[:-1])
        last = rets[-1].format(j=draw(st.integers(0, n - 1)))
        methods.append(f"  String m{i}(String p) {{ {body} return {last}; }}")
    calls = " ".join(f"sink(m{i}(x));" for i in range(n))
    return ("class A {\n" + "\n".join(methods) +
            f"\n  void go(String x) {{ {calls} }}\n  void sink(@Untainted String s) {{ }}\n}}\n")


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(recursive_programs(), st.integers(1, 8))
def test_polytaint_terminates_on_recursion(src, depth):
    pr, c = program(src, poly_depth=depth)
    for d in check_program(pr.db, c):
        for fs in d.fixes:
            assert fs and len({f.site for f in fs}) == len(fs)
            assert all(f.qual != P or f.site.kind in (PARAM, RETURN) for f in fs)
