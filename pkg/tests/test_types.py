from __future__ import annotations

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from polytaint.frontend.parser import parse_type
from polytaint.types import (ARRAY, CONTEXTS, NAMED, VAR, P, QType, Qual, ShapeMismatch, T, U, apply_subst,
                             default_type, eff, find_type_subst, is_subtype, join, null_type, qual_join, render, subst)

S = lambda q=None: QType.named("String", q)  # noqa: E731


def test_untainted_below_tainted():
    assert is_subtype(S(U), S(T))
    assert not is_subtype(S(T), S(U))


def test_type_arguments_are_invariant():
    lt = QType.named("List", T, S(T))
    lu = QType.named("List", T, S(U))
    assert not is_subtype(lt, lu)
    assert not is_subtype(lu, lt)
    assert is_subtype(QType.named("List", U, S(U)), lu)


def test_array_contents_are_invariant():
    assert not is_subtype(QType.array(S(U), T), QType.array(S(T), T))


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        is_subtype(S(U), QType.named("File", T))
    with pytest.raises(ShapeMismatch):
        is_subtype(QType.named("List", T, S()), QType.named("List", T, QType.named("File")))


def test_null_is_untainted():
    assert is_subtype(null_type(), S(U))


def test_absent_qualifier_behaves_as_tainted():
    assert eff(None) == T and join() == U and join(U, None) == T
    assert is_subtype(S(T), S(None)) and not is_subtype(S(None), S(U))


def test_render():
    t = QType.named("Map", T, S(T), S(U))
    assert render(t) == "@Tainted Map<@Tainted String, @Untainted String>"
    assert str(QType.array(S(U), T)) == "@Untainted String @Tainted []"


def test_qual_join():
    a = QType.named("List", U, S(U))
    b = QType.named("List", U, S(T))
    assert qual_join(a, b) == QType.named("List", U, S(T))


# -- substitution -----------------------------------------------------------------

def test_find_type_subst_var():
    assert find_type_subst(QType.var("V"), S(U)) == {"V": S(U)}


def test_find_type_subst_no_vars():
    assert find_type_subst(S(T), S(U)) is None


def test_find_type_subst_nested():
    it = QType.named("Iterator", T, QType.var("E"))
    assert find_type_subst(it, QType.named("Iterator", T, S(U))) == {"E": S(U)}


def test_find_type_subst_explicit_conflict():
    assert find_type_subst(QType.named("Box", U, QType.var("E")), QType.named("Box", T, S(U))) is None


def test_find_type_subst_qualified_use_binds_nested_only():
    d = QType.named("Map", U, QType.var("A"), QType.var("A", T))
    assert find_type_subst(d, QType.named("Map", U, S(U), S(T))) == {"A": S(U)}
    assert find_type_subst(d, QType.named("Map", U, S(U), S(U))) is None


def test_apply_subst_reuses_call_site_args():
    decl = QType.named("Map", None, QType.var("K"), QType.var("V"))
    site = QType.named("Map", T, S(T), S(T))
    assert apply_subst({"V": S(U)}, decl, site) == QType.named("Map", T, S(T), S(U))


def test_apply_subst_identity():
    decl = QType.named("List", None, QType.var("E"))
    site = QType.named("List", T, S(T))
    assert apply_subst({}, decl, site) == site


def test_apply_subst_collection():
    decl = QType.named("Collection", None, QType.var("E"))
    assert apply_subst({"E": S(U)}, decl, QType.named("Collection", T, S(T))) == \
        QType.named("Collection", T, S(U))


def test_apply_subst_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        apply_subst({}, QType.named("List", None, QType.var("E")), QType.named("Set", T, S(T)))


# -- defaulting -----------------------------------------------------------------------

def test_default_field_is_tainted():
    assert default_type(parse_type("String"), "field") == S(T)


def test_default_keeps_written_annotation():
    assert default_type(parse_type("Map<String, @Untainted String>"), "field") == QType.named("Map", T, S(T), S(U))


def test_default_constructs():
    assert default_type(None, "enum-const").qual == U
    assert default_type(None, "class-literal").qual == U
    assert default_type(None, "lambda", defaulting=False).qual == T
    assert default_type(parse_type("String"), "static-final-field", init_qual=U).qual == U
    assert default_type(parse_type("String"), "static-final-field", init_qual=T).qual == T
    assert default_type(parse_type("String"), "cast", init_qual=U).qual == U


def test_default_array_initializer():
    arr = parse_type("String[]")
    assert default_type(arr, "array-init", init_qual=T).elem.qual == T
    assert default_type(arr, "array-init", init_qual=U).elem.qual == U
    assert default_type(arr, "array-init", init_qual=U, defaulting=False).elem.qual == T


def test_default_local_and_type_vars_have_no_qualifier():
    assert default_type(parse_type("List<String>"), "local").qual is None
    t = default_type(parse_type("List<E>"), "param", frozenset({"E"}))
    assert t.qual == T and t.args[0].kind == VAR and t.args[0].qual is None


def test_default_unknown_context():
    with pytest.raises(ValueError):
        default_type(parse_type("String"), "module")


# -- properties -----------------------------------------------------------------------

QUALS = st.sampled_from([U, P, T])


def shapes(depth=2):
    leaf = st.sampled_from(["String", "File"]).map(lambda n: QType.named(n))
    if depth == 0:
        return leaf
    sub = shapes(depth - 1)
    return st.one_of(leaf, sub.map(lambda e: QType.named("List", None, e)),
                     st.tuples(sub, sub).map(lambda kv: QType.named("Map", None, *kv)),
                     sub.map(lambda e: QType.array(e)))


def qualify(shape: QType, quals) -> QType:
    it = iter(quals)

    def go(t):
        return QType(next(it), t.kind, t.name, tuple(go(a) for a in t.args))
    return go(shape)


def size(t: QType) -> int:
    return 1 + sum(size(a) for a in t.args)


@st.composite
def same_shape(draw, n=3):
    shape = draw(shapes())
    k = size(shape)
    return [qualify(shape, draw(st.lists(QUALS, min_size=k, max_size=k))) for _ in range(n)]


@given(same_shape())
def test_subtyping_is_a_partial_order(ts):
    a, b, c = ts
    assert is_subtype(a, a)
    if is_subtype(a, b) and is_subtype(b, a):
        assert a == b
    if is_subtype(a, b) and is_subtype(b, c):
        assert is_subtype(a, c)


@st.composite
def generic_and_instance(draw):
    """A declared type with variables and an instance of it with every qualifier explicit."""
    names = ["A", "B"]
    bound = {n: qualify(s, draw(st.lists(QUALS, min_size=size(s), max_size=size(s))))
             for n, s in ((n, draw(shapes(1))) for n in names)}

    def decl(depth):
        if depth == 0 or draw(st.booleans()):
            if draw(st.booleans()):
                return QType.var(draw(st.sampled_from(names)), draw(st.sampled_from([None, None, U, T])))
            return QType.named(draw(st.sampled_from(["String", "File"])), draw(QUALS))
        kind = draw(st.sampled_from(["List", "Map", "arr"]))
        q = draw(QUALS)
        if kind == "List":
            return QType.named("List", q, decl(depth - 1))
        if kind == "Map":
            return QType.named("Map", q, decl(depth - 1), decl(depth - 1))
        return QType.array(decl(depth - 1), q)

    d = decl(3)
    assume(d.has_vars())
    return d, subst(d, bound)


@settings(max_examples=400)
@given(generic_and_instance())
def test_find_type_subst_round_trip(pair):
    d, desired = pair
    s = find_type_subst(d, desired)
    assert s is not None
    assert subst(d, s) == desired
    assert set(s) <= {t.name for _, t in d.positions() if t.kind == VAR}


@given(generic_and_instance(), st.data())
def test_find_type_subst_sound_on_arbitrary_targets(pair, data):
    d, inst = pair
    k = size(inst)
    other = qualify(inst, data.draw(st.lists(QUALS, min_size=k, max_size=k)))
    s = find_type_subst(d, other)
    if s is not None:
        assert subst(d, s) == other


@given(same_shape(1))
def test_substitution_is_identity_without_domain_variables(ts):
    [t] = ts
    assert subst(t, {"Z": S(U)}) == t


TYPE_TEXTS = st.recursive(st.sampled_from(["String", "int", "File", "E"]),
                          lambda sub: st.one_of(sub.map(lambda e: f"List<{e.replace('int', 'Integer')}>"),
                                                sub.map(lambda e: f"{e}[]")), max_leaves=4)


@given(TYPE_TEXTS, st.sampled_from(CONTEXTS), st.sampled_from([None, U, T]), st.booleans())
def test_default_never_poly(text, ctx, init, defaulting):
    t = default_type(parse_type(text), ctx, frozenset({"E"}), init_qual=init, defaulting=defaulting)
    assert all(x.qual != P for _, x in t.positions())
    assert t.kind in (NAMED, ARRAY, VAR, "prim")


def test_qual_parse_and_ann():
    for q in Qual:
        assert Qual.parse(q.ann) == q
