"""Taint qualifiers, qualified types, subtyping and generic substitution."""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Iterator, Optional


class Qual(IntEnum):
    UNTAINTED = 0
    POLY = 1
    TAINTED = 2

    @property
    def ann(self) -> str:
        return "@" + {0: "Untainted", 1: "PolyTaint", 2: "Tainted"}[int(self)]

    @classmethod
    def parse(cls, text: str) -> "Qual":
        name = text.lstrip("@")
        return {"Untainted": cls.UNTAINTED, "PolyTaint": cls.POLY, "Tainted": cls.TAINTED}[name]


U, P, T = Qual.UNTAINTED, Qual.POLY, Qual.TAINTED

NAMED, VAR, ARRAY, PRIM, NULL = "named", "var", "array", "prim", "null"
PRIMITIVES = ("int", "boolean", "void")


def eff(q: Optional[Qual]) -> Qual:
    """Qualifier used for comparisons; an absent qualifier behaves as Tainted."""
    return T if q is None else q


def join(*qs: Optional[Qual]) -> Qual:
    return max((eff(q) for q in qs), default=U)


class ShapeMismatch(Exception):
    pass


@dataclass(frozen=True)
class QType:
    """A base type with a qualifier at every level.

    ``qual`` is None for positions whose qualifier is not fixed yet: type
    variable uses without an annotation, and local-variable templates.
    """
    qual: Optional[Qual]
    kind: str
    name: str = ""
    args: tuple["QType", ...] = ()

    # constructors ----------------------------------------------------------
    @staticmethod
    def named(name: str, qual: Optional[Qual] = None, *args: "QType") -> "QType":
        return QType(qual, NAMED, name, tuple(args))

    @staticmethod
    def var(name: str, qual: Optional[Qual] = None) -> "QType":
        return QType(qual, VAR, name)

    @staticmethod
    def array(elem: "QType", qual: Optional[Qual] = None) -> "QType":
        return QType(qual, ARRAY, "", (elem,))

    @staticmethod
    def prim(name: str, qual: Optional[Qual] = None) -> "QType":
        return QType(qual, PRIM, name)

    # accessors -------------------------------------------------------------
    @property
    def elem(self) -> "QType":
        return self.args[0]

    @property
    def q(self) -> Qual:
        return eff(self.qual)

    def with_qual(self, q: Optional[Qual]) -> "QType":
        return replace(self, qual=q)

    def with_args(self, args) -> "QType":
        return replace(self, args=tuple(args))

    def erase(self) -> "QType":
        return QType(None, self.kind, self.name, tuple(a.erase() for a in self.args))

    def same_shape(self, other: "QType") -> bool:
        return self.erase() == other.erase()

    def has_vars(self) -> bool:
        return self.kind == VAR or any(a.has_vars() for a in self.args)

    def positions(self, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], "QType"]]:
        """Every nested position with its index path, outermost first."""
        yield path, self
        for i, a in enumerate(self.args):
            yield from a.positions(path + (i,))

    def at(self, path: tuple[int, ...]) -> "QType":
        t = self
        for i in path:
            t = t.args[i]
        return t

    def set_at(self, path: tuple[int, ...], q: Optional[Qual]) -> "QType":
        if not path:
            return self.with_qual(q)
        i = path[0]
        args = list(self.args)
        args[i] = args[i].set_at(path[1:], q)
        return self.with_args(args)

    def fill(self, q: Qual) -> "QType":
        """Replace every absent qualifier by ``q``."""
        return QType(q if self.qual is None else self.qual, self.kind, self.name,
                     tuple(a.fill(q) for a in self.args))

    def __str__(self) -> str:
        return render(self)


def render(t: QType) -> str:
    """Canonical rendering with explicit qualifiers, e.g. ``@Tainted Map<@Tainted String, @Untainted String>``."""
    q = t.q.ann
    if t.kind == ARRAY:
        return f"{render(t.elem)} {q} []"
    if t.kind == NULL:
        return f"{q} null"
    if t.args:
        return f"{q} {t.name}<{', '.join(render(a) for a in t.args)}>"
    return f"{q} {t.name}"


def null_type() -> QType:
    return QType(U, NULL, "null")


def is_subtype(t1: QType, t2: QType) -> bool:
    """Qualifier subtyping on two types of the same erased shape.

    The top level is covariant; type arguments and array contents are
    invariant.
    """
    if t1.kind == NULL or t2.kind == NULL:
        return t1.q <= t2.q
    if not t1.same_shape(t2):
        raise ShapeMismatch(f"{render(t1)} vs {render(t2)}")
    if t1.q > t2.q:
        return False
    return all(_same_quals(a, b) for a, b in zip(t1.args, t2.args))


def _same_quals(a: QType, b: QType) -> bool:
    return a.q == b.q and all(_same_quals(x, y) for x, y in zip(a.args, b.args))


def qual_join(a: QType, b: QType) -> QType:
    """Position-wise maximum of two same-shaped types (least upper bound for locals)."""
    if not a.same_shape(b):
        return a.with_qual(join(a.qual, b.qual))
    return QType(join(a.qual, b.qual), a.kind, a.name,
                 tuple(qual_join(x, y) for x, y in zip(a.args, b.args)))


Subst = dict[str, QType]


def find_type_subst(declared: QType, desired: QType) -> Optional[Subst]:
    """Bind the variables of ``declared`` so that it becomes ``desired``.

    Positions of ``declared`` without a qualifier accept any qualifier;
    explicit qualifiers must already agree. Returns None when there is no
    type variable to bind or the structure cannot match.
    """
    if not declared.has_vars():
        return None
    out: Subst = {}
    weak: Subst = {}
    if not _unify(declared, desired, out, weak):
        return None
    # a qualified use fixes only the nested positions of its variable
    for name, t in weak.items():
        prev = out.get(name)
        if prev is None:
            out[name] = t
        elif prev.with_qual(None) != t.with_qual(None):
            return None
    return out


def _unify(d: QType, t: QType, out: Subst, weak: Subst) -> bool:
    if d.kind == VAR:
        if d.qual is not None:
            if eff(t.qual) != d.qual:
                return False
            prev = weak.get(d.name)
            if prev is not None and prev.with_qual(None) != t.with_qual(None):
                return False
            weak[d.name] = t
            return True
        prev = out.get(d.name)
        if prev is not None and prev != t:
            return False
        out[d.name] = t
        return True
    if d.kind != t.kind or d.name != t.name or len(d.args) != len(t.args):
        return False
    if d.qual is not None and eff(t.qual) != d.qual:
        return False
    return all(_unify(x, y, out, weak) for x, y in zip(d.args, t.args))


def subst(t: QType, s: Subst) -> QType:
    """Replace type variables; an explicit qualifier on a variable use wins."""
    if t.kind == VAR:
        if t.name not in s:
            return t
        r = s[t.name]
        return r if t.qual is None else r.with_qual(t.qual)
    if not t.args:
        return t
    return t.with_args(subst(a, s) for a in t.args)


def apply_subst(s: Subst, receiver_decl: QType, call_site: QType) -> QType:
    """Instantiate a declared generic receiver, reusing call-site arguments for unbound variables."""
    if receiver_decl.kind == VAR:
        return s.get(receiver_decl.name, call_site)
    if (receiver_decl.kind != call_site.kind or receiver_decl.name != call_site.name
            or len(receiver_decl.args) != len(call_site.args)):
        raise ShapeMismatch(f"{render(receiver_decl)} vs {render(call_site)}")
    args = tuple(apply_subst(s, d, c) for d, c in zip(receiver_decl.args, call_site.args))
    return QType(call_site.qual, call_site.kind, call_site.name, args)


# -- defaulting --------------------------------------------------------------

ALWAYS_UNTAINTED = ("enum-const", "class-literal", "lambda")
CONTEXTS = ("field", "param", "return", "type-arg", "local", "enum-const", "class-literal",
            "lambda", "static-final-field", "cast", "array-init")


def default_type(declared, context: str, type_vars=frozenset(), overlay=None,
                 init_qual: Optional[Qual] = None, defaulting: bool = True) -> QType:
    """Qualified type of a parsed type in a declaration context.

    ``declared`` is a ``TypeRef``/``ArrayTypeRef`` (ignored for the
    always-Untainted constructs). ``overlay`` maps index paths to qualifiers
    for positions without a written annotation. ``init_qual`` is the
    qualifier of the initializer (static finals), of the operand (casts) or
    the join of the elements (array initializers).
    """
    from .frontend import ast as A

    if context not in CONTEXTS:
        raise ValueError(f"unknown context {context!r}")
    overlay = overlay or {}
    if context in ALWAYS_UNTAINTED:
        q = U if defaulting else T
        if declared is None:
            return QType.named("Object", q)
        return _build(declared, (), type_vars, overlay, lambda path, is_var: q if not path else T)

    def base(path, is_var):
        if context == "local":
            return None
        if is_var:
            return None
        if not path:
            if context == "static-final-field" and defaulting and init_qual is not None:
                return U if eff(init_qual) == U else T
            if context == "cast":
                return eff(init_qual) if defaulting and init_qual is not None else T
            if context == "array-init":
                return U
        if path == (0,) and context == "array-init" and isinstance(declared, A.ArrayTypeRef):
            return U if defaulting and init_qual is not None and eff(init_qual) == U else T
        return T

    return _build(declared, (), type_vars, overlay, base)


def _build(node, path, type_vars, overlay, base) -> QType:
    from .frontend import ast as A

    if node.anns:
        qual: Optional[Qual] = Qual.parse(node.anns[-1])
    elif path in overlay:
        qual = overlay[path]
    else:
        qual = None
    if isinstance(node, A.ArrayTypeRef):
        elem = _build(node.elem, path + (0,), type_vars, overlay, base)
        return QType.array(elem, qual if qual is not None else base(path, False))
    if node.name in type_vars and not node.args:
        return QType.var(node.name, qual if qual is not None else base(path, True))
    if node.name in PRIMITIVES:
        return QType.prim(node.name, qual if qual is not None else base(path, False))
    args = tuple(_build(a, path + (i,), type_vars, overlay, base) for i, a in enumerate(node.args))
    return QType.named(node.name, qual if qual is not None else base(path, False), *args)
