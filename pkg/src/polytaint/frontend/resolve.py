"""Name resolution: binds every reference and builds the immutable ProgramDB."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Optional

from .. import types as TY
from ..types import QType
from . import ast as A
from .builtins import load_builtins
from .stubs import StubEntry
from .unparse import type_str


class ResolveError(Exception):
    def __init__(self, span: A.Span, message: str):
        super().__init__(f"{span}: {message}")
        self.span = span
        self.message = message


class ResolveErrors(Exception):
    def __init__(self, errors: list[ResolveError]):
        super().__init__("\n".join(str(e) for e in errors))
        self.errors = errors


@dataclass
class ClassInfo:
    name: str
    package: str
    decl: A.Decl
    path: str
    origin: str  # "source" or "builtin"
    fields: dict[str, A.FieldDecl] = field(default_factory=dict)
    methods: dict[tuple[str, int], A.MethodDecl] = field(default_factory=dict)

    @property
    def is_enum(self) -> bool:
        return isinstance(self.decl, A.EnumDecl)

    @property
    def type_params(self) -> tuple[str, ...]:
        return () if self.is_enum else self.decl.type_params

    @property
    def extends(self) -> Optional[A.TypeRef]:
        return None if self.is_enum else self.decl.extends

    @property
    def qualname(self) -> str:
        return f"{self.package}.{self.name}" if self.package else self.name


# Binding tuples, keyed by expression node id:
#   ("local", LocalDecl)                ("param", cls, method, arity, index)
#   ("field", owner, name)              ("class", name)
#   ("enum", enum, constant)            ("lambda", name)
#   ("method", owner, name, arity, is_static)   for Call nodes
Binding = tuple


class ProgramDB:
    """Resolved program. Read-only after construction."""

    def __init__(self, units, classes, stubs, bindings, etypes, deps):
        self.units: tuple[A.SourceUnit, ...] = tuple(units)
        self.classes = MappingProxyType(classes)
        self.stubs = MappingProxyType(stubs)
        self.bindings = MappingProxyType(bindings)
        self.etypes = MappingProxyType(etypes)
        self.deps = MappingProxyType({k: frozenset(v) for k, v in deps.items()})
        rev: dict[str, set[str]] = {}
        for c, ds in self.deps.items():
            for d in ds:
                rev.setdefault(d, set()).add(c)
        self.dependents = MappingProxyType({k: frozenset(v) for k, v in rev.items()})

    # -- hierarchy -----------------------------------------------------------
    def supers(self, cls: str) -> list[str]:
        """``cls`` followed by its superclasses."""
        out = []
        while cls in self.classes and cls not in out:
            out.append(cls)
            ext = self.classes[cls].extends
            if ext is None:
                break
            cls = ext.name
        return out

    def is_subclass(self, sub: str, sup: str) -> bool:
        return sup in self.supers(sub)

    def superclass(self, cls: str) -> Optional[str]:
        ext = self.classes[cls].extends if cls in self.classes else None
        return ext.name if ext is not None else None

    def find_method(self, cls: str, name: str, arity: int):
        for c in self.supers(cls):
            m = self.classes[c].methods.get((name, arity))
            if m is not None:
                return c, m
        return None

    def find_field(self, cls: str, name: str):
        for c in self.supers(cls):
            f = self.classes[c].fields.get(name)
            if f is not None:
                return c, f
        return None

    def overridden(self, cls: str, m: A.MethodDecl):
        """Nearest superclass method that ``m`` overrides, if any."""
        if m.is_static:
            return None
        for c in self.supers(cls)[1:]:
            sm = self.classes[c].methods.get((m.name, m.arity))
            if sm is not None and not sm.is_static:
                return c, sm
        return None

    def extends_type(self, cls: str) -> Optional[QType]:
        ci = self.classes[cls]
        if ci.extends is None:
            return None
        ctx = "type-arg" if ci.origin == "source" else "local"
        t = TY.default_type(ci.extends, ctx, frozenset(ci.type_params))
        return t

    def as_super(self, t: QType, target: str) -> Optional[QType]:
        """View a named type as its superclass ``target``; the qualifier is kept."""
        seen = 0
        while t.kind == TY.NAMED and t.name != target:
            if t.name not in self.classes or seen > 64:
                return None
            ci = self.classes[t.name]
            ext = self.extends_type(t.name)
            if ext is None:
                return None
            s = self.generic_binding(ci, t)
            t = TY.subst(ext, s).with_qual(t.qual)
            seen += 1
        return t if t.kind == TY.NAMED else None

    def generic_binding(self, ci: ClassInfo, t: QType) -> TY.Subst:
        if len(t.args) == len(ci.type_params):
            return dict(zip(ci.type_params, t.args))
        # raw use: variables become Tainted Object
        return {p: QType.named("Object", TY.T) for p in ci.type_params}

    def generic_self(self, cls: str, qual=None) -> QType:
        ci = self.classes[cls]
        return QType.named(cls, qual, *(QType.var(p) for p in ci.type_params))

    def is_generic(self, name: str) -> bool:
        return name in self.classes and bool(self.classes[name].type_params)

    def is_raw(self, t: A.TypeNode) -> bool:
        return isinstance(t, A.TypeRef) and not t.args and not t.diamond and self.is_generic(t.name)

    def package_of(self, cls: str) -> str:
        return self.classes[cls].package

    def source_classes(self) -> list[str]:
        return sorted(c for c, ci in self.classes.items() if ci.origin == "source")

    def unit_of(self, cls: str) -> Optional[A.SourceUnit]:
        ci = self.classes.get(cls)
        if ci is None:
            return None
        for u in self.units:
            if u.path == ci.path:
                return u
        return None

    # -- serialization -------------------------------------------------------
    def serialize(self) -> str:
        """Deterministic JSON rendering, used to compare resolutions."""
        classes = {}
        for name in sorted(self.classes):
            ci = self.classes[name]
            classes[name] = {
                "package": ci.package,
                "origin": ci.origin,
                "extends": type_str(ci.extends) if ci.extends else None,
                "type_params": list(ci.type_params),
                "fields": {f: type_str(fd.type) for f, fd in sorted(ci.fields.items())},
                "methods": {f"{n}/{a}": _sig_text(md) for (n, a), md in sorted(ci.methods.items())},
            }
        binds = []
        for u in self.units:
            for node in _all_exprs(u):
                b = self.bindings.get(node.nid)
                if b is not None:
                    binds.append([u.path, node.span.line, node.span.col, type(node).__name__, _binding_text(b)])
        stubs = {f"{k[0]}#{k[1]}/{k[2]}": s.origin for k, s in sorted(self.stubs.items())}
        deps = {k: sorted(v) for k, v in sorted(self.deps.items())}
        return json.dumps({"classes": classes, "bindings": binds, "stubs": stubs, "deps": deps},
                          sort_keys=True, indent=1)


def _sig_text(m: A.MethodDecl) -> str:
    return f"({', '.join(type_str(p.type) for p in m.params)}) -> {type_str(m.ret)}"


def _binding_text(b: Binding) -> str:
    if b[0] == "local":
        return f"local {b[1].name}@{b[1].span.line}:{b[1].span.col}"
    return " ".join(str(x) for x in b)


def _all_exprs(u: A.SourceUnit):
    for d in u.decls:
        if isinstance(d, A.ClassDecl):
            for f in d.fields:
                if f.init is not None:
                    yield from A.walk(f.init)
            for m in d.methods:
                if m.body is not None:
                    yield from A.walk(m.body)


# -- resolution --------------------------------------------------------------

_STRING = QType.named("String")
_INT = QType.prim("int")
_BOOL = QType.prim("boolean")
_OBJECT = QType.named("Object")
CLASSREF = "classref"


class _Resolver:
    def __init__(self, units, builtin_units, stubs: list[StubEntry]):
        self.units = list(units)
        self.builtin_units = list(builtin_units)
        self.stub_entries = stubs
        self.errors: list[ResolveError] = []
        self.classes: dict[str, ClassInfo] = {}
        self.bindings: dict[int, Binding] = {}
        self.etypes: dict[int, QType] = {}
        self.deps: dict[str, set[str]] = {}
        self.stubs: dict[tuple[str, str, int], StubEntry] = {}

    def err(self, span, msg):
        self.errors.append(ResolveError(span, msg))

    def run(self) -> ProgramDB:
        for origin, units in (("builtin", self.builtin_units), ("source", self.units)):
            for u in units:
                for d in u.decls:
                    self._declare(u, d, origin)
        for st in self.stub_entries:
            ci = self.classes.get(st.cls)
            if ci is None or (st.package and ci.package != st.package):
                self.err(A.Span(st.origin, 0, 0, 0, 0), f"stub for unknown class {st.package}.{st.cls}")
                continue
            if st.key[1:] not in ci.methods:
                self.err(A.Span(st.origin, 0, 0, 0, 0), f"stub for unknown method {st.cls}#{st.method}/{len(st.param_types)}")
                continue
            self.stubs[st.key] = st
        for u in self.units:
            for d in u.decls:
                if isinstance(d, A.ClassDecl):
                    self._check_class(u, d)
                else:
                    self.deps.setdefault(d.name, set())
        if self.errors:
            raise ResolveErrors(self.errors)
        return ProgramDB(self.units, self.classes, self.stubs, self.bindings, self.etypes, self.deps)

    def _declare(self, u: A.SourceUnit, d: A.Decl, origin: str):
        if d.name in self.classes:
            self.err(d.span, f"duplicate declaration of class {d.name}")
            return
        ci = ClassInfo(d.name, u.package, d, u.path, origin)
        self.classes[d.name] = ci
        if isinstance(d, A.EnumDecl):
            if len(set(d.constants)) != len(d.constants):
                self.err(d.span, f"duplicate enum constant in {d.name}")
            return
        for f in d.fields:
            if f.name in ci.fields:
                self.err(f.span, f"duplicate declaration of field {f.name}")
            ci.fields[f.name] = f
        for m in d.methods:
            if (m.name, m.arity) in ci.methods:
                self.err(m.span, f"duplicate declaration of method {m.name}/{m.arity}")
            ci.methods[(m.name, m.arity)] = m

    # -- types ---------------------------------------------------------------
    def _check_type(self, t: A.TypeNode, tvars, cls: str, allow_void=False):
        if isinstance(t, A.ArrayTypeRef):
            self._check_type(t.elem, tvars, cls)
            return
        if t.name in tvars:
            if t.args:
                self.err(t.span, f"type variable {t.name} takes no type arguments")
            return
        if t.name in TY.PRIMITIVES:
            if t.name == "void" and not allow_void:
                self.err(t.span, "void is only allowed as a return type")
            return
        ci = self.classes.get(t.name)
        if ci is None:
            self.err(t.span, f"unresolved type {t.name}")
            return
        self.deps.setdefault(cls, set()).add(t.name)
        if t.args and len(t.args) != len(ci.type_params):
            self.err(t.span, f"{t.name} expects {len(ci.type_params)} type arguments, got {len(t.args)}")
        if t.diamond and not ci.type_params:
            self.err(t.span, f"{t.name} is not generic")
        for a in t.args:
            self._check_type(a, tvars, cls)

    def _etype(self, t: A.TypeNode, tvars) -> QType:
        return TY.default_type(t, "local", frozenset(tvars))

    # -- classes -------------------------------------------------------------
    def _check_class(self, u: A.SourceUnit, d: A.ClassDecl):
        cls = d.name
        self.deps.setdefault(cls, set())
        tvars = set(d.type_params)
        if d.extends is not None:
            self._check_type(d.extends, tvars, cls)
            seen, c = {cls}, d.extends.name
            while c in self.classes and self.classes[c].extends is not None:
                c = self.classes[c].extends.name
                if c in seen:
                    self.err(d.span, f"cyclic inheritance involving {cls}")
                    break
                seen.add(c)
        for f in d.fields:
            self._check_type(f.type, tvars, cls)
            if f.init is not None:
                self._expr(f.init, _Ctx(cls, None, tvars, [{}], "static" in f.modifiers))
        for m in d.methods:
            mt = tvars | set(m.type_params)
            self._check_type(m.ret, mt, cls, allow_void=True)
            names = set()
            for p in m.params:
                self._check_type(p.type, mt, cls)
                if p.name in names:
                    self.err(p.span, f"duplicate parameter {p.name}")
                names.add(p.name)
            if m.body is not None:
                ctx = _Ctx(cls, m, mt, [{}], m.is_static)
                self._block(m.body, ctx)

    def _block(self, b: A.Block, ctx: "_Ctx"):
        ctx.scopes.append({})
        for s in b.stmts:
            self._stmt(s, ctx)
        ctx.scopes.pop()

    def _stmt(self, s: A.Stmt, ctx: "_Ctx"):
        if isinstance(s, A.Block):
            self._block(s, ctx)
        elif isinstance(s, A.LocalDecl):
            self._check_type(s.type, ctx.tvars, ctx.cls)
            self._expr(s.init, ctx)
            if any(s.name in sc for sc in ctx.scopes) or self._is_param(s.name, ctx):
                self.err(s.span, f"duplicate declaration of local {s.name}")
            ctx.scopes[-1][s.name] = s
        elif isinstance(s, A.Assign):
            self._expr(s.target, ctx)
            self._expr(s.value, ctx)
        elif isinstance(s, A.Return):
            if s.value is not None:
                self._expr(s.value, ctx)
        elif isinstance(s, A.ExprStmt):
            self._expr(s.expr, ctx)
        elif isinstance(s, A.If):
            self._expr(s.cond, ctx)
            self._block(s.then, ctx)
            if s.orelse is not None:
                self._block(s.orelse, ctx)
        elif isinstance(s, A.While):
            self._expr(s.cond, ctx)
            self._block(s.body, ctx)

    def _is_param(self, name, ctx) -> bool:
        return ctx.method is not None and any(p.name == name for p in ctx.method.params)

    def _this_type(self, cls: str) -> QType:
        ci = self.classes[cls]
        return QType.named(cls, None, *(QType.var(p) for p in ci.type_params))

    def _lookup_name(self, name: str, ctx: "_Ctx"):
        for sc in reversed(ctx.scopes):
            if name in sc:
                v = sc[name]
                if v == "lambda":
                    return ("lambda", name), _OBJECT
                return ("local", v), self._etype(v.type, ctx.tvars)
        if ctx.method is not None:
            for i, p in enumerate(ctx.method.params):
                if p.name == name:
                    m = ctx.method
                    return ("param", ctx.cls, m.name, m.arity, i), self._etype(p.type, ctx.tvars)
        hit = self._field_type(self._this_type(ctx.cls), name)
        if hit is not None:
            return hit
        if name in self.classes:
            self.deps.setdefault(ctx.cls, set()).add(name)
            return ("class", name), QType(None, CLASSREF, name)
        return None, None

    def _field_type(self, recv: QType, name: str):
        if recv.kind != TY.NAMED or recv.name not in self.classes:
            return None
        for c in _supers(self.classes, recv.name):
            f = self.classes[c].fields.get(name)
            if f is not None:
                ci = self.classes[c]
                view = self._as_super(recv, c)
                s = dict(zip(ci.type_params, view.args)) if view is not None and len(view.args) == len(ci.type_params) else {}
                return ("field", c, name), TY.subst(self._etype(f.type, set(ci.type_params)), s)
        return None

    def _as_super(self, t: QType, target: str) -> Optional[QType]:
        guard = 0
        while t.kind == TY.NAMED and t.name != target and guard < 64:
            ci = self.classes.get(t.name)
            if ci is None or ci.extends is None:
                return None
            ext = self._etype(ci.extends, set(ci.type_params))
            s = dict(zip(ci.type_params, t.args)) if len(t.args) == len(ci.type_params) else {}
            t = TY.subst(ext, s)
            guard += 1
        return t if t.kind == TY.NAMED and t.name == target else None

    def _expr(self, e: A.Expr, ctx: "_Ctx") -> QType:
        t = self._expr_inner(e, ctx)
        self.etypes[e.nid] = t
        return t

    def _expr_inner(self, e: A.Expr, ctx: "_Ctx") -> QType:
        if isinstance(e, A.Name):
            b, t = self._lookup_name(e.id, ctx)
            if b is None:
                self.err(e.span, f"unresolved name {e.id}")
                return _OBJECT
            self.bindings[e.nid] = b
            if b[0] == "field" and ctx.static and "static" not in self.classes[b[1]].fields[b[2]].modifiers:
                self.err(e.span, f"instance field {e.id} used in a static context")
            return t
        if isinstance(e, A.This):
            if ctx.static:
                self.err(e.span, "this used in a static context")
            return self._this_type(ctx.cls)
        if isinstance(e, A.StrLit):
            return _STRING
        if isinstance(e, A.IntLit):
            return _INT
        if isinstance(e, A.BoolLit):
            return _BOOL
        if isinstance(e, A.NullLit):
            return TY.null_type().with_qual(None)
        if isinstance(e, A.Binary):
            lt = self._expr(e.left, ctx)
            rt = self._expr(e.right, ctx)
            if e.op == "+" and (lt.name == "String" or rt.name == "String"):
                return _STRING
            if e.op in ("+", "-", "*", "/", "%"):
                return _INT
            return _BOOL
        if isinstance(e, A.Unary):
            t = self._expr(e.operand, ctx)
            return _BOOL if e.op == "!" else t
        if isinstance(e, A.Paren):
            return self._expr(e.expr, ctx)
        if isinstance(e, A.Cast):
            self._check_type(e.type, ctx.tvars, ctx.cls)
            self._expr(e.expr, ctx)
            return self._etype(e.type, ctx.tvars)
        if isinstance(e, A.Call):
            return self._call(e, ctx)
        if isinstance(e, A.FieldAccess):
            return self._field_access(e, ctx)
        if isinstance(e, A.Index):
            at = self._expr(e.array, ctx)
            self._expr(e.index, ctx)
            if at.kind != TY.ARRAY:
                self.err(e.span, "indexing a non-array value")
                return _OBJECT
            return at.elem
        if isinstance(e, A.NewObject):
            self._check_type(e.type, ctx.tvars, ctx.cls)
            ats = [self._expr(a, ctx) for a in e.args]
            ci = self.classes.get(e.type.name)
            if ci is not None and ci.is_enum:
                self.err(e.span, f"cannot instantiate enum {ci.name}")
            t = self._etype(e.type, ctx.tvars)
            if e.type.diamond and ci is not None:
                args = [_OBJECT] * len(ci.type_params)
                if len(ats) == 1 and ats[0].kind == TY.NAMED:
                    view = self._as_super(ats[0], "Collection")
                    mine = self._as_super(QType.named(ci.name, None, *(QType.var(p) for p in ci.type_params)), "Collection")
                    if view is not None and mine is not None and mine.args and mine.args[0].kind == TY.VAR:
                        idx = ci.type_params.index(mine.args[0].name)
                        args[idx] = view.args[0]
                t = QType.named(ci.name, None, *args)
            return t
        if isinstance(e, A.NewArray):
            self._check_type(e.elem, ctx.tvars, ctx.cls)
            for x in e.elems:
                self._expr(x, ctx)
            return QType.array(self._etype(e.elem, ctx.tvars))
        if isinstance(e, A.ClassLit):
            if e.name not in self.classes:
                self.err(e.span, f"unresolved type {e.name}")
            else:
                self.deps.setdefault(ctx.cls, set()).add(e.name)
            return QType.named("Class", None, QType.named(e.name))
        if isinstance(e, A.Lambda):
            ctx.scopes.append({p: "lambda" for p in e.params})
            self._expr(e.body, ctx)
            ctx.scopes.pop()
            return QType.named("Runnable")
        raise TypeError(e)

    def _field_access(self, e: A.FieldAccess, ctx) -> QType:
        rt = self._expr(e.obj, ctx)
        if rt.kind == CLASSREF:
            ci = self.classes[rt.name]
            if ci.is_enum:
                if e.name not in ci.decl.constants:
                    self.err(e.span, f"unresolved enum constant {rt.name}.{e.name}")
                self.bindings[e.nid] = ("enum", rt.name, e.name)
                return QType.named(rt.name)
            hit = self._field_type(QType.named(rt.name), e.name)
            if hit is None or "static" not in self.classes[hit[0][1]].fields[e.name].modifiers:
                self.err(e.span, f"unresolved static field {rt.name}.{e.name}")
                return _OBJECT
        else:
            hit = self._field_type(rt, e.name)
            if hit is None:
                self.err(e.span, f"unresolved field {e.name}")
                return _OBJECT
        b, t = hit
        self.deps.setdefault(ctx.cls, set()).add(b[1])
        self.bindings[e.nid] = b
        return t

    def _call(self, e: A.Call, ctx) -> QType:
        arg_types = [self._expr(a, ctx) for a in e.args]
        arity = len(e.args)
        if e.receiver is None:
            recv = self._this_type(ctx.cls)
            static_call = False
        else:
            recv = self._expr(e.receiver, ctx)
            static_call = recv.kind == CLASSREF
            if static_call:
                recv = QType.named(recv.name)
        if recv.kind == TY.ARRAY or recv.kind == TY.PRIM or recv.kind == TY.NULL:
            self.err(e.span, f"cannot call {e.name} on a value of type {recv.kind}")
            return _OBJECT
        if recv.kind == TY.VAR:
            recv = _OBJECT
        hit = None
        for c in _supers(self.classes, recv.name):
            m = self.classes[c].methods.get((e.name, arity))
            if m is not None:
                hit = (c, m)
                break
        if hit is None and recv.name != "Object":
            m = self.classes["Object"].methods.get((e.name, arity)) if "Object" in self.classes else None
            hit = ("Object", m) if m is not None else None
        if hit is None:
            self.err(e.span, f"unresolved method {e.name}/{arity}")
            return _OBJECT
        owner, m = hit
        if static_call and not m.is_static:
            self.err(e.span, f"instance method {e.name} called on a class")
        if e.receiver is None and ctx.static and not m.is_static:
            self.err(e.span, f"instance method {e.name} called from a static context")
        self.deps.setdefault(ctx.cls, set()).add(owner)
        self.bindings[e.nid] = ("method", owner, e.name, arity, m.is_static)
        oci = self.classes[owner]
        s: TY.Subst = {}
        if not m.is_static:
            view = self._as_super(recv, owner)
            if view is not None and len(view.args) == len(oci.type_params):
                s.update(zip(oci.type_params, view.args))
        mvars = set(oci.type_params) | set(m.type_params)
        if m.type_params:
            ms: TY.Subst = {}
            for p, at in zip(m.params, arg_types):
                _erased_unify(self._etype(p.type, mvars), at, set(m.type_params), ms)
            s.update(ms)
        ret = TY.subst(self._etype(m.ret, mvars), s)
        return _erase_vars(ret)


def _erased_unify(d: QType, t: QType, mvars, out):
    if d.kind == TY.VAR and d.name in mvars:
        out.setdefault(d.name, t)
        return
    if d.kind == t.kind and d.name == t.name and len(d.args) == len(t.args):
        for x, y in zip(d.args, t.args):
            _erased_unify(x, y, mvars, out)


def _erase_vars(t: QType) -> QType:
    """Unbound variables in a result type behave as Object."""
    if t.kind == TY.VAR:
        return _OBJECT
    return t.with_args(_erase_vars(a) for a in t.args) if t.args else t


def _supers(classes, cls):
    out = []
    while cls in classes and cls not in out:
        out.append(cls)
        ext = classes[cls].extends
        if ext is None:
            break
        cls = ext.name
    return out


@dataclass
class _Ctx:
    cls: str
    method: Optional[A.MethodDecl]
    tvars: set
    scopes: list
    static: bool


def resolve(units, builtins=None, stubs=()) -> ProgramDB:
    """Bind all references in ``units`` against each other, the library and stubs."""
    if builtins is None:
        builtins = load_builtins()
    return _Resolver(units, builtins, list(stubs)).run()
