"""Modular taint type checker."""
from __future__ import annotations

import fnmatch
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from . import types as TY
from .frontend import ast as A
from .frontend.resolve import CLASSREF, ProgramDB
from .sites import FIELD, LOCAL, PARAM, RETURN, Overlay, fixset_json, local_key
from .types import NAMED, NULL, VAR, QType, Qual, U, P, T, eff, join

ASSIGN = "AssignmentIncompat"
OVERRIDE = "OverrideIncompat"


@dataclass
class CheckConfig:
    annotated_packages: str = ".*"
    sources: tuple[str, ...] = ()
    sinks: tuple[str, ...] = ()
    sanitizers: tuple[str, ...] = ()
    stub_paths: tuple[str, ...] = ()
    emit_fixes: bool = True
    construct_defaulting: bool = True
    generics_fixes: bool = True
    polytaint_fixes: bool = True
    poly_depth: int = 5
    jobs: int = 1

    def __post_init__(self):
        self._pkg_re = re.compile(self.annotated_packages)
        self._sinks = []
        for s in self.sinks:
            pat, _, idx = s.rpartition(":") if ":" in s else (s, "", "0")
            self._sinks.append((pat, int(idx)))


@dataclass
class MethodSig:
    owner: str
    name: str
    type_params: tuple[str, ...]
    receiver: QType
    params: tuple[QType, ...]
    ret: QType
    pt_args: frozenset            # parameter indices with @PolyTaint; -1 is the receiver
    package: str
    origin: str                   # "source", "stub" or "builtin"
    annotated: bool               # declared types are used as written
    decl: A.MethodDecl = field(repr=False, compare=False, default=None)

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def poly_default(self) -> bool:
        """Unannotated: every position behaves as @PolyTaint."""
        return not self.annotated


@dataclass
class CallInfo:
    owner: str
    sig: MethodSig
    static: bool
    receiver: Optional[A.Expr]
    recv_type: Optional[QType]
    recv_class: Optional[str]
    ret_decl: QType               # return type in terms of the receiver class's variables
    recv_decl: Optional[QType]    # generic receiver type of the receiver class
    class_vars: tuple[str, ...]
    subst: dict
    category: str                 # "generic", "stub", "annotated" or "poly"
    args: tuple[A.Expr, ...]
    arg_types: tuple[QType, ...]
    pt_actuals: tuple[tuple[int, A.Expr], ...]
    is_source: bool
    is_sanitizer: bool


@dataclass
class Diagnostic:
    kind: str
    file: str
    line: int
    col: int
    end_line: int
    end_col: int
    lhs: QType
    rhs: QType
    context: str
    cls: Optional[str] = None
    method: Optional[tuple[str, int]] = None
    expr: Optional[A.Expr] = field(default=None, repr=False, compare=False)
    lhs_decl: Optional[tuple] = field(default=None, repr=False, compare=False)
    override: Optional[tuple] = field(default=None, repr=False, compare=False)
    fixes: list = field(default_factory=list, repr=False, compare=False)

    @property
    def key(self) -> tuple:
        return (self.kind, self.file, self.line, self.col, self.end_line, self.end_col, self.context)

    def sort_key(self):
        return (self.file, self.line, self.col, self.kind, self.context, str(self.lhs), str(self.rhs))

    def message(self) -> str:
        verb = {"argument": "passed to", "return": "returned as", "override-return": "overrides",
                "override-param": "overridden by"}.get(self.context, "assigned to")
        if self.rhs.q != self.lhs.q or self.kind == OVERRIDE:
            base = f"{self.rhs.q.ann} {verb} {self.lhs.q.ann}"
        else:
            base = "incompatible type arguments"
        return f"{base} (found: {self.rhs}, required: {self.lhs})"

    def human(self) -> str:
        return f"{self.file}:{self.line}:{self.col}: error: [{self.kind}] {self.message()}"

    def to_json(self, db=None) -> dict:
        return {
            "file": self.file, "line": self.line, "col": self.col, "kind": self.kind,
            "lhs": str(self.lhs), "rhs": str(self.rhs),
            "fixes": [fixset_json(fs, db) for fs in self.fixes] if db is not None else [],
        }


def _span_diag(kind, span: A.Span, lhs, rhs, context, **kw) -> Diagnostic:
    return Diagnostic(kind, span.file, span.line, span.col, span.end_line, span.end_col, lhs, rhs, context, **kw)


def method_ids(ci, name: str) -> tuple[str, ...]:
    return (f"{ci.name}#{name}", f"{ci.qualname}#{name}")


class _Ctx:
    def __init__(self, cls: str, method: Optional[A.MethodDecl], tvars: frozenset, static: bool):
        self.cls = cls
        self.method = method
        self.tvars = tvars
        self.static = static


class Checker:
    """One checker run over a resolved program under an annotation overlay."""

    def __init__(self, db: ProgramDB, cfg: CheckConfig, overlay: Optional[Overlay] = None):
        self.db = db
        self.cfg = cfg
        self.overlay = overlay or Overlay()
        self.types: dict[int, QType] = {}
        self.calls: dict[int, CallInfo] = {}
        self._sigs: dict = {}
        self._fields: dict = {}
        self._sf_busy: set = set()
        self._ann_cache: dict[str, bool] = {}

    # -- configuration lookups ---------------------------------------------
    def is_annotated_class(self, cls: str) -> bool:
        r = self._ann_cache.get(cls)
        if r is None:
            ci = self.db.classes.get(cls)
            r = ci is not None and ci.origin == "source" and self.cfg._pkg_re.fullmatch(ci.package) is not None
            self._ann_cache[cls] = r
        return r

    def _match(self, patterns, owner: str, name: str) -> bool:
        ids = method_ids(self.db.classes[owner], name)
        return any(fnmatch.fnmatchcase(i, p) for p in patterns for i in ids)

    def is_source(self, owner: str, name: str) -> bool:
        return self._match(self.cfg.sources, owner, name)

    def is_sanitizer(self, owner: str, name: str) -> bool:
        return self._match(self.cfg.sanitizers, owner, name)

    def sink_params(self, owner: str, name: str) -> set[int]:
        ids = method_ids(self.db.classes[owner], name)
        return {i for p, i in self.cfg._sinks for x in ids if fnmatch.fnmatchcase(x, p)}

    def is_configured(self, owner: str, name: str) -> bool:
        return (self.is_source(owner, name) or self.is_sanitizer(owner, name)
                or bool(self.sink_params(owner, name)))

    # -- declared types ----------------------------------------------------
    def field_type(self, owner: str, fname: str) -> QType:
        key = (owner, fname)
        hit = self._fields.get(key)
        if hit is not None:
            return hit
        ci = self.db.classes[owner]
        f = ci.fields[fname]
        tv = frozenset(ci.type_params)
        if not self.is_annotated_class(owner):
            t = TY.default_type(f.type, "local", tv)
            t = _fill_nonvar(t, T)
        elif f.is_static_final and f.init is not None:
            if key in self._sf_busy:
                return _fill_nonvar(TY.default_type(f.type, "local", tv), T)
            self._sf_busy.add(key)
            try:
                iq = self.type_expr(f.init, {}, _Ctx(owner, None, tv, True), None, record=False).q
            finally:
                self._sf_busy.discard(key)
            t = TY.default_type(f.type, "static-final-field", tv, self.overlay.for_decl(FIELD, key),
                                init_qual=iq, defaulting=self.cfg.construct_defaulting)
        else:
            t = TY.default_type(f.type, "field", tv, self.overlay.for_decl(FIELD, key))
        self._fields[key] = t
        return t

    def sig(self, owner: str, m: A.MethodDecl) -> MethodSig:
        k = (owner, m.name, m.arity)
        hit = self._sigs.get(k)
        if hit is not None:
            return hit
        ci = self.db.classes[owner]
        tv = frozenset(ci.type_params) | frozenset(m.type_params)
        stub = self.db.stubs.get(k)
        if stub is not None:
            params = tuple(TY.default_type(t, "param", tv) for t in stub.params)
            ret = TY.default_type(stub.ret, "return", tv)
            origin, annotated = "stub", True
        elif self.is_annotated_class(owner):
            params = tuple(TY.default_type(p.type, "param", tv, self.overlay.for_decl(PARAM, k + (i,)))
                           for i, p in enumerate(m.params))
            ret = TY.default_type(m.ret, "return", tv, self.overlay.for_decl(RETURN, k))
            origin, annotated = "source", True
        else:
            params = tuple(TY.default_type(p.type, "local", tv) for p in m.params)
            ret = TY.default_type(m.ret, "local", tv)
            origin, annotated = ("source" if ci.origin == "source" else "builtin"), False
        if annotated:
            pt = frozenset(i for i, p in enumerate(params) if p.qual == P)
        else:
            pt = frozenset(range(-1 if not m.is_static else 0, len(params)))
        s = MethodSig(owner, m.name, m.type_params, self.db.generic_self(owner), params, ret, pt,
                      ci.package, origin, annotated, m)
        self._sigs[k] = s
        return s

    # -- driver --------------------------------------------------------------
    def check_program(self, classes=None) -> list[Diagnostic]:
        names = [c for c in (classes if classes is not None else self.db.source_classes())
                 if self.is_annotated_class(c) and not self.db.classes[c].is_enum]
        diags: list[Diagnostic] = []
        if self.cfg.jobs > 1 and len(names) > 1:
            with ThreadPoolExecutor(self.cfg.jobs) as ex:
                for ds in ex.map(self.check_class, names):
                    diags.extend(ds)
        else:
            for c in names:
                diags.extend(self.check_class(c))
        diags.sort(key=Diagnostic.sort_key)
        if self.cfg.emit_fixes:
            from .fixgen import FixGen
            fg = FixGen(self)
            for d in diags:
                d.fixes = fg.fixes_for(d)
        return diags

    def check_class(self, cls: str) -> list[Diagnostic]:
        ci = self.db.classes[cls]
        d: A.ClassDecl = ci.decl
        out: list[Diagnostic] = []
        tv = frozenset(d.type_params)
        for f in d.fields:
            if f.init is None:
                continue
            ctx = _Ctx(cls, None, tv, "static" in f.modifiers)
            ft = self.field_type(cls, f.name)
            rt = self.type_expr(f.init, {}, ctx, ft, diags=out)
            if not self.compatible(rt, ft):
                out.append(_span_diag(ASSIGN, f.init.span, ft, rt, "assignment", cls=cls, expr=f.init,
                                      lhs_decl=(FIELD, (cls, f.name))))
        for m in d.methods:
            out.extend(self.check_override(cls, m))
            if m.body is None:
                continue
            ctx = _Ctx(cls, m, tv | frozenset(m.type_params), m.is_static)
            env: dict[int, QType] = {}
            self._block(m.body, env, ctx, out)
        return out

    # -- overrides -----------------------------------------------------------
    def check_override(self, cls: str, m: A.MethodDecl) -> list[Diagnostic]:
        hit = self.db.overridden(cls, m)
        if hit is None:
            return []
        sup_cls, sm = hit
        sub = self.sig(cls, m)
        sup = self.sig(sup_cls, sm)
        if not sup.annotated:
            return []
        view = self.db.as_super(self.db.generic_self(cls), sup_cls)
        s = dict(zip(self.db.classes[sup_cls].type_params, view.args)) if view is not None else {}
        out = []
        sr = TY.subst(sup.ret, s)
        if m.ret.name != "void" and not self.compatible(sub.ret, sr):
            out.append(_span_diag(OVERRIDE, m.span, sr, sub.ret, "override-return", cls=cls,
                                  method=(m.name, m.arity),
                                  override=("return", (cls, m.name, m.arity), (sup_cls, sm.name, sm.arity), None)))
        for i, (pt_sub, pt_sup) in enumerate(zip(sub.params, sup.params)):
            ps = TY.subst(pt_sup, s)
            if not self.compatible(ps, pt_sub):
                out.append(_span_diag(OVERRIDE, m.params[i].span, pt_sub, ps, "override-param", cls=cls,
                                      method=(m.name, m.arity),
                                      override=("param", (cls, m.name, m.arity), (sup_cls, sm.name, sm.arity), i)))
        return out

    # -- compatibility -------------------------------------------------------
    def compatible(self, rhs: QType, lhs: QType) -> bool:
        """Pseudo-assignment check; falls back to top-level qualifiers across unrelated shapes."""
        if rhs.kind == NULL or lhs.kind == NULL:
            return rhs.q <= lhs.q
        if rhs.same_shape(lhs):
            return TY.is_subtype(rhs, lhs)
        if rhs.kind == NAMED and lhs.kind == NAMED and rhs.name != lhs.name:
            view = self.db.as_super(rhs, lhs.name)
            if view is not None and view.same_shape(lhs):
                return TY.is_subtype(view, lhs)
        return rhs.q <= lhs.q

    def view_as(self, t: QType, like: QType) -> QType:
        """``t`` seen with the shape of ``like`` when it is a subclass; else ``t``."""
        if t.kind == NAMED and like.kind == NAMED and t.name != like.name:
            v = self.db.as_super(t, like.name)
            if v is not None:
                return v
        return t

    # -- statements ----------------------------------------------------------
    def local_template(self, ctx: _Ctx, d: A.LocalDecl) -> QType:
        key = local_key(ctx.cls, ctx.method, d)
        return TY.default_type(d.type, "local", ctx.tvars, self.overlay.for_decl(LOCAL, key))

    def _block(self, b: A.Block, env, ctx, out, report=True):
        for s in b.stmts:
            self._stmt(s, env, ctx, out, report)

    def _stmt(self, s, env: dict, ctx: _Ctx, out, report: bool):
        diags = out if report else None
        if isinstance(s, A.Block):
            self._block(s, env, ctx, out, report)
        elif isinstance(s, A.LocalDecl):
            tmpl = self.local_template(ctx, s)
            rt = self.type_expr(s.init, env, ctx, tmpl, diags=diags)
            env[s.nid] = self._assign_local(tmpl, rt, s.init, ctx, s, diags)
        elif isinstance(s, A.Assign):
            rt_target = s.target
            b = self.db.bindings.get(rt_target.nid) if isinstance(rt_target, A.Name) else None
            if b is not None and b[0] == "local":
                tmpl = self.local_template(ctx, b[1])
                rt = self.type_expr(s.value, env, ctx, tmpl, diags=diags)
                env[b[1].nid] = self._assign_local(tmpl, rt, s.value, ctx, b[1], diags)
            else:
                lt, decl = self._target_type(rt_target, env, ctx, diags)
                rt = self.type_expr(s.value, env, ctx, lt, diags=diags)
                if diags is not None and not self.compatible(rt, lt):
                    diags.append(_span_diag(ASSIGN, s.value.span, lt, rt, "assignment", cls=ctx.cls,
                                            method=_mkey(ctx), expr=s.value, lhs_decl=decl))
        elif isinstance(s, A.Return):
            if s.value is None or ctx.method is None:
                return
            sig = self.sig(ctx.cls, ctx.method)
            rt = self.type_expr(s.value, env, ctx, sig.ret, diags=diags)
            if diags is not None and not self.compatible(rt, sig.ret):
                diags.append(_span_diag(ASSIGN, s.value.span, sig.ret, rt, "return", cls=ctx.cls,
                                        method=_mkey(ctx), expr=s.value,
                                        lhs_decl=(RETURN, (ctx.cls, ctx.method.name, ctx.method.arity))))
        elif isinstance(s, A.ExprStmt):
            self.type_expr(s.expr, env, ctx, None, diags=diags)
        elif isinstance(s, A.If):
            self.type_expr(s.cond, env, ctx, None, diags=diags)
            e1 = dict(env)
            self._block(s.then, e1, ctx, out, report)
            e2 = dict(env)
            if s.orelse is not None:
                self._block(s.orelse, e2, ctx, out, report)
            env.clear()
            env.update(_join_env(e1, e2))
        elif isinstance(s, A.While):
            # iterate to a fixpoint without reporting, then one reporting pass
            cur = dict(env)
            for _ in range(100):
                self.type_expr(s.cond, cur, ctx, None, diags=None, record=False)
                body = dict(cur)
                self._block(s.body, body, ctx, out, report=False)
                nxt = _join_env(cur, body)
                if nxt == cur:
                    break
                cur = nxt
            self.type_expr(s.cond, cur, ctx, None, diags=diags)
            body = dict(cur)
            self._block(s.body, body, ctx, out, report)
            env.clear()
            env.update(cur)

    def _assign_local(self, tmpl: QType, rt: QType, rhs: A.Expr, ctx, decl: A.LocalDecl, diags) -> QType:
        merged = self.merge_local(tmpl, rt)
        if diags is not None and not self.compatible(rt, merged):
            diags.append(_span_diag(ASSIGN, rhs.span, merged, rt, "assignment", cls=ctx.cls, method=_mkey(ctx),
                                    expr=rhs, lhs_decl=(LOCAL, local_key(ctx.cls, ctx.method, decl))))
        return merged

    def merge_local(self, tmpl: QType, rt: QType) -> QType:
        """Flow type of a local after assigning ``rt``: fixed positions stay, open ones follow the value."""
        if rt.kind == NULL:
            return tmpl.with_qual(tmpl.qual if tmpl.qual is not None else U).fill(T)
        view = self.view_as(rt, tmpl)
        if view.same_shape(tmpl):
            return _overlay_quals(tmpl, view)
        return tmpl.with_qual(tmpl.qual if tmpl.qual is not None else rt.q).fill(T)

    def _target_type(self, target: A.Expr, env, ctx, diags):
        if isinstance(target, A.Name):
            b = self.db.bindings[target.nid]
            if b[0] == "param":
                sig = self.sig(ctx.cls, ctx.method)
                t = sig.params[b[4]]
                self._record(target, t, True)
                return t, (PARAM, (b[1], b[2], b[3], b[4]))
            if b[0] == "field":
                t = self.field_type(b[1], b[2])
                self._record(target, t, True)
                return t, (FIELD, (b[1], b[2]))
            return QType.named("Object", T), None
        if isinstance(target, A.FieldAccess):
            b = self.db.bindings[target.nid]
            recv = self.type_expr(target.obj, env, ctx, None, diags=diags)
            t = self._field_of(recv, b[1], b[2])
            self._record(target, t, True)
            return t, (FIELD, (b[1], b[2]))
        if isinstance(target, A.Index):
            at = self.type_expr(target.array, env, ctx, None, diags=diags)
            self.type_expr(target.index, env, ctx, None, diags=diags)
            return (at.elem if at.kind == TY.ARRAY else QType.named("Object", T)), None
        return QType.named("Object", T), None

    def _field_of(self, recv: Optional[QType], owner: str, fname: str) -> QType:
        ft = self.field_type(owner, fname)
        if recv is not None and recv.kind == NAMED:
            view = self.db.as_super(recv, owner)
            if view is not None:
                ft = TY.subst(ft, self.db.generic_binding(self.db.classes[owner], view))
        return ft

    # -- expressions -------------------------------------------------------
    def _record(self, e, t, record):
        if record:
            self.types[e.nid] = t

    def type_expr(self, e: A.Expr, env: dict, ctx: _Ctx, expected: Optional[QType],
                  diags=None, record: bool = True) -> QType:
        t = self._type(e, env, ctx, expected, diags, record)
        self._record(e, t, record)
        return t

    def _type(self, e, env, ctx, expected, diags, record) -> QType:
        te = lambda x, exp=None: self.type_expr(x, env, ctx, exp, diags, record)  # noqa: E731
        dflt = self.cfg.construct_defaulting
        et = self.db.etypes.get(e.nid)
        if isinstance(e, A.Name):
            b = self.db.bindings[e.nid]
            if b[0] == "local":
                t = env.get(b[1].nid)
                if t is None:
                    t = self.local_template(ctx, b[1]).fill(T)
                return t
            if b[0] == "param":
                return self.sig(ctx.cls, ctx.method).params[b[4]]
            if b[0] == "field":
                return self._field_of(self.db.generic_self(ctx.cls), b[1], b[2])
            if b[0] == "class":
                return QType(U, CLASSREF, b[1])
            return QType.named("Object", T)
        if isinstance(e, A.This):
            return self.db.generic_self(ctx.cls, U)
        if isinstance(e, (A.StrLit, A.IntLit, A.BoolLit)):
            return et.with_qual(U)
        if isinstance(e, A.NullLit):
            return TY.null_type()
        if isinstance(e, A.Binary):
            lt = te(e.left)
            rt = te(e.right)
            return et.with_qual(join(lt.qual, rt.qual))
        if isinstance(e, A.Unary):
            return et.with_qual(te(e.operand).q)
        if isinstance(e, A.Paren):
            return te(e.expr, expected)
        if isinstance(e, A.Cast):
            inner = te(e.expr)
            ct = TY.default_type(e.type, "cast", ctx.tvars, init_qual=inner.q, defaulting=dflt)
            view = self.view_as(inner, ct)
            if view.same_shape(ct) and dflt:
                return _overlay_quals(_explicit_only(e.type, ct), view)
            return ct
        if isinstance(e, A.Call):
            return self._call(e, env, ctx, expected, diags, record)
        if isinstance(e, A.FieldAccess):
            b = self.db.bindings[e.nid]
            if b[0] == "enum":
                te(e.obj)
                return QType.named(b[1], U if dflt else T)
            recv = te(e.obj)
            return self._field_of(recv if recv.kind != CLASSREF else None, b[1], b[2])
        if isinstance(e, A.Index):
            at = te(e.array)
            te(e.index)
            return at.elem if at.kind == TY.ARRAY else QType.named("Object", T)
        if isinstance(e, A.NewObject):
            return self._new_object(e, env, ctx, expected, diags, record)
        if isinstance(e, A.NewArray):
            decl_elem = TY.default_type(e.elem, "local", ctx.tvars)
            ets = [te(x, decl_elem.fill(T)) for x in e.elems]
            jq = join(*(x.qual for x in ets))
            t = TY.default_type(A.ArrayTypeRef((), e.elem), "array-init", ctx.tvars, init_qual=jq,
                                defaulting=dflt)
            if dflt and decl_elem.qual is None and ets and all(x.same_shape(t.elem) for x in ets):
                # nested positions also follow the elements when they all agree
                nested = ets[0]
                if all(x == nested for x in ets):
                    t = QType.array(_overlay_quals(_explicit_only(e.elem, t.elem), nested).with_qual(t.elem.qual), U)
            return t
        if isinstance(e, A.ClassLit):
            q = U if dflt else T
            return QType.named("Class", q, QType.named(e.name, q))
        if isinstance(e, A.Lambda):
            return QType.named("Runnable", U if dflt else T)
        raise TypeError(e)

    def _new_object(self, e: A.NewObject, env, ctx, expected, diags, record) -> QType:
        dflt = self.cfg.construct_defaulting
        ats = [self.type_expr(a, env, ctx, None, diags, record) for a in e.args]
        cls = e.type.name
        ci = self.db.classes[cls]
        written = TY.default_type(e.type, "local", ctx.tvars)
        copy_args = None
        if dflt and len(ats) == 1 and ci.type_params:
            src = self.db.as_super(ats[0], "Collection") if ats[0].kind == NAMED else None
            if ats[0].kind == TY.ARRAY:
                src = QType.named("Collection", ats[0].qual, ats[0].elem)
            mine = self.db.as_super(self.db.generic_self(cls), "Collection")
            if src is not None and mine is not None and mine.args and mine.args[0].kind == VAR:
                copy_args = {mine.args[0].name: src.args[0]}
        if ci.type_params:
            args = list(written.args) if written.args else [None] * len(ci.type_params)
            from_expected = {}
            if expected is not None and expected.kind == NAMED:
                gs = self.db.generic_self(cls)
                sup = self.db.as_super(gs, expected.name)
                if sup is not None:
                    from_expected = TY.find_type_subst(sup, expected.with_qual(None)) or {}
            for i, p in enumerate(ci.type_params):
                cur = args[i]
                if copy_args and p in copy_args and (cur is None or _all_open(cur)):
                    cand = copy_args[p]
                    args[i] = cand if cur is None else _overlay_quals(cur, cand)
                elif p in from_expected and (cur is None or _all_open(cur)):
                    cand = from_expected[p]
                    args[i] = cand if cur is None else _overlay_quals(cur, cand)
                elif cur is None:
                    args[i] = QType.named("Object", T)
                else:
                    args[i] = cur.fill(T)
            written = QType.named(cls, None, *args)
        top = U if copy_args is not None else join(*(a.qual for a in ats))
        return written.with_qual(top).fill(T)

    # -- calls ---------------------------------------------------------------
    def _call(self, e: A.Call, env, ctx, expected, diags, record) -> QType:
        b = self.db.bindings[e.nid]
        _, owner, name, arity, is_static = b
        m = self.db.classes[owner].methods[(name, arity)]
        sig = self.sig(owner, m)
        # receiver
        recv_expr = e.receiver
        recv_t: Optional[QType] = None
        recv_class = None
        if recv_expr is not None:
            recv_t = self.type_expr(recv_expr, env, ctx, None, diags, record)
            if recv_t.kind == CLASSREF:
                recv_class = recv_t.name
                recv_t = None
                recv_expr = None
            elif recv_t.kind == NAMED:
                recv_class = recv_t.name
            else:
                recv_class = "Object"
        elif not is_static:
            recv_t = self.db.generic_self(ctx.cls, U)
            recv_class = ctx.cls
        else:
            recv_class = ctx.cls
        # class-variable binding and the return type seen from the receiver class
        oci = self.db.classes[owner]
        s: dict = {}
        class_vars: tuple = ()
        recv_decl = None
        ret_decl = sig.ret
        params_decl = list(sig.params)
        if not is_static and recv_class in self.db.classes:
            gen = self.db.generic_self(recv_class)
            gview = self.db.as_super(gen, owner)
            if gview is not None and len(gview.args) == len(oci.type_params):
                to_recv = dict(zip(oci.type_params, gview.args))
                ret_decl = TY.subst(sig.ret, to_recv)
                params_decl = [TY.subst(p, to_recv) for p in sig.params]
                recv_decl = gen
                class_vars = self.db.classes[recv_class].type_params
                if recv_t is not None and recv_t.kind == NAMED:
                    s.update(self.db.generic_binding(self.db.classes[recv_class], recv_t)
                             if recv_t.name == recv_class else {})
        is_toarray = name == "toArray" and owner == "Collection"
        # arguments
        arg_types = []
        for i, a in enumerate(e.args):
            exp = TY.subst(params_decl[i], s) if i < len(params_decl) else None
            if exp is not None and exp.has_vars():
                exp = None
            arg_types.append(self.type_expr(a, env, ctx, exp, diags, record))
        if m.type_params:
            ms: dict = {}
            for p, at in zip(params_decl, arg_types):
                _bind_method_vars(p, at, set(m.type_params), ms)
            s.update(ms)
        # decision order: generic, stub, annotated, polymorphic
        stub = self.db.stubs.get((owner, name, arity))
        if ret_decl.has_vars():
            category = "generic"
        elif stub is not None:
            category = "stub"
        elif sig.annotated:
            category = "annotated"
        else:
            category = "poly"
        if category == "poly" or (category == "generic" and not sig.annotated):
            pt_actuals = tuple(([(-1, recv_expr)] if recv_expr is not None and not is_static else [])
                               + list(enumerate(e.args)))
        else:
            pt_actuals = tuple((i, e.args[i]) for i in sorted(sig.pt_args) if i >= 0)
        actual_q = {-1: recv_t.q if recv_t is not None and recv_expr is not None else U}
        for i, at in enumerate(arg_types):
            actual_q[i] = at.q
        poly_inst = join(*(actual_q[i] for i, _ in pt_actuals)) if pt_actuals else U

        if category == "generic":
            r = TY.subst(ret_decl, s)
            r = _unbound_vars(r)
            if r.qual is None:
                r = r.with_qual(poly_inst if not sig.annotated else T)
            r = r.fill(T)
            if r.qual == P:
                r = r.with_qual(poly_inst)
        elif category in ("stub", "annotated"):
            r = ret_decl
            if r.qual == P:
                r = r.with_qual(poly_inst)
            r = r.fill(T)
        else:
            r = self.db.etypes[e.nid].with_qual(poly_inst).fill(T)
        if is_toarray:
            elem = r.elem if r.kind == TY.ARRAY else QType.named("Object", T)
            if not self.cfg.construct_defaulting:
                elem = elem.with_qual(T)
            r = QType.array(elem, r.qual)
        src = self.is_source(owner, name)
        san = self.is_sanitizer(owner, name)
        if src:
            r = r.with_qual(T)
        if san:
            r = r.with_qual(U)
        # argument checks
        sinks = self.sink_params(owner, name)
        if diags is not None and not is_toarray:
            for i, (a, at) in enumerate(zip(e.args, arg_types)):
                if i >= len(params_decl):
                    continue
                exp = self._param_expected(params_decl[i], s, sig, category, at, poly_inst)
                lhs_decl = (PARAM, (owner, name, arity, i)) if sig.origin == "source" and sig.annotated else None
                if i in sinks:
                    exp = (exp if exp is not None else at).with_qual(U)
                if exp is None:
                    continue
                if not self.compatible(at, exp):
                    diags.append(_span_diag(ASSIGN, a.span, exp, at, "argument", cls=ctx.cls, method=_mkey(ctx),
                                            expr=a, lhs_decl=lhs_decl))
        if record:
            self.calls[e.nid] = CallInfo(owner, sig, is_static, recv_expr, recv_t, recv_class, ret_decl,
                                         recv_decl, class_vars, dict(s), category, e.args, tuple(arg_types),
                                         pt_actuals, src, san)
        return r

    def _param_expected(self, p: QType, s, sig: MethodSig, category, at: QType, poly_inst) -> Optional[QType]:
        if sig.annotated:
            exp = TY.subst(p, s)
            exp = _unbound_vars(exp)
            if exp.qual == P:
                exp = exp.with_qual(poly_inst)
            return exp.fill(T)
        # unannotated: only positions carried by type variables constrain the argument
        if not p.has_vars():
            return None
        exp = _unbound_vars(TY.subst(p, s), open_=True)
        view = self.view_as(at, exp)
        if view.same_shape(exp):
            return _overlay_quals(exp, view)
        return exp.with_qual(exp.qual if exp.qual is not None else at.q).fill(T)


# -- helpers ------------------------------------------------------------------

def _mkey(ctx: _Ctx):
    return (ctx.method.name, ctx.method.arity) if ctx.method is not None else None


def _fill_nonvar(t: QType, q: Qual) -> QType:
    if t.kind == VAR:
        return t
    return QType(q if t.qual is None else t.qual, t.kind, t.name, tuple(_fill_nonvar(a, q) for a in t.args))


def _unbound_vars(t: QType, open_: bool = False) -> QType:
    """Variables left after substitution behave as Tainted Object (or stay open)."""
    if t.kind == VAR:
        return QType.named("Object", None if open_ else (t.qual if t.qual is not None else T))
    return t.with_args(_unbound_vars(a, open_) for a in t.args) if t.args else t


def _overlay_quals(tmpl: QType, val: QType) -> QType:
    """Same-shape merge: ``tmpl``'s fixed qualifiers win, open ones come from ``val``."""
    if not tmpl.same_shape(val):
        return tmpl.with_qual(tmpl.qual if tmpl.qual is not None else val.q).fill(T)
    q = tmpl.qual if tmpl.qual is not None else (val.qual if val.qual is not None else T)
    return QType(q, tmpl.kind, tmpl.name, tuple(_overlay_quals(a, b) for a, b in zip(tmpl.args, val.args)))


def _explicit_only(node: A.TypeNode, t: QType) -> QType:
    """``t`` with qualifiers kept only where ``node`` has a written annotation."""
    q = t.qual if node.anns else None
    if isinstance(node, A.ArrayTypeRef):
        return QType(q, t.kind, t.name, (_explicit_only(node.elem, t.elem),))
    if t.kind == VAR or not node.args:
        return t.with_qual(q) if not t.args else QType(q, t.kind, t.name, tuple(a.with_qual(None) for a in t.args))
    return QType(q, t.kind, t.name, tuple(_explicit_only(n, a) for n, a in zip(node.args, t.args)))


def _all_open(t: QType) -> bool:
    return all(x.qual is None for _, x in t.positions())


def _bind_method_vars(p: QType, at: QType, mvars: set, out: dict):
    if p.kind == VAR and p.name in mvars:
        prev = out.get(p.name)
        out[p.name] = at if prev is None else TY.qual_join(prev, at)
        return
    if p.kind == at.kind and p.name == at.name and len(p.args) == len(at.args):
        for x, y in zip(p.args, at.args):
            _bind_method_vars(x, y, mvars, out)


def _join_env(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = TY.qual_join(out[k], v) if k in out else v
    return out


def check_program(db: ProgramDB, cfg: CheckConfig, overlay: Optional[Overlay] = None) -> list[Diagnostic]:
    """All diagnostics for the annotated classes of ``db``, sorted by location."""
    return Checker(db, cfg, overlay).check_program()


def check_override(db: ProgramDB, cfg: CheckConfig, cls: str, method: A.MethodDecl) -> list[Diagnostic]:
    return Checker(db, cfg).check_override(cls, method)


def call_return_type(db: ProgramDB, cfg: CheckConfig, call: A.Call, overlay: Optional[Overlay] = None) -> QType:
    """Type of ``call`` as computed during a full check (the call must sit in an annotated class)."""
    c = Checker(db, cfg, overlay)
    c.cfg = _no_fixes(cfg)
    c.check_program()
    return c.types[call.nid]


def infer_locals(db: ProgramDB, cfg: CheckConfig, cls: str, method: A.MethodDecl,
                 overlay: Optional[Overlay] = None) -> dict[str, QType]:
    """Flow types of the method's locals at the end of the body, keyed by name."""
    c = Checker(db, cfg, overlay)
    ctx = _Ctx(cls, method, frozenset(db.classes[cls].type_params) | frozenset(method.type_params), method.is_static)
    env: dict[int, QType] = {}
    c._block(method.body, env, ctx, [], report=False)
    names = {n.nid: n.name for n in A.walk(method.body) if isinstance(n, A.LocalDecl)}
    return {names[k]: v for k, v in env.items()}


def _no_fixes(cfg: CheckConfig) -> CheckConfig:
    from dataclasses import replace
    return replace(cfg, emit_fixes=False)


def diagnostics_jsonl(diags, db=None) -> str:
    return "".join(json.dumps(d.to_json(db), sort_keys=True) + "\n" for d in diags)
