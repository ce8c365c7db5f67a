"""Computing annotation fixes that retype an expression to a target type."""
from __future__ import annotations

from typing import Optional

from . import types as TY
from .frontend import ast as A
from .sites import (EMPTY, FIELD, LOCAL, PARAM, RETURN, Fix, FixSet, Site, combine, decl_typeref,
                    local_decl, local_key, single, typeref_at)
from .types import ARRAY, NAMED, NULL, VAR, QType, U, P, T

OVERRIDE = "OverrideIncompat"


def _explicit(node: A.TypeNode, path: tuple) -> Optional[bool]:
    """Whether the position at ``path`` carries a written annotation (None if absent)."""
    t = typeref_at(node, path)
    if t is None:
        return None
    return bool(t.anns)


def _has_raw(db, node: A.TypeNode) -> bool:
    if isinstance(node, A.ArrayTypeRef):
        return _has_raw(db, node.elem)
    return db.is_raw(node) or any(_has_raw(db, a) for a in node.args)


class FixGen:
    """Fix computation against one checker run's recorded types."""

    def __init__(self, checker):
        self.c = checker
        self.db = checker.db
        self.cfg = checker.cfg
        self.overlay = checker.overlay

    # -- per diagnostic ----------------------------------------------------
    def fixes_for(self, d) -> list[frozenset]:
        if d.kind == OVERRIDE:
            return self._override_fixes(d)
        m = self._method(d.cls, d.method)
        ctx = (d.cls, m)
        out = []
        if d.expr is not None:
            rhs = self.find_annots(d.expr, self.fix_target(d.rhs, d.lhs), ctx)
            if rhs:
                out.append(rhs)
        if not out and d.lhs_decl is not None:
            kind, key = d.lhs_decl
            declared = self._declared(kind, key)
            if declared is not None:
                want = self._raise_to(declared, d.rhs)
                lhs = self.update_type(kind, key, declared, want, up=True)
                if lhs:
                    out.append(lhs)
        return out

    def _override_fixes(self, d) -> list[frozenset]:
        what, sub_key, sup_key, idx = d.override
        out = []
        if what == "return":
            sub_t = self._declared(RETURN, sub_key)
            sup_t = self._declared(RETURN, sup_key)
            cands = [self.update_type(RETURN, sub_key, sub_t, _top_to(sub_t, sup_t.q)),
                     self.update_type(RETURN, sup_key, sup_t, _top_to(sup_t, sub_t.q), up=True)]
        else:
            sk, pk = sub_key + (idx,), sup_key + (idx,)
            sub_t = self._declared(PARAM, sk)
            sup_t = self._declared(PARAM, pk)
            cands = [self.update_type(PARAM, sk, sub_t, _top_to(sub_t, sup_t.q), up=True),
                     self.update_type(PARAM, pk, sup_t, _top_to(sup_t, sub_t.q))]
        for c in cands:
            if c:
                out.append(c)
        return out

    # -- helpers -------------------------------------------------------------
    def _method(self, cls, mkey):
        if cls is None or mkey is None:
            return None
        return self.db.classes[cls].methods.get(mkey)

    def _declared(self, kind: str, key: tuple) -> Optional[QType]:
        cls = key[0]
        if cls not in self.db.classes:
            return None
        if kind == FIELD:
            return self.c.field_type(cls, key[1])
        if kind == LOCAL:
            d = local_decl(self.db, key)
            m = self.db.classes[cls].methods.get((key[1], key[2]))
            if d is None or m is None:
                return None
            tv = frozenset(self.db.classes[cls].type_params) | frozenset(m.type_params)
            return TY.default_type(d.type, "local", tv, self.overlay.for_decl(LOCAL, key))
        m = self.db.classes[cls].methods.get((key[1], key[2]))
        if m is None:
            return None
        sig = self.c.sig(cls, m)
        return sig.ret if kind == RETURN else sig.params[key[3]]

    def fix_target(self, rhs: QType, lhs: QType) -> QType:
        """The type ``rhs`` must take to be compatible with ``lhs``.

        The top-level qualifier only drops when needed; nested positions copy
        ``lhs``, seen through the superclass chain when the classes differ.
        """
        top = rhs.qual if rhs.q <= lhs.q else lhs.q
        if rhs.kind == NULL or lhs.kind == NULL:
            return rhs.with_qual(top)
        if rhs.same_shape(lhs):
            return _copy_nested(lhs, rhs).with_qual(top)
        if rhs.kind == NAMED and lhs.kind == NAMED and rhs.name in self.db.classes:
            gself = self.db.generic_self(rhs.name)
            gview = self.db.as_super(gself, lhs.name)
            if gview is not None:
                s = TY.find_type_subst(gview, lhs.with_qual(None))
                if s is not None:
                    try:
                        return TY.apply_subst(s, gself, rhs).with_qual(top)
                    except TY.ShapeMismatch:
                        pass
        return rhs.with_qual(top)

    def _raise_to(self, declared: QType, rhs: QType) -> QType:
        """Desired declared type able to receive ``rhs``."""
        top = declared.q if rhs.q <= declared.q else rhs.q
        view = self.c.view_as(rhs, declared)
        if view.same_shape(declared):
            return _copy_nested(view, declared).with_qual(top)
        return declared.with_qual(top)

    # -- UpdateType ------------------------------------------------------------
    def update_type(self, kind: str, key: tuple, declared: Optional[QType], desired: QType,
                    up: bool = False) -> FixSet:
        """Annotations on a declaration so that its type becomes ``desired``.

        With ``up`` the top-level qualifier only needs to be at least the
        desired one, otherwise at most.
        """
        if declared is None:
            return None
        node = decl_typeref(self.db, kind, key)
        cls = key[0]
        if node is None or not self.c.is_annotated_class(cls):
            return None
        if kind in (PARAM, RETURN):
            if (cls, key[1], key[2]) in self.db.stubs or self.c.is_configured(cls, key[1]):
                return None
        if _has_raw(self.db, node):
            return None
        fixes = []
        dv = self.c.view_as(desired, declared)
        if dv.kind != declared.kind or dv.name != declared.name:
            dv = declared.with_qual(desired.qual)
        for path, cur in declared.positions():
            want = _at(dv, path)
            if want is None:
                continue
            wq = want.q
            if not path:
                ok = (cur.q >= wq) if up else (cur.q <= wq)
            else:
                ok = cur.q == wq
            if ok:
                continue
            if cur.kind == VAR or _explicit(node, path) is not False:
                return None
            site = Site(kind, key, path)
            prev = self.overlay.get(site)
            if prev is not None and prev != wq:
                return None
            if wq == P and (path or kind not in (PARAM, RETURN)):
                return None
            fixes.append(Fix(site, wq))
        return frozenset(fixes)

    # -- FindAnnots ------------------------------------------------------------
    def make_untainted(self, e: A.Expr, ctx, depth: int = 0, stack=()) -> FixSet:
        t = self.c.types.get(e.nid)
        if t is None:
            return None
        return self.find_annots(e, t.with_qual(U), ctx, depth, stack)

    def find_annots(self, e: A.Expr, target: QType, ctx, depth: int = 0, stack=()) -> FixSet:
        """Fixes retyping ``e`` to ``target`` in method context ``ctx`` = (class, method), or None."""
        t = self.c.types.get(e.nid)
        if t is None:
            return None
        if self.c.compatible(t, target) and (t.kind == NULL or not t.same_shape(target) or _eq_nested(t, target)):
            return EMPTY
        cls, m = ctx
        if isinstance(e, A.Paren):
            return self.find_annots(e.expr, target, ctx, depth, stack)
        if isinstance(e, A.Name):
            b = self.db.bindings[e.nid]
            if b[0] == "local":
                key = local_key(cls, m, b[1])
                declared = self._declared(LOCAL, key)
                return self._update_local(key, declared, t, target)
            if b[0] == "param":
                key = (b[1], b[2], b[3], b[4])
                return self.update_type(PARAM, key, self._declared(PARAM, key), target)
            if b[0] == "field":
                return self._field_fix(b[1], b[2], self.db.generic_self(cls), target)
            return None
        if isinstance(e, A.FieldAccess):
            b = self.db.bindings[e.nid]
            if b[0] != "field":
                return None
            recv = self.c.types.get(e.obj.nid)
            return self._field_fix(b[1], b[2], recv, target)
        if isinstance(e, A.Binary):
            return combine(*(self._retop(x, target.q, ctx, depth, stack) for x in (e.left, e.right)))
        if isinstance(e, A.Unary):
            return self._retop(e.operand, target.q, ctx, depth, stack)
        if isinstance(e, A.Cast):
            if e.type.anns or not self.cfg.construct_defaulting:
                return None
            inner = self.c.types.get(e.expr.nid)
            if inner is None:
                return None
            it = self.fix_target(inner, target) if inner.same_shape(target) else inner.with_qual(
                inner.qual if inner.q <= target.q else target.q)
            return self.find_annots(e.expr, it, ctx, depth, stack)
        if isinstance(e, A.Call):
            return self._call_fix(e, t, target, ctx, depth, stack)
        if isinstance(e, A.NewObject):
            return self._new_fix(e, t, target, ctx, depth, stack)
        if isinstance(e, A.NewArray):
            if not self.cfg.construct_defaulting or target.kind != ARRAY:
                return None
            if e.elem.anns:
                return None
            want = target.elem.q
            parts = []
            for x in e.elems:
                xt = self.c.types.get(x.nid)
                if xt is None:
                    return None
                parts.append(self.find_annots(x, self.fix_target(xt, xt.with_qual(want)), ctx, depth, stack))
            return combine(*parts)
        if isinstance(e, A.Index):
            at = self.c.types.get(e.array.nid)
            if at is None or at.kind != ARRAY:
                return None
            want = QType.array(self.fix_target(at.elem, target).with_qual(target.q)
                               if at.elem.same_shape(target) else at.elem.with_qual(target.q), at.qual)
            return self.find_annots(e.array, want, ctx, depth, stack)
        return None

    def _retop(self, e, q, ctx, depth, stack) -> FixSet:
        t = self.c.types.get(e.nid)
        if t is None:
            return None
        if t.q <= q:
            return EMPTY
        return self.find_annots(e, t.with_qual(q), ctx, depth, stack)

    def _update_local(self, key, declared, flow: QType, target: QType) -> FixSet:
        if declared is None:
            return None
        # the local's declaration is an open template; fix it to the flow type merged with the target
        want = self.fix_target(flow, target)
        want = self.c.view_as(want, declared)
        if not want.same_shape(declared):
            want = declared.with_qual(target.q)
        node = decl_typeref(self.db, LOCAL, key)
        if node is None or _has_raw(self.db, node) or not self.c.is_annotated_class(key[0]):
            return None
        fixes = []
        for path, cur in declared.positions():
            wq = want.at(path).q
            fq = flow.at(path).q if flow.same_shape(declared) else (flow.q if not path else T)
            if cur.qual is not None:
                ok = cur.q <= wq if not path else cur.q == wq
                if not ok:
                    return None
                continue
            if (not path and fq <= wq) or (path and fq == wq):
                continue
            if cur.kind == VAR:
                return None
            site = Site(LOCAL, key, path)
            prev = self.overlay.get(site)
            if prev is not None and prev != wq:
                return None
            fixes.append(Fix(site, wq))
        return frozenset(fixes)

    def _field_fix(self, owner: str, fname: str, recv: Optional[QType], target: QType) -> FixSet:
        return self.update_type(FIELD, (owner, fname), self.c.field_type(owner, fname), target)

    # -- calls ---------------------------------------------------------------
    def _call_fix(self, e: A.Call, t: QType, target: QType, ctx, depth, stack) -> FixSet:
        ci = self.c.calls.get(e.nid)
        if ci is None:
            return None
        if ci.is_sanitizer:
            return EMPTY if _eq_nested(t.with_qual(U), target.with_qual(U)) else None
        if ci.is_source:
            return None
        top_only = t.same_shape(target) and _eq_nested(t, target)
        if self.cfg.generics_fixes and ci.category == "generic":
            g = self.generics_annots(e, ci, t, target, ctx, depth, stack)
            if g is not None:
                return g
        if not top_only:
            return None
        if self.cfg.polytaint_fixes and ci.sig.origin == "source" and ci.sig.annotated:
            p = self.polytaint_annots(e, ci, target, ctx, depth, stack)
            if p is not None:
                return p
        if ci.category == "poly" or (ci.sig.annotated and ci.sig.ret.qual == P):
            # make every polymorphic actual Untainted
            if target.q == U and ci.pt_actuals:
                return combine(*(self.make_untainted(a, ctx, depth, stack) for _, a in ci.pt_actuals))
            if target.q == U and not ci.pt_actuals:
                return EMPTY
            return None
        if ci.category in ("annotated",) and ci.sig.origin == "source":
            key = (ci.owner, ci.sig.name, ci.sig.arity)
            return self.update_type(RETURN, key, ci.sig.ret, ci.sig.ret.with_qual(target.q))
        return None

    def generics_annots(self, e: A.Call, ci, t: QType, target: QType, ctx, depth, stack) -> FixSet:
        desired = self.fix_target(t, target)
        s = TY.find_type_subst(ci.ret_decl, desired)
        if s is None:
            return None
        mvars = set(ci.sig.type_params)
        cvars = set(ci.class_vars)
        s_cls = {k: v for k, v in s.items() if k in cvars and k not in mvars}
        s_meth = {k: v for k, v in s.items() if k in mvars}
        parts: list[FixSet] = []
        if s_cls:
            if ci.receiver is None or ci.recv_decl is None or ci.recv_type is None:
                return None
            try:
                want = TY.apply_subst(s_cls, ci.recv_decl, ci.recv_type)
            except TY.ShapeMismatch:
                return None
            parts.append(self.find_annots(ci.receiver, want, ctx, depth, stack))
        if s_meth:
            touched = False
            for i, (p, a) in enumerate(zip(ci.sig.params, ci.args)):
                if not any(x.kind == VAR and x.name in s_meth for _, x in p.positions()):
                    continue
                at = ci.arg_types[i]
                base = {k: v for k, v in ci.subst.items() if k not in s_meth}
                want = TY.subst(TY.subst(p, s_meth), base)
                if want.has_vars():
                    return None
                want = self.fix_target(at, want.fill(T))
                parts.append(self.find_annots(a, want, ctx, depth, stack))
                touched = True
            if not touched:
                return None
        if not parts:
            return None
        return combine(*parts)

    def polytaint_annots(self, e: A.Call, ci, target: QType, ctx, depth, stack) -> FixSet:
        owner, m = ci.owner, ci.sig.decl
        mk = (owner, m.name, m.arity)
        if (depth >= self.cfg.poly_depth or mk in stack or m.body is None or m.ret.name == "void"
                or m.ret.anns or target.q != U or self.c.is_configured(owner, m.name)):
            return None
        if not self.c.is_annotated_class(owner) or self.overlay.for_decl(RETURN, mk):
            return None
        inner_ctx = (owner, m)
        stack2 = stack + (mk,)
        result: FixSet = EMPTY
        # fixes that make every return statement Untainted
        for r in A.walk(m.body):
            if isinstance(r, A.Return) and r.value is not None:
                rt = self.c.types.get(r.value.nid)
                if rt is None:
                    return None
                result = combine(result, self.find_annots(r.value, rt.with_qual(U), inner_ctx, depth + 1, stack2))
                if result is None:
                    return None
        # chase local fixes through their assignments
        processed: set[Site] = set()
        while True:
            todo = [f for f in result if f.site.kind == LOCAL and f.site not in processed
                    and f.site.key[:3] == mk]
            if not todo:
                break
            for f in todo:
                processed.add(f.site)
                result = combine(result, self._assignment_fixes(f, inner_ctx, depth + 1, stack2))
                if result is None:
                    return None
        params = {f for f in result if f.site.kind == PARAM and f.site.key[:3] == mk and not f.site.path
                  and f.qual == U}
        if not params:
            return self.update_type(RETURN, mk, ci.sig.ret, ci.sig.ret.with_qual(U))
        keep = [f for f in result if f not in params and not (f.site.kind == LOCAL and f.site.key[:3] == mk)]
        out: list[FixSet] = [frozenset(keep), single(Site(RETURN, mk), P)]
        for f in params:
            out.append(single(f.site, P))
        # the actuals at this call site must become Untainted
        for f in params:
            i = f.site.key[3]
            out.append(self.make_untainted(e.args[i], ctx, depth, stack))
        return combine(*out)

    def _assignment_fixes(self, f: Fix, ctx, depth, stack) -> FixSet:
        """Fixes making every value assigned to the local of ``f`` fit the fixed position."""
        cls, m = ctx
        decl = local_decl(self.db, f.site.key)
        if decl is None:
            return None
        parts: list[FixSet] = []
        for rhs in local_rhs(m, decl, self.db):
            rt = self.c.types.get(rhs.nid)
            if rt is None:
                return None
            if f.site.path:
                if not rt.same_shape(self._declared(LOCAL, f.site.key) or rt):
                    return None
                want = rt.set_at(f.site.path, f.qual)
            else:
                want = rt.with_qual(f.qual) if rt.q > f.qual else rt
            parts.append(self.find_annots(rhs, want, ctx, depth, stack))
        return combine(*parts)

    def _new_fix(self, e: A.NewObject, t: QType, target: QType, ctx, depth, stack) -> FixSet:
        if not t.same_shape(self.c.view_as(target, t)) and target.kind == NAMED and target.name != t.name:
            view = None
        else:
            view = target
        if e.type.args and any(a.anns for a in e.type.args):
            if view is not None and not _eq_nested(t, self.fix_target(t, target)):
                return None
        dflt = self.cfg.construct_defaulting
        want = self.fix_target(t, target)
        nested_ok = _eq_nested(t, want)
        parts: list[FixSet] = []
        if dflt and len(e.args) == 1:
            at = self.c.types.get(e.args[0].nid)
            mine = self.db.as_super(want, "Collection") if want.kind == NAMED else None
            if at is not None and mine is not None and mine.args:
                elem = mine.args[0]
                if at.kind == ARRAY:
                    wa = QType.array(_copy_nested(elem, at.elem).with_qual(elem.q), at.qual)
                    return self.find_annots(e.args[0], wa, ctx, depth, stack)
                src = self.db.as_super(at, "Collection") if at.kind == NAMED else None
                if src is not None:
                    return self.find_annots(e.args[0], self.fix_target(at, QType.named("Collection", at.q, elem)),
                                            ctx, depth, stack)
        if not nested_ok:
            return None
        for a in e.args:
            parts.append(self._retop(a, want.q, ctx, depth, stack))
        return combine(*parts)


def local_rhs(m: A.MethodDecl, decl: A.LocalDecl, db) -> list[A.Expr]:
    """Every expression assigned to the local ``decl`` within ``m``."""
    out = []
    for n in A.walk(m.body):
        if n is decl:
            out.append(n.init)
        elif isinstance(n, A.Assign) and isinstance(n.target, A.Name):
            b = db.bindings.get(n.target.nid)
            if b is not None and b[0] == "local" and b[1] is decl:
                out.append(n.value)
    return out


def _eq_nested(a: QType, b: QType) -> bool:
    if not a.same_shape(b):
        return False
    return all(x.q == y.q for (_, x), (_, y) in zip(list(a.positions())[1:], list(b.positions())[1:]))


def _copy_nested(src: QType, shape: QType) -> QType:
    """``shape`` with nested qualifiers taken from the same-shaped ``src``."""
    if not src.same_shape(shape):
        return shape
    return QType(shape.qual, shape.kind, shape.name,
                 tuple(QType(a.qual, a.kind, a.name, _copy_nested(a, b).args) for a, b in zip(src.args, shape.args)))


def _top_to(t: QType, q) -> QType:
    return t.with_qual(q)


def _at(t: QType, path: tuple) -> Optional[QType]:
    for i in path:
        if i >= len(t.args):
            return None
        t = t.args[i]
    return t
