"""Annotation sites, fixes and fix sets."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Optional

from .frontend import ast as A
from .types import Qual

FIELD, PARAM, RETURN, LOCAL = "field", "param", "return", "local"


@dataclass(frozen=True, order=True)
class Site:
    """A type position in a declaration.

    ``key`` identifies the declaration:
      field  (cls, name)
      param  (cls, method, arity, index)
      return (cls, method, arity)
      local  (cls, method, arity, name, line, col)
    ``path`` indexes into type arguments (array contents use index 0).
    """
    kind: str
    key: tuple
    path: tuple[int, ...] = ()

    @property
    def cls(self) -> str:
        return self.key[0]

    @property
    def method(self) -> Optional[tuple[str, int]]:
        if self.kind == FIELD:
            return None
        return (self.key[1], self.key[2])

    @property
    def decl(self) -> tuple:
        return (self.kind, self.key)

    def describe(self) -> str:
        k = self.key
        if self.kind == FIELD:
            where = f"field {k[0]}.{k[1]}"
        elif self.kind == PARAM:
            where = f"param #{k[3]} of {k[0]}.{k[1]}/{k[2]}"
        elif self.kind == RETURN:
            where = f"return of {k[0]}.{k[1]}/{k[2]}"
        else:
            where = f"local {k[3]} in {k[0]}.{k[1]}/{k[2]}"
        return where + (f" at type argument {list(self.path)}" if self.path else "")

    def to_json(self) -> dict:
        return {"kind": self.kind, "key": list(self.key), "path": list(self.path)}

    @staticmethod
    def from_json(d: dict) -> "Site":
        return Site(d["kind"], tuple(d["key"]), tuple(d["path"]))


@dataclass(frozen=True, order=True)
class Fix:
    site: Site
    qual: Qual


FixSet = Optional[frozenset]   # None is the failure value
EMPTY: frozenset = frozenset()


def combine(*sets: FixSet) -> FixSet:
    """Union that propagates failure; two different qualifiers at one site also fail."""
    out: dict[Site, Qual] = {}
    for s in sets:
        if s is None:
            return None
        for f in s:
            prev = out.get(f.site)
            if prev is not None and prev != f.qual:
                return None
            out[f.site] = f.qual
    return frozenset(Fix(s, q) for s, q in out.items())


def single(site: Site, q: Qual) -> frozenset:
    return frozenset({Fix(site, q)})


class Overlay:
    """Inferred annotations layered over the declared types."""

    def __init__(self, fixes: Iterable[Fix] | Mapping[Site, Qual] = ()):
        if isinstance(fixes, Mapping):
            items = dict(fixes)
        else:
            items = {f.site: f.qual for f in fixes}
        self.items: dict[Site, Qual] = items
        self._by_decl: dict[tuple, dict[tuple[int, ...], Qual]] = {}
        for s, q in items.items():
            self._by_decl.setdefault(s.decl, {})[s.path] = q

    def for_decl(self, kind: str, key: tuple) -> dict[tuple[int, ...], Qual]:
        return self._by_decl.get((kind, key), {})

    def get(self, site: Site) -> Optional[Qual]:
        return self.items.get(site)

    def extended(self, fixes: Iterable[Fix]) -> "Overlay":
        d = dict(self.items)
        for f in fixes:
            d[f.site] = f.qual
        return Overlay(d)

    def __len__(self) -> int:
        return len(self.items)

    def fixes(self) -> frozenset:
        return frozenset(Fix(s, q) for s, q in self.items.items())


# -- locating the declared type of a site --------------------------------------

def local_key(cls: str, m: A.MethodDecl, d: A.LocalDecl) -> tuple:
    return (cls, m.name, m.arity, d.name, d.span.line, d.span.col)


@lru_cache(maxsize=64)
def _local_index(db_id: int, db) -> dict:
    idx = {}
    for cname in db.source_classes():
        ci = db.classes[cname]
        for m in ci.methods.values():
            if m.body is None:
                continue
            for n in A.walk(m.body):
                if isinstance(n, A.LocalDecl):
                    idx[local_key(cname, m, n)] = n
    return idx


def local_decl(db, key: tuple) -> Optional[A.LocalDecl]:
    return _local_index(id(db), db).get(key)


def decl_typeref(db, kind: str, key: tuple) -> Optional[A.TypeNode]:
    ci = db.classes.get(key[0])
    if ci is None:
        return None
    if kind == FIELD:
        f = ci.fields.get(key[1])
        return f.type if f else None
    if kind == LOCAL:
        d = local_decl(db, key)
        return d.type if d else None
    m = ci.methods.get((key[1], key[2]))
    if m is None:
        return None
    if kind == RETURN:
        return m.ret
    return m.params[key[3]].type if key[3] < len(m.params) else None


def typeref_at(t: A.TypeNode, path: tuple[int, ...]) -> Optional[A.TypeNode]:
    for i in path:
        if isinstance(t, A.ArrayTypeRef):
            if i != 0:
                return None
            t = t.elem
        else:
            if i >= len(t.args):
                return None
            t = t.args[i]
    return t


def site_typeref(db, site: Site) -> Optional[A.TypeNode]:
    t = decl_typeref(db, site.kind, site.key)
    return None if t is None else typeref_at(t, site.path)


def site_location(db, site: Site) -> tuple[str, int, int]:
    t = site_typeref(db, site)
    if t is None:
        return ("", 0, 0)
    sp = t.bracket if isinstance(t, A.ArrayTypeRef) else t.span
    return (sp.file, sp.line, sp.col)


def fixset_json(fs: frozenset, db) -> list[dict]:
    out = []
    for f in sorted(fs):
        file, line, col = site_location(db, f.site)
        d = {"site": {"file": file, "line": line, "col": col, **f.site.to_json()}, "ann": f.qual.ann}
        out.append(d)
    return out
