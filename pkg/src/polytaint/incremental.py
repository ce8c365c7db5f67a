"""Per-class summary cache and single-unit re-checking."""
from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from .checker import CheckConfig, Checker, Diagnostic
from .frontend import ast as A
from .frontend.parser import parse
from .frontend.resolve import ProgramDB, ResolveErrors, resolve
from .frontend.unparse import decl_lines
from .patch import text_hash

_IDENT = re.compile(r"[A-Za-z_]\w*")


class StaleStore(Exception):
    pass


@dataclass
class ClassSummary:
    name: str
    package: str
    path: str
    hash: str
    skeleton: str
    refs: list[str]
    deps: list[str]
    diagnostics: list[list] = field(default_factory=list)


def diag_sig(d: Diagnostic) -> list:
    """Stable comparable form of a diagnostic."""
    return [d.kind, d.file, d.line, d.col, d.end_line, d.end_col, d.context, str(d.lhs), str(d.rhs)]


def skeleton_text(d: A.Decl) -> str:
    return "\n".join(decl_lines(d, bodies=False))


@dataclass
class IncrementalResult:
    diagnostics: list[Diagnostic]
    changed_signatures: list[str]
    dependents: list[str]


class SummaryStore:
    """Summaries keyed by class name, persisted as one JSON file per class."""

    def __init__(self, cache_dir: Optional[Path | str] = None):
        self.dir = Path(cache_dir) if cache_dir is not None else None
        self.classes: dict[str, ClassSummary] = {}
        self._skel_cache: dict[tuple, A.SourceUnit] = {}
        if self.dir is not None and self.dir.is_dir():
            for f in sorted(self.dir.glob("*.json")):
                self.classes[f.stem] = ClassSummary(**json.loads(f.read_text()))

    def put(self, s: ClassSummary) -> None:
        self.classes[s.name] = s
        self._skel_cache.clear()
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
            (self.dir / f"{s.name}.json").write_text(json.dumps(asdict(s), sort_keys=True, indent=1))

    def dependents_of(self, names: Iterable[str]) -> list[str]:
        names = set(names)
        return sorted(c for c, s in self.classes.items() if c not in names and names & set(s.deps))

    # -- building ------------------------------------------------------------
    @classmethod
    def build(cls, db: ProgramDB, cfg: CheckConfig, cache_dir=None,
              diags: Optional[list[Diagnostic]] = None) -> "SummaryStore":
        store = cls(None)
        if diags is None:
            diags = Checker(db, replace(cfg, emit_fixes=False)).check_program()
        by_class: dict[str, list] = {}
        for d in diags:
            by_class.setdefault(d.cls, []).append(diag_sig(d))
        names = set(db.source_classes())
        for u in db.units:
            h = text_hash(u.text)
            for d in u.decls:
                store.classes[d.name] = _summary(d, u, h, names, db, by_class.get(d.name, []))
        store.dir = Path(cache_dir) if cache_dir is not None else None
        if store.dir is not None:
            for s in store.classes.values():
                store.put(s)
        return store

    def skeleton_units(self, names: Iterable[str]) -> list[A.SourceUnit]:
        groups: dict[tuple[str, str], list[str]] = {}
        for n in sorted(names):
            s = self.classes[n]
            groups.setdefault((s.path, s.package), []).append(n)
        units = []
        for (path, pkg), ns in sorted(groups.items()):
            key = (path, pkg, tuple(ns))
            u = self._skel_cache.get(key)
            if u is None:
                text = (f"package {pkg};\n\n" if pkg else "") + "\n".join(self.classes[n].skeleton for n in ns) + "\n"
                u = parse(text, path)
                self._skel_cache[key] = u
            units.append(u)
        return units


def _summary(d: A.Decl, u: A.SourceUnit, h: str, names: set, db: Optional[ProgramDB], diags) -> ClassSummary:
    skel = skeleton_text(d)
    refs = sorted((set(_IDENT.findall(skel)) & names) - {d.name})
    deps = sorted(db.deps.get(d.name, ())) if db is not None else []
    return ClassSummary(d.name, u.package or "", u.path, h, skel, refs, deps, diags)


def check_unit_incremental(unit: A.SourceUnit, store: SummaryStore, cfg: CheckConfig,
                           stubs=()) -> IncrementalResult:
    """Re-check one unit against stored signatures of the rest of the program."""
    own = {d.name for d in unit.decls}
    known = set(store.classes)
    needed: set[str] = set()
    todo = [x for x in set(_IDENT.findall(unit.text)) & known if x not in own]
    while todo:
        c = todo.pop()
        if c in needed or c in own:
            continue
        needed.add(c)
        todo.extend(r for r in store.classes[c].refs if r not in needed)
    try:
        db = resolve([unit] + store.skeleton_units(needed), stubs=list(stubs))
    except ResolveErrors as e:
        raise StaleStore("; ".join(f"{x.span.file}:{x.span.line}: {x.message}" for x in e.errors)) from None
    checker = Checker(db, replace(cfg, emit_fixes=False, jobs=1))
    diags = checker.check_program(classes=sorted(own))
    h = text_hash(unit.text)
    changed = []
    names = known | own
    by_class: dict[str, list] = {}
    for d in diags:
        by_class.setdefault(d.cls, []).append(diag_sig(d))
    for d in unit.decls:
        s = _summary(d, unit, h, names, db, by_class.get(d.name, []))
        old = store.classes.get(d.name)
        if old is None or old.skeleton != s.skeleton:
            changed.append(d.name)
        store.put(s)
    return IncrementalResult(diags, changed, store.dependents_of(changed))
