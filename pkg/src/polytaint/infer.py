"""Black-box inference: greedy search over candidate fix sets, judged by re-running the checker."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

from .checker import CheckConfig, Checker, Diagnostic
from .fixgen import FixGen
from .frontend.resolve import ProgramDB
from .sites import LOCAL, RETURN, Fix, Overlay, Site, combine, site_location
from .types import U

log = logging.getLogger(__name__)


@dataclass
class SearchConfig:
    outer_depth: int = 15
    poly_depth: int = 5
    local_opt: bool = True
    batching: bool = True
    in_place: bool = False
    max_anns_per_warning: Optional[int] = None
    budget: int = 1000

    def __post_init__(self):
        if self.outer_depth < 1 or self.poly_depth < 1:
            raise ValueError("search depths must be at least 1")


class BudgetExceeded(Exception):
    pass


@dataclass
class Run:
    diags: list[Diagnostic]
    checker: Checker

    @property
    def count(self) -> int:
        return len(self.diags)


@dataclass
class InferenceResult:
    accepted: dict                  # Site -> Qual
    provenance: dict                # Site -> "file:line:col" of the diagnostic it descends from
    initial: list[Diagnostic]
    final: list[Diagnostic]
    checker_runs: int
    resolved: dict = field(default_factory=dict)  # Site -> locations of diagnostics gone when it was accepted

    @property
    def overlay(self) -> Overlay:
        return Overlay(self.accepted)

    def fixes(self) -> list[Fix]:
        return sorted(Fix(s, q) for s, q in self.accepted.items())


class Evaluator:
    """Runs the checker on in-memory annotation snapshots, counting distinct runs."""

    def __init__(self, db: ProgramDB, cfg: CheckConfig, budget: int = 1000):
        self.db = db
        self.cfg = replace(cfg, emit_fixes=True)
        self.budget = budget
        self.runs = 0
        self._cache: dict[frozenset, Run] = {}

    def run(self, overlay: Overlay) -> Run:
        key = overlay.fixes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        self.runs += 1
        if self.runs > self.budget:
            raise BudgetExceeded(f"more than {self.budget} checker runs")
        c = Checker(self.db, self.cfg, overlay)
        r = Run(c.check_program(), c)
        self._cache[key] = r
        return r

    def evaluate_fix(self, base: Overlay, fixes) -> tuple[int, list[Diagnostic]]:
        """Error count after adding ``fixes`` to ``base``, and the diagnostics absent before."""
        before = {d.key for d in self.run(base).diags}
        r = self.run(base.extended(fixes))
        return r.count, [d for d in r.diags if d.key not in before]


def _conflicts(fixes, accepted: dict) -> bool:
    return any(accepted.get(f.site, f.qual) != f.qual for f in fixes)


def _merge(acc: dict, fixes) -> dict:
    d = dict(acc)
    for f in fixes:
        d[f.site] = f.qual
    return d


def expand_locals(fixes: frozenset, run: Run) -> frozenset:
    """Replace local-variable fixes by fixes on the values assigned to those locals.

    A local whose assignments cannot be retyped keeps its own annotation.
    """
    fg = FixGen(run.checker)
    done: set = set()
    cur = fixes
    while True:
        locs = [f for f in cur if f.site.kind == LOCAL and f.site not in done]
        if not locs:
            return cur
        for f in locs:
            done.add(f.site)
            cls, mname, arity = f.site.key[:3]
            m = run.checker.db.classes[cls].methods.get((mname, arity))
            if m is None:
                continue
            exp = fg._assignment_fixes(f, (cls, m), 0, ())
            if exp is None:
                continue
            nxt = combine(cur - {f}, exp)
            if nxt is None:
                continue
            cur = nxt


@dataclass
class _Cand:
    root: Diagnostic
    fixes: frozenset
    count: int = 0
    best: frozenset = field(default_factory=frozenset)


class Search:
    def __init__(self, db: ProgramDB, cfg: CheckConfig, scfg: SearchConfig):
        self.db = db
        self.cfg = replace(cfg, poly_depth=scfg.poly_depth)
        self.scfg = scfg
        self.ev = Evaluator(db, self.cfg, scfg.budget)

    # -- candidate generation ----------------------------------------------
    def _candidates(self, run: Run, accepted: dict, only=None) -> list[tuple[Diagnostic, frozenset]]:
        out = []
        seen = set()
        for d in run.diags:
            if only is not None and d.key not in only:
                continue
            for fs in d.fixes:
                if self.scfg.local_opt:
                    fs = expand_locals(fs, run)
                fs = frozenset(f for f in fs if accepted.get(f.site) != f.qual)
                if not fs or _conflicts(fs, accepted) or fs in seen:
                    continue
                lim = self.scfg.max_anns_per_warning
                if lim is not None and len(fs) > lim:
                    continue
                seen.add(fs)
                out.append((d, fs))
        return out

    def _follow_up(self, run: Run, accepted: dict, cur: frozenset, base_keys: set) -> frozenset:
        """Fixes for diagnostics that were not present in the base state."""
        acc = _merge(accepted, cur)
        add: frozenset = frozenset()
        for d, fs in self._candidates(run, acc, only={x.key for x in run.diags if x.key not in base_keys}):
            merged = combine(add, fs)
            if merged is None or _conflicts(merged, accepted):
                continue
            add = merged
        return add

    # -- evaluation of one candidate tree ------------------------------------
    def explore(self, accepted: dict, base: Run, cand: frozenset) -> list[tuple[int, frozenset]]:
        """Follow the cascade of ``cand``; returns the error count of every prefix, shortest first."""
        base_keys = {d.key for d in base.diags}
        cur = cand
        r = self.ev.run(Overlay(_merge(accepted, cur)))
        trail = [(r.count, cur)]
        for _ in range(self.scfg.outer_depth - 1):
            if self.scfg.max_anns_per_warning is not None and len(cur) >= self.scfg.max_anns_per_warning:
                break
            add = self._follow_up(r, accepted, cur, base_keys)
            add = frozenset(f for f in add if f not in cur)
            if not add:
                break
            nxt = combine(cur, add)
            if nxt is None:
                break
            if self.scfg.max_anns_per_warning is not None and len(nxt) > self.scfg.max_anns_per_warning:
                break
            cur = nxt
            r = self.ev.run(Overlay(_merge(accepted, cur)))
            trail.append((r.count, cur))
        return trail

    def _explore_batch(self, accepted: dict, base: Run, cands: list[frozenset]) -> list[list[tuple[int, frozenset]]]:
        """Explore several candidates with shared checker runs when their regions are disjoint."""
        if not self.scfg.batching or len(cands) < 2:
            return [self.explore(accepted, base, c) for c in cands]
        base_keys = {d.key for d in base.diags}
        states = [{"cur": c, "trail": [], "active": True, "diags": None} for c in cands]
        level = 0
        while any(s["active"] for s in states) and level < self.scfg.outer_depth:
            active = [s for s in states if s["active"]]
            groups = self._groups([s["cur"] for s in active])
            for grp in groups:
                members = [active[i] for i in grp]
                if len(members) == 1:
                    s = members[0]
                    r = self.ev.run(Overlay(_merge(accepted, s["cur"])))
                    s["diags"] = r
                else:
                    allfix = combine(*(s["cur"] for s in members))
                    r = self.ev.run(Overlay(_merge(accepted, allfix)))
                    for s in members:
                        region = self._region(s["cur"])
                        ds = sorted([d for d in r.diags if d.cls in region]
                                    + [d for d in base.diags if d.cls not in region], key=Diagnostic.sort_key)
                        s["diags"] = Run(ds, r.checker)
            for s in active:
                r = s["diags"]
                s["trail"].append((r.count, s["cur"]))
                lim = self.scfg.max_anns_per_warning
                if level + 1 >= self.scfg.outer_depth or (lim is not None and len(s["cur"]) >= lim):
                    s["active"] = False
                    continue
                add = frozenset(f for f in self._follow_up(r, accepted, s["cur"], base_keys) if f not in s["cur"])
                nxt = combine(s["cur"], add) if add else None
                if nxt is None or (lim is not None and len(nxt) > lim):
                    s["active"] = False
                    continue
                s["cur"] = nxt
            level += 1
        return [s["trail"] for s in states]

    def _region(self, fixes) -> set[str]:
        db = self.db
        region: set[str] = set()
        todo = [f.site.cls for f in fixes]
        while todo:
            c = todo.pop()
            if c in region:
                continue
            region.add(c)
            todo.extend(db.dependents.get(c, ()))
            todo.extend(x for x in db.source_classes() if db.superclass(x) == c)
        return region

    def _groups(self, cands: list[frozenset]) -> list[list[int]]:
        regions = [self._region(c) for c in cands]
        groups: list[list[int]] = []
        used: list[set] = []
        for i, r in enumerate(regions):
            for g, u in zip(groups, used):
                if not (u & r):
                    g.append(i)
                    u |= r
                    break
            else:
                groups.append([i])
                used.append(set(r))
        return groups

    # -- acceptance ------------------------------------------------------------
    def _tie_ok(self, accepted: dict, base: Run, root: Diagnostic, fixes: frozenset) -> bool:
        """Equal-count acceptance: an Untainted return moves the root error into that method's body."""
        rets = [f.site for f in fixes if f.site.kind == RETURN and f.qual == U]
        if not rets:
            return False
        r = self.ev.run(Overlay(_merge(accepted, fixes)))
        if any(d.key == root.key for d in r.diags):
            return False
        base_keys = {d.key for d in base.diags}
        spans = []
        for s in rets:
            m = self.db.classes[s.cls].methods[(s.key[1], s.key[2])]
            if m.body is not None:
                spans.append(m.body.span)
        new = [d for d in r.diags if d.key not in base_keys]
        return bool(new) and all(any(sp.file == d.file and (sp.line, sp.col) <= (d.line, d.col)
                                     and (d.line, d.col) <= (sp.end_line, sp.end_col) for sp in spans)
                                 for d in new)

    def _pick(self, accepted: dict, base: Run, root: Diagnostic, trail) -> Optional[tuple[int, frozenset]]:
        """Shortest prefix with the lowest count if it improves, else the shortest acceptable tie."""
        low = min(c for c, _ in trail)
        if low < base.count:
            return next(t for t in trail if t[0] == low)
        return next((t for t in trail if t[0] == base.count and self._tie_ok(accepted, base, root, t[1])), None)

    def _order_key(self, fixes: frozenset):
        locs = sorted(site_location(self.db, f.site) for f in fixes)
        return (len(fixes), locs[0] if locs else ("", 0, 0), sorted(fixes))

    def run(self) -> InferenceResult:
        accepted: dict = {}
        prov: dict = {}
        resolved: dict = {}
        base = self.ev.run(Overlay())
        initial = base.diags
        while True:
            cands = self._candidates(base, accepted)
            if not cands:
                break
            results = self._explore_batch(accepted, base, [fs for _, fs in cands])
            choice = None
            for (root, _), trail in zip(cands, results):
                pick = self._pick(accepted, base, root, trail)
                if pick is None:
                    continue
                count, fixes = pick
                key = (count, self._order_key(fixes))
                if choice is None or key < choice[0]:
                    choice = (key, root, fixes)
            if choice is None:
                break
            _, root, fixes = choice
            log.debug("accept %s for %s", sorted(fixes), root.human())
            accepted = _merge(accepted, fixes)
            after = self.ev.run(Overlay(accepted))
            keys = {d.key for d in after.diags}
            gone = [f"{d.file}:{d.line}:{d.col}" for d in base.diags if d.key not in keys]
            for f in fixes:
                prov.setdefault(f.site, f"{root.file}:{root.line}:{root.col}")
                resolved.setdefault(f.site, gone)
            base = after
        accepted = self._drop_locals(accepted, base)
        final = self.ev.run(Overlay(accepted))
        prov = {s: p for s, p in prov.items() if s in accepted}
        resolved = {s: g for s, g in resolved.items() if s in accepted}
        return InferenceResult(accepted, prov, initial, final.diags, self.ev.runs, resolved)

    def _drop_locals(self, accepted: dict, base: Run) -> dict:
        count = self.ev.run(Overlay(accepted)).count
        for s in sorted(s for s in accepted if s.kind == LOCAL):
            trial = {k: v for k, v in accepted.items() if k != s}
            if self.ev.run(Overlay(trial)).count <= count:
                accepted = trial
        return accepted


def run_inference(db: ProgramDB, cfg: CheckConfig, scfg: Optional[SearchConfig] = None) -> InferenceResult:
    """Greedy search for annotations that minimise the final number of errors."""
    return Search(db, cfg, scfg or SearchConfig()).run()


def evaluate_fix(db: ProgramDB, cfg: CheckConfig, fixes, base: Optional[Overlay] = None) -> tuple[int, list]:
    return Evaluator(db, cfg).evaluate_fix(base or Overlay(), fixes)


# -- exhaustive oracle -------------------------------------------------------

def fix_closure(db: ProgramDB, cfg: CheckConfig, limit: int = 6, local_opt: bool = True) -> Optional[list[Fix]]:
    """Every fix reachable by repeatedly applying diagnostics' candidates, or None past ``limit``."""
    ev = Evaluator(db, cfg, budget=10_000)
    atoms: set[Fix] = set()
    seen: set[frozenset] = set()
    queue = [frozenset()]
    while queue:
        ov = queue.pop(0)
        if ov in seen:
            continue
        seen.add(ov)
        r = ev.run(Overlay(ov))
        for d in r.diags:
            for fs in d.fixes:
                variants = {fs}
                if local_opt:
                    variants.add(expand_locals(fs, r))
                for v in variants:
                    nxt = combine(ov, v)
                    if nxt is None:
                        continue
                    atoms |= set(v)
                    if len(atoms) > limit:
                        return None
                    if nxt not in seen:
                        queue.append(nxt)
    return sorted(atoms)


def brute_force_minimum(db: ProgramDB, cfg: CheckConfig, atoms: list[Fix]) -> int:
    """Lowest error count over every conflict-free subset of ``atoms``."""
    ev = Evaluator(db, cfg, budget=10_000)
    best = None
    for n in range(len(atoms) + 1):
        for sub in itertools.combinations(atoms, n):
            fs = combine(frozenset(sub))
            if fs is None or len({f.site for f in sub}) != len(sub):
                continue
            c = ev.run(Overlay(fs)).count
            best = c if best is None else min(best, c)
    return best
