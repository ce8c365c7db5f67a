"""Labeled-corpus harness: expectations from comments, detection scoring, reports."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .checker import Diagnostic, check_program
from .config import load_config
from .frontend import ast as A
from .infer import run_inference
from .project import load_project
from .sites import PARAM, RETURN, site_location
from .types import U

FLOW, BENIGN = "flow", "benign"
_MARK = re.compile(r"//!(\S*)(.*)$")


class MalformedExpectation(Exception):
    pass


@dataclass(frozen=True)
class Expectation:
    file: str
    line: int
    kind: str
    label: str = ""


@dataclass(frozen=True)
class SiteInfo:
    """An inferred annotation, the lines it covers and the diagnostics it descends from."""
    file: str
    first_line: int
    last_line: int
    roots: frozenset = frozenset()      # (file, line) pairs
    untainted_param: bool = False


def parse_expectations(units: Iterable[A.SourceUnit]) -> list[Expectation]:
    out = []
    for u in units:
        for i, line in enumerate(u.text.splitlines(), 1):
            m = _MARK.search(line)
            if m is None:
                continue
            kind = m.group(1)
            if kind not in (FLOW, BENIGN):
                raise MalformedExpectation(f"{u.path}:{i}: unknown expectation '//!{kind}'")
            if line.count("//!") > 1:
                raise MalformedExpectation(f"{u.path}:{i}: more than one expectation on a line")
            out.append(Expectation(u.path, i, kind, m.group(2).strip()))
    return out


@dataclass
class Score:
    detected: int
    false_positive: int
    missed: int
    unmatched: list[str] = field(default_factory=list)

    @property
    def precision(self) -> float:
        d = self.detected + self.false_positive
        return self.detected / d if d else 1.0

    @property
    def recall(self) -> float:
        d = self.detected + self.missed
        return self.detected / d if d else 1.0

    def to_json(self) -> dict:
        return {"detected": self.detected, "false_positive": self.false_positive, "missed": self.missed,
                "precision": round(self.precision, 4), "recall": round(self.recall, 4),
                "unmatched": self.unmatched}


def score(diags: Iterable[Diagnostic], expectations: Iterable[Expectation],
          sites: Iterable[SiteInfo] = ()) -> Score:
    """Match diagnostics to labeled flows by line, or through inferred sites descending from a flow."""
    exps = list(expectations)
    sites = list(sites)
    flows = [e for e in exps if e.kind == FLOW]

    def lines_for(e: Expectation) -> list[tuple[str, int, int]]:
        out = [(e.file, e.line, e.line)]
        out += [(s.file, s.first_line, s.last_line) for s in sites if (e.file, e.line) in s.roots]
        return out

    detected: set[Expectation] = set()
    fp = 0
    regions = {e: lines_for(e) for e in flows}
    for d in diags:
        hit = [e for e in flows if any(f == d.file and lo <= d.line <= hi for f, lo, hi in regions[e])]
        if hit:
            detected.update(hit)
        else:
            fp += 1
    for s in sites:
        if s.untainted_param:
            detected.update(e for e in flows if (e.file, e.line) in s.roots)
    missed = [e for e in flows if e not in detected]
    return Score(len(detected), fp, len(missed), [f"{e.file}:{e.line}" for e in missed])


def site_infos(db, result) -> list[SiteInfo]:
    out = []
    for f in result.fixes():
        file, line, _ = site_location(db, f.site)
        last = line
        if f.site.kind == RETURN:
            m = db.classes[f.site.cls].methods[(f.site.key[1], f.site.key[2])]
            line, last = m.span.line, m.span.end_line
        locs = [result.provenance.get(f.site)] + list(result.resolved.get(f.site, ()))
        roots = set()
        for loc in locs:
            if loc:
                pf, pl, _ = loc.rsplit(":", 2)
                roots.add((pf, int(pl)))
        out.append(SiteInfo(file, line, last, frozenset(roots), f.site.kind == PARAM and f.qual == U))
    return out


@dataclass
class ProgramReport:
    program: str
    pre: Score
    post: Score
    initial_errors: int
    final_errors: int
    annotations: int
    checker_runs: int

    def to_json(self) -> dict:
        return {"program": self.program, "pre": self.pre.to_json(), "post": self.post.to_json(),
                "initial_errors": self.initial_errors, "final_errors": self.final_errors,
                "annotations": self.annotations, "checker_runs": self.checker_runs}


def programs(corpus: Path) -> list[Path]:
    corpus = Path(corpus)
    if (corpus / "taint.toml").exists():
        return [corpus]
    return sorted(p.parent for p in corpus.glob("*/taint.toml"))


def run_program(path: Path, overrides: Optional[dict] = None) -> ProgramReport:
    cfg = load_config(str(Path(path) / "taint.toml"), overrides)
    pr = load_project(cfg.src_dirs, cfg.stub_paths)
    exps = parse_expectations(pr.units)
    pre = check_program(pr.db, cfg.check)
    res = run_inference(pr.db, cfg.check, cfg.search)
    post = score(res.final, exps, site_infos(pr.db, res))
    return ProgramReport(Path(path).name, score(pre, exps), post, len(res.initial), len(res.final),
                         len(res.accepted), res.checker_runs)


@dataclass
class BenchReport:
    rows: list[ProgramReport]

    def aggregate(self, phase: str) -> Score:
        ss = [getattr(r, phase) for r in self.rows]
        return Score(sum(s.detected for s in ss), sum(s.false_positive for s in ss), sum(s.missed for s in ss),
                     [u for s in ss for u in s.unmatched])

    def to_json(self) -> dict:
        return {"programs": [r.to_json() for r in self.rows],
                "aggregate": {"pre": self.aggregate("pre").to_json(), "post": self.aggregate("post").to_json(),
                              "initial_errors": sum(r.initial_errors for r in self.rows),
                              "final_errors": sum(r.final_errors for r in self.rows),
                              "annotations": sum(r.annotations for r in self.rows)}}

    def table(self) -> str:
        head = f"{'program':<16} {'tp':>3} {'fp':>3} {'miss':>4} {'prec':>5} {'rec':>5} | " \
               f"{'tp':>3} {'fp':>3} {'miss':>4} {'prec':>5} {'rec':>5} | {'err':>7} {'anns':>4}"
        lines = [f"{'':<16} {'before inference':^26} | {'after inference':^26} |", head, "-" * len(head)]

        def cols(s: Score) -> str:
            return f"{s.detected:>3} {s.false_positive:>3} {s.missed:>4} {s.precision:>5.2f} {s.recall:>5.2f}"
        for r in self.rows:
            lines.append(f"{r.program:<16} {cols(r.pre)} | {cols(r.post)} | "
                         f"{r.initial_errors:>3}->{r.final_errors:<3} {r.annotations:>4}")
        lines.append("-" * len(head))
        tot_i = sum(r.initial_errors for r in self.rows)
        tot_f = sum(r.final_errors for r in self.rows)
        lines.append(f"{'total':<16} {cols(self.aggregate('pre'))} | {cols(self.aggregate('post'))} | "
                     f"{tot_i:>3}->{tot_f:<3} {sum(r.annotations for r in self.rows):>4}")
        unmatched = self.aggregate("post").unmatched
        if unmatched:
            lines.append("unmatched flows after inference: " + ", ".join(unmatched))
        return "\n".join(lines)


def run_bench(corpus: Path, out_dir: Optional[Path] = None, overrides: Optional[dict] = None) -> BenchReport:
    rep = BenchReport([run_program(p, overrides) for p in programs(corpus)])
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(json.dumps(rep.to_json(), indent=2, sort_keys=True) + "\n")
        (out_dir / "report.txt").write_text(rep.table() + "\n")
    return rep
