"""Command-line driver: ``polytaint check|infer|bench``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from .bench import MalformedExpectation, run_bench
from .checker import check_program, diagnostics_jsonl
from .config import KEYS, ConfigError, ToolConfig, load_config, tomllib
from .frontend.parser import ParseErrors, parse
from .frontend.resolve import ResolveErrors
from .frontend.stubs import StubError
from .incremental import StaleStore, SummaryStore, check_unit_incremental
from .infer import BudgetExceeded, run_inference
from .patch import SpanDrift, emit_patch
from .project import load_project

EXIT_CLEAN, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2
TOOL_ERRORS = (ConfigError, ParseErrors, ResolveErrors, StubError, StaleStore, SpanDrift,
               BudgetExceeded, MalformedExpectation, OSError)


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML configuration file (default: ./taint.toml if present)")
    p.add_argument("--format", choices=("human", "json"), default="human")
    p.add_argument("--jobs", type=int, help="checker threads (default: available cores)")
    p.add_argument("-v", "--verbose", action="store_true")


def _search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in-place", action="store_true", help="rewrite the sources instead of only writing a patch")
    p.add_argument("--no-local-opt", action="store_true")
    p.add_argument("--no-batching", action="store_true")
    p.add_argument("--poly-depth", type=int)
    p.add_argument("--search-depth", type=int)
    p.add_argument("--max-anns-per-warning", type=int)
    p.add_argument("--out", help="output directory (overrides out_dir)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polytaint", description="Taint type checking and annotation inference for MiniJ.",
                                 epilog="Any configuration key can also be given as --key=value.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    c = sub.add_parser("check", help="type-check the project and report diagnostics")
    _common(c)
    c.add_argument("--changed", nargs="+", metavar="FILE", help="re-check only these units against the summary cache")
    i = sub.add_parser("infer", help="infer annotations and write a patch")
    _common(i)
    _search_flags(i)
    b = sub.add_parser("bench", help="score a labeled corpus before and after inference")
    _common(b)
    _search_flags(b)
    b.add_argument("corpus", nargs="?", default="corpus", help="corpus directory or a single program directory")
    return ap


def _split_overrides(extra: Sequence[str]) -> dict:
    out = {}
    for tok in extra:
        if not tok.startswith("--") or "=" not in tok:
            raise UsageError(f"unrecognized argument: {tok}")
        k, _, v = tok[2:].partition("=")
        k = k.replace("-", "_")
        if k not in KEYS:
            raise UsageError(f"unknown configuration key: {k}")
        out[k] = v
    return out


def _overrides(args, extra: Sequence[str]) -> dict:
    ov = _split_overrides(extra)
    if args.jobs is not None:
        ov["jobs"] = args.jobs
    if getattr(args, "no_local_opt", False):
        ov["local_opt"] = False
    if getattr(args, "no_batching", False):
        ov["batching"] = False
    if getattr(args, "in_place", False):
        ov["in_place"] = True
    for flag, key in (("poly_depth", "poly_depth"), ("search_depth", "search_depth"),
                      ("max_anns_per_warning", "max_anns_per_warning"), ("out", "out_dir")):
        v = getattr(args, flag, None)
        if v is not None:
            ov[key] = v
    return ov


def _config(args, ov: dict) -> ToolConfig:
    path = args.config
    if path is None and Path("taint.toml").exists():
        path = "taint.toml"
    cfg = load_config(path, ov)
    if "jobs" not in ov and not _file_sets(path, "jobs"):
        cfg.check.jobs = os.cpu_count() or 1
    return cfg


def _file_sets(path: Optional[str], key: str) -> bool:
    if path is None:
        return False
    return key in tomllib.loads(Path(path).read_text())


def _print_diags(diags, db, fmt: str, out) -> None:
    if fmt == "json":
        out.write(diagnostics_jsonl(diags, db))
    else:
        for d in diags:
            out.write(d.human() + "\n")
        n = len(diags)
        out.write(f"{n} error{'s' if n != 1 else ''}\n")


def cmd_check(args, cfg: ToolConfig, out) -> int:
    if args.changed:
        return _check_changed(args, cfg, out)
    pr = load_project(cfg.src_dirs, cfg.stub_paths)
    diags = check_program(pr.db, cfg.check)
    _print_diags(diags, pr.db, args.format, out)
    return EXIT_FINDINGS if diags else EXIT_CLEAN


def _check_changed(args, cfg: ToolConfig, out) -> int:
    store = SummaryStore(cfg.cache_dir)
    pr = None
    if not store.classes:
        logging.info("summary cache %s is empty; building it from a full check", cfg.cache_dir)
        pr = load_project(cfg.src_dirs, cfg.stub_paths)
        store = SummaryStore.build(pr.db, cfg.check, cfg.cache_dir)
    stubs = pr.stubs if pr is not None else _stubs(cfg)
    todo = [str(Path(f)) for f in args.changed]
    done: set[str] = set()
    diags = []
    while todo:
        f = todo.pop(0)
        if f in done:
            continue
        done.add(f)
        unit = parse(Path(f).read_text(), f)
        res = check_unit_incremental(unit, store, cfg.check, stubs)
        diags.extend(res.diagnostics)
        if res.changed_signatures:
            logging.info("signatures changed: %s; re-checking %s", ", ".join(res.changed_signatures),
                         ", ".join(res.dependents) or "nothing")
        for dep in res.dependents:
            p = store.classes[dep].path
            if p not in done and Path(p).exists():
                todo.append(p)
    diags.sort(key=lambda d: d.sort_key())
    _print_diags(diags, None, args.format, out)
    return EXIT_FINDINGS if diags else EXIT_CLEAN


def _stubs(cfg: ToolConfig):
    from .frontend.stubs import load_stub_dir
    return load_stub_dir(cfg.stub_paths)


def cmd_infer(args, cfg: ToolConfig, out) -> int:
    pr = load_project(cfg.src_dirs, cfg.stub_paths)
    t0 = time.perf_counter()
    res = run_inference(pr.db, cfg.check, cfg.search)
    elapsed = time.perf_counter() - t0
    patch = emit_patch(pr.db, res.fixes(), res.provenance)
    out_dir = Path(cfg.out_dir)
    patch.write(out_dir, in_place=cfg.search.in_place)
    summary = {"initial_errors": len(res.initial), "final_errors": len(res.final),
               "annotations": len(res.accepted), "checker_runs": res.checker_runs,
               "seconds": round(elapsed, 3), "patch": str(out_dir / "annotations.patch"),
               "in_place": cfg.search.in_place}
    (out_dir / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if args.format == "json":
        out.write(json.dumps(summary, sort_keys=True) + "\n")
    else:
        out.write(patch.diff())
        for d in res.final:
            out.write(d.human() + "\n")
        out.write(f"initial errors: {summary['initial_errors']}\nfinal errors: {summary['final_errors']}\n"
                  f"annotations inserted: {summary['annotations']}\nchecker runs: {summary['checker_runs']}\n")
    return EXIT_CLEAN


def cmd_bench(args, ov: dict, out) -> int:
    ov = {k: v for k, v in ov.items() if k != "out_dir"}
    out_dir = Path(args.out) if args.out else None
    rep = run_bench(Path(args.corpus), out_dir, ov)
    if args.format == "json":
        for r in rep.rows:
            out.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
        out.write(json.dumps({"aggregate": rep.to_json()["aggregate"]}, sort_keys=True) + "\n")
    else:
        out.write(rep.table() + "\n")
    return EXIT_CLEAN


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="polytaint: %(message)s", stream=sys.stderr)
    try:
        ov = _overrides(args, extra)
        if args.cmd == "bench":
            return cmd_bench(args, ov, out)
        cfg = _config(args, ov)
        if args.cmd == "check":
            return cmd_check(args, cfg, out)
        return cmd_infer(args, cfg, out)
    except UsageError as e:
        ap.print_usage(sys.stderr)
        print(f"polytaint: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except TOOL_ERRORS as e:
        print(f"polytaint: error: {e}", file=sys.stderr)
        return EXIT_ERROR
