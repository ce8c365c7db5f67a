from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import pytest

from polytaint.checker import CheckConfig, check_program
from polytaint.config import load_config
from polytaint.infer import SearchConfig, run_inference
from polytaint.project import load_project, load_texts

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"
PROGRAMS = sorted(p.parent.name for p in CORPUS.glob("*/taint.toml"))

_RESULTS = pytest.StashKey[dict]()


def load(name: str, **check):
    cfg = load_config(str(CORPUS / name / "taint.toml"))
    if check:
        cfg.check = replace(cfg.check, **check)
    return cfg, load_project(cfg.src_dirs, cfg.stub_paths)


def infer(name: str, scfg: SearchConfig | None = None, **check):
    cfg, pr = load(name, **check)
    return cfg, pr, run_inference(pr.db, cfg.check, scfg or cfg.search)


EXT = """package ext;

class Taint {
  static String source();
  static String escape(String s);
  static List<String> sourceList();
}
class Log {
  static void info(String s);
}
"""
BASE_CFG = {"annotated_packages": "app", "sources": ("Taint#source", "Taint#sourceList"),
            "sanitizers": ("Taint#escape",)}


def program(src: str, path: str = "app/A.mj", **cfg):
    """Project from one in-memory unit plus the ``ext`` library; ``package app;`` is prepended when missing."""
    if not src.lstrip().startswith("package"):
        src = "package app;\n" + src
    pr = load_texts({path: src, "ext/Ext.mj": EXT})
    return pr, CheckConfig(**{**BASE_CFG, **cfg})


def diags_of(src: str, **cfg):
    pr, c = program(src, **cfg)
    return check_program(pr.db, c)


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion outcome; a summary line is printed at the end of the session."""
    store = request.config.stash.setdefault(_RESULTS, {})

    def report(n: int, ok: bool, detail: str = ""):
        store[n] = (ok, detail)
        print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    res = config.stash.get(_RESULTS, {})
    if not res:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(res):
        ok, detail = res[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


sys.setrecursionlimit(max(sys.getrecursionlimit(), 5000))
