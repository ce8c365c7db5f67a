from __future__ import annotations

import io
import json
import shutil

import pytest

from polytaint import cli

from conftest import CORPUS


def run(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out)
    return code, out.getvalue()


@pytest.fixture
def demo(tmp_path):
    work = tmp_path / "demo"
    shutil.copytree(CORPUS / "paths_demo", work)
    return work


def test_check_reports_findings(demo):
    code, out = run("check", "--config", str(demo / "taint.toml"))
    assert code == 1 and out.endswith("1 error\n")


def test_check_clean():
    code, out = run("check", "--config", str(CORPUS / "empty" / "taint.toml"))
    assert code == 0 and out == "0 errors\n"


def test_check_json_lines(demo):
    code, out = run("check", "--config", str(demo / "taint.toml"), "--format", "json")
    rows = [json.loads(x) for x in out.splitlines()]
    assert code == 1 and len(rows) == 1


def test_unknown_key_is_usage_error(demo):
    code, _ = run("check", "--config", str(demo / "taint.toml"), "--frobnicate=1")
    assert code == 2


def test_bad_value_is_tool_error(demo):
    code, _ = run("check", "--config", str(demo / "taint.toml"), "--annotated_packages=(")
    assert code == 2


def test_missing_config():
    code, _ = run("check", "--config", "/no/such/taint.toml")
    assert code == 2


def test_infer_writes_patch_and_fixes(demo, tmp_path):
    out_dir = tmp_path / "out"
    code, out = run("infer", "--config", str(demo / "taint.toml"), "--in-place", "--out", str(out_dir),
                    "--format", "json")
    summary = json.loads(out)
    assert code == 0 and summary["final_errors"] == 0 and summary["annotations"] == 3
    added = [x for x in (out_dir / "annotations.patch").read_text().splitlines() if x.startswith("+ ")]
    assert len(added) == 2
    assert run("check", "--config", str(demo / "taint.toml"))[0] == 0


def test_infer_flags(demo, tmp_path):
    code, out = run("infer", "--config", str(demo / "taint.toml"), "--no-local-opt", "--no-batching",
                    "--poly-depth", "2", "--search-depth", "4", "--out", str(tmp_path / "o"))
    assert code == 0 and "final errors: 0" in out


def test_check_changed(demo):
    cfg = str(demo / "taint.toml")
    code, out = run("check", "--config", cfg, "--changed", str(demo / "App.mj"))
    assert code == 1 and out.endswith("1 error\n")
    assert (demo / ".polytaint-cache" / "App.json").is_file()
    code, out = run("check", "--config", cfg, "--changed", str(demo / "App.mj"), "--format", "json")
    assert code == 1 and len(out.splitlines()) == 1


def test_bench_json(tmp_path):
    code, out = run("bench", str(CORPUS / "paths_demo"), "--format", "json")
    rows = [json.loads(x) for x in out.splitlines()]
    assert code == 0 and rows[0]["program"] == "paths_demo" and "aggregate" in rows[-1]


def test_bench_malformed(demo):
    (demo / "App.mj").write_text((demo / "App.mj").read_text() + "// trailing //!flaw\n")
    code, _ = run("bench", str(demo))
    assert code == 2


def test_parse_error_exit(demo):
    (demo / "Bad.mj").write_text("package app; class B { String f = ; }")
    code, _ = run("check", "--config", str(demo / "taint.toml"))
    assert code == 2
