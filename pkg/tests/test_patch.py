from __future__ import annotations

import shutil

import pytest

from polytaint.checker import check_program
from polytaint.patch import SpanDrift, emit_patch
from polytaint.project import load_texts
from polytaint.sites import FIELD, PARAM, Fix, Site
from polytaint.types import T, U

from conftest import CORPUS, PROGRAMS, infer, load, program


@pytest.mark.parametrize("name", PROGRAMS)
def test_patched_sources_recheck_to_search_result(name):
    cfg, pr, res = infer(name)
    patched = emit_patch(pr.db, res.fixes()).patched()
    texts = {u.path: patched.get(u.path, u.text) for u in pr.units}
    again = check_program(load_texts(texts, pr.stubs).db, cfg.check)
    assert sorted((d.kind, d.file, d.line) for d in again) == sorted((d.kind, d.file, d.line) for d in res.final)


def test_empty_patch():
    _, pr = load("ex_basic")
    p = emit_patch(pr.db, [])
    assert p.edits == [] and p.patched() == {} and p.diff() == ""


def test_array_annotations_go_before_brackets():
    pr, _ = program("class A { void m(String[] a, String[]b) { } }")
    fixes = [Fix(Site(PARAM, ("A", "m", 2, 0)), U), Fix(Site(PARAM, ("A", "m", 2, 1)), U),
             Fix(Site(PARAM, ("A", "m", 2, 0), (0,)), U)]
    [text] = emit_patch(pr.db, fixes).patched().values()
    assert "void m(@Untainted String @Untainted [] a, String @Untainted []b)" in text


def test_type_argument_annotation():
    pr, _ = program("class A { Map<String, String> f; }")
    [text] = emit_patch(pr.db, [Fix(Site(FIELD, ("A", "f"), (1,)), U)]).patched().values()
    assert "Map<String, @Untainted String> f;" in text


def test_two_qualifiers_at_one_position_drift():
    pr, _ = program("class A { String f; }")
    s = Site(FIELD, ("A", "f"))
    with pytest.raises(SpanDrift):
        emit_patch(pr.db, [Fix(s, U), Fix(s, T)])


def test_missing_declaration_drifts():
    pr, _ = program("class A { String f; }")
    with pytest.raises(SpanDrift):
        emit_patch(pr.db, [Fix(Site(FIELD, ("A", "gone")), U)])


def test_write_refuses_changed_file(tmp_path):
    work = tmp_path / "demo"
    shutil.copytree(CORPUS / "paths_demo", work)
    cfg, pr, res = infer("paths_demo")
    texts = {str(work / "App.mj"): (work / "App.mj").read_text()}
    db = load_texts(texts).db
    p = emit_patch(db, res.fixes())
    (work / "App.mj").write_text(texts[str(work / "App.mj")] + "\n// edited\n")
    with pytest.raises(SpanDrift):
        p.write(tmp_path / "out", in_place=True)


def test_write_outputs(tmp_path):
    work = tmp_path / "demo"
    shutil.copytree(CORPUS / "paths_demo", work)
    path = str(work / "App.mj")
    db = load_texts({path: (work / "App.mj").read_text()}).db
    _, _, res = infer("paths_demo")
    p = emit_patch(db, res.fixes())
    p.write(tmp_path / "out", in_place=True)
    assert (tmp_path / "out" / "annotations.patch").read_text() == p.diff()
    assert (tmp_path / "out" / "patch.json").exists()
    assert "@PolyTaint String parentPath" in (work / "App.mj").read_text()
