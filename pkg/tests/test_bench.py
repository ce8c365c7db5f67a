from __future__ import annotations

import json

import pytest

from polytaint.bench import (BENIGN, FLOW, Expectation, MalformedExpectation, Score, SiteInfo, parse_expectations,
                             run_bench, run_program, score)
from polytaint.checker import Diagnostic
from polytaint.frontend.parser import parse
from polytaint.types import QType, T, U

from conftest import CORPUS


def diag(line, file="A.mj"):
    s = QType.named("String", None)
    return Diagnostic("ArgumentIncompat", file, line, 1, line, 2, s.with_qual(U), s.with_qual(T), "argument")


def test_parse_expectations():
    u = parse("package p;\nclass A {\n  void m() { } //!flow sql\n  void n() { } //!benign\n}\n", "A.mj")
    assert parse_expectations([u]) == [Expectation("A.mj", 3, FLOW, "sql"), Expectation("A.mj", 4, BENIGN, "")]


@pytest.mark.parametrize("comment", ["//!flw", "//!flow //!benign"])
def test_malformed_expectation(comment):
    u = parse(f"package p;\nclass A {{ }} {comment}\n", "A.mj")
    with pytest.raises(MalformedExpectation):
        parse_expectations([u])


def test_score_by_line():
    exps = [Expectation("A.mj", 3, FLOW), Expectation("A.mj", 5, FLOW), Expectation("A.mj", 7, BENIGN)]
    s = score([diag(3), diag(3), diag(7)], exps)
    assert (s.detected, s.false_positive, s.missed) == (1, 1, 1)
    assert s.precision == 0.5 and s.recall == 0.5 and s.unmatched == ["A.mj:5"]


def test_score_through_site():
    exps = [Expectation("A.mj", 3, FLOW)]
    site = SiteInfo("A.mj", 10, 14, frozenset({("A.mj", 3)}))
    s = score([diag(12)], exps, [site])
    assert (s.detected, s.false_positive, s.missed) == (1, 0, 0)


def test_untainted_param_counts_as_detection():
    exps = [Expectation("A.mj", 3, FLOW)]
    site = SiteInfo("A.mj", 1, 1, frozenset({("A.mj", 3)}), untainted_param=True)
    assert score([], exps, [site]).detected == 1


def test_empty_score_is_perfect():
    s = score([], [])
    assert s.precision == 1.0 and s.recall == 1.0


def test_score_is_pure():
    exps = [Expectation("A.mj", 3, FLOW)]
    ds = [diag(3), diag(9)]
    assert score(ds, exps) == score(ds, exps)
    assert [d.line for d in ds] == [3, 9]


def test_demo_has_no_false_positive_after_inference():
    r = run_program(CORPUS / "paths_demo")
    assert r.post.false_positive == 0 and r.pre.false_positive == 1 and r.final_errors == 0


def test_corpus_recall(tmp_path):
    rep = run_bench(CORPUS, tmp_path)
    pre, post = rep.aggregate("pre"), rep.aggregate("post")
    assert pre.recall >= 0.95 and post.recall >= 0.95
    assert post.precision >= pre.precision
    data = json.loads((tmp_path / "report.json").read_text())
    assert len(data["programs"]) == len(rep.rows)
    assert "total" in (tmp_path / "report.txt").read_text()


def test_score_json():
    assert Score(1, 1, 0).to_json()["precision"] == 0.5
