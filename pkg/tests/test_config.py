from __future__ import annotations

import pytest

from polytaint.config import ConfigError, build_config, load_config

from conftest import CORPUS


def test_defaults():
    cfg = build_config({}, check_paths=False)
    assert cfg.check.annotated_packages == ".*" and cfg.search.outer_depth == 15 and cfg.search.poly_depth == 5
    assert cfg.search.local_opt and cfg.search.batching and not cfg.search.in_place


def test_load_corpus_config():
    cfg = load_config(str(CORPUS / "multi_unit" / "taint.toml"))
    assert cfg.check.sources == ("Taint#source", "Taint#read")
    assert cfg.src_dirs == [str(CORPUS / "multi_unit" / ".")]


def test_overrides_win_and_are_coerced():
    cfg = load_config(str(CORPUS / "paths_demo" / "taint.toml"),
                      {"local_opt": "false", "search_depth": "3", "sinks": "Db#exec:0,Log#info"})
    assert cfg.search.local_opt is False and cfg.search.outer_depth == 3
    assert cfg.check.sinks == ("Db#exec:0", "Log#info")


@pytest.mark.parametrize("values", [
    {"nope": 1},
    {"local_opt": "maybe"},
    {"poly_depth": "deep"},
    {"poly_depth": 0},
    {"annotated_packages": "("},
    {"sinks": ["Db#exec:x"]},
    {"sources": 3},
])
def test_invalid_values(values):
    with pytest.raises(ConfigError):
        build_config(values, check_paths=False)


def test_missing_path():
    with pytest.raises(ConfigError):
        build_config({"src_dirs": ["/does/not/exist"]})


def test_bad_toml(tmp_path):
    p = tmp_path / "taint.toml"
    p.write_text("annotated_packages = \n")
    with pytest.raises(ConfigError):
        load_config(str(p))
