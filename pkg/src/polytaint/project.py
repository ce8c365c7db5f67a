"""Loading a MiniJ project from source directories."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .frontend import ast as A
from .frontend.parser import ParseErrors, parse
from .frontend.resolve import ProgramDB, resolve
from .frontend.stubs import StubEntry, load_stub_dir


@dataclass
class Project:
    units: list[A.SourceUnit]
    stubs: list[StubEntry]
    db: ProgramDB


def source_files(src_dirs: Iterable[str]) -> list[Path]:
    files: list[Path] = []
    for d in src_dirs:
        p = Path(d)
        files.extend(sorted(p.rglob("*.mj")) if p.is_dir() else [p])
    return files


def parse_files(files: Iterable[Path]) -> list[A.SourceUnit]:
    units, errors = [], []
    for f in files:
        try:
            units.append(parse(f.read_text(), str(f)))
        except ParseErrors as e:
            errors.extend(e.errors)
    if errors:
        raise ParseErrors(errors)
    return units


def load_project(src_dirs: Iterable[str], stub_paths: Iterable[str] = ()) -> Project:
    units = parse_files(source_files(src_dirs))
    stubs = load_stub_dir(stub_paths)
    return Project(units, stubs, resolve(units, stubs=stubs))


def load_texts(texts: dict[str, str], stubs: Iterable[StubEntry] = ()) -> Project:
    """Project from in-memory sources (path -> text)."""
    units = [parse(t, p) for p, t in sorted(texts.items())]
    stubs = list(stubs)
    return Project(units, stubs, resolve(units, stubs=stubs))
