"""Stub files: external qualified signatures for library methods.

One method per line::

    lib.util.Properties#getProperty(String) : @Tainted String (@Untainted String)

Blank lines and ``//`` comments are ignored.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from . import ast as A
from .parser import ParseErrors, parse_type

_LINE_RE = re.compile(r"^\s*(?P<cls>[\w.]+)#(?P<m>\w+)\((?P<ptypes>[^)]*)\)\s*:\s*(?P<ret>[^(]+?)\s*\((?P<pann>.*)\)\s*$")


class StubError(Exception):
    pass


@dataclass(frozen=True)
class StubEntry:
    package: str
    cls: str
    method: str
    param_types: tuple[A.TypeNode, ...]
    ret: A.TypeNode
    params: tuple[A.TypeNode, ...]
    origin: str

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.cls, self.method, len(self.param_types))


def _split_types(text: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "<":
            depth += 1
        elif ch == ">":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    if cur.strip():
        parts.append(cur)
    return [p.strip() for p in parts]


def parse_stubs(text: str, origin: str = "<stub>") -> list[StubEntry]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.strip().startswith("//"):
            continue
        m = _LINE_RE.match(line)
        if m is None:
            raise StubError(f"{origin}:{lineno}: malformed stub line")
        pkg, _, cls = m.group("cls").rpartition(".")
        try:
            ptypes = tuple(parse_type(t) for t in _split_types(m.group("ptypes")))
            ret = parse_type(m.group("ret"))
            pann = tuple(parse_type(t) for t in _split_types(m.group("pann")))
        except ParseErrors as e:
            raise StubError(f"{origin}:{lineno}: {e.errors[0].message}") from None
        if len(pann) != len(ptypes):
            raise StubError(f"{origin}:{lineno}: {len(ptypes)} parameter types but {len(pann)} annotated types")
        out.append(StubEntry(pkg, cls, m.group("m"), ptypes, ret, pann, f"{origin}:{lineno}"))
    return out


def load_stub_dir(paths) -> list[StubEntry]:
    entries: list[StubEntry] = []
    for p in paths:
        p = Path(p)
        files = sorted(p.glob("*.stub")) if p.is_dir() else [p]
        for f in files:
            entries.extend(parse_stubs(f.read_text(), str(f)))
    return entries
