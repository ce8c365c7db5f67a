"""Rendering accepted annotations as source insertions."""
from __future__ import annotations

import difflib
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .frontend import ast as A
from .frontend.resolve import ProgramDB
from .sites import Fix, site_typeref


class SpanDrift(Exception):
    pass


@dataclass(frozen=True, order=True)
class Edit:
    file: str
    offset: int
    line: int
    col: int
    text: str


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def plan_edits(db: ProgramDB, fixes) -> list[Edit]:
    texts = {u.path: u.text for u in db.units}
    edits = []
    for f in sorted(fixes):
        node = site_typeref(db, f.site)
        if node is None:
            raise SpanDrift(f"no declaration for {f.site.describe()}")
        sp = node.bracket if isinstance(node, A.ArrayTypeRef) else node.span
        text = f.qual.ann + " "
        src = texts[sp.file]
        if isinstance(node, A.ArrayTypeRef) and sp.start > 0 and not src[sp.start - 1].isspace():
            text = " " + text
        edits.append(Edit(sp.file, sp.start, sp.line, sp.col, text))
    offs = [(e.file, e.offset) for e in edits]
    if len(set(offs)) != len(offs):
        raise SpanDrift("two annotations at one position")
    return sorted(edits)


def apply_edits(text: str, edits) -> str:
    out = text
    for e in sorted(edits, key=lambda e: e.offset, reverse=True):
        out = out[:e.offset] + e.text + out[e.offset:]
    return out


@dataclass
class AnnotationPatch:
    edits: list[Edit]
    originals: dict[str, str]
    provenance: dict

    def patched(self) -> dict[str, str]:
        by_file: dict[str, list[Edit]] = {}
        for e in self.edits:
            by_file.setdefault(e.file, []).append(e)
        return {f: apply_edits(self.originals[f], es) for f, es in by_file.items()}

    def diff(self) -> str:
        chunks = []
        for f, new in sorted(self.patched().items()):
            old = self.originals[f]
            chunks.extend(difflib.unified_diff(old.splitlines(keepends=True), new.splitlines(keepends=True),
                                               fromfile=f"a/{f.lstrip('/')}", tofile=f"b/{f.lstrip('/')}"))
        return "".join(chunks)

    def to_json(self) -> dict:
        return {"edits": [{"file": e.file, "line": e.line, "col": e.col, "insert": e.text,
                           "from": self.provenance.get((e.file, e.offset))} for e in self.edits]}

    def write(self, out_dir: Path | None = None, in_place: bool = False) -> None:
        for f in self.originals:
            if Path(f).exists() and text_hash(Path(f).read_text()) != text_hash(self.originals[f]):
                raise SpanDrift(f"{f} changed since it was analysed")
        if in_place:
            for f, new in self.patched().items():
                Path(f).write_text(new)
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "annotations.patch").write_text(self.diff())
            (out_dir / "patch.json").write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")


def emit_patch(db: ProgramDB, fixes, provenance: dict | None = None) -> AnnotationPatch:
    """Textual insertions realising ``fixes`` on the sources of ``db``."""
    fixes = list(fixes)
    edits = plan_edits(db, fixes)
    prov = {}
    if provenance:
        for f in fixes:
            node = site_typeref(db, f.site)
            sp = node.bracket if isinstance(node, A.ArrayTypeRef) else node.span
            prov[(sp.file, sp.start)] = provenance.get(f.site)
    originals = {u.path: u.text for u in db.units if any(e.file == u.path for e in edits)}
    return AnnotationPatch(edits, originals, prov)


def fixes_from_result(result) -> list[Fix]:
    return result.fixes()
