"""MiniJ syntax tree.

Nodes are frozen dataclasses.  Spans and node ids are excluded from
equality so two parses of equivalent text compare equal.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

_ids = itertools.count(1)


def _nid() -> int:
    return next(_ids)


@dataclass(frozen=True)
class Span:
    file: str
    line: int
    col: int
    end_line: int
    end_col: int
    start: int = 0
    end: int = 0

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


NOSPAN = Span("<none>", 0, 0, 0, 0)


def _meta():
    return field(default=NOSPAN, compare=False, repr=False)


def _id():
    return field(default_factory=_nid, compare=False, repr=False)


# -- types -----------------------------------------------------------------

@dataclass(frozen=True)
class TypeRef:
    """`@ann Name<args>`; ``diamond`` marks `<>`."""
    anns: tuple[str, ...]
    name: str
    args: tuple["TypeNode", ...] = ()
    diamond: bool = False
    span: Span = _meta()


@dataclass(frozen=True)
class ArrayTypeRef:
    """`elem @ann []`; ``span`` covers the whole type, ``bracket`` the `[`."""
    anns: tuple[str, ...]
    elem: "TypeNode"
    span: Span = _meta()
    bracket: Span = _meta()


TypeNode = Union[TypeRef, ArrayTypeRef]


# -- expressions -----------------------------------------------------------

@dataclass(frozen=True)
class Name:
    id: str
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class This:
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class StrLit:
    value: str
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class IntLit:
    value: int
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class NullLit:
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class Paren:
    expr: "Expr"
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class Cast:
    type: TypeNode
    expr: "Expr"
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class Call:
    receiver: Optional["Expr"]
    name: str
    args: tuple["Expr", ...]
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class FieldAccess:
    obj: "Expr"
    name: str
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class Index:
    array: "Expr"
    index: "Expr"
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class NewObject:
    type: TypeRef
    args: tuple["Expr", ...]
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class NewArray:
    elem: TypeNode
    elems: tuple["Expr", ...]
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class ClassLit:
    name: str
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class Lambda:
    params: tuple[str, ...]
    body: "Expr"
    parens: bool = True
    span: Span = _meta()
    nid: int = _id()


Expr = Union[Name, This, StrLit, IntLit, BoolLit, NullLit, Binary, Unary, Paren,
             Cast, Call, FieldAccess, Index, NewObject, NewArray, ClassLit, Lambda]


# -- statements ------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    stmts: tuple["Stmt", ...]
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class LocalDecl:
    type: TypeNode
    name: str
    init: Expr
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class Assign:
    target: Expr
    value: Expr
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class Return:
    value: Optional[Expr]
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: Block
    orelse: Optional[Block]
    span: Span = _meta()
    nid: int = _id()


@dataclass(frozen=True)
class While:
    cond: Expr
    body: Block
    span: Span = _meta()
    nid: int = _id()


Stmt = Union[Block, LocalDecl, Assign, Return, ExprStmt, If, While]


# -- declarations ----------------------------------------------------------

@dataclass(frozen=True)
class Param:
    type: TypeNode
    name: str
    span: Span = _meta()


@dataclass(frozen=True)
class MethodDecl:
    modifiers: tuple[str, ...]
    type_params: tuple[str, ...]
    ret: TypeNode
    name: str
    params: tuple[Param, ...]
    body: Optional[Block]
    span: Span = _meta()

    @property
    def is_static(self) -> bool:
        return "static" in self.modifiers

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class FieldDecl:
    modifiers: tuple[str, ...]
    type: TypeNode
    name: str
    init: Optional[Expr]
    span: Span = _meta()

    @property
    def is_static_final(self) -> bool:
        return "static" in self.modifiers and "final" in self.modifiers


@dataclass(frozen=True)
class ClassDecl:
    name: str
    type_params: tuple[str, ...]
    extends: Optional[TypeRef]
    fields: tuple[FieldDecl, ...]
    methods: tuple[MethodDecl, ...]
    span: Span = _meta()


@dataclass(frozen=True)
class EnumDecl:
    name: str
    constants: tuple[str, ...]
    span: Span = _meta()


Decl = Union[ClassDecl, EnumDecl]


@dataclass(frozen=True)
class SourceUnit:
    path: str
    package: str
    decls: tuple[Decl, ...]
    text: str = field(default="", compare=False, repr=False)


# -- traversal helpers -----------------------------------------------------

def children(node) -> list:
    """Direct sub-expressions / sub-statements of an expression or statement."""
    if isinstance(node, (Binary,)):
        return [node.left, node.right]
    if isinstance(node, (Unary,)):
        return [node.operand]
    if isinstance(node, (Paren, Cast)):
        return [node.expr]
    if isinstance(node, Call):
        return ([node.receiver] if node.receiver is not None else []) + list(node.args)
    if isinstance(node, FieldAccess):
        return [node.obj]
    if isinstance(node, Index):
        return [node.array, node.index]
    if isinstance(node, NewObject):
        return list(node.args)
    if isinstance(node, NewArray):
        return list(node.elems)
    if isinstance(node, Lambda):
        return [node.body]
    if isinstance(node, Block):
        return list(node.stmts)
    if isinstance(node, LocalDecl):
        return [node.init]
    if isinstance(node, Assign):
        return [node.target, node.value]
    if isinstance(node, Return):
        return [node.value] if node.value is not None else []
    if isinstance(node, ExprStmt):
        return [node.expr]
    if isinstance(node, If):
        return [node.cond, node.then] + ([node.orelse] if node.orelse else [])
    if isinstance(node, While):
        return [node.cond, node.body]
    return []


def walk(node):
    """Pre-order traversal over a statement/expression subtree."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))
