"""Render a MiniJ AST back to source text."""
from __future__ import annotations

from . import ast as A


def type_str(t: A.TypeNode) -> str:
    if isinstance(t, A.ArrayTypeRef):
        anns = "".join(f"@{a} " for a in t.anns)
        return f"{type_str(t.elem)} {anns}[]" if anns else f"{type_str(t.elem)}[]"
    s = "".join(f"@{a} " for a in t.anns) + t.name
    if t.diamond:
        s += "<>"
    elif t.args:
        s += "<" + ", ".join(type_str(a) for a in t.args) + ">"
    return s


def _escape(s: str) -> str:
    return (s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
            .replace("\t", "\\t").replace("\r", "\\r"))


def expr_str(e: A.Expr) -> str:
    if isinstance(e, A.Name):
        return e.id
    if isinstance(e, A.This):
        return "this"
    if isinstance(e, A.StrLit):
        return f'"{_escape(e.value)}"'
    if isinstance(e, A.IntLit):
        return str(e.value)
    if isinstance(e, A.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, A.NullLit):
        return "null"
    if isinstance(e, A.Binary):
        # source parentheses are Paren nodes, so none are added here
        return f"{expr_str(e.left)} {e.op} {expr_str(e.right)}"
    if isinstance(e, A.Unary):
        return f"{e.op}{expr_str(e.operand)}"
    if isinstance(e, A.Paren):
        return f"({expr_str(e.expr)})"
    if isinstance(e, A.Cast):
        return f"({type_str(e.type)}) {expr_str(e.expr)}"
    if isinstance(e, A.Call):
        args = ", ".join(expr_str(a) for a in e.args)
        if e.receiver is None:
            return f"{e.name}({args})"
        return f"{expr_str(e.receiver)}.{e.name}({args})"
    if isinstance(e, A.FieldAccess):
        return f"{expr_str(e.obj)}.{e.name}"
    if isinstance(e, A.Index):
        return f"{expr_str(e.array)}[{expr_str(e.index)}]"
    if isinstance(e, A.NewObject):
        return f"new {type_str(e.type)}({', '.join(expr_str(a) for a in e.args)})"
    if isinstance(e, A.NewArray):
        return f"new {type_str(e.elem)}[] {{{', '.join(expr_str(a) for a in e.elems)}}}"
    if isinstance(e, A.ClassLit):
        return f"{e.name}::class"
    if isinstance(e, A.Lambda):
        if e.parens:
            return f"({', '.join(e.params)}) -> {expr_str(e.body)}"
        return f"{e.params[0]} -> {expr_str(e.body)}"
    raise TypeError(f"not an expression: {e!r}")



def _stmt_lines(s: A.Stmt, ind: str) -> list[str]:
    if isinstance(s, A.Block):
        return [ind + "{"] + _block_body(s, ind + "  ") + [ind + "}"]
    if isinstance(s, A.LocalDecl):
        return [f"{ind}{type_str(s.type)} {s.name} = {expr_str(s.init)};"]
    if isinstance(s, A.Assign):
        return [f"{ind}{expr_str(s.target)} = {expr_str(s.value)};"]
    if isinstance(s, A.Return):
        return [f"{ind}return;" if s.value is None else f"{ind}return {expr_str(s.value)};"]
    if isinstance(s, A.ExprStmt):
        return [f"{ind}{expr_str(s.expr)};"]
    if isinstance(s, A.If):
        out = [f"{ind}if ({expr_str(s.cond)}) {{"] + _block_body(s.then, ind + "  ")
        if s.orelse is not None:
            out += [f"{ind}}} else {{"] + _block_body(s.orelse, ind + "  ")
        return out + [ind + "}"]
    if isinstance(s, A.While):
        return [f"{ind}while ({expr_str(s.cond)}) {{"] + _block_body(s.body, ind + "  ") + [ind + "}"]
    raise TypeError(f"not a statement: {s!r}")


def _block_body(b: A.Block, ind: str) -> list[str]:
    out: list[str] = []
    for s in b.stmts:
        out += _stmt_lines(s, ind)
    return out


def method_header(m: A.MethodDecl) -> str:
    mods = "".join(f"{x} " for x in m.modifiers)
    tps = f"<{', '.join(m.type_params)}> " if m.type_params else ""
    params = ", ".join(f"{type_str(p.type)} {p.name}" for p in m.params)
    return f"{mods}{tps}{type_str(m.ret)} {m.name}({params})"


def member_lines(m, ind: str = "  ", bodies: bool = True) -> list[str]:
    if isinstance(m, A.FieldDecl):
        mods = "".join(f"{x} " for x in m.modifiers)
        init = f" = {expr_str(m.init)}" if m.init is not None else ""
        return [f"{ind}{mods}{type_str(m.type)} {m.name}{init};"]
    head = ind + method_header(m)
    if m.body is None or not bodies:
        return [head + ";"]
    return [head + " {"] + _block_body(m.body, ind + "  ") + [ind + "}"]


def decl_lines(d: A.Decl, bodies: bool = True) -> list[str]:
    if isinstance(d, A.EnumDecl):
        return [f"enum {d.name} {{ {', '.join(d.constants)} }}"]
    tps = f"<{', '.join(d.type_params)}>" if d.type_params else ""
    ext = f" extends {type_str(d.extends)}" if d.extends is not None else ""
    out = [f"class {d.name}{tps}{ext} {{"]
    for f in d.fields:
        if not bodies and f.init is not None and not f.is_static_final:
            f = A.FieldDecl(f.modifiers, f.type, f.name, None, f.span)
        out += member_lines(f)
    for m in d.methods:
        out += member_lines(m, bodies=bodies)
    return out + ["}"]


def unparse(u: A.SourceUnit) -> str:
    lines = [f"package {u.package};", ""] if u.package else []
    for d in u.decls:
        lines += decl_lines(d) + [""]
    return "\n".join(lines)
