"""Lexer and recursive-descent parser for MiniJ."""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import ast as A

QUALIFIERS = ("Tainted", "Untainted", "PolyTaint")

KEYWORDS = {
    "package", "class", "enum", "extends", "return", "if", "else", "while",
    "new", "true", "false", "null", "this", "static", "final", "public",
    "private", "protected", "native", "abstract",
}
MODIFIERS = ("public", "private", "protected", "static", "final", "native", "abstract")

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<ann>@[A-Za-z_][A-Za-z_0-9]*)
  | (?P<id>[A-Za-z_$][A-Za-z_0-9$]*)
  | (?P<int>[0-9]+)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<op>->|::|==|!=|<=|>=|&&|\|\||[{}()\[\]<>,;.=+\-*/%!])
""", re.VERBOSE | re.DOTALL)


@dataclass(frozen=True)
class Token:
    kind: str   # ID KW INT STR ANN OP EOF
    value: str
    line: int
    col: int
    start: int
    end: int


class ParseError(Exception):
    def __init__(self, span: A.Span, message: str):
        super().__init__(f"{span}: {message}")
        self.span = span
        self.message = message


class ParseErrors(Exception):
    """All syntax errors found in one unit."""

    def __init__(self, errors: list[ParseError]):
        super().__init__("\n".join(str(e) for e in errors))
        self.errors = errors


def tokenize(text: str, path: str) -> list[Token]:
    toks: list[Token] = []
    line, line_start, pos = 1, 0, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            col = pos - line_start + 1
            raise ParseErrors([ParseError(A.Span(path, line, col, line, col + 1, pos, pos + 1),
                                          f"unexpected character {text[pos]!r}")])
        kind = m.lastgroup
        val = m.group()
        if kind not in ("ws", "lcomment", "bcomment"):
            k = {"ann": "ANN", "int": "INT", "str": "STR", "op": "OP"}.get(kind)
            if kind == "id":
                k = "KW" if val in KEYWORDS else "ID"
            toks.append(Token(k, val, line, pos - line_start + 1, pos, m.end()))
        nl = val.count("\n")
        if nl:
            line += nl
            line_start = pos + val.rindex("\n") + 1
        pos = m.end()
    toks.append(Token("EOF", "", line, pos - line_start + 1, pos, pos))
    return toks


_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\", "'": "'"}


def _unescape(s: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), s[1:-1])


class Parser:
    def __init__(self, text: str, path: str):
        self.text = text
        self.path = path
        self.toks = tokenize(text, path)
        self.i = 0
        self.errors: list[ParseError] = []

    # -- token plumbing ----------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, value: str, kind: str | None = None) -> bool:
        t = self.tok
        return t.value == value and (kind is None or t.kind == kind) and t.kind != "STR"

    def at_op(self, value: str) -> bool:
        return self.tok.kind == "OP" and self.tok.value == value

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "EOF":
            self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        t = tok or self.tok
        return ParseError(A.Span(self.path, t.line, t.col, t.line, t.col + max(1, t.end - t.start),
                                 t.start, t.end), msg)

    def expect(self, value: str) -> Token:
        if self.tok.value != value or self.tok.kind in ("STR", "EOF"):
            found = self.tok.value or "end of file"
            raise self.error(f"expected {value!r}, found {found!r}")
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ID":
            raise self.error(f"expected identifier, found {self.tok.value or 'end of file'!r}")
        return self.advance()

    def span_from(self, start: Token) -> A.Span:
        last = self.toks[self.i - 1] if self.i > 0 else start
        return A.Span(self.path, start.line, start.col, last.line, last.col + (last.end - last.start),
                      start.start, last.end)

    # -- units -------------------------------------------------------------
    def unit(self) -> A.SourceUnit:
        package = ""
        try:
            if self.at("package", "KW"):
                self.advance()
                parts = [self.ident().value]
                while self.at_op("."):
                    self.advance()
                    parts.append(self.ident().value)
                self.expect(";")
                package = ".".join(parts)
        except ParseError as e:
            self.errors.append(e)
            self._sync_top()
        decls = []
        while self.tok.kind != "EOF":
            try:
                decls.append(self.decl())
            except ParseError as e:
                self.errors.append(e)
                self._sync_top()
        if self.errors:
            raise ParseErrors(self.errors)
        return A.SourceUnit(self.path, package, tuple(decls), self.text)

    def _sync_top(self) -> None:
        self.advance()
        while self.tok.kind != "EOF" and not (self.tok.kind == "KW" and self.tok.value in ("class", "enum")):
            self.advance()

    def _sync_member(self) -> None:
        depth = 0
        while self.tok.kind != "EOF":
            t = self.tok
            if t.kind == "OP" and t.value == "{":
                depth += 1
            elif t.kind == "OP" and t.value == "}":
                if depth == 0:
                    return
                depth -= 1
                if depth == 0:
                    self.advance()
                    return
            elif t.kind == "OP" and t.value == ";" and depth == 0:
                self.advance()
                return
            self.advance()

    def decl(self) -> A.Decl:
        while self.tok.kind == "KW" and self.tok.value in MODIFIERS:
            self.advance()
        start = self.tok
        if self.at("enum", "KW"):
            self.advance()
            name = self.ident().value
            self.expect("{")
            consts = [self.ident().value]
            while self.at_op(","):
                self.advance()
                consts.append(self.ident().value)
            if self.at_op(";"):
                self.advance()
            self.expect("}")
            return A.EnumDecl(name, tuple(consts), self.span_from(start))
        self.expect("class")
        name = self.ident().value
        tparams = self.type_params() if self.at_op("<") else ()
        extends = None
        if self.at("extends", "KW"):
            self.advance()
            ext = self.anntype()
            if not isinstance(ext, A.TypeRef):
                raise self.error("cannot extend an array type")
            extends = ext
        self.expect("{")
        fields, methods = [], []
        while not self.at_op("}"):
            if self.tok.kind == "EOF":
                raise self.error("unterminated class body")
            try:
                m = self.member()
            except ParseError as e:
                self.errors.append(e)
                self._sync_member()
                continue
            (methods if isinstance(m, A.MethodDecl) else fields).append(m)
        self.expect("}")
        return A.ClassDecl(name, tparams, extends, tuple(fields), tuple(methods), self.span_from(start))

    def type_params(self) -> tuple[str, ...]:
        self.expect("<")
        names = [self.ident().value]
        while self.at_op(","):
            self.advance()
            names.append(self.ident().value)
        self.expect(">")
        return tuple(names)

    def member(self):
        start = self.tok
        mods = []
        while self.tok.kind == "KW" and self.tok.value in MODIFIERS:
            mods.append(self.advance().value)
        tparams = self.type_params() if self.at_op("<") else ()
        typ = self.anntype()
        name = self.ident().value
        if self.at_op("("):
            self.advance()
            params = []
            if not self.at_op(")"):
                params.append(self.param())
                while self.at_op(","):
                    self.advance()
                    params.append(self.param())
            self.expect(")")
            if self.at_op(";"):
                self.advance()
                body = None
            else:
                body = self.block()
            return A.MethodDecl(tuple(mods), tparams, typ, name, tuple(params), body, self.span_from(start))
        if tparams:
            raise self.error("type parameters on a field")
        init = None
        if self.at_op("="):
            self.advance()
            init = self.expr()
        self.expect(";")
        return A.FieldDecl(tuple(mods), typ, name, init, self.span_from(start))

    def param(self) -> A.Param:
        start = self.tok
        typ = self.anntype()
        name = self.ident().value
        return A.Param(typ, name, self.span_from(start))

    # -- types -------------------------------------------------------------
    def anns(self) -> tuple[str, ...]:
        out = []
        while self.tok.kind == "ANN":
            t = self.advance()
            q = t.value[1:]
            if q not in QUALIFIERS:
                raise self.error(f"unknown annotation {t.value}", t)
            out.append(q)
        return tuple(out)

    def anntype(self) -> A.TypeNode:
        start = self.tok
        anns = self.anns()
        name_tok = self.tok
        if name_tok.kind != "ID":
            raise self.error(f"expected type, found {name_tok.value or 'end of file'!r}")
        self.advance()
        args: tuple = ()
        diamond = False
        if self.at_op("<"):
            self.advance()
            if self.at_op(">"):
                diamond = True
            else:
                lst = [self.anntype()]
                while self.at_op(","):
                    self.advance()
                    lst.append(self.anntype())
                args = tuple(lst)
            self.expect(">")
        typ: A.TypeNode = A.TypeRef(anns, name_tok.value, args, diamond, self.span_from(start))
        return self._array_suffix(typ, start, creation=False)

    def _array_suffix(self, typ: A.TypeNode, start: Token, creation: bool) -> A.TypeNode:
        while True:
            save = self.i
            ann_start = self.tok
            anns = self.anns()
            if not (self.at_op("[") and self.peek().value == "]"):
                self.i = save
                return typ
            if creation and self.peek(2).value != "[":
                # final `[]` of an array creation belongs to the `new` expression
                self.i = save
                return typ
            br = self.tok
            self.advance()
            self.advance()
            bspan = A.Span(self.path, (ann_start if anns else br).line, (ann_start if anns else br).col,
                           br.line, br.col + 1, (ann_start if anns else br).start, br.end)
            typ = A.ArrayTypeRef(anns, typ, self.span_from(start), bspan)

    # -- statements --------------------------------------------------------
    def block(self) -> A.Block:
        start = self.expect("{")
        stmts = []
        while not self.at_op("}"):
            if self.tok.kind == "EOF":
                raise self.error("unterminated block")
            stmts.append(self.stmt())
        self.expect("}")
        return A.Block(tuple(stmts), self.span_from(start))

    def stmt(self) -> A.Stmt:
        start = self.tok
        if self.at_op("{"):
            return self.block()
        if self.at("return", "KW"):
            self.advance()
            val = None if self.at_op(";") else self.expr()
            self.expect(";")
            return A.Return(val, self.span_from(start))
        if self.at("if", "KW"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.block()
            orelse = None
            if self.at("else", "KW"):
                self.advance()
                if self.at("if", "KW"):
                    s = self.tok
                    nested = self.stmt()
                    orelse = A.Block((nested,), self.span_from(s))
                else:
                    orelse = self.block()
            return A.If(cond, then, orelse, self.span_from(start))
        if self.at("while", "KW"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            body = self.block()
            return A.While(cond, body, self.span_from(start))
        decl = self._try_local_decl()
        if decl is not None:
            return decl
        e = self.expr()
        if self.at_op("="):
            if not isinstance(e, (A.Name, A.FieldAccess, A.Index)):
                raise self.error("invalid assignment target")
            self.advance()
            val = self.expr()
            self.expect(";")
            return A.Assign(e, val, self.span_from(start))
        self.expect(";")
        return A.ExprStmt(e, self.span_from(start))

    def _try_local_decl(self):
        start = self.tok
        if start.kind not in ("ANN", "ID"):
            return None
        save, nerr = self.i, len(self.errors)
        try:
            typ = self.anntype()
            if self.tok.kind != "ID" or self.peek().value != "=":
                raise self.error("not a declaration")
        except ParseError:
            if start.kind == "ANN":
                raise
            self.i = save
            del self.errors[nerr:]
            return None
        name = self.advance().value
        self.expect("=")
        init = self.expr()
        self.expect(";")
        return A.LocalDecl(typ, name, init, self.span_from(start))

    # -- expressions -------------------------------------------------------
    _BINARY_LEVELS = (("||",), ("&&",), ("==", "!="), ("<", ">", "<=", ">="), ("+", "-"), ("*", "/", "%"))

    def expr(self) -> A.Expr:
        return self._binary(0)

    def _binary(self, level: int) -> A.Expr:
        if level == len(self._BINARY_LEVELS):
            return self.unary()
        start = self.tok
        left = self._binary(level + 1)
        ops = self._BINARY_LEVELS[level]
        while self.tok.kind == "OP" and self.tok.value in ops:
            op = self.advance().value
            right = self._binary(level + 1)
            left = A.Binary(op, left, right, self.span_from(start))
        return left

    def unary(self) -> A.Expr:
        start = self.tok
        if self.tok.kind == "OP" and self.tok.value in ("!", "-"):
            op = self.advance().value
            operand = self.unary()
            return A.Unary(op, operand, self.span_from(start))
        return self.postfix()

    def postfix(self) -> A.Expr:
        start = self.tok
        e = self.primary()
        while True:
            if self.at_op("."):
                self.advance()
                name = self.ident().value
                if self.at_op("("):
                    args = self.args()
                    e = A.Call(e, name, args, self.span_from(start))
                else:
                    e = A.FieldAccess(e, name, self.span_from(start))
            elif self.at_op("["):
                self.advance()
                idx = self.expr()
                self.expect("]")
                e = A.Index(e, idx, self.span_from(start))
            else:
                return e

    def args(self) -> tuple[A.Expr, ...]:
        self.expect("(")
        out = []
        if not self.at_op(")"):
            out.append(self.expr())
            while self.at_op(","):
                self.advance()
                out.append(self.expr())
        self.expect(")")
        return tuple(out)

    _EXPR_START_KW = ("new", "this", "true", "false", "null")

    def _starts_primary(self, t: Token) -> bool:
        return (t.kind in ("ID", "INT", "STR") or (t.kind == "KW" and t.value in self._EXPR_START_KW)
                or (t.kind == "OP" and t.value in ("(", "!")))

    def primary(self) -> A.Expr:
        t = self.tok
        if t.kind == "INT":
            self.advance()
            return A.IntLit(int(t.value), self.span_from(t))
        if t.kind == "STR":
            self.advance()
            return A.StrLit(_unescape(t.value), self.span_from(t))
        if t.kind == "KW":
            if t.value in ("true", "false"):
                self.advance()
                return A.BoolLit(t.value == "true", self.span_from(t))
            if t.value == "null":
                self.advance()
                return A.NullLit(self.span_from(t))
            if t.value == "this":
                self.advance()
                return A.This(self.span_from(t))
            if t.value == "new":
                return self._new()
        if t.kind == "OP" and t.value == "(":
            return self._paren_like()
        if t.kind == "ID":
            if self.peek().value == "->":
                self.advance()
                self.advance()
                body = self.expr()
                return A.Lambda((t.value,), body, False, self.span_from(t))
            if self.peek().value == "::":
                self.advance()
                self.advance()
                self.expect("class")
                return A.ClassLit(t.value, self.span_from(t))
            self.advance()
            if self.at_op("("):
                args = self.args()
                return A.Call(None, t.value, args, self.span_from(t))
            return A.Name(t.value, self.span_from(t))
        raise self.error(f"expected expression, found {t.value or 'end of file'!r}")

    def _new(self) -> A.Expr:
        start = self.advance()
        tstart = self.tok
        anns = self.anns()
        name_tok = self.ident()
        args: tuple = ()
        diamond = False
        if self.at_op("<"):
            self.advance()
            if self.at_op(">"):
                diamond = True
            else:
                lst = [self.anntype()]
                while self.at_op(","):
                    self.advance()
                    lst.append(self.anntype())
                args = tuple(lst)
            self.expect(">")
        base: A.TypeNode = A.TypeRef(anns, name_tok.value, args, diamond, self.span_from(tstart))
        base = self._array_suffix(base, tstart, creation=True)
        if self.at_op("["):
            self.advance()
            self.expect("]")
            self.expect("{")
            elems = []
            if not self.at_op("}"):
                elems.append(self.expr())
                while self.at_op(","):
                    self.advance()
                    elems.append(self.expr())
            self.expect("}")
            return A.NewArray(base, tuple(elems), self.span_from(start))
        if isinstance(base, A.ArrayTypeRef):
            raise self.error("expected array initializer")
        return A.NewObject(base, self.args(), self.span_from(start))

    def _paren_like(self) -> A.Expr:
        start = self.tok
        save, nerr = self.i, len(self.errors)
        # cast?
        self.advance()
        if self.tok.kind in ("ANN", "ID"):
            explicit = self.tok.kind == "ANN"
            try:
                typ = self.anntype()
                self.expect(")")
                if explicit or self._starts_primary(self.tok):
                    operand = self.unary()
                    return A.Cast(typ, operand, self.span_from(start))
            except ParseError:
                if explicit:
                    raise
        self.i = save
        del self.errors[nerr:]
        # lambda?
        self.advance()
        params: list[str] = []
        is_lambda = False
        if self.at_op(")") and self.peek().value == "->":
            is_lambda = True
        elif self.tok.kind == "ID":
            j = self.i
            names = [self.toks[j].value]
            j += 1
            while self.toks[j].value == "," and self.toks[j + 1].kind == "ID":
                names.append(self.toks[j + 1].value)
                j += 2
            if self.toks[j].value == ")" and self.toks[j + 1].value == "->":
                is_lambda = True
                params = names
                self.i = j
        if is_lambda:
            self.expect(")")
            self.expect("->")
            body = self.expr()
            return A.Lambda(tuple(params), body, True, self.span_from(start))
        inner = self.expr()
        self.expect(")")
        return A.Paren(inner, self.span_from(start))


def parse(text: str, path: str = "<input>") -> A.SourceUnit:
    """Parse one MiniJ unit; raises ParseErrors listing every syntax error."""
    return Parser(text, path).unit()


def parse_type(text: str) -> A.TypeNode:
    p = Parser(text, "<type>")
    try:
        t = p.anntype()
    except ParseError as e:
        raise ParseErrors([e]) from None
    if p.tok.kind != "EOF":
        raise ParseErrors([p.error("trailing input after type")])
    return t
