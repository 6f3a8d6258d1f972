"""Recursive-descent parser.

Grammar (informal)::

    program    := definition* process
    definition := 'val' ID 'is' expr [';']
                | 'proc' ID '(' formals ')' 'is' process
                | 'server' ID '(' formals ')' 'interface' '(' callsig,+ ')' 'to' serverbody
    process    := term (';' term)* | term ('|' term)* | term ('&' term)*
    term       := 'skip' | block | replicator | serverspec | call | assign | output | input
    serverspec := 'server' ID 'is' ID '(' exprs ')' ('[' expr ']')* ('&'|'|') process
    replicator := 'seq' ID '=' expr 'for' expr 'do' term
                | 'par' ['|'] ID '=' expr 'for' expr 'do' term
    block      := '{' (decl ';')* [process] '}'

A server specification scopes over the rest of its composition, so it is
always the last item of a list. Mixing separators at one level is rejected.
"""

from __future__ import annotations

from ..errors import ParseError, Pos
from . import ast
from .lexer import Kind, Token, tokenize


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    # -- token helpers ----------------------------------------------------

    def peek(self, offset: int = 0) -> Token | None:
        j = self.i + offset
        return self.tokens[j] if j < len(self.tokens) else None

    def at(self, text: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.text == text and tok.kind != Kind.IDENTIFIER

    def at_kind(self, kind: Kind, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.kind == kind

    def pos(self) -> Pos:
        tok = self.peek()
        if tok is not None:
            return tok.pos
        if self.tokens:
            last = self.tokens[-1]
            return Pos(last.line, last.column + len(last.text))
        return Pos(1, 1)

    def error(self, *expected: str) -> ParseError:
        tok = self.peek()
        found = "end of input" if tok is None else repr(tok.text)
        exp = frozenset(expected)
        return ParseError(f"expected {' or '.join(sorted(exp))}, found {found}", self.pos(), exp)

    def advance(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise self.error("more input")
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(repr(text))
        return self.advance()

    def ident(self) -> Token:
        if not self.at_kind(Kind.IDENTIFIER):
            raise self.error("identifier")
        return self.advance()

    # -- program ----------------------------------------------------------

    def program(self) -> ast.Program:
        pos = self.pos()
        defs: list[ast.Definition] = []
        while True:
            if self.at("val"):
                defs.append(self.const_def())
            elif self.at("proc"):
                defs.append(self.proc_def())
            elif self.at("server") and self.at("(", 2):
                defs.append(self.server_def())
            else:
                break
        if self.peek() is None:
            raise self.error("process")
        main = self.process()
        if self.peek() is not None:
            raise self.error("end of input", "';'", "'|'", "'&'")
        return ast.Program(defs, main, pos=pos)

    def const_def(self) -> ast.ConstDef:
        pos = self.expect("val").pos
        name = self.ident().text
        self.expect("is")
        value = self.expr()
        if self.at(";"):
            self.advance()
        return ast.ConstDef(name, value, pos=pos)

    def proc_def(self) -> ast.ProcDef:
        pos = self.expect("proc").pos
        name = self.ident().text
        formals = self.formals()
        self.expect("is")
        body = self.process()
        return ast.ProcDef(name, formals, body, pos=pos)

    def formals(self) -> list[ast.Formal]:
        self.expect("(")
        out: list[ast.Formal] = []
        if not self.at(")"):
            out.append(self.formal())
            while self.at(","):
                self.advance()
                out.append(self.formal())
        self.expect(")")
        return out

    def formal(self) -> ast.Formal:
        pos = self.pos()
        if self.at("val"):
            self.advance()
            return ast.Formal("val", self.ident().text, pos=pos)
        if self.at("var"):
            self.advance()
            name = self.ident().text
            return ast.Formal("var", name, self.dims(), pos=pos)
        if self.at("chan"):
            self.advance()
            return ast.Formal("chan", self.ident().text, pos=pos)
        if self.at("server"):
            self.advance()
            definition = self.ident().text
            dims = self.dims()
            name = self.ident().text
            return ast.Formal("server", name, dims, definition, pos=pos)
        raise self.error("'val'", "'var'", "'chan'", "'server'")

    def dims(self) -> list[ast.Expr]:
        out = []
        while self.at("["):
            self.advance()
            out.append(self.expr())
            self.expect("]")
        return out

    def server_def(self) -> ast.ServerDef:
        pos = self.expect("server").pos
        name = self.ident().text
        formals = self.formals()
        self.expect("interface")
        self.expect("(")
        sigs = [self.call_sig()]
        while self.at(","):
            self.advance()
            sigs.append(self.call_sig())
        self.expect(")")
        self.expect("to")
        self.expect("{")
        decls = self.decls()
        initial = None
        if self.at("initial"):
            self.advance()
            initial = self.term()
        self.expect("accept")
        self.expect("{")
        arms = []
        while self.at_kind(Kind.IDENTIFIER):
            arms.append(self.accept_arm())
        self.expect("}")
        final = None
        if self.at("final"):
            self.advance()
            final = self.term()
        self.expect("}")
        return ast.ServerDef(name, formals, sigs, decls, initial, arms, final, pos=pos)

    def call_sig(self) -> ast.CallSig:
        pos = self.expect("call").pos
        name = self.ident().text
        return ast.CallSig(name, self.params(), pos=pos)

    def params(self) -> list[ast.Param]:
        self.expect("(")
        out: list[ast.Param] = []
        if not self.at(")"):
            out.append(self.param())
            while self.at(","):
                self.advance()
                out.append(self.param())
        self.expect(")")
        return out

    def param(self) -> ast.Param:
        pos = self.pos()
        if self.at("val") or self.at("var"):
            mode = self.advance().text
            return ast.Param(mode, self.ident().text, pos=pos)
        raise self.error("'val'", "'var'")

    def accept_arm(self) -> ast.AcceptArm:
        tok = self.ident()
        self.expect("?")
        params = self.params()
        handler = self.process()
        return ast.AcceptArm(tok.text, params, handler, pos=tok.pos)

    # -- declarations -----------------------------------------------------

    def decls(self) -> list[ast.Decl]:
        out: list[ast.Decl] = []
        while self.at("var") or self.at("chan"):
            out.append(self.decl())
            if self.at(";"):
                self.advance()
            elif not self.at("}"):
                raise self.error("';'", "'}'")
        return out

    def decl(self) -> ast.Decl:
        pos = self.pos()
        if self.at("var"):
            self.advance()
            names, dims = [], []
            while True:
                names.append(self.ident().text)
                dims.append(self.dims())
                if not self.at(","):
                    break
                self.advance()
            return ast.VarDecl(names, dims, pos=pos)
        self.expect("chan")
        shape = self.dims()
        names = [self.ident().text]
        while self.at(","):
            self.advance()
            names.append(self.ident().text)
        return ast.ChanDecl(names, shape, pos=pos)

    # -- processes --------------------------------------------------------

    def starts_term(self) -> bool:
        tok = self.peek()
        if tok is None:
            return False
        if tok.kind == Kind.IDENTIFIER:
            return True
        if tok.text in ("skip", "{", "seq", "par") and tok.kind != Kind.IDENTIFIER:
            return True
        return self.at("server") and self.at("is", 2)

    def process(self) -> ast.Process:
        first = self.term()
        if isinstance(first, ast.ServerSpec):
            return first
        items = [first]
        sep: str | None = None
        while self.at(";") or self.at("|") or self.at("&"):
            tok = self.peek()
            assert tok is not None
            if sep is None:
                sep = tok.text
            elif tok.text != sep:
                raise ParseError(
                    f"cannot mix '{sep}' and '{tok.text}' without braces", tok.pos, frozenset({repr(sep)})
                )
            self.advance()
            if sep == ";" and not self.starts_term():
                break  # trailing semicolon
            item = self.term()
            items.append(item)
            if isinstance(item, ast.ServerSpec):
                break
        if len(items) == 1:
            return first
        assert sep is not None
        return ast.COMPOSITIONS[sep](items, pos=first.pos)

    def term(self) -> ast.Process:
        pos = self.pos()
        if self.at("skip"):
            self.advance()
            return ast.Skip(pos=pos)
        if self.at("{"):
            return self.block()
        if self.at("seq"):
            self.advance()
            index, base, count = self.replicator_head()
            return ast.SeqRep(index, base, count, self.term(), pos=pos)
        if self.at("par"):
            self.advance()
            distributed = True
            if self.at("|"):
                self.advance()
                distributed = False
            index, base, count = self.replicator_head()
            return ast.ParRep(index, base, count, self.term(), distributed, pos=pos)
        if self.at("server"):
            return self.server_spec()
        if self.at_kind(Kind.IDENTIFIER):
            return self.simple()
        raise self.error("process")

    def replicator_head(self) -> tuple[str, ast.Expr, ast.Expr]:
        index = self.ident().text
        self.expect("=")
        base = self.expr()
        self.expect("for")
        count = self.expr()
        self.expect("do")
        return index, base, count

    def block(self) -> ast.Block:
        pos = self.expect("{").pos
        decls = self.decls()
        body = None
        if not self.at("}"):
            body = self.process()
        self.expect("}")
        return ast.Block(decls, body, pos=pos)

    def server_spec(self) -> ast.ServerSpec:
        pos = self.expect("server").pos
        name = self.ident().text
        self.expect("is")
        definition = self.ident().text
        args = self.args()
        extents = self.dims()
        if not (self.at("&") or self.at("|")):
            raise self.error("'&'", "'|'")
        op = self.advance().text
        body = self.process()
        return ast.ServerSpec(name, definition, args, extents, op, body, pos=pos)

    def args(self) -> list[ast.Expr]:
        self.expect("(")
        out: list[ast.Expr] = []
        if not self.at(")"):
            out.append(self.expr())
            while self.at(","):
                self.advance()
                out.append(self.expr())
        self.expect(")")
        return out

    def simple(self) -> ast.Process:
        tok = self.ident()
        if self.at("("):
            return ast.ProcCall(tok.text, self.args(), pos=tok.pos)
        target = ast.Name(tok.text, self.dims(), pos=tok.pos)
        if self.at("."):
            self.advance()
            call = self.ident().text
            return ast.ServerCall(target, call, self.args(), pos=tok.pos)
        if self.at(":="):
            self.advance()
            return ast.Assign(target, self.expr(), pos=tok.pos)
        if self.at("!"):
            self.advance()
            items = [self.expr()]
            while self.at(","):
                self.advance()
                items.append(self.expr())
            return ast.Output(target, items, pos=tok.pos)
        if self.at("?"):
            self.advance()
            targets = [self.lvalue()]
            while self.at(","):
                self.advance()
                targets.append(self.lvalue())
            return ast.Input(target, targets, pos=tok.pos)
        raise self.error("'('", "'.'", "':='", "'!'", "'?'")

    def lvalue(self) -> ast.Name:
        tok = self.ident()
        return ast.Name(tok.text, self.dims(), pos=tok.pos)

    # -- expressions ------------------------------------------------------

    def expr(self) -> ast.Expr:
        left = self.mul()
        while self.at("+") or self.at("-"):
            tok = self.advance()
            left = ast.BinOp(tok.text, left, self.mul(), pos=tok.pos)
        return left

    def mul(self) -> ast.Expr:
        left = self.unary()
        while self.at("*") or self.at("rem"):
            tok = self.advance()
            left = ast.BinOp(tok.text, left, self.unary(), pos=tok.pos)
        return left

    def unary(self) -> ast.Expr:
        if self.at("-"):
            tok = self.advance()
            return ast.Neg(self.unary(), pos=tok.pos)
        return self.primary()

    def primary(self) -> ast.Expr:
        tok = self.peek()
        if tok is not None and tok.kind == Kind.INTEGER:
            self.advance()
            return ast.IntLit(int(tok.text), pos=tok.pos)
        if tok is not None and tok.kind == Kind.IDENTIFIER:
            self.advance()
            return ast.Name(tok.text, self.dims(), pos=tok.pos)
        if self.at("("):
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        raise self.error("expression")


def parse(tokens: list[Token]) -> ast.Program:
    return Parser(tokens).program()


def parse_source(source: str) -> ast.Program:
    return parse(tokenize(source))
