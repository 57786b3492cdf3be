"""Lexer, parser and desugarer for the ML-like surface language.

The same lexer and expression parser also read canonical target text (pairs,
projections, injections, case, primitive applications), so printed
elaborations can be re-parsed and re-checked.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .prelude import PRIMITIVES
from .syntax import (
    BASE_NAMES, TOP, Anno, App, Arrow, Base, Case, Cons, FieldProj, Fix, Inj, Inter, IntLit, Lam,
    Let, ListCase, ListT, Loc, Merge, Nil, Pair, Prim, PrimApp, Proj, RealLit, RecordExp, RecT,
    StrLit, Term, Type, Unit, Union, Var, map_children,
)


class ParseError(Exception):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line, self.col, self.message = line, col, message


class DesugarError(Exception):
    def __init__(self, message: str, loc: Optional[Loc] = None):
        super().__init__(message)
        self.loc = loc


class UnknownTypeAlias(DesugarError):
    pass


class DuplicateDeclaration(DesugarError):
    pass


# ---------------------------------------------------------------------------
# Surface-only nodes, removed by desugaring

@dataclass(frozen=True)
class RecordFields(Term):
    items: tuple  # ((label, Term), ...)
    loc: Optional[Loc] = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class RecFieldsT(Type):
    items: tuple  # ((label, Type), ...)


@dataclass(frozen=True)
class AliasT(Type):
    name: str


@dataclass(frozen=True)
class ValDecl:
    name: str
    annot: Optional[Type]
    expr: Term
    loc: Optional[Loc] = None


@dataclass(frozen=True)
class TypeDecl:
    name: str
    type: Type
    loc: Optional[Loc] = None


@dataclass(frozen=True)
class Program:
    decls: tuple


# ---------------------------------------------------------------------------
# Lexer

KEYWORDS = {
    "fn", "fix", "let", "in", "end", "val", "type", "nil", "cons", "lcase", "of", "case",
    "inj1", "inj2", "proj1", "proj2", "top", "unit", "int", "real", "string", "nat", "pos",
    "list",
}

SYMBOLS = ["(*[", "]*)", ",,", "=>", "->", "\\/", "(", ")", "{", "}", "<", ">", ",", ":", "=",
           "&", "|", ".", "#"]

_NUM = re.compile(r"-?\d+(\.\d+)?([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | real | string | kw | sym | eof
    text: str
    line: int
    col: int
    value: object = None

    @property
    def loc(self) -> Loc:
        return Loc(self.line, self.col)


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(k: int):
        nonlocal i, line, col
        chunk = text[i:i + k]
        nl = chunk.rfind("\n")
        if nl < 0:
            col += k
        else:
            line += chunk.count("\n")
            col = k - nl
        i += k

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if text.startswith("(*", i) and not text.startswith("(*[", i):
            sl, sc = line, col
            depth = 0
            while True:
                if i >= n:
                    raise ParseError(sl, sc, "unterminated comment")
                if text.startswith("(*", i):
                    depth += 1
                    advance(2)
                elif text.startswith("*)", i):
                    depth -= 1
                    advance(2)
                    if depth == 0:
                        break
                else:
                    advance(1)
            continue
        if ch == '"':
            sl, sc = line, col
            j = i + 1
            buf = []
            while True:
                if j >= n or text[j] == "\n":
                    raise ParseError(sl, sc, "unterminated string literal")
                c = text[j]
                if c == '"':
                    break
                if c == "\\":
                    esc = text[j + 1] if j + 1 < n else ""
                    if esc not in _ESCAPES:
                        raise ParseError(sl, sc, f"bad escape \\{esc}")
                    buf.append(_ESCAPES[esc])
                    j += 2
                    continue
                buf.append(c)
                j += 1
            toks.append(Token("string", text[i:j + 1], sl, sc, "".join(buf)))
            advance(j + 1 - i)
            continue
        m = _NUM.match(text, i)
        if m and (ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit())):
            s = m.group(0)
            if m.group(1) or m.group(2):
                if not m.group(1):
                    raise ParseError(line, col, f"real literal needs a decimal point: {s}")
                toks.append(Token("real", s, line, col, float(s)))
            else:
                toks.append(Token("int", s, line, col, int(s)))
            advance(len(s))
            continue
        m = _IDENT.match(text, i)
        if m:
            s = m.group(0)
            toks.append(Token("kw" if s in KEYWORDS else "ident", s, line, col))
            advance(len(s))
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                toks.append(Token("sym", sym, line, col))
                advance(len(sym))
                break
        else:
            raise ParseError(line, col, f"unexpected character {ch!r}")
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser

_ATOM_START_KW = {"nil", "let"}
_BINDER_KW = {"fn", "fix", "lcase", "case"}


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("sym", "kw") and t.text == text

    def next(self) -> Token:
        t = self.peek()
        self.pos += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.at(text):
            self.error(t, f"expected '{text}'")
        return self.next()

    def ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            self.error(t, "expected identifier")
        return self.next()

    def error(self, t: Token, msg: str):
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(t.line, t.col, f"{msg}, found {found}")

    def eof(self):
        if self.peek().kind != "eof":
            self.error(self.peek(), "expected end of input")

    # types
    def type_(self) -> Type:
        left = self.union_ty()
        if self.at("->"):
            self.next()
            return Arrow(left, self.type_())
        return left

    def union_ty(self) -> Type:
        left = self.inter_ty()
        while self.at("\\/"):
            self.next()
            left = Union(left, self.inter_ty())
        return left

    def inter_ty(self) -> Type:
        left = self.app_ty()
        while self.at("&"):
            self.next()
            left = Inter(left, self.app_ty())
        return left

    def app_ty(self) -> Type:
        if self.at("list"):
            self.next()
            return ListT(self.app_ty())
        return self.atom_ty()

    def atom_ty(self) -> Type:
        t = self.peek()
        if t.kind == "kw" and t.text in ("top", "unit"):
            self.next()
            return TOP
        if t.kind == "kw" and t.text in BASE_NAMES:
            self.next()
            return Base(t.text)
        if t.kind == "ident":
            self.next()
            return AliasT(t.text)
        if self.at("("):
            self.next()
            ty = self.type_()
            self.expect(")")
            return ty
        if self.at("{"):
            self.next()
            items = []
            while True:
                label = self.ident().text
                self.expect(":")
                items.append((label, self.type_()))
                if not self.at(","):
                    break
                self.next()
            self.expect("}")
            if len(items) == 1:
                return RecT(*items[0])
            return RecFieldsT(tuple(items))
        self.error(t, "expected a type")

    # expressions
    def expr(self) -> Term:
        left = self.operand()
        while self.at(",,"):
            t = self.next()
            left = Merge(left, self.operand(), loc=t.loc)
        return left

    def operand(self) -> Term:
        t = self.peek()
        if t.kind == "kw" and t.text in ("fn", "fix"):
            self.next()
            x = self.ident().text
            self.expect("=>")
            body = self.expr()
            return (Lam if t.text == "fn" else Fix)(x, body, loc=t.loc)
        if self.at("lcase"):
            self.next()
            subj = self.expr()
            self.expect("of")
            self.expect("nil")
            self.expect("=>")
            nil_arm = self.expr()
            self.expect("|")
            self.expect("cons")
            h = self.ident().text
            tl = self.ident().text
            self.expect("=>")
            return ListCase(subj, nil_arm, h, tl, self.expr(), loc=t.loc)
        if self.at("case"):
            self.next()
            scrut = self.expr()
            self.expect("of")
            self.expect("inj1")
            x1 = self.ident().text
            self.expect("=>")
            a1 = self.expr()
            self.expect("|")
            self.expect("inj2")
            x2 = self.ident().text
            self.expect("=>")
            return Case(scrut, x1, a1, x2, self.expr(), loc=t.loc)
        return self.app()

    def starts_atom(self) -> bool:
        t = self.peek()
        if t.kind in ("ident", "int", "real", "string"):
            return True
        if t.kind == "kw":
            return t.text in _ATOM_START_KW
        return t.kind == "sym" and t.text in ("(", "{", "<", "#")

    def app(self) -> Term:
        t = self.peek()
        if t.kind == "kw" and t.text in ("proj1", "proj2", "inj1", "inj2"):
            self.next()
            k = int(t.text[-1])
            arg = self.postfix()
            head = (Proj if t.text.startswith("proj") else Inj)(k, arg, loc=t.loc)
        elif self.at("cons"):
            self.next()
            h = self.postfix()
            head = Cons(h, self.postfix(), loc=t.loc)
        else:
            head = self.postfix()
        while self.starts_atom():
            head = App(head, self.postfix(), loc=head.loc)
        return head

    def postfix(self) -> Term:
        e = self.atom()
        while self.at("."):
            self.next()
            label = self.ident().text
            e = FieldProj(e, label, loc=e.loc)
        return e

    def atom(self) -> Term:
        t = self.peek()
        if t.kind == "ident":
            self.next()
            return Var(t.text, loc=t.loc)
        if t.kind == "int":
            self.next()
            return IntLit(t.value, loc=t.loc)
        if t.kind == "real":
            self.next()
            return RealLit(t.text, t.value, loc=t.loc)
        if t.kind == "string":
            self.next()
            return StrLit(t.value, loc=t.loc)
        if self.at("nil"):
            self.next()
            return Nil(loc=t.loc)
        if self.at("let"):
            self.next()
            x = self.ident().text
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            body = self.expr()
            self.expect("end")
            return Let(x, bound, body, loc=t.loc)
        if self.at("("):
            self.next()
            if self.at(")"):
                self.next()
                return Unit(loc=t.loc)
            e = self.expr()
            if self.at(":"):
                self.next()
                ty = self.type_()
                self.expect(")")
                return Anno(e, ty, loc=t.loc)
            self.expect(")")
            return e
        if self.at("{"):
            self.next()
            items = []
            while True:
                label = self.ident().text
                self.expect("=")
                items.append((label, self.expr()))
                if not self.at(","):
                    break
                self.next()
            self.expect("}")
            if len(items) == 1:
                return RecordExp(items[0][0], items[0][1], loc=t.loc)
            return RecordFields(tuple(items), loc=t.loc)
        if self.at("<"):
            self.next()
            a = self.expr()
            self.expect(",")
            b = self.expr()
            self.expect(">")
            return Pair(a, b, loc=t.loc)
        if self.at("#"):
            self.next()
            name = self.ident().text
            self.expect("(")
            args = []
            if not self.at(")"):
                args.append(self.expr())
                while self.at(","):
                    self.next()
                    args.append(self.expr())
            self.expect(")")
            return PrimApp(name, tuple(args), loc=t.loc)
        self.error(t, "expected an expression")

    # programs
    def program(self) -> Program:
        decls = []
        pending: dict[str, Type] = {}
        while self.peek().kind != "eof":
            t = self.peek()
            if self.at("(*["):
                self.next()
                self.expect("val")
                name = self.ident().text
                self.expect(":")
                pending[name] = self.type_()
                self.expect("]*)")
            elif self.at("val"):
                self.next()
                name = self.ident().text
                annot = None
                if self.at(":"):
                    self.next()
                    annot = self.type_()
                self.expect("=")
                e = self.expr()
                if annot is None:
                    annot = pending.pop(name, None)
                decls.append(ValDecl(name, annot, e, t.loc))
            elif self.at("type"):
                self.next()
                name = self.ident().text
                self.expect("=")
                decls.append(TypeDecl(name, self.type_(), t.loc))
            else:
                self.error(t, "expected 'val' or 'type'")
        return Program(tuple(decls))


def parse(text: str) -> Program:
    return Parser(text).program()


def parse_expr(text: str, prims: bool = False) -> Term:
    """Parse one expression.  With ``prims`` free prelude names become Prim."""
    p = Parser(text)
    e = p.expr()
    p.eof()
    e = desugar_expr(e, {})
    return resolve_prims(e) if prims else e


def parse_type(text: str, aliases: Optional[dict] = None) -> Type:
    p = Parser(text)
    t = p.type_()
    p.eof()
    return expand_type(t, aliases or {})


def parse_target(text: str) -> Term:
    p = Parser(text)
    m = p.expr()
    p.eof()
    return m


# ---------------------------------------------------------------------------
# Desugaring

def expand_type(t: Type, aliases: dict, loc: Optional[Loc] = None) -> Type:
    if isinstance(t, AliasT):
        if t.name not in aliases:
            raise UnknownTypeAlias(f"unknown type {t.name}", loc)
        return aliases[t.name]
    if isinstance(t, RecFieldsT):
        out = None
        for label, ty in t.items:
            r = RecT(label, expand_type(ty, aliases, loc))
            out = r if out is None else Inter(out, r)
        return out
    if isinstance(t, Arrow):
        return Arrow(expand_type(t.dom, aliases, loc), expand_type(t.cod, aliases, loc))
    if isinstance(t, (Inter, Union)):
        return type(t)(expand_type(t.left, aliases, loc), expand_type(t.right, aliases, loc))
    if isinstance(t, RecT):
        return RecT(t.label, expand_type(t.payload, aliases, loc))
    if isinstance(t, ListT):
        return ListT(expand_type(t.elem, aliases, loc))
    return t


def desugar_expr(e: Term, aliases: dict) -> Term:
    if isinstance(e, RecordFields):
        out = None
        for label, payload in e.items:
            r = RecordExp(label, desugar_expr(payload, aliases), loc=e.loc)
            out = r if out is None else Merge(out, r, loc=e.loc)
        return out
    if isinstance(e, Anno):
        return Anno(desugar_expr(e.subject, aliases), expand_type(e.type, aliases, e.loc),
                    loc=e.loc)
    return map_children(e, lambda _, c: desugar_expr(c, aliases))


def resolve_prims(e: Term, bound: frozenset = frozenset()) -> Term:
    if isinstance(e, Var):
        if e.name in PRIMITIVES and e.name not in bound:
            return Prim(e.name, loc=e.loc)
        return e

    def go(fname, c):
        names = {getattr(e, b) for b in e._scopes.get(fname, ())}
        return resolve_prims(c, bound | names)

    return map_children(e, go)


def desugar_decls(p: Program, prelude: bool = True) -> list[tuple[str, Term, Optional[Loc]]]:
    """Expand aliases and record forms; one (name, expr, loc) per val."""
    aliases: dict[str, Type] = {}
    seen: set[str] = set()
    out = []
    bound: frozenset = frozenset()
    for d in p.decls:
        if isinstance(d, TypeDecl):
            if d.name in aliases:
                raise DuplicateDeclaration(f"duplicate type {d.name}", d.loc)
            aliases[d.name] = expand_type(d.type, aliases, d.loc)
            continue
        if d.name in seen and d.name != "_":
            raise DuplicateDeclaration(f"duplicate declaration {d.name}", d.loc)
        seen.add(d.name)
        e = desugar_expr(d.expr, aliases)
        if d.annot is not None:
            e = Anno(e, expand_type(d.annot, aliases, d.loc), loc=d.loc)
        if prelude:
            e = resolve_prims(e, bound)
        bound = bound | {d.name}
        out.append((d.name, e, d.loc))
    return out


def desugar(p: Program, prelude: bool = True) -> Term:
    """The whole program as nested Lets whose body is the last declared name."""
    decls = desugar_decls(p, prelude)
    body: Term = Var(decls[-1][0]) if decls else Unit()
    for name, e, loc in reversed(decls):
        body = Let(name, e, body, loc=loc)
    return body
