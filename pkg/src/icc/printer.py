"""Canonical text for types, source expressions and target terms.

The output re-parses (``surface.parse_expr`` / ``surface.parse_target``) to an
alpha-equivalent term.
"""

from __future__ import annotations

from .syntax import (
    Anno, App, Arrow, Base, Case, Cons, FieldProj, Fix, Inj, Inter, IntLit, Lam, Let, ListCase,
    ListT, Merge, Nil, Pair, Prim, PrimApp, Proj, RealLit, RecordExp, RecT, StrLit, TArrow, TBase,
    TListT, TProd, TRecT, TSum, TUnitT, TVarT, Top, Type, Unit, Union, Var,
)

# type precedence: arrow 0 < union 1 < inter 2 < list 3 < atom 4


def print_type(a: Type) -> str:
    return _ty(a, 0)


def _ty(a, prec: int) -> str:
    if isinstance(a, Top):
        return "top"
    if isinstance(a, Base):
        return a.name
    if isinstance(a, RecT):
        return f"{{{a.label} : {_ty(a.payload, 0)}}}"
    if isinstance(a, ListT):
        s = f"list {_ty(a.elem, 4)}"
        return f"({s})" if prec > 3 else s
    if isinstance(a, Arrow):
        s = f"{_ty(a.dom, 1)} -> {_ty(a.cod, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(a, Union):
        s = f"{_ty(a.left, 1)} \\/ {_ty(a.right, 2)}"
        return f"({s})" if prec > 1 else s
    if isinstance(a, Inter):
        s = f"{_ty(a.left, 2)} & {_ty(a.right, 3)}"
        return f"({s})" if prec > 2 else s
    raise ValueError(f"not a source type: {a!r}")


def print_ttype(t) -> str:
    return _tty(t, 0)


def _tty(t, prec: int) -> str:
    if isinstance(t, TUnitT):
        return "unit"
    if isinstance(t, TBase):
        return t.name
    if isinstance(t, TVarT):
        return f"'t{t.id}"
    if isinstance(t, TRecT):
        return f"{{{t.label} : {_tty(t.payload, 0)}}}"
    if isinstance(t, TListT):
        s = f"list {_tty(t.elem, 4)}"
        return f"({s})" if prec > 3 else s
    if isinstance(t, TArrow):
        s = f"{_tty(t.dom, 1)} -> {_tty(t.cod, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, TSum):
        s = f"{_tty(t.left, 1)} + {_tty(t.right, 2)}"
        return f"({s})" if prec > 1 else s
    if isinstance(t, TProd):
        s = f"{_tty(t.left, 2)} * {_tty(t.right, 3)}"
        return f"({s})" if prec > 2 else s
    raise ValueError(f"not a target type: {t!r}")


def quote_string(s: str) -> str:
    out = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{out}"'


def print_literal(e) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, RealLit):
        return e.text
    if isinstance(e, StrLit):
        return quote_string(e.value)
    raise ValueError(e)


# expression precedence: binder forms 0 < merge 1 < application 2 < postfix 3 < atom 4

def print_source(e) -> str:
    return _ex(e, 0)


def print_target(m) -> str:
    return _ex(m, 0)


def _paren(s: str, cond: bool) -> str:
    return f"({s})" if cond else s


def _ex(e, prec: int) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Prim):
        return e.name
    if isinstance(e, Unit):
        return "()"
    if isinstance(e, (IntLit, RealLit, StrLit)):
        s = print_literal(e)
        return _paren(s, s.startswith("-") and prec > 2)
    if isinstance(e, Nil):
        return "nil"
    if isinstance(e, Lam):
        return _paren(f"fn {e.x} => {_ex(e.body, 0)}", prec > 0)
    if isinstance(e, Fix):
        return _paren(f"fix {e.x} => {_ex(e.body, 0)}", prec > 0)
    if isinstance(e, ListCase):
        s = (f"lcase {_ex(e.subject, 0)} of nil => {_ex(e.nil_arm, 1)}"
             f" | cons {e.h} {e.t} => {_ex(e.cons_arm, 0)}")
        return _paren(s, prec > 0)
    if isinstance(e, Case):
        s = (f"case {_ex(e.scrutinee, 0)} of inj1 {e.x1} => {_ex(e.arm1, 1)}"
             f" | inj2 {e.x2} => {_ex(e.arm2, 0)}")
        return _paren(s, prec > 0)
    if isinstance(e, Merge):
        return _paren(f"{_ex(e.left, 1)} ,, {_ex(e.right, 2)}", prec > 1)
    if isinstance(e, App):
        return _paren(f"{_ex(e.fun, 2)} {_ex(e.arg, 3)}", prec > 2)
    if isinstance(e, Cons):
        return _paren(f"cons {_ex(e.head, 3)} {_ex(e.tail, 3)}", prec > 1)
    if isinstance(e, Proj):
        return _paren(f"proj{e.k} {_ex(e.subject, 3)}", prec > 1)
    if isinstance(e, Inj):
        return _paren(f"inj{e.k} {_ex(e.payload, 3)}", prec > 1)
    if isinstance(e, FieldProj):
        return f"{_ex(e.subject, 3)}.{e.label}"
    if isinstance(e, Let):
        return f"let {e.x} = {_ex(e.bound, 0)} in {_ex(e.body, 0)} end"
    if isinstance(e, Anno):
        return f"({_ex(e.subject, 0)} : {print_type(e.type)})"
    if isinstance(e, RecordExp):
        return f"{{{e.label} = {_ex(e.payload, 0)}}}"
    if isinstance(e, Pair):
        return f"<{_ex(e.first, 0)}, {_ex(e.second, 0)}>"
    if isinstance(e, PrimApp):
        return f"#{e.name}({', '.join(_ex(a, 0) for a in e.args)})"
    raise ValueError(f"cannot print {e!r}")


def print_value(m) -> str:
    """User-facing rendering of a target value (run output)."""
    if isinstance(m, IntLit):
        return str(m.value)
    if isinstance(m, RealLit):
        return m.text
    if isinstance(m, StrLit):
        return m.value
    if isinstance(m, RecordExp):
        return f"{{{m.label}={print_value(m.payload)}}}"
    return print_target(m)
