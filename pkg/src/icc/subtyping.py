"""Subtyping with coercions: ``A <= B`` yields a source function of type A -> B."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .syntax import (
    EMPTY_CTX, App, Arrow, Base, Cons, FieldProj, Fix, Inter, Lam, ListCase, ListT, Merge, Nil,
    RecordExp, RecT, Term, Top, Type, Unit, Union, Var, subst1,
)

# reflexive-transitive closure of the atomic refinement chain pos <= nat <= int
ATOM_ORDER = frozenset({("pos", "nat"), ("nat", "int"), ("pos", "int")})


class NotASubtype(Exception):
    def __init__(self, source: Type, target: Type):
        super().__init__("not a subtype")
        self.source, self.target = source, target


@dataclass(frozen=True)
class Coercion:
    expr: Term
    source: Type
    target: Type
    rule_trace: tuple


def atom_le(a: str, b: str) -> bool:
    return a == b or (a, b) in ATOM_ORDER


_X, _Y, _F = Var("x"), Var("y"), Var("f")


def _identity() -> Term:
    return Lam("x", _X)


@lru_cache(maxsize=None)
def _sub(a: Type, b: Type):
    """Return (coercion, rule trace) or None, following the fixed rule order."""
    if isinstance(b, Top):
        return Lam("x", Unit()), ("topR",)
    if isinstance(b, Inter):
        r1, r2 = _sub(a, b.left), _sub(a, b.right)
        if r1 and r2:
            merged = Merge(r1[0], r2[0])
            if _checks(merged, Arrow(a, b)):
                return merged, ("andR",) + r1[1] + r2[1]
            # neither branch alone covers both components: push the merge under the binder
            pushed = Lam("x", Merge(_body_at(r1[0]), _body_at(r2[0])))
            return pushed, ("andR-eta",) + r1[1] + r2[1]
        return None
    if isinstance(a, Union):
        r1, r2 = _sub(a.left, b), _sub(a.right, b)
        if r1 and r2:
            body = App(Lam("y", Merge(App(r1[0], _Y), App(r2[0], _Y))), _X)
            return Lam("x", body), ("orL",) + r1[1] + r2[1]
        return None
    r = _structural(a, b)
    if r:
        return r
    if isinstance(b, Union):
        for k, part in ((1, b.left), (2, b.right)):
            r = _sub(a, part)
            if r:
                return r[0], (f"orR{k}",) + r[1]
    if isinstance(a, Inter):
        for k, part in ((1, a.left), (2, a.right)):
            r = _sub(part, b)
            if r:
                return r[0], (f"andL{k}",) + r[1]
    return None


def _body_at(c: Term) -> Term:
    """Body of coercion ``c`` with its argument named x."""
    if isinstance(c, Merge):
        return Merge(_body_at(c.left), _body_at(c.right))
    return subst1(c.body, c.x, _X)


def _checks(c: Term, a: Type) -> bool:
    from .elaborate import TypeError_, check
    try:
        check(EMPTY_CTX, c, a)
    except TypeError_:
        return False
    return True


def _structural(a: Type, b: Type):
    if isinstance(a, Arrow) and isinstance(b, Arrow):
        dom, cod = _sub(b.dom, a.dom), _sub(a.cod, b.cod)
        if dom and cod:
            body = App(cod[0], App(_F, App(dom[0], _X)))
            return Lam("f", Lam("x", body)), ("arrow",) + dom[1] + cod[1]
        return None
    if isinstance(a, Base) and isinstance(b, Base):
        if atom_le(a.name, b.name):
            return _identity(), ("atom",)
        return None
    if isinstance(a, RecT) and isinstance(b, RecT) and a.label == b.label:
        r = _sub(a.payload, b.payload)
        if r:
            body = RecordExp(a.label, App(r[0], FieldProj(Var("r"), a.label)))
            return Lam("r", body), ("record",) + r[1]
        return None
    if isinstance(a, ListT) and isinstance(b, ListT):
        r = _sub(a.elem, b.elem)
        if r:
            cons_arm = Cons(App(r[0], Var("h")), App(Var("g"), Var("t")))
            body = Lam("l", ListCase(Var("l"), Nil(), "h", "t", cons_arm))
            return Fix("g", body), ("list",) + r[1]
        return None
    return None


def subtype(a: Type, b: Type) -> Coercion:
    r = _sub(a, b)
    if r is None:
        raise NotASubtype(a, b)
    return Coercion(r[0], a, b, r[1])


def subtype_holds(a: Type, b: Type) -> bool:
    return _sub(a, b) is not None


def reflexivity_coercion(a: Type) -> Coercion:
    return subtype(a, a)
