"""Abstract syntax shared by the source and target languages.

Source expressions and target terms are built from the same family of
immutable node classes.  Merges, annotations and primitive references only
occur in source expressions; pairs, projections, injections, case and
primitive applications only occur in target terms.  Everything else is common.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field, fields, replace
from typing import ClassVar, Iterator, Optional


@dataclass(frozen=True)
class Loc:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


# ---------------------------------------------------------------------------
# Source types

class Type:
    __slots__ = ()


@dataclass(frozen=True)
class Top(Type):
    pass


@dataclass(frozen=True)
class Arrow(Type):
    dom: Type
    cod: Type


@dataclass(frozen=True)
class Inter(Type):
    left: Type
    right: Type


@dataclass(frozen=True)
class Union(Type):
    left: Type
    right: Type


BASE_NAMES = ("int", "real", "string", "nat", "pos")


@dataclass(frozen=True)
class Base(Type):
    name: str


@dataclass(frozen=True)
class RecT(Type):
    label: str
    payload: Type


@dataclass(frozen=True)
class ListT(Type):
    elem: Type


TOP = Top()
INT = Base("int")
REAL = Base("real")
STRING = Base("string")
NAT = Base("nat")
POS = Base("pos")


def type_size(a: Type) -> int:
    if isinstance(a, (Arrow, Inter, Union)):
        l, r = _pair(a)
        return 1 + type_size(l) + type_size(r)
    if isinstance(a, RecT):
        return 1 + type_size(a.payload)
    if isinstance(a, ListT):
        return 1 + type_size(a.elem)
    return 1


def _pair(a):
    if isinstance(a, Arrow):
        return a.dom, a.cod
    return a.left, a.right


def is_core_type(a: Type) -> bool:
    if isinstance(a, Top):
        return True
    if isinstance(a, (Arrow, Inter, Union)):
        return all(map(is_core_type, _pair(a)))
    return False


# ---------------------------------------------------------------------------
# Target types

class TType:
    __slots__ = ()


@dataclass(frozen=True)
class TUnitT(TType):
    pass


@dataclass(frozen=True)
class TArrow(TType):
    dom: TType
    cod: TType


@dataclass(frozen=True)
class TProd(TType):
    left: TType
    right: TType


@dataclass(frozen=True)
class TSum(TType):
    left: TType
    right: TType


@dataclass(frozen=True)
class TBase(TType):
    name: str  # int | real | string


@dataclass(frozen=True)
class TRecT(TType):
    label: str
    payload: TType


@dataclass(frozen=True)
class TListT(TType):
    elem: TType


@dataclass(frozen=True)
class TVarT(TType):
    """Unification variable; only produced by target type inference."""
    id: int


TUNIT = TUnitT()

_BASE_TRANSLATION = {"int": "int", "nat": "int", "pos": "int", "real": "real", "string": "string"}


def type_translate(a: Type) -> TType:
    if isinstance(a, Top):
        return TUNIT
    if isinstance(a, Arrow):
        return TArrow(type_translate(a.dom), type_translate(a.cod))
    if isinstance(a, Inter):
        return TProd(type_translate(a.left), type_translate(a.right))
    if isinstance(a, Union):
        return TSum(type_translate(a.left), type_translate(a.right))
    if isinstance(a, Base):
        return TBase(_BASE_TRANSLATION[a.name])
    if isinstance(a, RecT):
        return TRecT(a.label, type_translate(a.payload))
    if isinstance(a, ListT):
        return TListT(type_translate(a.elem))
    raise ValueError(f"not a source type: {a!r}")


# ---------------------------------------------------------------------------
# Typing contexts
#
# A binding is (name, type, fixbound).  Fix-bound variables stand for
# non-values (the fix unrolling substitutes `fix x => e` itself), so they are
# not values for topI or evaluation-context purposes.

Binding = tuple  # (str, Type, bool)
Ctx = tuple  # tuple[Binding, ...]

EMPTY_CTX: Ctx = ()


def ctx_extend(ctx: Ctx, name: str, ty: Type, fixbound: bool = False) -> Ctx:
    return ctx + ((name, ty, fixbound),)


def ctx_lookup(ctx: Ctx, name: str) -> Optional[Type]:
    for n, t, _ in reversed(ctx):
        if n == name:
            return t
    return None


def ctx_is_fixbound(ctx: Ctx, name: str) -> bool:
    for n, _, f in reversed(ctx):
        if n == name:
            return f
    return False


def make_ctx(*pairs) -> Ctx:
    return tuple((n, t, False) for n, t in pairs)


def ctx_translate(ctx: Ctx) -> tuple:
    return tuple((n, type_translate(t)) for n, t, *_ in ctx)


# ---------------------------------------------------------------------------
# Terms

class Term:
    """Base of all expression/term nodes.

    ``_scopes`` maps a child-term field to the binder fields whose names are
    in scope inside it.  Everything generic below (free variables,
    substitution, alpha-equivalence, size) is driven by that table.
    """

    __slots__ = ()
    _scopes: ClassVar[dict] = {}
    _binders: ClassVar[tuple] = ()


def _loc_field():
    return field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Var(Term):
    name: str
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class Unit(Term):
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class Lam(Term):
    x: str
    body: Term
    loc: Optional[Loc] = _loc_field()
    _scopes = {"body": ("x",)}
    _binders = ("x",)


@dataclass(frozen=True)
class App(Term):
    fun: Term
    arg: Term
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class Fix(Term):
    x: str
    body: Term
    loc: Optional[Loc] = _loc_field()
    _scopes = {"body": ("x",)}
    _binders = ("x",)


@dataclass(frozen=True)
class Merge(Term):
    left: Term
    right: Term
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class IntLit(Term):
    value: int
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class RealLit(Term):
    text: str = field(compare=False)
    value: float = 0.0
    loc: Optional[Loc] = _loc_field()


def real_lit(value: float) -> RealLit:
    return RealLit(format_real(value), value)


def format_real(value: float) -> str:
    text = repr(float(value))
    if "e" in text and "." not in text.split("e")[0]:
        mant, exp = text.split("e")
        text = f"{mant}.0e{exp}"
    return text


@dataclass(frozen=True)
class StrLit(Term):
    value: str
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class RecordExp(Term):
    label: str
    payload: Term
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class FieldProj(Term):
    subject: Term
    label: str
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class Let(Term):
    x: str
    bound: Term
    body: Term
    # introduced by let-normalization rather than written by the user
    synthetic: bool = field(default=False, compare=False)
    loc: Optional[Loc] = _loc_field()
    _scopes = {"body": ("x",)}
    _binders = ("x",)


@dataclass(frozen=True)
class Anno(Term):
    subject: Term
    type: Type
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class Nil(Term):
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class Cons(Term):
    head: Term
    tail: Term
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class ListCase(Term):
    subject: Term
    nil_arm: Term
    h: str
    t: str
    cons_arm: Term
    loc: Optional[Loc] = _loc_field()
    _scopes = {"cons_arm": ("h", "t")}
    _binders = ("h", "t")


@dataclass(frozen=True)
class Prim(Term):
    """Reference to a prelude primitive in a source expression."""
    name: str
    loc: Optional[Loc] = _loc_field()


# target-only forms

@dataclass(frozen=True)
class Pair(Term):
    first: Term
    second: Term
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class Proj(Term):
    k: int
    subject: Term
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class Inj(Term):
    k: int
    payload: Term
    loc: Optional[Loc] = _loc_field()


@dataclass(frozen=True)
class Case(Term):
    scrutinee: Term
    x1: str
    arm1: Term
    x2: str
    arm2: Term
    loc: Optional[Loc] = _loc_field()
    _scopes = {"arm1": ("x1",), "arm2": ("x2",)}
    _binders = ("x1", "x2")


@dataclass(frozen=True)
class PrimApp(Term):
    name: str
    args: tuple
    loc: Optional[Loc] = _loc_field()


# ---------------------------------------------------------------------------
# Generic traversal

@functools.lru_cache(maxsize=None)
def _fields_of(cls) -> tuple:
    return fields(cls)


def children(t: Term) -> Iterator[tuple[str, Term]]:
    for f in _fields_of(type(t)):
        v = getattr(t, f.name)
        if isinstance(v, Term):
            yield f.name, v
        elif isinstance(v, tuple) and f.name == "args":
            for i, a in enumerate(v):
                yield f"{f.name}[{i}]", a


def _scoped_names(t: Term, fname: str) -> tuple:
    return tuple(getattr(t, b) for b in t._scopes.get(fname, ()))


def free_vars(t: Term) -> frozenset:
    if isinstance(t, Var):
        return frozenset((t.name,))
    out = set()
    for fname, c in children(t):
        out |= free_vars(c) - set(_scoped_names(t, fname))
    return frozenset(out)


def is_closed(t: Term) -> bool:
    return not free_vars(t)


def size(t: Term) -> int:
    return 1 + sum(size(c) for _, c in children(t))


def all_names(t: Term) -> set:
    out = set()
    if isinstance(t, Var):
        out.add(t.name)
    for b in t._binders:
        out.add(getattr(t, b))
    for _, c in children(t):
        out |= all_names(c)
    return out


def map_children(t: Term, fn) -> Term:
    """Rebuild ``t`` with ``fn(field_name, child)`` applied to each child term."""
    updates = {}
    for f in _fields_of(type(t)):
        v = getattr(t, f.name)
        if isinstance(v, Term):
            updates[f.name] = fn(f.name, v)
        elif f.name == "args" and isinstance(v, tuple):
            updates[f.name] = tuple(fn(f"args[{i}]", a) for i, a in enumerate(v))
    return replace(t, **updates) if updates else t


def _fresh_name(base: str, avoid: set) -> str:
    stem = base.split("'")[0] or "v"
    for i in itertools.count(1):
        cand = f"{stem}'{i}"
        if cand not in avoid:
            return cand
    raise AssertionError


def subst(t: Term, mapping: dict) -> Term:
    """Capture-avoiding simultaneous substitution of terms for variables."""
    if not mapping:
        return t
    if isinstance(t, Var):
        return mapping.get(t.name, t)
    if not t._scopes:
        return map_children(t, lambda _, c: subst(c, mapping))
    fv_repl = set()
    for v in mapping.values():
        fv_repl |= free_vars(v)
    # rename binders that would capture a free variable of a replacement
    renames = {}
    for b in t._binders:
        name = getattr(t, b)
        if name in fv_repl:
            avoid = fv_repl | all_names(t) | set(mapping)
            renames[b] = _fresh_name(name, avoid | set(renames.values()))
    if renames:
        updates = {b: new for b, new in renames.items()}
        for fname, names in t._scopes.items():
            inner = {getattr(t, b): Var(renames[b]) for b in names if b in renames}
            if inner:
                updates[fname] = subst(getattr(t, fname), inner)
        t = replace(t, **updates)

    def go(fname, c):
        bound = set(_scoped_names(t, fname))
        inner = {k: v for k, v in mapping.items() if k not in bound}
        return subst(c, inner)

    return map_children(t, go)


def subst1(t: Term, x: str, v: Term) -> Term:
    return subst(t, {x: v})


def alpha_eq(a: Term, b: Term) -> bool:
    return _alpha(a, b, {}, {}, 0)


def _alpha(a, b, env_a, env_b, depth) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        ia, ib = env_a.get(a.name), env_b.get(b.name)
        if ia is None and ib is None:
            return a.name == b.name
        return ia == ib
    # compare non-term, non-binder fields
    for f in _fields_of(type(a)):
        if f.name == "loc" or not f.compare:
            continue
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if isinstance(va, Term) or f.name in a._binders or f.name == "args":
            continue
        if va != vb:
            return False
    if isinstance(a, PrimApp) and len(a.args) != len(b.args):
        return False
    ca, cb = list(children(a)), list(children(b))
    for (fname, x), (_, y) in zip(ca, cb):
        ea, eb, d = env_a, env_b, depth
        names_a = _scoped_names(a, fname)
        names_b = _scoped_names(b, fname)
        if names_a:
            ea, eb = dict(env_a), dict(env_b)
            for na, nb in zip(names_a, names_b):
                ea[na] = d
                eb[nb] = d
                d += 1
        if not _alpha(x, y, ea, eb, d):
            return False
    return True


# ---------------------------------------------------------------------------
# Values

def is_source_value(e: Term, nonvalue_vars: frozenset = frozenset()) -> bool:
    """Source values; ``nonvalue_vars`` names fix-bound variables."""
    if isinstance(e, Var):
        return e.name not in nonvalue_vars
    if isinstance(e, (Unit, Lam, IntLit, RealLit, StrLit, Nil, Prim)):
        return True
    if isinstance(e, Merge):
        return is_source_value(e.left, nonvalue_vars) and is_source_value(e.right, nonvalue_vars)
    if isinstance(e, RecordExp):
        return is_source_value(e.payload, nonvalue_vars)
    if isinstance(e, Cons):
        return is_source_value(e.head, nonvalue_vars) and is_source_value(e.tail, nonvalue_vars)
    if isinstance(e, App):
        # partially applied primitive
        head, args = spine(e)
        if isinstance(head, Prim):
            from .prelude import prim_arity
            return len(args) < prim_arity(head.name) and all(
                is_source_value(a, nonvalue_vars) for a in args)
    return False


def spine(e: Term) -> tuple[Term, list]:
    args = []
    while isinstance(e, App):
        args.append(e.arg)
        e = e.fun
    return e, args[::-1]


def is_target_value(m: Term) -> bool:
    if isinstance(m, (Var, Unit, Lam, IntLit, RealLit, StrLit, Nil)):
        return True
    if isinstance(m, Pair):
        return is_target_value(m.first) and is_target_value(m.second)
    if isinstance(m, (Inj,)):
        return is_target_value(m.payload)
    if isinstance(m, RecordExp):
        return is_target_value(m.payload)
    if isinstance(m, Cons):
        return is_target_value(m.head) and is_target_value(m.tail)
    return False


CORE_SOURCE = (Var, Unit, Lam, App, Fix, Merge)


def is_core_term(e: Term) -> bool:
    return isinstance(e, CORE_SOURCE) and all(is_core_term(c) for _, c in children(e))
