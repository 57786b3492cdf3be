"""Overloaded primitives available to surface programs.

Each primitive has a source type (usually an intersection, one component per
overload) and a closed target implementation whose shape follows the type
translation: an intersection becomes a pair, one curried function per
component.  Primitive applications in the target (`PrimApp`) are reduced by the
delta rules in ``DELTA``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .syntax import (
    EMPTY_CTX, INT, REAL, STRING, TOP, Arrow, Ctx, Inter, IntLit, Lam, Pair, PrimApp,
    RealLit, StrLit, Term, Type, Unit, Var, ctx_extend, format_real, real_lit,
)


class Stuck(Exception):
    """A delta rule cannot fire (wrong literal kinds, division by zero)."""


def _arr(*ts: Type) -> Type:
    out = ts[-1]
    for t in reversed(ts[:-1]):
        out = Arrow(t, out)
    return out


def _impl(prim: str, arity: int) -> Term:
    names = [f"a{i}" for i in range(1, arity + 1)]
    body: Term = PrimApp(prim, tuple(Var(n) for n in names))
    for n in reversed(names):
        body = Lam(n, body)
    return body


@dataclass(frozen=True)
class Primitive:
    name: str
    type: Type
    impl: Term
    arity: int
    # monomorphic target primitive per overload, in intersection order
    overloads: tuple


def _binop(name: str) -> Primitive:
    ty = Inter(_arr(INT, INT, INT), _arr(REAL, REAL, REAL))
    ints, reals = f"int_{name}", f"real_{name}"
    return Primitive(name, ty, Pair(_impl(ints, 2), _impl(reals, 2)), 2, (ints, reals))


def _build() -> dict[str, Primitive]:
    table = {p.name: p for p in (_binop("add"), _binop("sub"), _binop("mul"), _binop("div"))}
    to_string_ty = Inter(Inter(Arrow(INT, STRING), Arrow(REAL, STRING)), Arrow(STRING, STRING))
    to_string_impl = Pair(Pair(_impl("int_toString", 1), _impl("real_toString", 1)),
                          Lam("a1", Var("a1")))
    table["toString"] = Primitive("toString", to_string_ty, to_string_impl, 1,
                                  ("int_toString", "real_toString", None))
    table["cat"] = Primitive("cat", _arr(STRING, STRING, STRING), _impl("cat", 2), 2, ("cat",))
    table["print"] = Primitive("print", Arrow(STRING, TOP), _impl("print", 1), 1, ("print",))
    return table


PRIMITIVES: dict[str, Primitive] = _build()


def load_prelude() -> tuple[Ctx, dict[str, Primitive]]:
    ctx = EMPTY_CTX
    for p in PRIMITIVES.values():
        ctx = ctx_extend(ctx, p.name, p.type)
    return ctx, PRIMITIVES


def prim_arity(name: str) -> int:
    return PRIMITIVES[name].arity


# ---------------------------------------------------------------------------
# Delta rules over target literals

def _ints(args):
    if not all(isinstance(a, IntLit) for a in args):
        raise Stuck("expected int literals")
    return [a.value for a in args]


def _reals(args):
    if not all(isinstance(a, RealLit) for a in args):
        raise Stuck("expected real literals")
    return [a.value for a in args]


def _int_div(args):
    a, b = _ints(args)
    if b == 0:
        raise Stuck("div-by-zero")
    return IntLit(a // b)


def _real_div(args):
    a, b = _reals(args)
    if b == 0.0:
        raise Stuck("div-by-zero")
    return real_lit(a / b)


def _str(args) -> str:
    if not isinstance(args[0], StrLit):
        raise Stuck("expected string literal")
    return args[0].value


def _real_to_string(args):
    (v,) = _reals(args)
    return StrLit(format_real(v) if math.isfinite(v) else repr(v))


DELTA = {
    "int_add": lambda a: IntLit(sum(_ints(a))),
    "int_sub": lambda a: IntLit(_ints(a)[0] - _ints(a)[1]),
    "int_mul": lambda a: IntLit(_ints(a)[0] * _ints(a)[1]),
    "int_div": _int_div,
    "real_add": lambda a: real_lit(_reals(a)[0] + _reals(a)[1]),
    "real_sub": lambda a: real_lit(_reals(a)[0] - _reals(a)[1]),
    "real_mul": lambda a: real_lit(_reals(a)[0] * _reals(a)[1]),
    "real_div": _real_div,
    "int_toString": lambda a: StrLit(str(_ints(a)[0])),
    "real_toString": _real_to_string,
    "cat": lambda a: StrLit(_str(a[:1]) + _str(a[1:])),
    "print": lambda a: Unit(),
}

# argument and result target types of each monomorphic primitive
SIGNATURES = {
    **{f"int_{op}": (("int", "int"), "int") for op in ("add", "sub", "mul", "div")},
    **{f"real_{op}": (("real", "real"), "real") for op in ("add", "sub", "mul", "div")},
    "int_toString": (("int",), "string"),
    "real_toString": (("real",), "string"),
    "cat": (("string", "string"), "string"),
    "print": (("string",), "unit"),
}


def apply_delta(name: str, args) -> tuple[Term, str | None]:
    """Reduce a saturated primitive; returns (result, printed text or None)."""
    if name not in DELTA:
        raise Stuck(f"unknown primitive {name}")
    result = DELTA[name](list(args))
    printed = _str(args) if name == "print" else None
    return result, printed


def source_delta(name: str, args) -> Term:
    """Delta rule for a saturated source primitive application.

    Picks the first overload whose argument kinds match the literal values.
    """
    p = PRIMITIVES[name]
    for mono in p.overloads:
        if mono is None:
            if len(args) == 1 and isinstance(args[0], StrLit):
                return args[0]
            continue
        arg_kinds, _ = SIGNATURES[mono]
        if all(_literal_kind(a) == k for a, k in zip(args, arg_kinds)):
            return apply_delta(mono, args)[0]
    raise Stuck(f"no overload of {name} for these arguments")


def _literal_kind(a) -> str | None:
    if isinstance(a, IntLit):
        return "int"
    if isinstance(a, RealLit):
        return "real"
    if isinstance(a, StrLit):
        return "string"
    return None


__all__ = ["PRIMITIVES", "Primitive", "load_prelude", "prim_arity", "apply_delta",
           "source_delta", "Stuck", "SIGNATURES"]
