"""Bidirectional elaborating typechecker.

``check`` and ``synth`` return full derivation trees (``Deriv``) whose root
carries the elaborated target term.  Every node instantiates one rule schema;
``validate`` re-checks a tree node by node.  ``erase`` drops the targets and
``reelaborate`` rebuilds them from the rule labels alone.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Optional

from .dynamics import _frames, plug
from .prelude import PRIMITIVES
from .printer import print_source, print_type
from .subtyping import NotASubtype, atom_le, subtype
from .syntax import (
    EMPTY_CTX, INT, REAL, STRING, TOP, Anno, App, Arrow, Base, Case, Cons, Ctx, FieldProj, Fix,
    Inj, Inter, IntLit, Lam, Let, ListCase, ListT, Loc, Merge, Nil, Pair, Prim, Proj, RealLit,
    RecordExp, RecT, StrLit, Term, Top, Type, Unit, Union, Var, all_names, ctx_extend,
    ctx_lookup, free_vars, is_source_value, map_children, type_translate,
)

CORE_RULES = ("var", "merge1", "merge2", "fix", "topI", "arrI", "arrE", "andI", "andE1",
              "andE2", "orI1", "orI2", "direct", "orE")
EXTENSION_RULES = ("lit", "atom", "prim", "anno", "recI", "recE", "nil", "cons", "lcase")


class TypeError_(Exception):
    """A source type error with location and, for merges, both branch failures."""

    def __init__(self, message: str, loc: Optional[Loc] = None, expected: Optional[Type] = None,
                 inferred: Optional[Type] = None, branches: tuple = ()):
        super().__init__(message)
        self.message, self.loc = message, loc
        self.expected, self.inferred, self.branches = expected, inferred, branches

    def render(self, filename: str = "<input>", indent: int = 0) -> str:
        loc = self.loc or Loc(1, 1)
        if self.expected is not None and self.inferred is not None:
            text = f"expected {print_type(self.expected)}, inferred {print_type(self.inferred)}"
        else:
            text = self.message
        lines = [" " * indent + f"{filename}:{loc.line}:{loc.col}: error: {text}"]
        for b in self.branches:
            lines.append(b.render(filename, indent + 2))
        return "\n".join(lines)


TypeError = TypeError_  # noqa: A001  (public name mirrors the judgment's failure)


class CannotSynthesize(TypeError_):
    pass


class InvalidDerivation(Exception):
    pass


@dataclass(frozen=True)
class Deriv:
    rule: str
    ctx: Ctx
    subject: Term
    type: Type
    target: Optional[Term]
    children: tuple = ()
    # direct/orE: ("ctx", E, x) or ("ctx", E, x1, x2) for an evaluation context,
    # ("let",) for the let-bound form
    info: tuple = ()

    def nodes(self) -> Iterator["Deriv"]:
        yield self
        for c in self.children:
            yield from c.nodes()

    def count(self) -> int:
        return sum(1 for _ in self.nodes())


def _fixbound(ctx: Ctx) -> frozenset:
    """Names whose innermost binding is a fix binder."""
    seen, out = set(), set()
    for n, _, f in reversed(ctx):
        if n not in seen:
            seen.add(n)
            if f:
                out.add(n)
    return frozenset(out)


def is_value_in(ctx: Ctx, e: Term) -> bool:
    return is_source_value(e, _fixbound(ctx))


def lit_types(e: Term) -> tuple:
    """Base types a literal may be given by rule lit."""
    if isinstance(e, IntLit):
        out = [INT]
        if e.value >= 0:
            out.append(Base("nat"))
        if e.value >= 1:
            out.append(Base("pos"))
        return tuple(out)
    if isinstance(e, RealLit):
        return (REAL,)
    if isinstance(e, StrLit):
        return (STRING,)
    return ()


# ---------------------------------------------------------------------------
# Target mapping shared by reelaboration and validation

def rule_target(d: Deriv, kids: list) -> Term:
    """The target a node must carry given its children's targets."""
    r, e = d.rule, d.subject
    if r == "var":
        return Var(e.name)
    if r in ("merge1", "merge2", "atom", "anno"):
        return kids[0]
    if r == "fix":
        return Fix(e.x, kids[0])
    if r == "topI":
        return Unit()
    if r == "arrI":
        return Lam(e.x, kids[0])
    if r == "arrE":
        return App(kids[0], kids[1])
    if r == "andI":
        return Pair(kids[0], kids[1])
    if r in ("andE1", "andE2"):
        return Proj(int(r[-1]), kids[0])
    if r in ("orI1", "orI2"):
        return Inj(int(r[-1]), kids[0])
    if r == "direct":
        x = e.x if d.info[0] == "let" else d.info[2]
        return App(Lam(x, kids[1]), kids[0])
    if r == "orE":
        if d.info[0] == "let":
            x1 = x2 = e.x
        else:
            x1, x2 = d.info[2], d.info[3]
        return Case(kids[0], x1, kids[1], x2, kids[2])
    if r == "lit":
        return e
    if r == "prim":
        return PRIMITIVES[e.name].impl
    if r == "recI":
        return RecordExp(e.label, kids[0])
    if r == "recE":
        return FieldProj(kids[0], e.label)
    if r == "nil":
        return Nil()
    if r == "cons":
        return Cons(kids[0], kids[1])
    if r == "lcase":
        return ListCase(kids[0], kids[1], e.h, e.t, kids[2])
    raise InvalidDerivation(f"unknown rule {r}")


def erase(d: Deriv) -> Deriv:
    return replace(d, target=None, children=tuple(erase(c) for c in d.children))


def reelaborate(t: Deriv) -> Deriv:
    kids = tuple(reelaborate(c) for c in t.children)
    node = replace(t, children=kids)
    return replace(node, target=rule_target(node, [k.target for k in kids]))


# ---------------------------------------------------------------------------
# Validator

def validate(d: Deriv, with_targets: bool = True) -> None:
    """Raise InvalidDerivation unless every node instantiates its rule schema."""
    for node in d.nodes():
        _validate_node(node)
        if with_targets:
            want = rule_target(node, [c.target for c in node.children])
            if node.target != want:
                raise InvalidDerivation(f"{node.rule}: target mismatch at {print_source(node.subject)}")


def _need(cond: bool, d: Deriv, what: str):
    if not cond:
        raise InvalidDerivation(f"{d.rule}: {what} ({print_source(d.subject)})")


def _validate_node(d: Deriv) -> None:
    r, e, a, ctx, ks = d.rule, d.subject, d.type, d.ctx, d.children
    arity = {"var": 0, "topI": 0, "lit": 0, "prim": 0, "nil": 0, "andI": 2, "arrE": 2,
             "direct": 2, "orE": 3, "cons": 2, "lcase": 3}.get(r, 1)
    _need(r in CORE_RULES + EXTENSION_RULES, d, "unknown rule")
    _need(len(ks) == arity, d, "wrong number of premises")
    same = all(k.ctx == ctx for k in ks)
    if r == "var":
        _need(isinstance(e, Var) and ctx_lookup(ctx, e.name) == a, d, "variable type")
    elif r in ("merge1", "merge2"):
        _need(isinstance(e, Merge) and same, d, "shape")
        part = e.left if r == "merge1" else e.right
        _need(ks[0].subject == part and ks[0].type == a, d, "premise")
    elif r == "fix":
        _need(isinstance(e, Fix), d, "shape")
        _need(ks[0].ctx == ctx_extend(ctx, e.x, a, True) and ks[0].subject == e.body
              and ks[0].type == a, d, "premise")
    elif r == "topI":
        _need(isinstance(a, Top) and is_value_in(ctx, e), d, "subject must be a value")
    elif r == "arrI":
        _need(isinstance(e, Lam) and isinstance(a, Arrow), d, "shape")
        _need(ks[0].ctx == ctx_extend(ctx, e.x, a.dom) and ks[0].subject == e.body
              and ks[0].type == a.cod, d, "premise")
    elif r == "arrE":
        _need(isinstance(e, App) and same, d, "shape")
        f, x = ks
        _need(f.subject == e.fun and x.subject == e.arg, d, "subjects")
        _need(f.type == Arrow(x.type, a), d, "types")
    elif r == "andI":
        _need(isinstance(a, Inter) and same, d, "shape")
        _need(ks[0].subject == e and ks[1].subject == e, d, "subjects")
        _need(ks[0].type == a.left and ks[1].type == a.right, d, "types")
    elif r in ("andE1", "andE2"):
        k = ks[0]
        _need(same and k.subject == e and isinstance(k.type, Inter), d, "premise")
        _need((k.type.left if r == "andE1" else k.type.right) == a, d, "component")
    elif r in ("orI1", "orI2"):
        _need(isinstance(a, Union) and same and ks[0].subject == e, d, "premise")
        _need(ks[0].type == (a.left if r == "orI1" else a.right), d, "component")
    elif r in ("direct", "orE"):
        _validate_binding(d)
    elif r == "lit":
        _need(a in lit_types(e), d, "literal type")
    elif r == "atom":
        k = ks[0]
        _need(same and k.subject == e and isinstance(k.type, Base) and isinstance(a, Base)
              and k.type != a and atom_le(k.type.name, a.name), d, "atomic subtyping")
    elif r == "prim":
        _need(isinstance(e, Prim) and PRIMITIVES[e.name].type == a, d, "primitive type")
    elif r == "anno":
        _need(isinstance(e, Anno) and e.type == a and same and ks[0].subject == e.subject
              and ks[0].type == a, d, "annotation")
    elif r == "recI":
        _need(isinstance(e, RecordExp) and isinstance(a, RecT) and a.label == e.label
              and same and ks[0].subject == e.payload and ks[0].type == a.payload, d, "record")
    elif r == "recE":
        _need(isinstance(e, FieldProj) and same and ks[0].subject == e.subject
              and ks[0].type == RecT(e.label, a), d, "projection")
    elif r == "nil":
        _need(isinstance(e, Nil) and isinstance(a, ListT), d, "nil")
    elif r == "cons":
        _need(isinstance(e, Cons) and isinstance(a, ListT) and same, d, "shape")
        _need(ks[0].subject == e.head and ks[0].type == a.elem and ks[1].subject == e.tail
              and ks[1].type == a, d, "premises")
    elif r == "lcase":
        _need(isinstance(e, ListCase), d, "shape")
        s, n, c = ks
        _need(s.ctx == ctx and n.ctx == ctx and s.subject == e.subject
              and isinstance(s.type, ListT), d, "scrutinee")
        _need(n.subject == e.nil_arm and n.type == a, d, "nil arm")
        want = ctx_extend(ctx_extend(ctx, e.h, s.type.elem), e.t, s.type)
        _need(c.ctx == want and c.subject == e.cons_arm and c.type == a, d, "cons arm")


def _validate_binding(d: Deriv) -> None:
    e, a, ctx, ks = d.subject, d.type, d.ctx, d.children
    d0 = ks[0]
    _need(d0.ctx == ctx, d, "bound premise context")
    if d.rule == "orE":
        _need(isinstance(d0.type, Union), d, "scrutinee must have a union type")
        parts = (d0.type.left, d0.type.right)
    else:
        parts = (d0.type,)
    if d.info and d.info[0] == "let":
        _need(isinstance(e, Let) and d0.subject == e.bound, d, "let form")
        for k, part in zip(ks[1:], parts):
            _need(k.ctx == ctx_extend(ctx, e.x, part) and k.subject == e.body and k.type == a,
                  d, "let body")
        return
    _need(len(d.info) == 1 + 1 + len(parts) and d.info[0] == "ctx", d, "context info")
    E, names = d.info[1], d.info[2:]
    _need(plug(E, d0.subject) == e, d, "subject must be E[e0]")
    used = all_names(e)
    for k, part, x in zip(ks[1:], parts, names):
        _need(x not in used, d, "binder must be fresh")
        _need(k.ctx == ctx_extend(ctx, x, part) and k.subject == plug(E, Var(x))
              and k.type == a, d, "body premise")


# ---------------------------------------------------------------------------
# Subjects with coercions inserted

def _assemble(rule: str, ctx: Ctx, e: Term, a: Type, kids: tuple, info: tuple):
    """Rebuild a node's subject from its premises.

    Mode switches wrap a subexpression in a coercion, so the subject of every
    node above it changes too.  Where two premises disagree (andI, the arms of
    orE) their subjects are joined with a merge and each premise is wrapped in
    merge1/merge2.
    """
    if not kids:
        return e, kids, info
    s = [k.subject for k in kids]
    if rule in ("merge1", "merge2"):
        new = Merge(s[0], e.right) if rule == "merge1" else Merge(e.left, s[0])
    elif rule == "fix":
        new = Fix(e.x, s[0])
    elif rule == "arrI":
        new = Lam(e.x, s[0])
    elif rule == "arrE":
        new = App(s[0], s[1])
    elif rule in ("andE1", "andE2", "orI1", "orI2", "atom"):
        new = s[0]
    elif rule == "anno":
        new = Anno(s[0], e.type)
    elif rule == "recI":
        new = RecordExp(e.label, s[0])
    elif rule == "recE":
        new = FieldProj(s[0], e.label)
    elif rule == "cons":
        new = Cons(s[0], s[1])
    elif rule == "lcase":
        new = ListCase(s[0], s[1], e.h, e.t, s[2])
    elif rule == "andI":
        if s[0] == s[1]:
            new = s[0]
        else:
            new, kids = _join(ctx, kids)
    elif rule in ("direct", "orE"):
        return _assemble_binding(ctx, e, kids, info)
    else:
        return e, kids, info
    return (e if new == e else new), kids, info


def _join(ctx: Ctx, kids: tuple):
    """Premises with different subjects become the two sides of one merge."""
    m = Merge(kids[0].subject, kids[1].subject)
    node = Elaborator.node
    return m, (node("merge1", kids[0].ctx, m, kids[0].type, (kids[0],)),
               node("merge2", kids[1].ctx, m, kids[1].type, (kids[1],)))


def _assemble_binding(ctx: Ctx, e: Term, kids: tuple, info: tuple):
    d0, bodies = kids[0], kids[1:]
    if info[0] == "ctx":
        names = info[2:]
        holes = [_hole_context(b.subject, x) for b, x in zip(bodies, names)]
        if all(h is not None and h == holes[0] for h in holes):
            new = plug(holes[0], d0.subject)
            return (e if new == e else new), kids, ("ctx", holes[0]) + names
        x = names[0]
    else:
        x = e.x
    if len(bodies) == 2 and bodies[0].subject != bodies[1].subject:
        body, bodies = _join(ctx, bodies)
    else:
        body = bodies[0].subject
    new = Let(x, d0.subject, body)
    return (e if new == e else new), (d0,) + tuple(bodies), ("let",)


def _hole_context(t: Term, x: str):
    """The evaluation context E with t = E[x] and x nowhere else, if any."""
    if t == Var(x):
        return ()
    for frame, sub in _frames(t):
        inner = _hole_context(sub, x)
        if inner is not None:
            ctx = (frame,) + inner
            if x not in free_vars(plug(ctx, Unit())):
                return ctx
    return None


# ---------------------------------------------------------------------------
# Algorithm

class Elaborator:
    def __init__(self, avoid=()):
        self.avoid = set(avoid)
        self.counter = 0
        # inside the coercion-free pass of merge checking
        self.strict = False

    def fresh(self, stem: str = "u") -> str:
        while True:
            self.counter += 1
            name = f"{stem}'{self.counter}"
            if name not in self.avoid:
                self.avoid.add(name)
                return name

    # -- node constructors ------------------------------------------------
    @staticmethod
    def node(rule, ctx, e, a, kids=(), info=()) -> Deriv:
        e, kids, info = _assemble(rule, ctx, e, a, tuple(kids), info)
        d = Deriv(rule, ctx, e, a, None, kids, info)
        return replace(d, target=rule_target(d, [k.target for k in kids]))

    def and_e(self, d: Deriv, k: int) -> Deriv:
        part = d.type.left if k == 1 else d.type.right
        return self.node(f"andE{k}", d.ctx, d.subject, part, (d,))

    def components(self, d: Deriv) -> Iterator[Deriv]:
        """``d`` followed by every andE projection of it, left to right."""
        yield d
        if isinstance(d.type, Inter):
            yield from self.components(self.and_e(d, 1))
            yield from self.components(self.and_e(d, 2))

    # -- checking -----------------------------------------------------------
    def check(self, ctx: Ctx, e: Term, a: Type) -> Deriv:
        loc = e.loc
        if isinstance(a, Inter):
            d1 = self.check(ctx, e, a.left)
            d2 = self.check(ctx, e, a.right)
            return self.node("andI", ctx, e, a, (d1, d2))
        if isinstance(e, Merge):
            if not self.strict:
                d = self.strict_merge(ctx, e, a)
                if d is not None:
                    return d
            try:
                return self.node("merge1", ctx, e, a, (self.check(ctx, e.left, a),))
            except TypeError_ as err1:
                try:
                    return self.node("merge2", ctx, e, a, (self.check(ctx, e.right, a),))
                except TypeError_ as err2:
                    raise TypeError_(f"no branch of the merge checks against {print_type(a)}",
                                     loc, branches=(err1, err2)) from None
        if isinstance(a, Top):
            try:
                d0 = self.synth(ctx, e)
            except TypeError_:
                d0 = None
            if d0 is not None and d0.type == a:
                return d0
            if is_value_in(ctx, e):
                return self.node("topI", ctx, e, a)
            if d0 is not None:
                x = self.fresh_for(ctx, e)
                body = self.node("topI", ctx_extend(ctx, x, d0.type), Var(x), a)
                return self.node("direct", ctx, e, a, (d0, body), ("ctx", (), x))
        if isinstance(e, Var) and ctx_lookup(ctx, e.name) == a:
            return self.node("var", ctx, e, a)
        d = self.check_intro(ctx, e, a)
        if d is not None:
            return d
        if isinstance(a, Union):
            try:
                return self.node("orI1", ctx, e, a, (self.check(ctx, e, a.left),))
            except TypeError_:
                pass
            try:
                return self.node("orI2", ctx, e, a, (self.check(ctx, e, a.right),))
            except TypeError_:
                pass
        if isinstance(e, Let):
            return self.let(ctx, e, a)
        if isinstance(e, ListCase):
            return self.list_case(ctx, e, a)
        if isinstance(e, App):
            return self.check_app(ctx, e, a)
        return self.switch(ctx, e, a)

    def strict_merge(self, ctx: Ctx, e: Merge, a: Type) -> Optional[Deriv]:
        """Try both branches with coercions disabled, left first."""
        self.strict = True
        try:
            for rule, part in (("merge1", e.left), ("merge2", e.right)):
                try:
                    return self.node(rule, ctx, e, a, (self.check(ctx, part, a),))
                except TypeError_:
                    continue
            return None
        finally:
            self.strict = False

    def fresh_for(self, ctx: Ctx, e: Term) -> str:
        self.avoid |= all_names(e)
        self.avoid |= {n for n, *_ in ctx}
        return self.fresh()

    def check_intro(self, ctx: Ctx, e: Term, a: Type) -> Optional[Deriv]:
        if isinstance(e, Lam) and isinstance(a, Arrow):
            body = self.check(ctx_extend(ctx, e.x, a.dom), e.body, a.cod)
            return self.node("arrI", ctx, e, a, (body,))
        if isinstance(e, Fix):
            body = self.check(ctx_extend(ctx, e.x, a, True), e.body, a)
            return self.node("fix", ctx, e, a, (body,))
        if isinstance(e, RecordExp) and isinstance(a, RecT) and a.label == e.label:
            return self.node("recI", ctx, e, a, (self.check(ctx, e.payload, a.payload),))
        if isinstance(e, Nil) and isinstance(a, ListT):
            return self.node("nil", ctx, e, a)
        if isinstance(e, Cons) and isinstance(a, ListT):
            h = self.check(ctx, e.head, a.elem)
            t = self.check(ctx, e.tail, a)
            return self.node("cons", ctx, e, a, (h, t))
        if a in lit_types(e):
            return self.node("lit", ctx, e, a)
        return None

    def check_app(self, ctx: Ctx, e: App, c: Type) -> Deriv:
        if isinstance(e.fun, Lam):
            try:
                d2 = self.synth(ctx, e.arg)
            except TypeError_:
                return self.switch(ctx, e, c)
            if isinstance(d2.type, Union):
                try:
                    return self.union_app(ctx, e, d2, c)
                except TypeError_:
                    pass
            try:
                d1 = self.check(ctx, e.fun, Arrow(d2.type, c))
            except TypeError_ as err:
                # the argument's overload was picked blindly; try the others
                for alt in self.other_overloads(ctx, e.arg):
                    try:
                        d1 = self.check(ctx, e.fun, Arrow(alt.type, c))
                    except TypeError_:
                        continue
                    return self.node("arrE", ctx, e, c, (d1, alt))
                raise err from None
            return self.node("arrE", ctx, e, c, (d1, d2))
        try:
            return self.switch(ctx, e, c)
        except TypeError_ as err:
            try:
                d2 = self.synth(ctx, e.arg)
            except TypeError_:
                raise err from None
            if isinstance(d2.type, Union) and is_value_in(ctx, e.fun):
                try:
                    return self.union_app(ctx, e, d2, c)
                except TypeError_:
                    pass
            try:
                d1 = self.check(ctx, e.fun, Arrow(d2.type, c))
            except TypeError_:
                raise err from None
            return self.node("arrE", ctx, e, c, (d1, d2))

    def other_overloads(self, ctx: Ctx, e: Term) -> Iterator[Deriv]:
        """Typings of an application ``f a`` through the second and later
        arrow components of ``f``'s type whose domain accepts ``a``."""
        if not isinstance(e, App) or isinstance(e.fun, Lam):
            return
        try:
            d1 = self.synth(ctx, e.fun)
        except TypeError_:
            return
        arrows = [c for c in self.components(d1) if isinstance(c.type, Arrow)]
        first = True
        for cand in arrows:
            try:
                d2 = self.check(ctx, e.arg, cand.type.dom)
            except TypeError_:
                continue
            if first:
                first = False
                continue
            yield self.node("arrE", ctx, e, cand.type.cod, (cand, d2))

    def union_app(self, ctx: Ctx, e: App, d0: Deriv, c: Optional[Type]) -> Deriv:
        """orE with evaluation context ``v []``; synthesizes when ``c`` is None."""
        frame = (("app2", e.fun),)
        # one binder for both arms, so a let-form fallback can share it
        x1 = x2 = self.fresh_for(ctx, e)
        u = d0.type
        ctx1, ctx2 = ctx_extend(ctx, x1, u.left), ctx_extend(ctx, x2, u.right)
        if c is None:
            b1 = self.synth(ctx1, App(e.fun, Var(x1)))
            c = b1.type
        else:
            b1 = self.check(ctx1, App(e.fun, Var(x1)), c)
        b2 = self.check(ctx2, App(e.fun, Var(x2)), c)
        return self.node("orE", ctx, e, c, (d0, b1, b2), ("ctx", frame, x1, x2))

    def let(self, ctx: Ctx, e: Let, c: Optional[Type]) -> Deriv:
        d0 = self.synth(ctx, e.bound)
        b = d0.type
        if isinstance(b, Union):
            c1 = ctx_extend(ctx, e.x, b.left)
            n1 = self.synth(c1, e.body) if c is None else self.check(c1, e.body, c)
            c = n1.type
            n2 = self.check(ctx_extend(ctx, e.x, b.right), e.body, c)
            return self.node("orE", ctx, e, c, (d0, n1, n2), ("let",))
        cx = ctx_extend(ctx, e.x, b)
        n = self.synth(cx, e.body) if c is None else self.check(cx, e.body, c)
        return self.node("direct", ctx, e, n.type, (d0, n), ("let",))

    def list_case(self, ctx: Ctx, e: ListCase, c: Optional[Type]) -> Deriv:
        ds = self.synth(ctx, e.subject)
        for cand in self.components(ds):
            if isinstance(cand.type, ListT):
                ds = cand
                break
        else:
            raise TypeError_("lcase subject is not a list", e.loc)
        n = self.synth(ctx, e.nil_arm) if c is None else self.check(ctx, e.nil_arm, c)
        c = n.type
        cx = ctx_extend(ctx_extend(ctx, e.h, ds.type.elem), e.t, ds.type)
        k = self.check(cx, e.cons_arm, c)
        return self.node("lcase", ctx, e, c, (ds, n, k))

    def switch(self, ctx: Ctx, e: Term, a: Type) -> Deriv:
        return self.coerce(self.synth(ctx, e), a)

    def coerce(self, d: Deriv, a: Type) -> Deriv:
        ctx, e, b = d.ctx, d.subject, d.type
        if b == a:
            return d
        for cand in self.components(d):
            if cand.type == a:
                return cand
        for cand in self.components(d):
            t = cand.type
            if isinstance(t, Base) and isinstance(a, Base) and atom_le(t.name, a.name):
                return self.node("atom", ctx, e, a, (cand,))
        if self.strict:
            raise TypeError_("type mismatch", e.loc, expected=a, inferred=b)
        try:
            co = subtype(b, a)
        except NotASubtype:
            raise TypeError_("type mismatch", e.loc, expected=a, inferred=b) from None
        if co.rule_trace[0] in ("andL1", "andL2"):
            # the coercion only covers one component: project to it first
            return self.coerce(self.and_e(d, int(co.rule_trace[0][-1])), a)
        dc = self.check(ctx, co.expr, Arrow(b, a))
        return self.node("arrE", ctx, App(co.expr, e), a, (dc, d))

    # -- synthesis ----------------------------------------------------------
    def synth(self, ctx: Ctx, e: Term) -> Deriv:
        if isinstance(e, Var):
            t = ctx_lookup(ctx, e.name)
            if t is None:
                raise TypeError_(f"unbound variable {e.name}", e.loc)
            return self.node("var", ctx, e, t)
        if isinstance(e, Unit):
            return self.node("topI", ctx, e, TOP)
        if isinstance(e, (IntLit, RealLit, StrLit)):
            return self.node("lit", ctx, e, lit_types(e)[0])
        if isinstance(e, Prim):
            return self.node("prim", ctx, e, PRIMITIVES[e.name].type)
        if isinstance(e, Anno):
            return self.node("anno", ctx, e, e.type, (self.check(ctx, e.subject, e.type),))
        if isinstance(e, Merge):
            return self._synth_merge(ctx, e)
        if isinstance(e, App):
            return self.synth_app(ctx, e)
        if isinstance(e, FieldProj):
            d = self.synth(ctx, e.subject)
            for cand in self.components(d):
                if isinstance(cand.type, RecT) and cand.type.label == e.label:
                    return self.node("recE", ctx, e, cand.type.payload, (cand,))
            raise TypeError_(f"no field {e.label}", e.loc, expected=RecT(e.label, TOP),
                             inferred=d.type)
        if isinstance(e, Let):
            return self.let(ctx, e, None)
        if isinstance(e, ListCase):
            return self.list_case(ctx, e, None)
        if isinstance(e, RecordExp):
            p = self.synth(ctx, e.payload)
            return self.node("recI", ctx, e, RecT(e.label, p.type), (p,))
        if isinstance(e, Cons):
            h = self.synth(ctx, e.head)
            a = ListT(h.type)
            return self.node("cons", ctx, e, a, (h, self.check(ctx, e.tail, a)))
        if isinstance(e, Fix):
            raise CannotSynthesize("fix needs annotation", e.loc)
        if isinstance(e, Lam):
            raise CannotSynthesize("cannot synthesize a type for a function; add an annotation",
                                   e.loc)
        raise CannotSynthesize(f"cannot synthesize a type for {print_source(e)}", e.loc)

    def _synth_merge(self, ctx: Ctx, e: Merge) -> Deriv:
        try:
            d = self.synth(ctx, e.left)
            return self.node("merge1", ctx, e, d.type, (d,))
        except TypeError_ as err1:
            try:
                d = self.synth(ctx, e.right)
                return self.node("merge2", ctx, e, d.type, (d,))
            except TypeError_ as err2:
                raise TypeError_("neither branch of the merge synthesizes a type", e.loc,
                                 branches=(err1, err2)) from None

    def synth_app(self, ctx: Ctx, e: App) -> Deriv:
        try:
            d1 = self.synth(ctx, e.fun)
        except TypeError_ as err:
            if not isinstance(e.fun, Lam):
                raise
            # redex with a bare lambda head: type the argument first
            try:
                d2 = self.synth(ctx, e.arg)
            except TypeError_:
                raise err from None
            if isinstance(d2.type, Union):
                try:
                    return self.union_app(ctx, e, d2, None)
                except TypeError_:
                    pass
            body = self.synth(ctx_extend(ctx, e.fun.x, d2.type), e.fun.body)
            f = self.node("arrI", ctx, e.fun, Arrow(d2.type, body.type), (body,))
            return self.node("arrE", ctx, e, body.type, (f, d2))
        failures = []
        for cand in self.components(d1):
            if isinstance(cand.type, Arrow):
                try:
                    d2 = self.check(ctx, e.arg, cand.type.dom)
                except TypeError_ as err:
                    failures.append(err)
                    continue
                return self.node("arrE", ctx, e, cand.type.cod, (cand, d2))
        if is_value_in(ctx, e.fun):
            try:
                d0 = self.synth(ctx, e.arg)
            except TypeError_:
                d0 = None
            if d0 is not None and isinstance(d0.type, Union):
                try:
                    return self.union_app(ctx, e, d0, None)
                except TypeError_:
                    pass
        if not failures:
            raise TypeError_(f"applying a non-function of type {print_type(d1.type)}", e.loc)
        if len(failures) == 1:
            raise failures[0]
        raise TypeError_("no overload accepts the argument", e.arg.loc or e.loc,
                         branches=tuple(failures))


def check(ctx: Ctx, e: Term, a: Type) -> tuple[Term, Deriv]:
    el = Elaborator(all_names(e) | {n for n, *_ in ctx})
    d = el.check(ctx, e, a)
    return d.target, d


def synth(ctx: Ctx, e: Term) -> tuple[Type, Term, Deriv]:
    el = Elaborator(all_names(e) | {n for n, *_ in ctx})
    d = el.synth(ctx, e)
    return d.type, d.target, d


# ---------------------------------------------------------------------------
# Let-normalization and whole programs

def let_normalize(e: Term, _counter=None, _avoid=None) -> Term:
    """Name non-variable, non-value arguments and payloads with synthetic Lets."""
    if _avoid is None:
        _avoid = all_names(e)
        _counter = [0]

    def fresh():
        while True:
            _counter[0] += 1
            n = f"t'{_counter[0]}"
            if n not in _avoid:
                _avoid.add(n)
                return n

    def go(t: Term) -> Term:
        t = map_children(t, lambda _, c: go(c))
        if isinstance(t, App) and _needs_name(t.arg):
            x = fresh()
            return Let(x, t.arg, App(t.fun, Var(x)), synthetic=True)
        if isinstance(t, RecordExp) and _needs_name(t.payload):
            x = fresh()
            return Let(x, t.payload, RecordExp(t.label, Var(x)), synthetic=True)
        if isinstance(t, Cons) and (_needs_name(t.head) or _needs_name(t.tail)):
            binds, parts = [], []
            for part in (t.head, t.tail):
                if _needs_name(part):
                    x = fresh()
                    binds.append((x, part))
                    parts.append(Var(x))
                else:
                    parts.append(part)
            out: Term = Cons(parts[0], parts[1])
            for x, b in reversed(binds):
                out = Let(x, b, out, synthetic=True)
            return out
        return t

    return go(e)


def _needs_name(e: Term) -> bool:
    return not isinstance(e, Var) and not is_source_value(e) and not isinstance(e, Anno)


def _denormalize(e: Term) -> Term:
    """Undo synthetic Lets (inverse of let_normalize)."""
    from .syntax import subst1
    e = map_children(e, lambda _, c: _denormalize(c))
    if isinstance(e, Let) and e.synthetic:
        return subst1(e.body, e.x, e.bound)
    return e


@dataclass(frozen=True)
class ElaboratedDecl:
    name: str
    type: Type
    target: Term
    deriv: Deriv


class DeclError(Exception):
    def __init__(self, name: str, error: TypeError_):
        super().__init__(f"in declaration {name}: {error.message}")
        self.name, self.error = name, error


def elaborate_program(decls, prelude: bool = True) -> tuple[Term, list[ElaboratedDecl]]:
    """Elaborate (name, expr, loc) declarations in order; earlier ones are in scope.

    The whole program becomes nested target applications ``(fn x => N) M``
    whose innermost body is the last declared name.
    """
    out: list[ElaboratedDecl] = []
    ctx = EMPTY_CTX
    for name, e, _loc in decls:
        e_norm = let_normalize(e)
        el = Elaborator(all_names(e_norm) | {n for n, *_ in ctx})
        try:
            try:
                d = el.synth(ctx, e_norm)
            except TypeError_:
                if e_norm == e:
                    raise
                d = Elaborator(all_names(e) | {n for n, *_ in ctx}).synth(ctx, e)
        except TypeError_ as err:
            raise DeclError(name, err) from None
        out.append(ElaboratedDecl(name, d.type, d.target, d))
        ctx = ctx_extend(ctx, name, d.type)
    body: Term = Var(out[-1].name) if out else Unit()
    for decl in reversed(out):
        body = App(Lam(decl.name, body), decl.target)
    return body, out


def program_derivation(decls: list[ElaboratedDecl]) -> Deriv:
    """Derivation for the whole program as nested let-bound direct nodes."""
    ctxs = [EMPTY_CTX]
    for d in decls:
        ctxs.append(ctx_extend(ctxs[-1], d.name, d.type))
    if not decls:
        return Elaborator.node("topI", EMPTY_CTX, Unit(), TOP)
    last = decls[-1]
    body = Elaborator.node("var", ctxs[-1], Var(last.name), last.type)
    for i in range(len(decls) - 1, -1, -1):
        d = decls[i]
        subject = Let(d.name, d.deriv.subject, body.subject)
        body = Elaborator.node("direct", ctxs[i], subject, body.type, (d.deriv, body), ("let",))
    return body


def check_soundness(d: Deriv) -> bool:
    from .target import TargetTypeError, target_typecheck_against
    from .syntax import ctx_translate
    try:
        target_typecheck_against(ctx_translate(d.ctx), d.target, type_translate(d.type))
    except TargetTypeError:
        return False
    return True
