"""The nondeterministic source step relation and evaluation contexts.

A step is reported as the redex rule plus the path of congruence frames that
lead to the redex, outermost first; ``step_name`` renders it as
``app1/merge1/beta``-style text.
"""

from __future__ import annotations

from dataclasses import dataclass

from .prelude import PRIMITIVES, Stuck, source_delta
from .syntax import (
    Anno, App, Cons, FieldProj, Fix, Lam, Let, ListCase, Merge, Nil, Prim, RecordExp, Term,
    alpha_eq, is_source_value, spine, subst1,
)

# Frames are tuples whose first element names the congruence rule:
#   ("app1", arg)             E e
#   ("app2", fun)             v E
#   ("merge1", right)         E ,, e
#   ("merge2", left)          e ,, E
#   ("let1", x, body)         let x = E in body end
#   ("record", label)         {l = E}
#   ("field", label)          E.l
#   ("cons1", tail)           cons E e
#   ("cons2", head)           cons v E
#   ("lcase", nil, h, t, c)   lcase E of ...
EvalContext = tuple
HOLE: EvalContext = ()

CONGRUENCES = ("app1", "app2", "merge1", "merge2", "let1", "record", "field", "cons1", "cons2",
               "lcase")
REDEX_RULES = ("beta", "fix", "unmerge-left", "unmerge-right", "split", "let-beta", "select",
               "lcase-nil", "lcase-cons", "delta", "anno")


def wrap(frame: tuple, e: Term) -> Term:
    kind = frame[0]
    if kind == "app1":
        return App(e, frame[1])
    if kind == "app2":
        return App(frame[1], e)
    if kind == "merge1":
        return Merge(e, frame[1])
    if kind == "merge2":
        return Merge(frame[1], e)
    if kind == "let1":
        return Let(frame[1], e, frame[2])
    if kind == "record":
        return RecordExp(frame[1], e)
    if kind == "field":
        return FieldProj(e, frame[1])
    if kind == "cons1":
        return Cons(e, frame[1])
    if kind == "cons2":
        return Cons(frame[1], e)
    if kind == "lcase":
        return ListCase(e, frame[1], frame[2], frame[3], frame[4])
    raise ValueError(f"unknown frame {kind}")


def plug(ctx: EvalContext, e: Term) -> Term:
    for frame in reversed(ctx):
        e = wrap(frame, e)
    return e


def _frames(e: Term) -> list[tuple[tuple, Term]]:
    """Immediate evaluation-position children of ``e`` with their frames."""
    out = []
    if isinstance(e, App):
        out.append((("app1", e.arg), e.fun))
        if is_source_value(e.fun):
            out.append((("app2", e.fun), e.arg))
    elif isinstance(e, Merge):
        out.append((("merge1", e.right), e.left))
        out.append((("merge2", e.left), e.right))
    elif isinstance(e, Let):
        out.append((("let1", e.x, e.body), e.bound))
    elif isinstance(e, RecordExp):
        out.append((("record", e.label), e.payload))
    elif isinstance(e, FieldProj):
        out.append((("field", e.label), e.subject))
    elif isinstance(e, Cons):
        out.append((("cons1", e.tail), e.head))
        if is_source_value(e.head):
            out.append((("cons2", e.head), e.tail))
    elif isinstance(e, ListCase):
        out.append((("lcase", e.nil_arm, e.h, e.t, e.cons_arm), e.subject))
    return out


def decompose(e: Term) -> list[tuple[EvalContext, Term]]:
    """Every split of ``e`` into an evaluation context and the subterm in its hole."""
    out = [(HOLE, e)]
    for frame, sub in _frames(e):
        for ctx, inner in decompose(sub):
            out.append(((frame,) + ctx, inner))
    return out


@dataclass(frozen=True)
class SourceStep:
    frm: Term
    to: Term
    rule: str
    path: tuple = ()

    @property
    def name(self) -> str:
        return step_name(self.rule, self.path)


def step_name(rule: str, path) -> str:
    return "/".join(tuple(path) + (rule,))


def lift(step: SourceStep, frame: tuple) -> SourceStep:
    return SourceStep(wrap(frame, step.frm), wrap(frame, step.to), step.rule,
                      (frame[0],) + tuple(step.path))


def lift_all(steps, ctx: EvalContext) -> list[SourceStep]:
    out = []
    for s in steps:
        for frame in reversed(ctx):
            s = lift(s, frame)
        out.append(s)
    return out


def root_steps(e: Term, include_split: bool = False) -> list[tuple[str, Term]]:
    """Redex rules firing at the root of ``e`` (congruences excluded)."""
    out = []
    if isinstance(e, App):
        if isinstance(e.fun, Lam) and is_source_value(e.arg):
            out.append(("beta", subst1(e.fun.body, e.fun.x, e.arg)))
        head, args = spine(e)
        if (isinstance(head, Prim) and len(args) == PRIMITIVES[head.name].arity
                and all(is_source_value(a) for a in args)):
            try:
                out.append(("delta", source_delta(head.name, args)))
            except Stuck:
                pass
    elif isinstance(e, Fix):
        out.append(("fix", subst1(e.body, e.x, e)))
    elif isinstance(e, Merge):
        out.append(("unmerge-left", e.left))
        out.append(("unmerge-right", e.right))
    elif isinstance(e, Let):
        if is_source_value(e.bound):
            out.append(("let-beta", subst1(e.body, e.x, e.bound)))
    elif isinstance(e, FieldProj):
        if isinstance(e.subject, RecordExp) and e.subject.label == e.label \
                and is_source_value(e.subject.payload):
            out.append(("select", e.subject.payload))
    elif isinstance(e, ListCase):
        s = e.subject
        if isinstance(s, Nil):
            out.append(("lcase-nil", e.nil_arm))
        elif isinstance(s, Cons) and is_source_value(s):
            out.append(("lcase-cons", _subst2(e.cons_arm, e.h, s.head, e.t, s.tail)))
    elif isinstance(e, Anno):
        out.append(("anno", e.subject))
    if include_split:
        out.append(("split", Merge(e, e)))
    return out


def _subst2(body, x, a, y, b):
    from .syntax import subst
    if x == y:
        return subst(body, {y: b})
    return subst(body, {x: a, y: b})


def source_step_candidates(e: Term, include_split: bool = False) -> list[SourceStep]:
    """All one-step successors; ``split`` is only offered at the root."""
    out = []
    for ctx, sub in decompose(e):
        for rule, res in root_steps(sub, include_split and not ctx):
            path = tuple(f[0] for f in ctx)
            out.append(SourceStep(e, plug(ctx, res), rule, path))
    return out


def check_source_step(frm: Term, to: Term, rule: str) -> bool:
    """Does (frm, to) instantiate ``rule``?

    ``rule`` is either a bare redex rule (any evaluation position) or a full
    ``congruence/.../redex`` path, which must then match exactly.  ``split``
    is accepted at any evaluation position.
    """
    parts = rule.split("/")
    redex, path = parts[-1], parts[:-1]
    if redex not in REDEX_RULES:
        return False
    return _check(frm, to, redex, path if path else None)


def _check(frm, to, redex, path) -> bool:
    if path is None or not path:
        if _root_ok(frm, to, redex):
            return True
        if path is not None:
            return False
    for frame, sub in _frames(frm):
        if path is not None and frame[0] != path[0]:
            continue
        if not _same_shape(frame, frm, to):
            continue
        to_sub = _hole_of(frame, to)
        rest = None if path is None else path[1:]
        if _check(sub, to_sub, redex, rest):
            return True
    return False


def _root_ok(frm, to, redex) -> bool:
    if redex == "split":
        return isinstance(to, Merge) and alpha_eq(to.left, frm) and alpha_eq(to.right, frm)
    for rule, res in root_steps(frm):
        if rule == redex and alpha_eq(res, to):
            return True
    return False


def _same_shape(frame, frm, to) -> bool:
    """``to`` has the same constructor as ``frm`` and agrees outside the hole."""
    if type(to) is not type(frm):
        return False
    rebuilt = wrap(frame, _hole_of(frame, to))
    return alpha_eq(rebuilt, to)


def _hole_of(frame, t):
    kind = frame[0]
    if kind == "app1":
        return t.fun
    if kind == "app2":
        return t.arg
    if kind == "merge1":
        return t.left
    if kind == "merge2":
        return t.right
    if kind == "let1":
        return t.bound
    if kind in ("record",):
        return t.payload
    if kind == "field":
        return t.subject
    if kind == "cons1":
        return t.head
    if kind == "cons2":
        return t.tail
    if kind == "lcase":
        return t.subject
    raise ValueError(kind)


def validate_trace(start: Term, steps) -> Term:
    """Check a chain of steps starting at ``start``; return the final term."""
    cur = start
    for s in steps:
        if not alpha_eq(s.frm, cur):
            raise AssertionError(f"trace discontinuity at {s.name}")
        if not check_source_step(s.frm, s.to, s.name):
            raise AssertionError(f"invalid source step {s.name}")
        cur = s.to
    return cur
