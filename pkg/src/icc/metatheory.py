"""Executable metatheory: inversion lemmas, substitution, value monotonicity and
the simulation that answers each target step with source steps.

Every function here follows the structure of the corresponding proof: a case
per elaboration rule, with the impossible cases raising InvariantViolation.
Steps are returned as ``dynamics.SourceStep`` records so an independent
checker can re-validate them.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Iterator, Optional

from .dynamics import SourceStep, lift_all, plug
from .elaborate import Deriv, Elaborator, is_value_in, rule_target, validate
from .syntax import (
    TOP, App, Arrow, Base, Fix, Inter, Lam, Let, Merge, Term, Type, Unit, Union, Var, alpha_eq,
    free_vars, is_source_value, is_target_value, subst1,
)
from .target import VALUE, Stepped, StuckResult, target_step


class InvariantViolation(Exception):
    pass


class NotAValue(InvariantViolation):
    pass


class Timeout(Exception):
    def __init__(self, steps: int):
        super().__init__(f"no value within {steps} target steps")
        self.steps = steps


node = Elaborator.node


def _unmerge(d: Deriv) -> SourceStep:
    side = "left" if d.rule == "merge1" else "right"
    e = d.subject
    return SourceStep(e, e.left if side == "left" else e.right, f"unmerge-{side}")


def _anno_step(d: Deriv) -> SourceStep:
    return SourceStep(d.subject, d.subject.subject, "anno")


def _split(e: Term) -> SourceStep:
    return SourceStep(e, Merge(e, e), "split")


def _fail(what: str, d: Deriv):
    raise InvariantViolation(f"{what}: unexpected rule {d.rule}")


# ---------------------------------------------------------------------------
# Inversion lemmas

def elab_union_invert(d: Deriv) -> Deriv:
    """From e : A1 \\/ A2 ~> inj_k M0 to e : A_k ~> M0 (subject unchanged)."""
    if d.rule in ("orI1", "orI2"):
        return d.children[0]
    if d.rule in ("merge1", "merge2"):
        inner = elab_union_invert(d.children[0])
        return node(d.rule, d.ctx, d.subject, inner.type, (inner,))
    _fail("union inversion", d)


def elab_sect_invert(d: Deriv):
    """From e : A1 & A2 ~> <M1, M2> to two traces e ~>* e_k with e_k : A_k ~> M_k."""
    if d.rule == "andI":
        return [], d.children[0], [], d.children[1]
    if d.rule in ("merge1", "merge2"):
        t1, d1, t2, d2 = elab_sect_invert(d.children[0])
        first = _unmerge(d)
        return [first] + t1, d1, [first] + t2, d2
    if d.rule == "anno":
        t1, d1, t2, d2 = elab_sect_invert(d.children[0])
        first = _anno_step(d)
        return [first] + t1, d1, [first] + t2, d2
    _fail("intersection inversion", d)


def elab_arr_invert(d: Deriv):
    """From e : A -> B ~> fn x => M0 to e ~>* fn x => e0 and x:A |- e0 : B ~> M0."""
    if d.rule == "arrI":
        return [], d.children[0]
    if d.rule in ("merge1", "merge2"):
        t, body = elab_arr_invert(d.children[0])
        return [_unmerge(d)] + t, body
    if d.rule == "anno":
        t, body = elab_arr_invert(d.children[0])
        return [_anno_step(d)] + t, body
    _fail("arrow inversion", d)


def _lam_of(d: Deriv) -> Lam:
    """The source lambda that elab_arr_invert's trace ends in."""
    if d.rule == "arrI":
        return d.subject
    return _lam_of(d.children[0])


# ---------------------------------------------------------------------------
# Substitution

def subst_elab(d1: Deriv, x: str, d2: Deriv) -> Deriv:
    """Replace x by d2's subject throughout d1 (d1's context is d2.ctx, x:A, ...)."""
    base = len(d2.ctx)
    if len(d1.ctx) <= base or d1.ctx[base][0] != x or d1.ctx[:base] != d2.ctx:
        raise InvariantViolation("substitution: context does not extend the value's context")
    binding = d1.ctx[base]
    if binding[1] != d2.type:
        raise InvariantViolation("substitution: type mismatch")
    fixbound = binding[2]
    if not fixbound and not is_value_in(d2.ctx, d2.subject):
        raise NotAValue("substitution needs a source value")
    if not fixbound and not is_target_value(d2.target):
        raise NotAValue("substitution needs a target value")
    if free_vars(d2.subject) or free_vars(d2.target):
        raise InvariantViolation("substitution supports closed replacements only")
    return _subst_d(d1, base, x, d2)


def _drop(ctx, base):
    return ctx[:base] + ctx[base + 1:]


def _shadowed(ctx, base, x) -> bool:
    return any(n == x for n, *_ in ctx[base + 1:])


def _subst_d(d: Deriv, base: int, x: str, d2: Deriv) -> Deriv:
    ctx = _drop(d.ctx, base)
    if _shadowed(d.ctx, base, x):
        return _reindex(d, base)
    if d.rule == "var" and d.subject == Var(x):
        return _weaken(d2, ctx[base:], base)
    v = d2.subject
    subject = subst1(d.subject, x, v)
    info = d.info
    if info and info[0] == "ctx":
        info = ("ctx", _subst_ctx(info[1], x, v)) + info[2:]
    kids = tuple(_subst_d(k, base, x, d2) for k in d.children)
    out = Deriv(d.rule, ctx, subject, d.type, None, kids, info)
    return replace(out, target=rule_target(out, [k.target for k in kids]))


def _reindex(d: Deriv, base: int) -> Deriv:
    kids = tuple(_reindex(k, base) for k in d.children)
    return replace(d, ctx=_drop(d.ctx, base), children=kids)


def _weaken(d: Deriv, extra: tuple, at: int) -> Deriv:
    """Insert ``extra`` bindings after the first ``at`` entries of every context in d."""
    kids = tuple(_weaken(k, extra, at) for k in d.children)
    return replace(d, ctx=d.ctx[:at] + extra + d.ctx[at:], children=kids)


def _subst_ctx(ectx: tuple, x: str, v: Term) -> tuple:
    out = []
    for frame in ectx:
        out.append((frame[0],) + tuple(subst1(p, x, v) if isinstance(p, Term) else p
                                       for p in frame[1:]))
    return tuple(out)


# ---------------------------------------------------------------------------
# Value monotonicity

def value_mono(d: Deriv):
    """From e : A ~> W (W a value) to a trace e ~>* v and v : A ~> W."""
    if not is_target_value(d.target):
        raise InvariantViolation("value monotonicity needs a target value")
    r = d.rule
    if r in ("var", "topI", "arrI", "lit", "prim", "nil"):
        if not is_value_in(d.ctx, d.subject):
            raise InvariantViolation(f"{r}: subject is not a value")
        return [], d
    if r == "andI":
        e = d.subject
        t1, d1 = value_mono(d.children[0])
        t2, d2 = value_mono(d.children[1])
        v1, v2 = d1.subject, d2.subject
        steps = [_split(e)] + lift_all(t1, (("merge1", e),)) + lift_all(t2, (("merge2", v1),))
        subject = Merge(v1, v2)
        m1 = node("merge1", d.ctx, subject, d1.type, (d1,))
        m2 = node("merge2", d.ctx, subject, d2.type, (d2,))
        return steps, node("andI", d.ctx, subject, d.type, (m1, m2))
    if r in ("merge1", "merge2"):
        t, dv = value_mono(d.children[0])
        return [_unmerge(d)] + t, dv
    if r == "anno":
        t, dv = value_mono(d.children[0])
        return [_anno_step(d)] + t, dv
    if r in ("orI1", "orI2", "atom"):
        t, dv = value_mono(d.children[0])
        return t, node(r, d.ctx, dv.subject, d.type, (dv,))
    if r == "recI":
        t, dv = value_mono(d.children[0])
        e = d.subject
        subject = replace(e, payload=dv.subject)
        return lift_all(t, (("record", e.label),)), node(r, d.ctx, subject, d.type, (dv,))
    if r == "cons":
        e = d.subject
        th, dh = value_mono(d.children[0])
        tt, dt = value_mono(d.children[1])
        steps = lift_all(th, (("cons1", e.tail),)) + lift_all(tt, (("cons2", dh.subject),))
        subject = replace(e, head=dh.subject, tail=dt.subject)
        return steps, node(r, d.ctx, subject, d.type, (dh, dt))
    _fail("value monotonicity", d)


# ---------------------------------------------------------------------------
# Consistency

@dataclass(frozen=True)
class SimulationCertificate:
    source_steps: tuple
    derivation_after: Deriv
    target_before: Term
    target_after: Term
    target_rule: str


def simulate(d: Deriv, step: Optional[Stepped] = None) -> SimulationCertificate:
    """Answer the target step of d.target with source steps preserving elaboration."""
    if step is None:
        step = target_step(d.target)
    if not isinstance(step, Stepped):
        raise InvariantViolation("target term does not step")
    steps, d2 = _sim(d)
    if not alpha_eq(d2.target, step.next):
        raise InvariantViolation("simulated derivation disagrees with the target step")
    return SimulationCertificate(tuple(steps), d2, d.target, step.next, step.name)


def _sim(d: Deriv):
    r, e, ks, ctx = d.rule, d.subject, d.children, d.ctx
    if r in ("var", "topI", "arrI", "lit", "prim", "nil"):
        _fail("consistency (target is a value)", d)
    if r == "andI":
        d1, d2 = ks
        if not is_target_value(d1.target):
            t, d1 = _sim(d1)
            steps = [_split(e)] + lift_all(t, (("merge1", e),))
        else:
            t, d2 = _sim(d2)
            steps = [_split(e)] + lift_all(t, (("merge2", e),))
        subject = Merge(d1.subject, d2.subject)
        m1 = node("merge1", ctx, subject, d1.type, (d1,))
        m2 = node("merge2", ctx, subject, d2.type, (d2,))
        return steps, node("andI", ctx, subject, d.type, (m1, m2))
    if r in ("andE1", "andE2"):
        d0 = ks[0]
        if not is_target_value(d0.target):
            t, d0 = _sim(d0)
            return t, node(r, ctx, d0.subject, d.type, (d0,))
        t1, k1, t2, k2 = elab_sect_invert(d0)
        return (t1, k1) if r == "andE1" else (t2, k2)
    if r in ("merge1", "merge2"):
        t, dk = _sim(ks[0])
        return [_unmerge(d)] + t, dk
    if r == "anno":
        t, dk = _sim(ks[0])
        return [_anno_step(d)] + t, dk
    if r in ("orI1", "orI2", "atom"):
        t, dk = _sim(ks[0])
        return t, node(r, ctx, dk.subject, d.type, (dk,))
    if r == "fix":
        step = SourceStep(e, subst1(e.body, e.x, e), "fix")
        return [step], subst_elab(ks[0], e.x, d)
    if r == "arrE":
        return _sim_app(d)
    if r in ("direct", "orE"):
        return _sim_binding(d)
    _fail("consistency", d)


def _sim_app(d: Deriv):
    ctx = d.ctx
    d1, d2 = d.children
    e2 = d2.subject
    if not is_target_value(d1.target):
        t, d1 = _sim(d1)
        return lift_all(t, (("app1", e2),)), node("arrE", ctx, App(d1.subject, e2), d.type,
                                                  (d1, d2))
    if not is_target_value(d2.target):
        t1, d1v = value_mono(d1)
        v1 = d1v.subject
        t2, d2s = _sim(d2)
        steps = lift_all(t1, (("app1", e2),)) + lift_all(t2, (("app2", v1),))
        return steps, node("arrE", ctx, App(v1, d2s.subject), d.type, (d1v, d2s))
    # beta: the function position elaborates to a lambda
    t1, body = elab_arr_invert(d1)
    lam = _lam_of(d1)
    t2, d2v = value_mono(d2)
    v2 = d2v.subject
    beta = SourceStep(App(lam, v2), subst1(lam.body, lam.x, v2), "beta")
    steps = lift_all(t1, (("app1", e2),)) + lift_all(t2, (("app2", lam),)) + [beta]
    return steps, subst_elab(body, lam.x, d2v)


def _sim_binding(d: Deriv):
    ctx, e, ks = d.ctx, d.subject, d.children
    d0 = ks[0]
    let_form = d.info[0] == "let"
    ectx = (("let1", e.x, e.body),) if let_form else d.info[1]
    if not is_target_value(d0.target):
        t, d0s = _sim(d0)
        if let_form:
            subject = Let(e.x, d0s.subject, e.body)
        else:
            subject = plug(ectx, d0s.subject)
        return lift_all(t, ectx), node(d.rule, ctx, subject, d.type, (d0s,) + ks[1:], d.info)
    t, d0v = value_mono(d0)
    steps = lift_all(t, ectx)
    v0 = d0v.subject
    if d.rule == "orE":
        k = d0v.target.k
        arg = elab_union_invert(d0v)
        body = ks[k]
        x = e.x if let_form else d.info[1 + k]
    else:
        arg, body = d0v, ks[1]
        x = e.x if let_form else d.info[2]
    if let_form:
        steps.append(SourceStep(Let(e.x, v0, e.body), subst1(e.body, e.x, v0), "let-beta"))
    return steps, subst_elab(body, x, arg)


@dataclass(frozen=True)
class StarResult:
    value: Term
    deriv: Deriv
    target: Term
    steps: tuple
    # (target step name, target after, source steps) per target step
    rounds: tuple


def simulate_star(d: Deriv, step_budget: int, check: bool = True) -> StarResult:
    """Iterate simulate until the target is a value, then apply value_mono."""
    from .dynamics import validate_trace
    start = d.subject
    all_steps: list[SourceStep] = []
    rounds = []
    for _ in range(step_budget + 1):
        r = target_step(d.target)
        if r is VALUE:
            t, dv = value_mono(d)
            all_steps.extend(t)
            if t:
                rounds.append(("value", d.target, tuple(t)))
            if check:
                validate(dv)
                final = validate_trace(start, all_steps)
                if not alpha_eq(final, dv.subject) or not is_source_value(dv.subject):
                    raise InvariantViolation("final source term is not the certified value")
            return StarResult(dv.subject, dv, dv.target, tuple(all_steps), tuple(rounds))
        if isinstance(r, StuckResult):
            raise InvariantViolation(f"well-typed target term is stuck: {r.reason}")
        if len(rounds) >= step_budget:
            break
        cert = simulate(d, r)
        if check:
            validate(cert.derivation_after)
        all_steps.extend(cert.source_steps)
        rounds.append((cert.target_rule, cert.target_after, cert.source_steps))
        d = cert.derivation_after
    raise Timeout(step_budget)


# ---------------------------------------------------------------------------
# Enumeration and random generation of closed core terms

def term_size(e: Term) -> int:
    """Number of edges in the syntax tree: () and x have size 0, (),,() size 2."""
    from .syntax import size
    return size(e) - 1


def _terms(nodes: int, depth: int, memo: dict) -> list[Term]:
    key = (nodes, depth)
    if key in memo:
        return memo[key]
    out: list[Term] = []
    if nodes == 1:
        out.append(Unit())
        out.extend(Var(f"x{i}") for i in range(depth))
    else:
        name = f"x{depth}"
        for body in _terms(nodes - 1, depth + 1, memo):
            out.append(Lam(name, body))
            out.append(Fix(name, body))
        for left_n in range(1, nodes - 1):
            lefts = _terms(left_n, depth, memo)
            rights = _terms(nodes - 1 - left_n, depth, memo)
            for a in lefts:
                for b in rights:
                    out.append(App(a, b))
                    out.append(Merge(a, b))
    memo[key] = out
    return out


def enumerate_core_terms(max_size: int) -> Iterator[Term]:
    """Every closed core term with term_size <= max_size, once up to alpha."""
    memo: dict = {}
    for n in range(1, max_size + 2):
        yield from _terms(n, 0, memo)


def generate_random(seed: int, size: int, scope: tuple = ()) -> Term:
    """Random core term of the given term_size, closed under ``scope``."""
    rng = random.Random(seed)
    return _gen(rng, size + 1, list(scope))


def _gen(rng: random.Random, nodes: int, scope: list) -> Term:
    if nodes == 1:
        choices = len(scope) + 1
        i = rng.randrange(choices)
        return Unit() if i == len(scope) else Var(scope[i])
    if nodes == 2:
        kind = rng.choice(("lam", "fix"))
    else:
        kind = rng.choice(("lam", "fix", "app", "merge", "app", "merge"))
    if kind in ("lam", "fix"):
        name = f"x{len(scope)}"
        body = _gen(rng, nodes - 1, scope + [name])
        return (Lam if kind == "lam" else Fix)(name, body)
    left_n = rng.randint(1, nodes - 2)
    a = _gen(rng, left_n, scope)
    b = _gen(rng, nodes - 1 - left_n, scope)
    return (App if kind == "app" else Merge)(a, b)


def enumerate_types(max_size: int, atoms=(TOP,)) -> list[Type]:
    """All types over ``atoms`` and the three connectives with at most max_size nodes."""
    by_size: dict[int, list[Type]] = {1: list(atoms)}
    for n in range(2, max_size + 1):
        out = []
        for left_n in range(1, n - 1):
            for a in by_size[left_n]:
                for b in by_size[n - 1 - left_n]:
                    out.extend((Arrow(a, b), Inter(a, b), Union(a, b)))
        by_size[n] = out
    return [t for n in range(1, max_size + 1) for t in by_size[n]]


CORE_ATOMS = (TOP, Base("int"), Base("real"), Base("string"), Base("nat"), Base("pos"))
