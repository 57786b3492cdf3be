"""The target language: type inference by unification and a call-by-value stepper."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .prelude import SIGNATURES, Stuck, apply_delta
from .printer import print_ttype
from .syntax import (
    TUNIT, App, Case, Cons, FieldProj, Fix, Inj, IntLit, Lam, Let, ListCase, Nil, Pair, PrimApp,
    Proj, RealLit, RecordExp, StrLit, TArrow, TBase, Term, TListT, TProd, TRecT, TSum, TType,
    TVarT, Unit, Var, is_target_value, subst, subst1,
)


class TargetTypeError(Exception):
    def __init__(self, message: str, loc=None):
        super().__init__(message)
        self.loc = loc


class _Infer:
    def __init__(self):
        self.sub: dict[int, TType] = {}
        self.ids = itertools.count()

    def var(self) -> TVarT:
        return TVarT(next(self.ids))

    def resolve(self, t: TType) -> TType:
        while isinstance(t, TVarT) and t.id in self.sub:
            t = self.sub[t.id]
        return t

    def zonk(self, t: TType) -> TType:
        t = self.resolve(t)
        if isinstance(t, (TArrow,)):
            return TArrow(self.zonk(t.dom), self.zonk(t.cod))
        if isinstance(t, (TProd, TSum)):
            return type(t)(self.zonk(t.left), self.zonk(t.right))
        if isinstance(t, TRecT):
            return TRecT(t.label, self.zonk(t.payload))
        if isinstance(t, TListT):
            return TListT(self.zonk(t.elem))
        return t

    def occurs(self, v: int, t: TType) -> bool:
        t = self.resolve(t)
        if isinstance(t, TVarT):
            return t.id == v
        if isinstance(t, TArrow):
            return self.occurs(v, t.dom) or self.occurs(v, t.cod)
        if isinstance(t, (TProd, TSum)):
            return self.occurs(v, t.left) or self.occurs(v, t.right)
        if isinstance(t, TRecT):
            return self.occurs(v, t.payload)
        if isinstance(t, TListT):
            return self.occurs(v, t.elem)
        return False

    def unify(self, a: TType, b: TType, m: Term):
        a, b = self.resolve(a), self.resolve(b)
        if a == b:
            return
        if isinstance(a, TVarT) or isinstance(b, TVarT):
            v, t = (a, b) if isinstance(a, TVarT) else (b, a)
            if self.occurs(v.id, t):
                raise TargetTypeError("occurs check failed", m.loc)
            self.sub[v.id] = t
            return
        if isinstance(a, TArrow) and isinstance(b, TArrow):
            self.unify(a.dom, b.dom, m)
            self.unify(a.cod, b.cod, m)
            return
        if type(a) is type(b) and isinstance(a, (TProd, TSum)):
            self.unify(a.left, b.left, m)
            self.unify(a.right, b.right, m)
            return
        if isinstance(a, TRecT) and isinstance(b, TRecT) and a.label == b.label:
            self.unify(a.payload, b.payload, m)
            return
        if isinstance(a, TListT) and isinstance(b, TListT):
            self.unify(a.elem, b.elem, m)
            return
        raise TargetTypeError(
            f"type mismatch: {print_ttype(self.zonk(a))} vs {print_ttype(self.zonk(b))}", m.loc)

    def infer(self, g: dict, m: Term) -> TType:
        if isinstance(m, Var):
            if m.name not in g:
                raise TargetTypeError(f"unbound variable {m.name}", m.loc)
            return g[m.name]
        if isinstance(m, Unit):
            return TUNIT
        if isinstance(m, IntLit):
            return TBase("int")
        if isinstance(m, RealLit):
            return TBase("real")
        if isinstance(m, StrLit):
            return TBase("string")
        if isinstance(m, Lam):
            a = self.var()
            return TArrow(a, self.infer({**g, m.x: a}, m.body))
        if isinstance(m, App):
            f = self.infer(g, m.fun)
            a = self.infer(g, m.arg)
            r = self.var()
            self.unify(f, TArrow(a, r), m)
            return r
        if isinstance(m, Fix):
            a = self.var()
            self.unify(self.infer({**g, m.x: a}, m.body), a, m)
            return a
        if isinstance(m, Pair):
            return TProd(self.infer(g, m.first), self.infer(g, m.second))
        if isinstance(m, Proj):
            a, b = self.var(), self.var()
            self.unify(self.infer(g, m.subject), TProd(a, b), m)
            return a if m.k == 1 else b
        if isinstance(m, Inj):
            a, other = self.infer(g, m.payload), self.var()
            return TSum(a, other) if m.k == 1 else TSum(other, a)
        if isinstance(m, Case):
            a, b = self.var(), self.var()
            self.unify(self.infer(g, m.scrutinee), TSum(a, b), m)
            t1 = self.infer({**g, m.x1: a}, m.arm1)
            t2 = self.infer({**g, m.x2: b}, m.arm2)
            self.unify(t1, t2, m)
            return t1
        if isinstance(m, RecordExp):
            return TRecT(m.label, self.infer(g, m.payload))
        if isinstance(m, FieldProj):
            a = self.var()
            self.unify(self.infer(g, m.subject), TRecT(m.label, a), m)
            return a
        if isinstance(m, Let):
            a = self.infer(g, m.bound)
            return self.infer({**g, m.x: a}, m.body)
        if isinstance(m, Nil):
            return TListT(self.var())
        if isinstance(m, Cons):
            a = self.infer(g, m.head)
            self.unify(self.infer(g, m.tail), TListT(a), m)
            return TListT(a)
        if isinstance(m, ListCase):
            a = self.var()
            self.unify(self.infer(g, m.subject), TListT(a), m)
            t1 = self.infer(g, m.nil_arm)
            t2 = self.infer({**g, m.h: a, m.t: TListT(a)}, m.cons_arm)
            self.unify(t1, t2, m)
            return t1
        if isinstance(m, PrimApp):
            if m.name not in SIGNATURES:
                raise TargetTypeError(f"unknown primitive {m.name}", m.loc)
            args, res = SIGNATURES[m.name]
            if len(args) != len(m.args):
                raise TargetTypeError(f"{m.name} expects {len(args)} arguments", m.loc)
            for want, arg in zip(args, m.args):
                self.unify(self.infer(g, arg), _sig_type(want), arg)
            return _sig_type(res)
        raise TargetTypeError(f"not a target term: {type(m).__name__}", getattr(m, "loc", None))


def _sig_type(name: str) -> TType:
    return TUNIT if name == "unit" else TBase(name)


def target_typecheck_synth(g, m: Term) -> TType:
    """Most general type of ``m`` (may contain type variables)."""
    inf = _Infer()
    return inf.zonk(inf.infer(dict(g), m))


def target_typecheck_against(g, m: Term, t: TType) -> TType:
    inf = _Infer()
    inf.unify(inf.infer(dict(g), m), t, m)
    return inf.zonk(t)


target_typecheck = target_typecheck_synth


# ---------------------------------------------------------------------------
# Small-step evaluation

@dataclass(frozen=True)
class Stepped:
    next: Term
    rule: str
    path: tuple = ()
    output: Optional[str] = None

    @property
    def name(self) -> str:
        return "/".join(self.path + (self.rule,))


@dataclass(frozen=True)
class Value:
    pass


@dataclass(frozen=True)
class StuckResult:
    reason: str


VALUE = Value()


def target_step(m: Term):
    """One leftmost call-by-value step: Stepped, VALUE or StuckResult."""
    if is_target_value(m):
        return VALUE
    try:
        return _step(m)
    except Stuck as s:
        return StuckResult(str(s))


def _congr(kind: str, r: Stepped, rebuild) -> Stepped:
    return Stepped(rebuild(r.next), r.rule, (kind,) + r.path, r.output)


def _step(m: Term) -> Stepped:
    r = _decide(m)
    if isinstance(r, Stepped):
        return r
    kind, child, rebuild = r
    return _congr(kind, _step(child), rebuild)


def _decide(m: Term):
    """For a non-value ``m``: a root Stepped, or (congruence, child, rebuild)."""
    if isinstance(m, App):
        if not is_target_value(m.fun):
            return "app1", m.fun, lambda f: App(f, m.arg)
        if not is_target_value(m.arg):
            return "app2", m.arg, lambda a: App(m.fun, a)
        if isinstance(m.fun, Lam):
            return Stepped(subst1(m.fun.body, m.fun.x, m.arg), "beta")
        raise Stuck("application of a non-function")
    if isinstance(m, Fix):
        return Stepped(subst1(m.body, m.x, m), "fix")
    if isinstance(m, Pair):
        if not is_target_value(m.first):
            return "pair1", m.first, lambda a: Pair(a, m.second)
        return "pair2", m.second, lambda b: Pair(m.first, b)
    if isinstance(m, Proj):
        if not is_target_value(m.subject):
            return "proj", m.subject, lambda s: Proj(m.k, s)
        if isinstance(m.subject, Pair):
            return Stepped(m.subject.first if m.k == 1 else m.subject.second, "proj-of-pair")
        raise Stuck("projection of a non-pair")
    if isinstance(m, Inj):
        return "inj", m.payload, lambda p: Inj(m.k, p)
    if isinstance(m, Case):
        s = m.scrutinee
        if not is_target_value(s):
            return "case", s, lambda t: Case(t, m.x1, m.arm1, m.x2, m.arm2)
        if isinstance(s, Inj):
            arm, x = (m.arm1, m.x1) if s.k == 1 else (m.arm2, m.x2)
            return Stepped(subst1(arm, x, s.payload), "case-inj")
        raise Stuck("case of a non-injection")
    if isinstance(m, RecordExp):
        return "record", m.payload, lambda p: RecordExp(m.label, p)
    if isinstance(m, FieldProj):
        s = m.subject
        if not is_target_value(s):
            return "field", s, lambda t: FieldProj(t, m.label)
        if isinstance(s, RecordExp) and s.label == m.label:
            return Stepped(s.payload, "select")
        raise Stuck("field projection of a non-record")
    if isinstance(m, Let):
        if not is_target_value(m.bound):
            return "let1", m.bound, lambda b: Let(m.x, b, m.body)
        return Stepped(subst1(m.body, m.x, m.bound), "let-beta")
    if isinstance(m, Cons):
        if not is_target_value(m.head):
            return "cons1", m.head, lambda h: Cons(h, m.tail)
        return "cons2", m.tail, lambda t: Cons(m.head, t)
    if isinstance(m, ListCase):
        s = m.subject
        if not is_target_value(s):
            return "lcase", s, lambda t: ListCase(t, m.nil_arm, m.h, m.t, m.cons_arm)
        if isinstance(s, Nil):
            return Stepped(m.nil_arm, "lcase-nil")
        if isinstance(s, Cons):
            body = subst(m.cons_arm, {m.t: s.tail}) if m.h == m.t else \
                subst(m.cons_arm, {m.h: s.head, m.t: s.tail})
            return Stepped(body, "lcase-cons")
        raise Stuck("lcase of a non-list")
    if isinstance(m, PrimApp):
        for i, a in enumerate(m.args):
            if not is_target_value(a):
                def rebuild(x, i=i):
                    return PrimApp(m.name, m.args[:i] + (x,) + m.args[i + 1:])
                return "prim-arg", a, rebuild
        result, printed = apply_delta(m.name, m.args)
        return Stepped(result, "delta", (), printed)
    if isinstance(m, Var):
        raise Stuck(f"free variable {m.name}")
    raise Stuck(f"no rule for {type(m).__name__}")


@dataclass(frozen=True)
class EvalResult:
    status: str  # value | timeout | stuck
    term: Term
    steps: int
    output: str = ""
    reason: str = ""


def target_eval(m: Term, max_steps: int, on_step=None) -> EvalResult:
    if on_step is None:
        return _eval_in_context(m, max_steps)
    out = []
    for k in range(max_steps + 1):
        r = target_step(m)
        if r is VALUE:
            return EvalResult("value", m, k, "".join(out))
        if isinstance(r, StuckResult):
            return EvalResult("stuck", m, k, "".join(out), r.reason)
        if k == max_steps:
            break
        if r.output is not None:
            out.append(r.output)
        m = r.next
        on_step(k + 1, r, m)
    return EvalResult("timeout", m, max_steps, "".join(out))


def _eval_in_context(m: Term, max_steps: int) -> EvalResult:
    """Same steps as iterating target_step, but the evaluation context is kept
    between steps instead of being rediscovered from the root each time."""
    out = []
    stack = []  # rebuild functions, innermost last
    focus = m
    k = 0

    def whole():
        t = focus
        for rebuild in reversed(stack):
            t = rebuild(t)
        return t

    while True:
        if is_target_value(focus):
            if not stack:
                return EvalResult("value", focus, k, "".join(out))
            focus = stack.pop()(focus)
            continue
        try:
            r = _decide(focus)
        except Stuck as s:
            return EvalResult("stuck", whole(), k, "".join(out), str(s))
        if not isinstance(r, Stepped):
            _, focus, rebuild = r
            stack.append(rebuild)
            continue
        if k == max_steps:
            return EvalResult("timeout", whole(), max_steps, "".join(out))
        if r.output is not None:
            out.append(r.output)
        focus = r.next
        k += 1


# ---------------------------------------------------------------------------
# Rule-overlap audit: every schema is matched independently

def applicable_rules(m: Term) -> list[str]:
    """Names of all step rules whose premises hold at the root of ``m``."""
    v = is_target_value
    rules = []

    def steps(t):
        return bool(applicable_rules(t))

    if isinstance(m, App):
        if steps(m.fun):
            rules.append("app1")
        if v(m.fun) and steps(m.arg):
            rules.append("app2")
        if isinstance(m.fun, Lam) and v(m.arg):
            rules.append("beta")
    elif isinstance(m, Fix):
        rules.append("fix")
    elif isinstance(m, Pair):
        if steps(m.first):
            rules.append("pair1")
        if v(m.first) and steps(m.second):
            rules.append("pair2")
    elif isinstance(m, Proj):
        if steps(m.subject):
            rules.append("proj")
        if isinstance(m.subject, Pair) and v(m.subject):
            rules.append("proj-of-pair")
    elif isinstance(m, Inj):
        if steps(m.payload):
            rules.append("inj")
    elif isinstance(m, Case):
        if steps(m.scrutinee):
            rules.append("case")
        if isinstance(m.scrutinee, Inj) and v(m.scrutinee):
            rules.append("case-inj")
    elif isinstance(m, RecordExp):
        if steps(m.payload):
            rules.append("record")
    elif isinstance(m, FieldProj):
        if steps(m.subject):
            rules.append("field")
        if isinstance(m.subject, RecordExp) and m.subject.label == m.label and v(m.subject):
            rules.append("select")
    elif isinstance(m, Let):
        if steps(m.bound):
            rules.append("let1")
        if v(m.bound):
            rules.append("let-beta")
    elif isinstance(m, Cons):
        if steps(m.head):
            rules.append("cons1")
        if v(m.head) and steps(m.tail):
            rules.append("cons2")
    elif isinstance(m, ListCase):
        if steps(m.subject):
            rules.append("lcase")
        if isinstance(m.subject, Nil):
            rules.append("lcase-nil")
        if isinstance(m.subject, Cons) and v(m.subject):
            rules.append("lcase-cons")
    elif isinstance(m, PrimApp):
        first = next((i for i, a in enumerate(m.args) if not v(a)), None)
        for i, a in enumerate(m.args):
            if i == first and steps(a):
                rules.append("prim-arg")
        if first is None:
            try:
                apply_delta(m.name, m.args)
                rules.append("delta")
            except Stuck:
                pass
    return rules


def overlap_audit(m: Term) -> int:
    """Largest number of rules applicable at any node along the active redex path."""
    worst = 0
    while True:
        rules = applicable_rules(m)
        worst = max(worst, len(rules))
        if len(rules) != 1:
            return worst
        r = rules[0]
        nxt = _congruence_child(m, r)
        if nxt is None:
            return worst
        m = nxt


def _congruence_child(m: Term, rule: str):
    table = {
        "app1": lambda: m.fun, "app2": lambda: m.arg, "pair1": lambda: m.first,
        "pair2": lambda: m.second, "proj": lambda: m.subject, "inj": lambda: m.payload,
        "case": lambda: m.scrutinee, "record": lambda: m.payload, "field": lambda: m.subject,
        "let1": lambda: m.bound, "cons1": lambda: m.head, "cons2": lambda: m.tail,
        "lcase": lambda: m.subject,
        "prim-arg": lambda: next(a for a in m.args if not is_target_value(a)),
    }
    return table[rule]() if rule in table else None
