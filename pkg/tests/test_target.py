import itertools

import pytest
from hypothesis import given, settings, strategies as st

from icc.elaborate import TypeError_, check
from icc.metatheory import enumerate_types, generate_random
from icc.surface import parse_target
from icc.syntax import (
    EMPTY_CTX, TUNIT, App, Fix, Inj, Lam, Pair, Proj, TArrow, TBase, TProd, TSum, Unit,
    Var, alpha_eq, is_target_value, type_translate,
)
from icc.target import (
    VALUE, Stepped, StuckResult, TargetTypeError, applicable_rules, overlap_audit,
    target_eval, target_step, target_typecheck_against, target_typecheck_synth,
)

INT = TBase("int")


def test_typecheck_pair():
    target_typecheck_against({}, parse_target("<(), fn x => x>"),
                             TProd(TUNIT, TArrow(TUNIT, TUNIT)))


def test_typecheck_projection_of_unit_fails():
    with pytest.raises(TargetTypeError):
        target_typecheck_synth({}, parse_target("proj1 ()"))


def test_typecheck_int_pair():
    target_typecheck_against({}, parse_target("<1, 0>"), TProd(INT, INT))


def test_typecheck_case_and_context():
    m = parse_target("case s of inj1 a => a | inj2 b => ()")
    target_typecheck_against({"s": TSum(TUNIT, TUNIT)}, m, TUNIT)
    with pytest.raises(TargetTypeError):
        target_typecheck_against({"s": TSum(INT, TUNIT)}, m, TUNIT)


def test_typecheck_rejects_self_application():
    with pytest.raises(TargetTypeError):
        target_typecheck_synth({}, parse_target("fn x => x x"))


def test_step_examples():
    r = target_step(parse_target("proj1 <(), fn x => x>"))
    assert r == Stepped(Unit(), "proj-of-pair")
    r = target_step(parse_target("case inj1 () of inj1 x => x | inj2 y => y"))
    assert r.next == Unit() and r.rule == "case-inj"
    f = parse_target("fix f => f")
    r = target_step(f)
    assert r.rule == "fix" and alpha_eq(r.next, f)


def test_step_paths():
    r = target_step(parse_target("<(fn x => x) (), (fn x => x) ()>"))
    assert r.rule == "beta" and r.path == ("pair1",)
    r = target_step(parse_target("<(), (fn x => x) ()>"))
    assert r.path == ("pair2",)
    assert r.name == "pair2/beta"


def test_eval_examples():
    r = target_eval(parse_target("(fn x => x) ()"), 100)
    assert (r.status, r.term, r.steps) == ("value", Unit(), 1)
    r = target_eval(parse_target("fix f => f"), 10)
    assert r.status == "timeout" and r.steps == 10
    r = target_eval(parse_target("proj1 ()"), 10)
    assert r.status == "stuck"


def test_values_do_not_step():
    for m in ["()", "fn x => x", "<(), inj2 ()>", "3", '"s"', "nil"]:
        assert target_step(parse_target(m)) is VALUE


def test_stuck_results():
    assert isinstance(target_step(parse_target("() ()")), StuckResult)
    assert isinstance(target_step(parse_target("case () of inj1 x => x | inj2 y => y")),
                      StuckResult)


def test_division_by_zero_is_stuck():
    r = target_eval(parse_target("#int_div(1, 0)"), 10)
    assert r.status == "stuck"


def test_print_output_collected():
    r = target_eval(parse_target('#print("hi")'), 10)
    assert r.output == "hi" and r.status == "value"


def test_integer_arithmetic_is_exact():
    r = target_eval(parse_target("#int_mul(12345678901234567890, 98765432109876543210)"), 5)
    assert r.term == parse_target(str(12345678901234567890 * 98765432109876543210))


def test_trace_callback_sees_every_step():
    seen = []
    r = target_eval(parse_target("(fn x => x) ((fn y => y) ())"), 100,
                    lambda k, s, m: seen.append((k, s.name)))
    assert seen == [(1, "app2/beta"), (2, "beta")]
    assert r.steps == 2


# ---------------------------------------------------------------------------
# Exhaustive overlap audit over small target terms

def _target_terms(nodes, names):
    """All target terms over the core target constructors with exactly ``nodes`` nodes."""
    if nodes == 1:
        yield Unit()
        for n in names:
            yield Var(n)
        return
    x = names[-1] if names else "a"
    inner = names if names else ("a",)
    for t in _target_terms(nodes - 1, tuple(dict.fromkeys(inner))):
        yield Lam(x, t)
        yield Fix(x, t)
    for t in _target_terms(nodes - 1, names):
        yield Proj(1, t)
        yield Proj(2, t)
        yield Inj(1, t)
        yield Inj(2, t)
    for k in range(1, nodes - 1):
        for a, b in itertools.product(list(_target_terms(k, names)),
                                      list(_target_terms(nodes - 1 - k, names))):
            yield App(a, b)
            yield Pair(a, b)


def _small_targets(max_nodes):
    for n in range(1, max_nodes + 1):
        yield from _target_terms(n, ("a",))


def test_overlap_audit_exhaustive():
    count = 0
    for m in _small_targets(6):
        count += 1
        assert overlap_audit(m) <= 1
        rules = applicable_rules(m)
        r = target_step(m)
        if r is VALUE:
            assert is_target_value(m) and rules == []
        elif isinstance(r, Stepped):
            # the stepping function agrees with the independent rule matcher at the root
            root = r.path[0] if r.path else r.rule
            assert rules == [root]
        else:
            assert rules == []
    assert count > 10000


# ---------------------------------------------------------------------------
# Safety and agreement of the two evaluation paths

def _closed_well_typed(seed, size, a):
    try:
        return check(EMPTY_CTX, generate_random(seed, size), a)
    except TypeError_:
        return None


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.sampled_from(enumerate_types(3)))
def test_preservation_and_progress(seed, size, a):
    r = _closed_well_typed(seed, size, a)
    if r is None:
        return
    m, _ = r
    t = type_translate(a)
    for _ in range(60):
        s = target_step(m)
        if s is VALUE:
            break
        assert isinstance(s, Stepped), s
        m = s.next
        target_typecheck_against({}, m, t)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.sampled_from(enumerate_types(3)),
       st.integers(0, 80))
def test_context_evaluator_matches_stepping(seed, size, a, budget):
    r = _closed_well_typed(seed, size, a)
    if r is None:
        return
    m, _ = r
    fast = target_eval(m, budget)
    slow = target_eval(m, budget, lambda *_: None)
    assert (fast.status, fast.steps, fast.output) == (slow.status, slow.steps, slow.output)
    assert alpha_eq(fast.term, slow.term)


def test_context_evaluator_matches_on_stuck_and_output():
    for src in ["<(), proj1 ()>", '#print(#cat("a", "b"))', "(fn x => proj2 x) <(), 1>",
                "<1, #int_div(2, 0)>"]:
        m = parse_target(src)
        fast, slow = target_eval(m, 20), target_eval(m, 20, lambda *_: None)
        assert (fast.status, fast.term, fast.steps, fast.output) == \
            (slow.status, slow.term, slow.steps, slow.output)
