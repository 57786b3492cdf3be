import random

from hypothesis import given, settings, strategies as st

from icc.dynamics import (
    HOLE, SourceStep, check_source_step, decompose, lift_all, plug, source_step_candidates,
    validate_trace,
)
from icc.metatheory import enumerate_core_terms, generate_random
from icc.printer import print_source
from icc.surface import parse_expr
from icc.syntax import (
    App, Fix, Lam, Merge, Unit, Var, alpha_eq, is_source_value, subst1,
)

ID = Lam("x", Var("x"))


def names_and_results(steps):
    return sorted((s.name, print_source(s.to)) for s in steps)


def test_unmerge_candidates():
    got = names_and_results(source_step_candidates(parse_expr("() ,, ()")))
    assert got == [("unmerge-left", "()"), ("unmerge-right", "()")]


def test_beta_candidate():
    got = names_and_results(source_step_candidates(parse_expr("(fn x => x) ()")))
    assert got == [("beta", "()")]


def test_split_only_on_request_and_at_root():
    assert source_step_candidates(Unit()) == []
    got = names_and_results(source_step_candidates(Unit(), include_split=True))
    assert got == [("split", "() ,, ()")]
    inner = source_step_candidates(parse_expr("(fn x => x) ()"), include_split=True)
    assert sum(s.rule == "split" for s in inner) == 1


def test_merge2_does_not_need_a_value_on_the_left():
    e = parse_expr("((fn x => x) ()) ,, ((fn y => y) ())")
    names = {s.name for s in source_step_candidates(e)}
    assert {"merge1/beta", "merge2/beta", "unmerge-left", "unmerge-right"} <= names


def test_app2_needs_a_value_head():
    e = parse_expr("((fn x => x) ,, ()) ((fn y => y) ())")
    names = {s.name for s in source_step_candidates(e)}
    assert "app2/beta" in names
    e = parse_expr("((fn x => x) ()) ((fn y => y) ())")
    names = {s.name for s in source_step_candidates(e)}
    assert "app2/beta" not in names


def test_check_source_step_examples():
    assert check_source_step(parse_expr("() ,, ()"), Unit(), "unmerge-left")
    assert check_source_step(Unit(), parse_expr("() ,, ()"), "split")
    assert not check_source_step(Unit(), ID, "beta")


def test_split_accepted_below_the_root():
    e = parse_expr("(fn x => x) ()")
    to = parse_expr("((fn x => x) ,, (fn x => x)) ()")
    assert check_source_step(e, to, "split")
    assert check_source_step(e, to, "app1/split")
    assert not check_source_step(e, to, "app2/split")


def test_named_path_must_match():
    e = parse_expr("((fn x => x) ()) ,, ()")
    to = parse_expr("() ,, ()")
    assert check_source_step(e, to, "merge1/beta")
    assert not check_source_step(e, to, "merge2/beta")
    assert not check_source_step(e, to, "bogus")


def test_plug_examples():
    assert plug((("app1", Unit()),), ID) == App(ID, Unit())
    e = parse_expr("() ,, ()")
    assert plug(HOLE, e) == e
    assert ((("merge1", Unit()),), Unit()) in decompose(e)


def test_plug_inverts_decompose(core_terms):
    for e in core_terms:
        for ctx, sub in decompose(e):
            assert plug(ctx, sub) == e


# ---------------------------------------------------------------------------
# Independent oracle: the step relation written straight from the rule schemas

def oracle(e):
    out = set()
    if isinstance(e, App):
        for name, t in oracle(e.fun):
            out.add(("app1/" + name, App(t, e.arg)))
        if is_source_value(e.fun):
            for name, t in oracle(e.arg):
                out.add(("app2/" + name, App(e.fun, t)))
        if isinstance(e.fun, Lam) and is_source_value(e.arg):
            out.add(("beta", subst1(e.fun.body, e.fun.x, e.arg)))
    elif isinstance(e, Fix):
        out.add(("fix", subst1(e.body, e.x, e)))
    elif isinstance(e, Merge):
        out.add(("unmerge-left", e.left))
        out.add(("unmerge-right", e.right))
        for name, t in oracle(e.left):
            out.add(("merge1/" + name, Merge(t, e.right)))
        for name, t in oracle(e.right):
            out.add(("merge2/" + name, Merge(e.left, t)))
    return out


def _canon(pairs):
    return sorted((n, print_source(t)) for n, t in pairs)


def test_candidates_match_oracle_exhaustively():
    n = 0
    for e in enumerate_core_terms(6):
        got = source_step_candidates(e)
        for s in got:
            assert check_source_step(s.frm, s.to, s.name)
            assert check_source_step(s.frm, s.to, s.rule)
        assert _canon((s.name, s.to) for s in got) == _canon(oracle(e))
        n += 1
    assert n == 13019


def test_validator_matches_oracle_on_small_pairs():
    # every (e, e', rule) the validator accepts is a schema instance, and vice versa
    terms = list(enumerate_core_terms(3))
    rules = ("beta", "fix", "unmerge-left", "unmerge-right")
    for e in terms:
        expected = [(n.split("/")[-1], t) for n, t in oracle(e)]
        for to in terms:
            for r in rules:
                want = any(n == r and alpha_eq(t, to) for n, t in expected)
                assert check_source_step(e, to, r) == want, (print_source(e), r)


def test_candidates_on_open_terms_and_extensions():
    e = parse_expr("add 1 2", prims=True)
    assert names_and_results(source_step_candidates(e)) == [("delta", "3")]
    e = parse_expr("{x = 1}.x")
    assert names_and_results(source_step_candidates(e)) == [("select", "1")]
    e = parse_expr("lcase cons 1 nil of nil => 0 | cons h t => h")
    assert names_and_results(source_step_candidates(e)) == [("lcase-cons", "1")]
    e = parse_expr("(1 : int)")
    assert names_and_results(source_step_candidates(e)) == [("anno", "1")]


# ---------------------------------------------------------------------------
# Lifting through evaluation contexts

def random_walk(e, rng, length):
    steps = []
    for _ in range(length):
        cands = source_step_candidates(e, include_split=rng.random() < 0.2)
        if not cands:
            break
        s = rng.choice(cands)
        steps.append(s)
        e = s.to
    return steps


def random_context(rng, depth):
    ctx = []
    for _ in range(depth):
        kind = rng.choice(["app1", "app2", "merge1", "merge2"])
        other = generate_random(rng.getrandbits(32), rng.randint(0, 3))
        if kind == "app2" and not is_source_value(other):
            other = ID
        ctx.append((kind, other))
    return tuple(ctx)


def test_step_eval_context_lemma():
    rng = random.Random(7)
    checked = 0
    for _ in range(100):
        e = generate_random(rng.getrandbits(32), rng.randint(1, 6))
        steps = random_walk(e, rng, rng.randint(1, 6))
        ctx = random_context(rng, rng.randint(0, 3))
        lifted = lift_all(steps, ctx)
        end = validate_trace(plug(ctx, e), lifted)
        assert alpha_eq(end, plug(ctx, steps[-1].to if steps else e))
        checked += len(lifted)
    assert checked > 100


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 7))
def test_candidates_are_valid(seed, size):
    e = generate_random(seed, size)
    for s in source_step_candidates(e, include_split=True):
        assert isinstance(s, SourceStep)
        assert alpha_eq(s.frm, e)
        assert check_source_step(e, s.to, s.name)
