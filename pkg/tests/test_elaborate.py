import pytest
from hypothesis import given, settings, strategies as st

import icc.elaborate as elaborate_mod
from icc.cli import CORPUS, corpus_path
from icc.elaborate import (
    CannotSynthesize, DeclError, Elaborator, InvalidDerivation, TypeError_, check,
    check_soundness, elaborate_program, erase, let_normalize, program_derivation, reelaborate,
    synth, validate,
)
from icc.metatheory import enumerate_core_terms, enumerate_types, generate_random
from icc.printer import print_source
from icc.surface import desugar_decls, parse, parse_expr, parse_target, parse_type
from icc.syntax import (
    EMPTY_CTX, INT, POS, TOP, App, Arrow, Inter, Let, Merge, Pair, Proj, Unit, Union, Var,
    alpha_eq, make_ctx,
)
from icc.target import target_eval, target_typecheck_against


def elab(src, ty, ctx=EMPTY_CTX):
    return check(ctx, parse_expr(src), parse_type(ty))


def test_inhabited_intersection():
    m, _ = elab("(fn x => x) ,, (fn x => fn y => fn z => (x z) (y z))",
                "(top -> top) & ((top -> top -> top) -> (top -> top) -> top -> top)")
    want = parse_target("<fn x => x, fn x => fn y => fn z => (x z) (y z)>")
    assert alpha_eq(m, want)


@pytest.mark.parametrize("src,ty,want", [
    ("0 ,, 1", "nat", "0"),
    ("0 ,, 1", "pos & nat", "<1, 0>"),
    ("1 ,, 0", "pos & nat", "<1, 1>"),
    ("()", "top", "()"),
])
def test_check_examples(src, ty, want):
    m, _ = elab(src, ty)
    assert alpha_eq(m, parse_target(want))


def test_synth_projects_intersection():
    ctx = make_ctx(("f", parse_type("(top -> top) & top")))
    a, m, d = synth(ctx, parse_expr("f ()"))
    assert a == TOP
    assert m == App(Proj(1, Var("f")), Unit())
    assert check_soundness(d)


def test_merge_synthesis_left_first():
    a, _, _ = synth(make_ctx(("x", INT)), parse_expr("x ,, ()"))
    assert a == INT
    a, _, _ = synth(EMPTY_CTX, parse_expr("(fn x => x : top -> top) ,, 3"))
    assert a == Arrow(TOP, TOP)
    a, _, _ = synth(EMPTY_CTX, parse_expr("(fn x => x) ,, 3"))
    assert a == INT


def test_fix_and_lambda_need_annotations():
    with pytest.raises(CannotSynthesize, match="fix needs annotation"):
        synth(EMPTY_CTX, parse_expr("fix x => x"))
    with pytest.raises(CannotSynthesize):
        synth(EMPTY_CTX, parse_expr("fn x => x"))


def test_checking_non_value_against_top_uses_direct():
    _, d = elab("(fn x => x) ,, ()", "top")
    _, d2 = check(EMPTY_CTX, App(parse_expr("fn x => x"), Unit()), TOP)
    validate(d2)
    assert d.type == TOP and check_soundness(d2)


def test_literal_refinements():
    elab("1", "pos")
    elab("0", "nat")
    with pytest.raises(TypeError_):
        elab("0", "pos")
    with pytest.raises(TypeError_):
        elab("-1", "nat")


def test_atom_subsumption():
    ctx = make_ctx(("p", POS))
    m, d = check(ctx, Var("p"), INT)
    assert m == Var("p")
    assert d.rule == "atom"


def test_coercion_inserted_at_mode_switch():
    ctx = make_ctx(("f", parse_type("top -> top")))
    m, d = check(ctx, Var("f"), parse_type("top -> top & top"))
    assert d.rule == "arrE"
    assert isinstance(m, App)
    validate(d)
    assert check_soundness(d)


def test_union_elimination_at_let():
    ctx = make_ctx(("u", parse_type("int \\/ real")))
    e = parse_expr("let y = u in toString y end", prims=True)
    a, m, d = synth(ctx, e)
    assert d.rule == "orE"
    assert check_soundness(d)


def test_type_error_reports_types():
    with pytest.raises(TypeError_) as info:
        elab("()", "int")
    assert "int" in info.value.render()


def test_merge_failure_lists_both_branches():
    with pytest.raises(TypeError_) as info:
        elab("() ,, ()", "int")
    assert len(info.value.branches) == 2
    assert info.value.render("f").count("f:") == 3


def test_let_normalize_examples():
    assert let_normalize(parse_expr("g x")) == parse_expr("g x")
    out = let_normalize(parse_expr("g (f y)"))
    assert isinstance(out, Let) and out.bound == parse_expr("f y")
    assert out.body == App(Var("g"), Var(out.x))
    assert let_normalize(Unit()) == Unit()


def test_erase_and_reelaborate_examples():
    _, d = elab("0 ,, 1", "nat")
    t = erase(d)
    assert t.rule == "merge1" and t.children[0].rule == "lit"
    assert t.target is None and t.count() == d.count()
    assert reelaborate(t) == d
    _, d = elab("() ,, ()", "top & top")
    t = erase(d)
    assert t.rule == "andI" and len(t.children) == 2
    assert isinstance(reelaborate(t).target, Pair)
    _, d = check(make_ctx(("x", TOP)), Var("x"), TOP)
    assert reelaborate(erase(d)).target == Var("x")


def test_validator_rejects_tampering():
    _, d = elab("() ,, ()", "top & top")
    from dataclasses import replace
    with pytest.raises(InvalidDerivation):
        validate(replace(d, target=Unit()))
    with pytest.raises(InvalidDerivation):
        validate(replace(d, type=INT))


def test_program_examples():
    body, out = elaborate_program(desugar_decls(parse("val id = (fn x => x : top -> top)")))
    assert out[0].type == Arrow(TOP, TOP)
    body, out = elaborate_program(desugar_decls(parse("val two = add 1 1")))
    assert out[0].type == INT
    assert isinstance(out[0].target.fun.fun, Proj) and out[0].target.fun.fun.k == 1
    assert target_eval(body, 100).term == parse_target("2")
    body, out = elaborate_program(desugar_decls(parse("")))
    assert body == Unit() and out == []


def test_program_error_names_declaration():
    with pytest.raises(DeclError) as info:
        elaborate_program(desugar_decls(parse("val a = 1\nval b = a ()")))
    assert info.value.name == "b"


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_sound_and_valid(name):
    decls = desugar_decls(parse(corpus_path(f"{name}.icc").read_text()))
    body, out = elaborate_program(decls)
    for d in out:
        validate(d.deriv)
        assert check_soundness(d.deriv)
        assert reelaborate(erase(d.deriv)) == d.deriv
    target_typecheck_against({}, body, elaborate_mod.type_translate(out[-1].type))


def test_validator_accepts_all_small_derivations(core_derivations):
    for d in core_derivations:
        validate(d)


def test_determinism(core_terms, core_types):
    for e in core_terms[::7]:
        for a in core_types:
            try:
                m1, d1 = check(EMPTY_CTX, e, a)
            except TypeError_:
                continue
            m2, d2 = check(EMPTY_CTX, e, a)
            assert m1 == m2 and d1 == d2


def test_merge_left_bias_when_left_checks_without_coercions():
    terms = list(enumerate_core_terms(3))
    for a in enumerate_types(3):
        for e1 in terms:
            el = Elaborator()
            el.strict = True
            try:
                left = el.check(EMPTY_CTX, e1, a)
            except TypeError_:
                continue
            for e2 in terms[:15]:
                m, _ = check(EMPTY_CTX, Merge(e1, e2), a)
                assert alpha_eq(m, left.target)


def test_merge_left_bias_when_right_fails():
    terms = list(enumerate_core_terms(3))
    for a in enumerate_types(3):
        for e1 in terms:
            try:
                m1, _ = check(EMPTY_CTX, e1, a)
            except TypeError_:
                continue
            # fix x => x only checks against top through direct, never strictly
            e2 = parse_expr("(fix x => x) ()")
            m, _ = check(EMPTY_CTX, Merge(e1, e2), a)
            assert alpha_eq(m, m1), (print_source(e1), a)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.sampled_from(enumerate_types(4)))
def test_soundness_random(seed, size, a):
    e = generate_random(seed, size)
    try:
        _, d = check(EMPTY_CTX, e, a)
    except TypeError_:
        return
    validate(d)
    assert check_soundness(d)
    assert reelaborate(erase(d)) == d


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7))
def test_soundness_under_union_context(seed, size):
    # open terms over a union-typed variable exercise orE and inj
    ctx = make_ctx(("u", Union(TOP, Arrow(TOP, TOP))), ("f", Inter(Arrow(TOP, TOP), TOP)))
    e = generate_random(seed, size, scope=("u", "f"))
    for a in (TOP, Arrow(TOP, TOP), Union(TOP, TOP)):
        try:
            _, d = check(ctx, e, a)
        except TypeError_:
            continue
        validate(d)
        assert check_soundness(d)


def test_program_derivation_validates():
    decls = desugar_decls(parse("val a = (fn x => x : top -> top)\nval b = a ()"),
                          prelude=False)
    _, out = elaborate_program(decls, prelude=False)
    d = program_derivation(out)
    validate(d)
    assert check_soundness(d)
    assert d.type == TOP


def test_let_normalization_preserves_results():
    src = "val u = (1 : int \\/ real)\nval s = toString u\nval n = add (mul 2 3) 4"
    decls = desugar_decls(parse(src))
    body, out = elaborate_program(decls)
    outputs = target_eval(body, 1000)
    assert outputs.status == "value" and outputs.term == parse_target("10")
    # elaborating the already-normalized program gives the same value
    normal = [(n, let_normalize(e), loc) for n, e, loc in decls]
    body2, _ = elaborate_program(normal)
    assert target_eval(body2, 1000).term == outputs.term
