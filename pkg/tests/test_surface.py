import pytest

from icc.cli import CORPUS, corpus_path
from icc.prelude import PRIMITIVES, load_prelude
from icc.printer import print_source, print_type
from icc.surface import (
    DuplicateDeclaration, ParseError, UnknownTypeAlias, desugar, desugar_decls, parse,
    parse_expr, parse_type, tokenize,
)
from icc.syntax import (
    INT, TOP, Anno, App, Arrow, Base, FieldProj, IntLit, Inter, Lam, Let, ListCase, ListT,
    Merge, Prim, RealLit, RecordExp, RecT, StrLit, Union, Unit, Var, alpha_eq, is_closed,
)

REAL, STRING = Base("real"), Base("string")


def test_lambda_body_extends_over_merge():
    assert parse_expr("fn x => x ,, ()") == Lam("x", Merge(Var("x"), Unit()))


def test_type_precedence():
    a, b, c = INT, REAL, STRING
    assert parse_type("int & real \\/ string") == Union(Inter(a, b), c)
    assert parse_type("int -> real -> string") == Arrow(a, Arrow(b, c))
    assert parse_type("int \\/ real -> string") == Arrow(Union(a, b), c)
    assert parse_type("int & real & string") == Inter(Inter(a, b), c)


def test_alias_expansion_keeps_precedence():
    aliases = {"a": INT, "b": REAL, "c": STRING}
    assert parse_type("a & b \\/ c", aliases) == Union(Inter(INT, REAL), STRING)


def test_unclosed_paren_location():
    with pytest.raises(ParseError) as info:
        parse("val x = (")
    assert (info.value.line, info.value.col) == (1, 10)


def test_parse_error_on_second_line():
    with pytest.raises(ParseError) as info:
        parse("val x = 1\nval = 2")
    assert info.value.line == 2


def test_tokenizer_tracks_columns_across_comments():
    toks = tokenize("a\n  bb (* x\n y *) c")
    assert [(t.text, t.line, t.col) for t in toks[:3]] == [("a", 1, 1), ("bb", 2, 3), ("c", 3, 7)]


def test_nested_comments():
    assert parse("(* a (* b *) c *) val x = 1").decls[0].name == "x"
    with pytest.raises(ParseError):
        parse("(* open (* nested *)")


def test_application_binds_tighter_than_merge():
    assert parse_expr("f x ,, g y") == Merge(App(Var("f"), Var("x")), App(Var("g"), Var("y")))


def test_field_projection_binds_tightest():
    assert parse_expr("f r.x") == App(Var("f"), FieldProj(Var("r"), "x"))


def test_annotation_and_let():
    assert parse_expr("(1 : int)") == Anno(IntLit(1), INT)
    assert parse_expr("let x = 1 in x end") == Let("x", IntLit(1), Var("x"))


def test_list_case():
    e = parse_expr("lcase l of nil => 1 | cons h t => h")
    assert e == ListCase(Var("l"), IntLit(1), "h", "t", Var("h"))


def test_literals():
    assert parse_expr('"a\\n"') == StrLit("a\n")
    r = parse_expr("1.50")
    assert isinstance(r, RealLit) and r.value == 1.5 and r.text == "1.50"
    assert parse_expr("-3") == IntLit(-3)


def test_record_type_desugars_to_intersection():
    assert parse_type("{x : int, y : int}") == Inter(RecT("x", INT), RecT("y", INT))
    assert print_type(parse_type("{x:int, y:int}")) == "{x : int} & {y : int}"


def test_record_expression_desugars_to_merge():
    assert parse_expr("{x = 1, y = 2}") == Merge(RecordExp("x", IntLit(1)), RecordExp("y", IntLit(2)))
    assert parse_expr("{x = 1}") == RecordExp("x", IntLit(1))


def test_three_field_record_is_left_nested():
    e = parse_expr("{a = 1, b = 2, c = 3}")
    assert isinstance(e, Merge) and isinstance(e.left, Merge)


def test_comment_annotation_matches_inline_annotation():
    p1 = parse("(*[ val f : int -> int ]*)\nval f = fn x => x")
    p2 = parse("val f : int -> int = fn x => x")
    assert desugar(p1) == desugar(p2)
    assert isinstance(desugar_decls(p1)[0][1], Anno)


def test_val_chain_becomes_nested_lets():
    e = desugar(parse("val x = 1 val y = x"), prelude=False)
    assert e == Let("x", IntLit(1), Let("y", Var("x"), Var("y")))


def test_empty_program_is_unit():
    assert desugar(parse("")) == Unit()


def test_type_alias_expanded():
    e = desugar(parse("type t = int & real\nval x : t = 1"), prelude=False)
    assert e.bound == Anno(IntLit(1), Inter(INT, REAL))


def test_unknown_alias():
    with pytest.raises(UnknownTypeAlias):
        desugar(parse("val x : foo = 1"))


def test_duplicate_declarations():
    with pytest.raises(DuplicateDeclaration):
        desugar(parse("val x = 1 val x = 2"))
    with pytest.raises(DuplicateDeclaration):
        desugar(parse("type t = int type t = real"))
    # the wildcard name may repeat
    desugar(parse("val _ = 1 val _ = 2"))


def test_prelude_names_resolve_unless_shadowed():
    assert parse_expr("add 1", prims=True) == App(Prim("add"), IntLit(1))
    assert parse_expr("fn add => add", prims=True) == Lam("add", Var("add"))
    e = desugar(parse("val add = 1 val y = add"))
    assert e.body.bound == Var("add")


def test_prelude_signatures():
    ctx, table = load_prelude()
    arith = Inter(Arrow(INT, Arrow(INT, INT)), Arrow(REAL, Arrow(REAL, REAL)))
    for name in ("add", "sub", "mul", "div"):
        assert PRIMITIVES[name].type == arith
    assert PRIMITIVES["cat"].type == Arrow(STRING, Arrow(STRING, STRING))
    assert PRIMITIVES["print"].type == Arrow(STRING, TOP)
    ts = PRIMITIVES["toString"].type
    assert ts == Inter(Inter(Arrow(INT, STRING), Arrow(REAL, STRING)), Arrow(STRING, STRING))


def test_desugar_idempotent_on_core_terms():
    from icc.metatheory import enumerate_core_terms
    from icc.surface import desugar_expr
    for e in enumerate_core_terms(4):
        assert desugar_expr(e, {}) == e


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_print_parse_stable(name):
    text = corpus_path(f"{name}.icc").read_text()
    for _, e, _ in desugar_decls(parse(text)):
        assert alpha_eq(parse_expr(print_source(e), prims=True), e)


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_desugars_to_closed_term(name):
    text = corpus_path(f"{name}.icc").read_text()
    assert is_closed(desugar(parse(text)))


def test_list_type_syntax():
    assert parse_type("list int") == ListT(INT)
    assert parse_type("list (int \\/ real)") == ListT(Union(INT, REAL))
