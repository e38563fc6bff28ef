import pytest

from codeine.programs import (
    Disj,
    Element,
    EqConst,
    Labeling,
    Lt,
    Neq,
    NeqOffset,
    ProgramError,
    TOY_PROGRAM,
    builtin_source,
    load_program,
    propag_text,
    queens_text,
)


def test_toy_program_shape():
    prog = load_program(TOY_PROGRAM)
    assert prog.var_names() == ["I", "A"]
    assert len(prog.constraints) == 2
    element, disj = prog.constraints
    assert isinstance(element.term, Element)
    assert element.term.table == (2, 5, 7)
    assert isinstance(disj.term, Disj)
    assert isinstance(disj.term.right, EqConst)
    assert prog.labeling == Labeling(("I", "A"))


def test_trivial_program():
    prog = load_program("var X in 1..1; label([X]);")
    assert prog.var_names() == ["X"]
    assert prog.labeling.variables == ("X",)


def test_default_domain_is_deferred():
    prog = load_program("var X;")
    assert prog.variables[0].lo is None
    assert prog.variables[0].hi is None


def test_undeclared_variable_rejected():
    with pytest.raises(ProgramError):
        load_program("constraint eq(X,Y);")
    with pytest.raises(ProgramError):
        load_program("var X in 1..3; label([X,Y]);")


def test_duplicate_names_rejected():
    with pytest.raises(ProgramError):
        load_program("var X; var X;")
    with pytest.raises(ProgramError):
        load_program("var X; constraint a: eqc(X,1); constraint a: eqc(X,2);")


def test_syntax_error_carries_position():
    with pytest.raises(ProgramError) as err:
        load_program("var X in 1..;")
    assert "line 1" in str(err.value)


def test_reversed_domain_rejected():
    with pytest.raises(ProgramError):
        load_program("var X in 5..3;")


def test_duplicate_labeling_rejected():
    with pytest.raises(ProgramError):
        load_program("var X in 1..2; label([X]); label([X]);")


def test_comments_and_whitespace():
    prog = load_program("# heading\nvar X in 1..2;  # tail\nlabel([X]);\n")
    assert prog.var_names() == ["X"]


def test_named_constraint():
    prog = load_program("var X in 1..9; var Y in 1..9; constraint below: lt(X,Y);")
    assert prog.constraints[0].name == "below"
    assert isinstance(prog.constraints[0].term, Lt)


def test_alldifferent_expands_to_pairwise_neq():
    prog = load_program(
        "var A in 1..3; var B in 1..3; var C in 1..3;"
        "constraint alldifferent([A,B,C]);"
    )
    terms = [c.term for c in prog.constraints]
    assert terms == [Neq("A", "B"), Neq("A", "C"), Neq("B", "C")]


def test_neq_offset_negative_constant():
    prog = load_program("var A in 1..4; var B in 1..4; constraint neq_offset(A,B,-2);")
    assert prog.constraints[0].term == NeqOffset("A", "B", -2)


def test_element_requires_entries():
    with pytest.raises(ProgramError):
        load_program("var I; var V; constraint element(I,[],V);")


def test_queens_text_parses():
    prog = load_program(queens_text(4))
    assert len(prog.variables) == 4
    # C(4,2) neq from alldifferent plus two diagonal constraints per pair
    assert len(prog.constraints) == 6 + 12
    assert prog.labeling.variables == ("Q1", "Q2", "Q3", "Q4")


def test_propag_text_parses():
    prog = load_program(propag_text(70000))
    assert prog.var_names() == ["X", "Y"]
    assert len(prog.constraints) == 2


def test_builtin_sources():
    assert builtin_source("builtin:toy") == TOY_PROGRAM
    assert builtin_source("builtin:queens:6") == queens_text(6)
    assert builtin_source("builtin:propag:500") == propag_text(500)
    assert builtin_source("somewhere/file.fd") is None
    with pytest.raises(ValueError):
        builtin_source("builtin:nope")


def test_strategies_parse():
    prog = load_program(
        "var X in 1..3; var Y in 1..3; label([X,Y]) with firstfail, descending;"
    )
    assert prog.labeling.var_strategy == "firstfail"
    assert prog.labeling.val_strategy == "descending"
    with pytest.raises(ProgramError):
        load_program("var X in 1..3; label([X]) with sideways, ascending;")
