"""
Unit tests for term, fact and clause parsing.

Run with: pytest src/tests/test_termParser.py -v
"""

import pytest

from src.functions.termParser import (
    LIST_FUNCTOR,
    TermSyntaxError,
    iter_statements,
    parse_atom,
    parse_clause,
    parse_fact,
    parse_term,
)
from src.models.Term import Atom, Constant, Variable, is_ground, time_of


def test_parse_nested_fact():
    """Test that an event term inside happensAt is parsed as a nested atom."""
    atom = parse_fact("happensAt(walk(id1),1).")

    assert atom == Atom("happensAt", (Atom("walk", (Constant("id1"),)), Constant("1")))
    assert str(atom) == "happensAt(walk(id1),1)"
    assert time_of(atom) == 1


def test_uppercase_names_are_variables():
    """Test the variable/constant split on the first character."""
    atom = parse_atom("initiatedAt(moving(X,_y),T)")

    assert atom.args[0].args == (Variable("X"), Variable("_y"))
    assert atom.args[1] == Variable("T")
    assert not is_ground(atom)


def test_numbers_and_placemarkers_are_constants():
    """Test that numeric and placemarker tokens are kept as constant names."""
    atom = parse_atom("distLessThan(+person,-person,#dist,-5)")

    assert [arg.name for arg in atom.args] == ["+person", "-person", "#dist", "-5"]


def test_parse_list_term():
    """Test that bracketed lists parse as list atoms."""
    term = parse_term("[25,30,40]")

    assert term == Atom(LIST_FUNCTOR, (Constant("25"), Constant("30"), Constant("40")))
    assert parse_term("[]") == Atom(LIST_FUNCTOR, ())


def test_parse_clause_with_body():
    """Test head/body splitting of a rule."""
    head, body = parse_clause(
        "terminatedAt(moving(X,Y),T) :- happensAt(inactive(X),T), distMoreThan(X,Y,30,T)."
    )

    assert str(head) == "terminatedAt(moving(X,Y),T)"
    assert [str(literal) for literal in body] == [
        "happensAt(inactive(X),T)",
        "distMoreThan(X,Y,30,T)",
    ]


def test_parse_clause_without_body():
    """Test that a bare head is a clause with an empty body."""
    head, body = parse_clause("initiatedAt(moving(X,Y),T).")

    assert head.predicate == "initiatedAt"
    assert body == []


@pytest.mark.parametrize(
    "text",
    [
        "happensAt(walk(id1),1)",
        "happensAt(walk(id1,1).",
        "happensAt(walk(id1)),1).",
        "happensAt(walk(id1) 1).",
        "happensAt(walk(id1),1) extra.",
        "happens@(a).",
    ],
)
def test_malformed_facts_raise(text):
    """Test that malformed fact text raises TermSyntaxError."""
    with pytest.raises(TermSyntaxError):
        parse_fact(text)


def test_syntax_error_is_value_error_with_column():
    """Test that syntax errors carry the failing column."""
    with pytest.raises(ValueError) as excinfo:
        parse_atom("walk(id1 id2)")

    assert excinfo.value.column == 9


def test_iter_statements_skips_comments_and_joins_lines():
    """Test statement splitting across lines with comments."""
    text = (
        "% a comment line\n"
        "happensAt(walk(id1),1). % trailing comment\n"
        "initiatedAt(moving(X,Y),T) :-\n"
        "    happensAt(walk(X),T),\n"
        "    happensAt(walk(Y),T).\n"
        "pool(dist, [25,30.5,40]).\n"
    )

    statements = list(iter_statements(text))

    assert [line for line, _ in statements] == [2, 3, 6]
    assert statements[0][1] == "happensAt(walk(id1),1)."
    assert statements[2][1] == "pool(dist, [25,30.5,40])."


def test_iter_statements_unterminated_raises():
    """Test that a trailing statement without '.' is an error."""
    with pytest.raises(TermSyntaxError):
        list(iter_statements("happensAt(walk(id1),1)\n"))
