"""
Unit tests for clause firing, counter updates, instance classification and new-clause triggers.

Run with: pytest src/tests/test_clauseEvaluation.py -v
"""

import pytest

from src.functions.clauseEvaluation import (
    Label,
    classify_instances,
    find_uncovered_instance,
    firing_fluents,
    fires,
    update_clause_counters,
)
from src.functions.clauseSpace import construct_bottom, parse_modes, seed_clause
from src.functions.termParser import parse_atom, parse_clause, parse_fact
from src.models.Clause import PARENT_KEY, BottomClause, Clause, ClauseKind
from src.models.Interpretation import FluentState, Interpretation
from src.models.Term import Literal
from src.models.Theory import Theory

MODES_TEXT = """
modeh(initiatedAt(moving(+person,+person),+time)).
modeh(terminatedAt(moving(+person,+person),+time)).
modeb(happensAt(walk(+person),+time)).
modeb(happensAt(inactive(+person),+time)).
modeb(distLessThan(+person,+person,#dist,+time)).
modeb(distMoreThan(+person,+person,#dist,+time)).
modeb(dirLessThan(+person,+person,#angle,+time)).
pool(dist, [25,30,40]).
pool(angle, [45,90]).
"""

TABLE2_NARRATIVE = [
    "happensAt(walk(id1),1).",
    "happensAt(walk(id2),1).",
    "holdsAt(coords(id1,201,454),1).",
    "holdsAt(coords(id2,230,440),1).",
    "holdsAt(direction(id1,270),1).",
    "holdsAt(direction(id2,270),1).",
    "happensAt(walk(id1),2).",
    "happensAt(walk(id2),2).",
    "holdsAt(coords(id1,201,454),2).",
    "holdsAt(coords(id2,227,440),2).",
    "holdsAt(direction(id1,275),2).",
    "holdsAt(direction(id2,278),2).",
]

MOVING = parse_atom("moving(id1,id2)")
MOVING_BACK = parse_atom("moving(id2,id1)")


def theory_clause(clause_id, text):
    """A clause parsed from text whose bottom is its own body."""
    head, atoms = parse_clause(text)
    body = tuple(Literal(atom) for atom in atoms)
    return Clause(clause_id=clause_id, head=head, body=body, bottom=BottomClause(head, body))


# Test Fixtures

@pytest.fixture
def modes():
    return parse_modes(MODES_TEXT)


@pytest.fixture
def table2_interpretation():
    return Interpretation(
        interp_id="table2",
        t_start=1,
        t_end=2,
        narrative=frozenset(parse_fact(line) for line in TABLE2_NARRATIVE),
        annotation=frozenset({parse_atom("holdsAt(moving(id1,id2),2)")}),
    )


@pytest.fixture
def seeded_clause(table2_interpretation, modes):
    """Empty-bodied initiation clause saturated from moving(id1,id2) at time 1."""
    bottom = construct_bottom(table2_interpretation, 1, MOVING, ClauseKind.INITIATION, modes)
    return seed_clause("seed", bottom)


# Firing

def test_empty_clause_fires_on_every_candidate(seeded_clause, table2_interpretation):
    """Test that an empty body fires on every fluent its head unifies with."""
    fired = firing_fluents(seeded_clause, table2_interpretation, 1, [MOVING, MOVING_BACK])

    assert fired[PARENT_KEY] == {MOVING, MOVING_BACK}


def test_candidate_firings_narrow_the_parent(seeded_clause, table2_interpretation):
    """Test that a candidate fires only where its added literal also holds."""
    fired = firing_fluents(
        seeded_clause, table2_interpretation, 2, [MOVING, MOVING_BACK], with_candidates=True
    )

    assert fired["distLessThan(X,Y,40,T)"] == {MOVING, MOVING_BACK}
    assert fired["distMoreThan(X,Y,30,T)"] == set()


def test_fires_respects_builtin_threshold(table2_interpretation):
    """Test the table 2 clause: no initiation at time 1 under threshold 25, initiation under 40."""
    close = theory_clause(
        "c", "initiatedAt(moving(X,Y),T) :- happensAt(walk(X),T), happensAt(walk(Y),T), distLessThan(X,Y,25,T)."
    )
    near = theory_clause(
        "d", "initiatedAt(moving(X,Y),T) :- happensAt(walk(X),T), happensAt(walk(Y),T), distLessThan(X,Y,40,T)."
    )

    assert not fires(close, table2_interpretation, 1, MOVING)
    assert fires(near, table2_interpretation, 1, MOVING)


# Counter updates

def test_counters_of_seed_clause_and_candidates(seeded_clause, table2_interpretation, modes):
    """Test rewards over both time points of the table 2 window."""
    update_clause_counters([seeded_clause], table2_interpretation, modes)
    stats = seeded_clause.stats
    refinements = seeded_clause.refinement_stats

    assert (stats.tp, stats.fp, stats.fn, stats.e) == (1, 3, 0, 1)
    assert (refinements["distLessThan(X,Y,40,T)"].tp, refinements["distLessThan(X,Y,40,T)"].fp) == (1, 3)
    assert (refinements["distMoreThan(X,Y,30,T)"].tp, refinements["distMoreThan(X,Y,30,T)"].fp) == (1, 1)
    assert refinements["distMoreThan(X,Y,30,T)"].e == 1
    assert seeded_clause.stable_since == 1


def test_each_interpretation_counts_once(seeded_clause, table2_interpretation, modes):
    """Test that e and stability advance by one per interpretation, not per time point."""
    update_clause_counters([seeded_clause], table2_interpretation, modes)
    update_clause_counters([seeded_clause], table2_interpretation, modes)

    assert seeded_clause.stats.e == 2
    assert seeded_clause.stable_since == 2


def test_termination_rewards(modes):
    """Test FN for a termination firing while the fluent persists and TP when it ends."""
    clause = theory_clause("t", "terminatedAt(moving(X,Y),T) :- happensAt(inactive(X),T).")
    narrative = frozenset(
        parse_fact(text)
        for text in [
            "happensAt(inactive(id1),1).",
            "happensAt(walk(id2),1).",
            "happensAt(inactive(id1),2).",
            "happensAt(walk(id2),2).",
        ]
    )
    annotation = frozenset(
        parse_atom(text)
        for text in ["holdsAt(moving(id1,id2),1)", "holdsAt(moving(id1,id2),2)"]
    )
    interp = Interpretation("term", 1, 2, narrative, annotation)

    update_clause_counters([clause], interp, modes)

    assert clause.stats.fn == 1
    assert clause.stats.tp == 1
    assert clause.stats.fp == 0


# New-clause triggers

def test_uncovered_initiation_point_is_found(table2_interpretation, modes):
    """Test that moving(id1,id2) starting at 2 seeds an initiation clause at time 1."""
    assert find_uncovered_instance([], table2_interpretation, ClauseKind.INITIATION, modes) == (MOVING, 1)


def test_covered_initiation_point_is_not_reported(seeded_clause, table2_interpretation, modes):
    """Test that a firing initiation clause accounts for the instance."""
    assert find_uncovered_instance([seeded_clause], table2_interpretation, ClauseKind.INITIATION, modes) is None


def test_uncovered_termination_point_is_found(table2_interpretation, modes):
    """Test that moving(id1,id2) ending after 2 seeds a termination clause at time 2."""
    assert find_uncovered_instance([], table2_interpretation, ClauseKind.TERMINATION, modes) == (MOVING, 2)


def test_non_target_fluents_never_seed(table2_interpretation):
    """Test that fluents without a head mode are ignored."""
    other = parse_modes("modeh(initiatedAt(meeting(+person,+person),+time)).\n")

    assert find_uncovered_instance([], table2_interpretation, ClauseKind.INITIATION, other) is None


# Classification

def test_classification_fn_under_threshold_25(table2_interpretation, modes):
    """Test that the threshold 25 clause misses the time 2 annotation."""
    theory = Theory()
    theory.add(
        theory_clause(
            "c",
            "initiatedAt(moving(X,Y),T) :- happensAt(walk(X),T), happensAt(walk(Y),T), distLessThan(X,Y,25,T).",
        )
    )
    result = classify_instances(theory, table2_interpretation, FluentState(), modes)

    assert result.labels[(MOVING, 2)] is Label.FN
    assert result.labels[(MOVING_BACK, 2)] is Label.TN


def test_classification_tp_under_threshold_40(table2_interpretation, modes):
    """Test that threshold 40 recognises moving(id1,id2) at 2 and carries it to 3."""
    theory = Theory()
    theory.add(
        theory_clause(
            "d",
            "initiatedAt(moving(X,Y),T) :- happensAt(walk(X),T), happensAt(walk(Y),T), distLessThan(X,Y,40,T).",
        )
    )
    result = classify_instances(theory, table2_interpretation, FluentState(), modes)

    assert result.labels[(MOVING, 2)] is Label.TP
    assert result.labels[(MOVING_BACK, 2)] is Label.FP
    assert result.labels[(MOVING, 3)] is Label.FP
    assert MOVING in result.state


def test_one_step_supervision_restarts_from_annotation(table2_interpretation, modes):
    """Test that without carry an empty theory predicts the annotated state at T for T+1."""
    result = classify_instances(Theory(), table2_interpretation, FluentState(), modes, carry=False)

    assert result.labels[(MOVING, 2)] is Label.FN
    assert result.labels[(MOVING, 3)] is Label.FP
    assert result.counts()[Label.TP] == 0
