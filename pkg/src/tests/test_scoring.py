"""
Unit tests for clause scoring, the Hoeffding test and the pruning rule.

Run with: pytest src/tests/test_scoring.py -v
"""

from decimal import Decimal, getcontext

import numpy as np
import pytest

from src.functions.scoring import (
    KEEP,
    SpecializationHistory,
    epsilon,
    g_score,
    hoeffding_decision,
    precision,
    rank_candidates,
    recall,
    should_prune,
)
from src.functions.termParser import parse_atom
from src.models.Clause import BottomClause, Clause, ClauseKind
from src.models.ClauseStats import ClauseStats
from src.models.HoeffdingParams import ConfigError, HoeffdingParams
from src.models.Term import Literal

WALK_X = "happensAt(walk(X),T)"
WALK_Y = "happensAt(walk(Y),T)"
CLOSE = "distLessThan(X,Y,25,T)"


def literal(text, inputs):
    return Literal(parse_atom(text), tuple(inputs))


# Test Fixtures

@pytest.fixture
def params():
    return HoeffdingParams(delta=0.05, tie_threshold=0.05, prune_threshold=0.3, warm_up=20)


@pytest.fixture
def initiation_clause():
    """Empty-bodied initiation clause over three bottom literals."""
    head = parse_atom("initiatedAt(moving(X,Y),T)")
    bottom = BottomClause(
        head,
        (
            literal(WALK_X, ["X", "T"]),
            literal(WALK_Y, ["Y", "T"]),
            literal(CLOSE, ["X", "Y", "T"]),
        ),
    )
    return Clause(clause_id="c1", head=head, body=(), bottom=bottom)


@pytest.fixture
def termination_clause():
    head = parse_atom("terminatedAt(moving(X,Y),T)")
    bottom = BottomClause(head, (literal("happensAt(inactive(X),T)", ["X", "T"]),))
    return Clause(clause_id="c2", head=head, body=(), bottom=bottom)


# Hoeffding bound

def test_epsilon_matches_high_precision_value():
    """Test epsilon(0.05, 1000) against a 30-digit evaluation and the published 0.038703."""
    getcontext().prec = 30
    exact = ((Decimal(1) / Decimal("0.05")).ln() / Decimal(2000)).sqrt()

    assert epsilon(0.05, 1000) == pytest.approx(float(exact), abs=1e-12)
    assert abs(epsilon(0.05, 1000) - 0.038703) < 1e-6


def test_epsilon_is_monotone_over_random_samples():
    """Test that epsilon shrinks with more examples and with larger delta."""
    rng = np.random.default_rng(11)
    for _ in range(1000):
        delta = float(rng.uniform(0.001, 0.999))
        n = int(rng.integers(1, 100_000))

        assert epsilon(delta, n + 1) < epsilon(delta, n)
        assert epsilon(min(delta * 1.01, 1.0), n) <= epsilon(delta, n)


@pytest.mark.parametrize("delta,n", [(0.05, 0), (0.05, -3), (0.0, 10), (1.5, 10)])
def test_epsilon_rejects_invalid_arguments(delta, n):
    """Test that n < 1 and delta outside (0, 1] are errors."""
    with pytest.raises(ValueError):
        epsilon(delta, n)


# Scores

def test_precision_and_recall_define_g_score():
    """Test that initiation uses precision and termination uses recall."""
    stats = ClauseStats(tp=6, fp=2, fn=4, e=10)

    assert precision(stats) == 0.75
    assert recall(stats) == 0.6
    assert g_score(stats, ClauseKind.INITIATION) == 0.75
    assert g_score(stats, ClauseKind.TERMINATION) == 0.6


def test_scores_of_unfired_clause_are_zero():
    """Test that 0/0 scores 0 rather than raising."""
    assert precision(ClauseStats()) == 0.0
    assert recall(ClauseStats()) == 0.0


def test_rank_candidates_prefers_score_then_shorter_body(initiation_clause):
    """Test that equal scores are broken by body length, so the parent wins ties."""
    initiation_clause.stats = ClauseStats(tp=10, fp=0, e=20)
    initiation_clause.refinement_stats = {WALK_X: ClauseStats(tp=5, fp=0, e=20)}
    ranked = rank_candidates(initiation_clause)

    assert ranked[0][1].key == "<self>"
    assert ranked[1][1].key == WALK_X


# Hoeffding decision

def test_no_examples_means_keep(initiation_clause, params):
    """Test that e = 0 leaves the clause alone."""
    assert hoeffding_decision(initiation_clause, params) == KEEP


def test_clear_winner_is_chosen(initiation_clause, params):
    """Test that a lead larger than epsilon specializes with the best literal."""
    initiation_clause.stats = ClauseStats(tp=10, fp=90, e=100)
    initiation_clause.refinement_stats = {
        WALK_X: ClauseStats(tp=10, fp=0, e=100),
        WALK_Y: ClauseStats(tp=5, fp=50, e=100),
    }
    decision = hoeffding_decision(initiation_clause, params)

    assert decision.specialize
    assert decision.candidate_key == WALK_X
    assert decision.epsilon == pytest.approx(epsilon(0.05, 100))
    assert decision.margin == pytest.approx(1.0 - 5 / 55)


def test_parent_on_top_keeps(initiation_clause, params):
    """Test that a clause better than all its extensions is kept."""
    initiation_clause.stats = ClauseStats(tp=50, fp=0, e=100)
    initiation_clause.refinement_stats = {WALK_X: ClauseStats(tp=50, fp=0, e=100)}

    assert hoeffding_decision(initiation_clause, params) == KEEP


def test_small_margin_waits_for_more_examples(initiation_clause, params):
    """Test that a tie with a large epsilon keeps the clause."""
    initiation_clause.stats = ClauseStats(tp=10, fp=10, e=100)
    initiation_clause.refinement_stats = {
        WALK_X: ClauseStats(tp=10, fp=0, e=100),
        WALK_Y: ClauseStats(tp=10, fp=0, e=100),
    }

    assert hoeffding_decision(initiation_clause, params) == KEEP


def test_tie_broken_once_epsilon_below_threshold(initiation_clause, params):
    """Test that with epsilon < tie threshold the best-ranked candidate wins a tie."""
    initiation_clause.stats = ClauseStats(tp=1000, fp=1000, e=10_000)
    initiation_clause.refinement_stats = {
        WALK_Y: ClauseStats(tp=1000, fp=0, e=10_000),
        WALK_X: ClauseStats(tp=1000, fp=0, e=10_000),
    }
    decision = hoeffding_decision(initiation_clause, params)

    assert epsilon(0.05, 10_000) < params.tie_threshold
    assert decision.candidate_key == WALK_X
    assert decision.margin == 0.0


def test_termination_clauses_rank_by_recall(termination_clause, params):
    """Test that a termination candidate with higher recall is preferred."""
    termination_clause.stats = ClauseStats(tp=20, fn=80, e=100)
    termination_clause.refinement_stats = {
        "happensAt(inactive(X),T)": ClauseStats(tp=20, fp=500, fn=0, e=100)
    }
    decision = hoeffding_decision(termination_clause, params)

    assert decision.candidate_key == "happensAt(inactive(X),T)"


# Pruning

def test_low_scoring_stable_clause_is_pruned(initiation_clause, params):
    """Test that score + epsilon below the threshold prunes after enough stability."""
    initiation_clause.stats = ClauseStats(tp=1, fp=99, e=1000)
    initiation_clause.stable_since = 1000

    assert should_prune(initiation_clause, 100.0, params)


def test_nothing_is_pruned_before_any_specialization(initiation_clause, params):
    """Test that an average of 0 disables pruning."""
    initiation_clause.stats = ClauseStats(tp=1, fp=99, e=1000)
    initiation_clause.stable_since = 1000

    assert not should_prune(initiation_clause, 0.0, params)


def test_recently_changed_clause_is_not_pruned(initiation_clause, params):
    """Test that stability below the average specialization count protects a clause."""
    initiation_clause.stats = ClauseStats(tp=1, fp=99, e=1000)
    initiation_clause.stable_since = 50

    assert not should_prune(initiation_clause, 100.0, params)


def test_summed_stability_overrides_local_counter(initiation_clause, params):
    """Test that stability summed over replicas can enable pruning."""
    initiation_clause.stats = ClauseStats(tp=1, fp=99, e=1000)
    initiation_clause.stable_since = 50

    assert should_prune(initiation_clause, 100.0, params, stable_since=200)


def test_good_clause_is_not_pruned(initiation_clause, params):
    """Test that a clause scoring above the threshold survives."""
    initiation_clause.stats = ClauseStats(tp=90, fp=10, e=1000)
    initiation_clause.stable_since = 1000

    assert not should_prune(initiation_clause, 100.0, params)


def test_specialization_history_average():
    """Test the running mean of specialization example counts."""
    history = SpecializationHistory()
    assert history.average == 0.0

    history.observe(100)
    history.observe(300)

    assert history.average == 200.0


# Parameters

@pytest.mark.parametrize(
    "overrides",
    [{"delta": 0.0}, {"delta": 1.0}, {"tie_threshold": 0.0}, {"prune_threshold": 1.5}, {"warm_up": 0}],
)
def test_invalid_parameters_raise_config_error(overrides):
    """Test that out-of-range parameters are rejected at construction."""
    with pytest.raises(ConfigError):
        HoeffdingParams(**overrides)


def test_parameters_from_environment(monkeypatch):
    """Test that ECSTREAM_* variables override defaults."""
    monkeypatch.setenv("ECSTREAM_DELTA", "0.01")
    monkeypatch.setenv("ECSTREAM_WARM_UP", "50")
    monkeypatch.delenv("ECSTREAM_TIE_THRESHOLD", raising=False)
    monkeypatch.delenv("ECSTREAM_PRUNE_THRESHOLD", raising=False)

    params = HoeffdingParams.from_env()

    assert params.delta == 0.01
    assert params.warm_up == 50
    assert params.tie_threshold == 0.05


def test_malformed_environment_value_is_config_error(monkeypatch):
    """Test that a non-numeric environment value is reported as a config error."""
    monkeypatch.setenv("ECSTREAM_DELTA", "often")

    with pytest.raises(ConfigError, match="ECSTREAM_DELTA"):
        HoeffdingParams.from_env()


def test_overrides_ignore_missing_values(params):
    """Test that None overrides keep the current value."""
    updated = params.with_overrides(delta=0.1, warm_up=None)

    assert updated.delta == 0.1
    assert updated.warm_up == params.warm_up
