"""
Clause evaluation against interpretations.

Firing sets of clauses and their candidate specializations, instance
classification through one-step inference, the reward/penalty counter
updates, and detection of instances no clause accounts for.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

from src.functions.clauseSpace import candidate_fluents, specializations
from src.functions.ecKernel import cover_body, extend_cover, step_infer, unify
from src.models.Clause import PARENT_KEY, Clause, ClauseKind
from src.models.ClauseStats import ClauseStats
from src.models.Interpretation import FluentState, Interpretation
from src.models.ModeDeclaration import ModeBias
from src.models.Term import Atom, Substitution, time_constant
from src.models.Theory import Theory

logger = logging.getLogger(__name__)


class Label(str, Enum):
    TP = "TP"
    FP = "FP"
    FN = "FN"
    TN = "TN"


@dataclass
class Classification:
    """Labels per (fluent, time) and the inferred state after the last time point."""

    labels: Dict[Tuple[Atom, int], Label] = field(default_factory=dict)
    state: FluentState = field(default_factory=FluentState)

    def counts(self) -> Counter:
        return Counter(self.labels.values())

    def with_label(self, label: Label) -> List[Tuple[Atom, int]]:
        return sorted(
            (key for key, value in self.labels.items() if value is label),
            key=lambda key: (key[1], str(key[0])),
        )


def head_binding(clause: Clause, fluent: Atom, time: int) -> Optional[Substitution]:
    ground_head = Atom(clause.head.predicate, (fluent, time_constant(time)))
    return unify(clause.head, ground_head)


def fires(clause: Clause, interp: Interpretation, time: int, fluent: Atom) -> bool:
    theta = head_binding(clause, fluent, time)
    if theta is None:
        return False
    return bool(cover_body(clause.body, interp, time, theta))


def firing_fluents(
    clause: Clause,
    interp: Interpretation,
    time: int,
    fluents: Iterable[Atom],
    with_candidates: bool = False,
) -> Dict[str, Set[Atom]]:
    """
    Fluents the clause fires on at ``time``, keyed by candidate key.

    ``PARENT_KEY`` maps to the clause's own firings. With ``with_candidates``
    every legal specialization gets an entry too; a specialization can only
    fire where its parent does, so its firings are computed by extending the
    parent's substitutions through the added literal.
    """
    candidates = specializations(clause)[1:] if with_candidates else []
    result: Dict[str, Set[Atom]] = {PARENT_KEY: set()}
    for candidate in candidates:
        result[candidate.key] = set()
    for fluent in fluents:
        theta = head_binding(clause, fluent, time)
        if theta is None:
            continue
        thetas = cover_body(clause.body, interp, time, theta)
        if not thetas:
            continue
        result[PARENT_KEY].add(fluent)
        for candidate in candidates:
            assert candidate.literal is not None
            if extend_cover(candidate.literal, interp, time, thetas):
                result[candidate.key].add(fluent)
    return result


def fluent_universe(
    interp: Interpretation, time: int, kind: ClauseKind, modes: ModeBias
) -> Set[Atom]:
    """Candidate fluents at ``time`` plus any annotated at ``time`` or ``time + 1``."""
    universe = set(candidate_fluents(interp, time, kind, modes))
    universe |= interp.annotated_at(time)
    universe |= interp.annotated_at(time + 1)
    return universe


def classify_instances(
    theory: Theory,
    interp: Interpretation,
    prev: FluentState,
    modes: ModeBias,
    carry: bool = True,
) -> Classification:
    """
    Label every (fluent, T+1) of ``interp`` by comparing inference with the annotation.

    With ``carry`` the inferred state is threaded through the window starting
    from ``prev``; without it each step starts from the annotated state at T.
    """
    classification = Classification()
    state = prev if carry else interp.annotated_state(interp.t_start)
    for time in interp.times:
        if not carry:
            state = interp.annotated_state(time)
        initiated, terminated = theory_firings(theory, interp, time, modes, state)
        next_state = step_infer(state, initiated, terminated)
        annotated = interp.annotated_at(time + 1)
        considered = (
            set(candidate_fluents(interp, time, ClauseKind.INITIATION, modes))
            | annotated
            | next_state.holding
        )
        for fluent in considered:
            inferred = fluent in next_state
            actual = fluent in annotated
            if inferred and actual:
                label = Label.TP
            elif inferred:
                label = Label.FP
            elif actual:
                label = Label.FN
            else:
                label = Label.TN
            classification.labels[(fluent, time + 1)] = label
        state = next_state
    classification.state = state
    return classification


def _reward(stats: ClauseStats, kind: ClauseKind, fluent: Atom, interp: Interpretation, time: int) -> None:
    held_next = fluent in interp.annotated_at(time + 1)
    if kind is ClauseKind.INITIATION:
        if held_next:
            stats.tp += 1
        else:
            stats.fp += 1
        return
    if held_next:
        stats.fn += 1
    elif fluent in interp.annotated_at(time):
        stats.tp += 1


def update_clause_counters(
    clauses: Iterable[Clause], interp: Interpretation, modes: ModeBias
) -> None:
    """
    Apply one interpretation's rewards and penalties to every clause and candidate.

    Initiation firing on (F,T): TP when F holds at T+1, else FP.
    Termination firing on (F,T): FN when F still holds at T+1, TP when F
    held at T and no longer does. Each clause, and each of its candidates,
    then counts the interpretation once in ``e``; ``stable_since`` advances.
    """
    universes: Dict[Tuple[ClauseKind, int], Set[Atom]] = {}
    for clause in clauses:
        kind = clause.kind
        touched: Set[str] = {PARENT_KEY}
        for time in interp.times:
            universe_key = (kind, time)
            if universe_key not in universes:
                universes[universe_key] = fluent_universe(interp, time, kind, modes)
            firings = firing_fluents(
                clause, interp, time, universes[universe_key], with_candidates=True
            )
            for key, fired in firings.items():
                touched.add(key)
                stats = clause.stats if key == PARENT_KEY else clause.refinement_stats.setdefault(
                    key, ClauseStats()
                )
                for fluent in sorted(fired, key=str):
                    _reward(stats, kind, fluent, interp, time)
        for key in touched:
            stats = clause.stats if key == PARENT_KEY else clause.refinement_stats[key]
            stats.e += 1
        clause.stable_since += 1


def find_uncovered_instance(
    clauses: Iterable[Clause], interp: Interpretation, kind: ClauseKind, modes: ModeBias
) -> Optional[Tuple[Atom, int]]:
    """
    Earliest (fluent, T) that a new ``kind`` clause should be seeded from.

    Initiation: F holds at T+1 but not at T and no initiation clause fires.
    Termination: F holds at T but not at T+1 and no termination clause fires.
    Candidate specializations fire only where their parent does, so parents
    alone decide coverage. Ties on T go to the smallest fluent rendering.
    Only fluents with a matching head mode qualify.
    """
    clause_list = list(clauses)
    targets = set(modes.target_fluents)
    for time in interp.times:
        before = interp.annotated_at(time)
        after = interp.annotated_at(time + 1)
        if kind is ClauseKind.INITIATION:
            instances = after - before
        else:
            instances = before - after
        for fluent in sorted(instances, key=str):
            if fluent.predicate not in targets:
                continue
            if not any(fires(clause, interp, time, fluent) for clause in clause_list):
                return fluent, time
    return None


def theory_firings(
    theory: Theory, interp: Interpretation, time: int, modes: ModeBias, state: FluentState
) -> Tuple[Set[Atom], Set[Atom]]:
    """(initiated, terminated) fluents of the whole theory at ``time``."""
    result = []
    for kind in (ClauseKind.INITIATION, ClauseKind.TERMINATION):
        fired: Set[Atom] = set()
        clauses = theory.clauses(kind)
        if clauses:
            universe = fluent_universe(interp, time, kind, modes) | state.holding
            for clause in clauses:
                fired |= firing_fluents(clause, interp, time, universe)[PARENT_KEY]
        result.append(fired)
    return result[0], result[1]
