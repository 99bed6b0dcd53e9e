"""Clause models: bottom clauses, learned clauses and their candidate specializations."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, NamedTuple, Optional, Tuple

from src.models.ClauseStats import ClauseStats
from src.models.Term import Atom, Literal, Variable, iter_variables

# Refinement-stats key under which a clause is ranked against its own specializations.
PARENT_KEY = "<self>"


class ClauseKind(str, Enum):
    INITIATION = "initiatedAt"
    TERMINATION = "terminatedAt"

    @classmethod
    def of_head(cls, head: Atom) -> "ClauseKind":
        try:
            return cls(head.predicate)
        except ValueError:
            raise ValueError(
                f"Clause head {head} must be initiatedAt/2 or terminatedAt/2"
            ) from None


@dataclass(frozen=True)
class BottomClause:
    """The most specific clause saturated from one seed example."""

    head: Atom
    literals: Tuple[Literal, ...] = ()

    def __str__(self) -> str:
        return render_clause(self.head, self.literals)


class Candidate(NamedTuple):
    """A clause version under evaluation: the clause itself or one single-literal extension."""

    key: str
    literal: Optional[Literal]
    body: Tuple[Literal, ...]


def render_clause(head: Atom, body: Tuple[Literal, ...]) -> str:
    if not body:
        return f"{head}."
    return f"{head} :- {', '.join(str(literal) for literal in body)}."


@dataclass
class Clause:
    """
    A learned clause replicated on every node under the same id.

    ``stats`` is the node's merged view of the clause's counters,
    ``refinement_stats`` holds the same for each candidate specialization
    keyed by candidate key, and ``stable_since`` counts the examples this
    node processed since the clause last changed.
    """

    clause_id: str
    head: Atom
    body: Tuple[Literal, ...]
    bottom: BottomClause
    stats: ClauseStats = field(default_factory=ClauseStats)
    refinement_stats: Dict[str, ClauseStats] = field(default_factory=dict)
    stable_since: int = 0

    @property
    def kind(self) -> ClauseKind:
        return ClauseKind.of_head(self.head)

    @property
    def body_keys(self) -> Tuple[str, ...]:
        return tuple(literal.key for literal in self.body)

    @property
    def size(self) -> int:
        """Number of literals, head included."""
        return 1 + len(self.body)

    @property
    def head_variables(self) -> FrozenSet[Variable]:
        return frozenset(iter_variables(self.head))

    def signature(self) -> Tuple[str, str, Tuple[str, ...]]:
        """(id, head, body) as compared across replicas."""
        return (self.clause_id, str(self.head), self.body_keys)

    def render(self) -> str:
        return render_clause(self.head, self.body)

    def reset_statistics(self) -> None:
        self.stats = ClauseStats()
        self.refinement_stats = {}
        self.stable_since = 0

    def extended(self, literal: Literal) -> "Clause":
        """A fresh copy of this clause (same id) with ``literal`` appended to the body."""
        return Clause(
            clause_id=self.clause_id,
            head=self.head,
            body=self.body + (literal,),
            bottom=self.bottom,
        )
