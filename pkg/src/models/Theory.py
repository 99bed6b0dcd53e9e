"""Replicated theory of initiation and termination clauses."""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Tuple

from src.models.Clause import Clause, ClauseKind


@dataclass
class Theory:
    """Initiation and termination clauses keyed by clause id."""

    initiation: Dict[str, Clause] = field(default_factory=dict)
    termination: Dict[str, Clause] = field(default_factory=dict)

    def group(self, kind: ClauseKind) -> Dict[str, Clause]:
        return self.initiation if kind is ClauseKind.INITIATION else self.termination

    def add(self, clause: Clause) -> None:
        if clause.clause_id in self:
            raise ValueError(f"Clause id {clause.clause_id} already present in theory")
        self.group(clause.kind)[clause.clause_id] = clause

    def get(self, clause_id: str) -> Optional[Clause]:
        return self.initiation.get(clause_id) or self.termination.get(clause_id)

    def remove(self, clause_id: str) -> Clause:
        for group in (self.initiation, self.termination):
            if clause_id in group:
                return group.pop(clause_id)
        raise KeyError(clause_id)

    def replace(self, clause: Clause) -> None:
        """Swap the clause stored under ``clause.clause_id`` for ``clause``."""
        group = self.group(clause.kind)
        if clause.clause_id not in group:
            raise KeyError(clause.clause_id)
        group[clause.clause_id] = clause

    def __contains__(self, clause_id: str) -> bool:
        return clause_id in self.initiation or clause_id in self.termination

    def __len__(self) -> int:
        return len(self.initiation) + len(self.termination)

    def __iter__(self) -> Iterator[Clause]:
        return iter(self.clauses())

    def clauses(self, kind: Optional[ClauseKind] = None) -> List[Clause]:
        """Clauses ordered by id, optionally restricted to one kind."""
        if kind is None:
            pool = list(self.initiation.values()) + list(self.termination.values())
        else:
            pool = list(self.group(kind).values())
        return sorted(pool, key=lambda clause: clause.clause_id)

    def signature(self) -> FrozenSet[Tuple[str, str, Tuple[str, ...]]]:
        return frozenset(clause.signature() for clause in self.clauses())

    @property
    def size_literals(self) -> int:
        return sum(clause.size for clause in self.clauses())

    def render(self) -> str:
        """Clause text, initiation clauses first, each group ordered by rendering."""
        lines = []
        for kind in (ClauseKind.INITIATION, ClauseKind.TERMINATION):
            lines.extend(sorted(clause.render() for clause in self.clauses(kind)))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def merge(cls, *theories: "Theory") -> "Theory":
        combined = cls()
        for theory in theories:
            for clause in theory.clauses():
                combined.add(clause)
        return combined
