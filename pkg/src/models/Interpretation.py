"""Training interpretation and fluent state models."""

from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Tuple

from src.models.Term import Atom, Constant, time_of


@dataclass(frozen=True)
class FluentState:
    """The set of target fluents holding at one time point."""

    holding: FrozenSet[Atom] = frozenset()

    @classmethod
    def of(cls, fluents: Iterable[Atom]) -> "FluentState":
        return cls(frozenset(fluents))

    def __contains__(self, fluent: Atom) -> bool:
        return fluent in self.holding

    def __len__(self) -> int:
        return len(self.holding)


@dataclass(frozen=True)
class Interpretation:
    """One training example: the true ground atoms of a time window.

    ``narrative`` holds happensAt/2 and context holdsAt/2 atoms for
    ``t_start .. t_end``. ``annotation`` holds target holdsAt/2 atoms for
    ``t_start .. t_end + 1``; the atoms at ``t_start`` give the state the
    window starts from, the later ones label the window. Everything absent
    from the annotation is false.
    """

    interp_id: str
    t_start: int
    t_end: int
    narrative: FrozenSet[Atom] = frozenset()
    annotation: FrozenSet[Atom] = frozenset()

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise ValueError(
                f"Interpretation {self.interp_id} has empty time range "
                f"[{self.t_start}, {self.t_end}]"
            )

    @property
    def times(self) -> range:
        return range(self.t_start, self.t_end + 1)

    @property
    def has_positive(self) -> bool:
        return bool(self.annotation)

    @cached_property
    def narrative_index(self) -> Dict[Tuple[str, int], Tuple[Atom, ...]]:
        """Narrative atoms keyed by (predicate, time), in rendering order."""
        index: Dict[Tuple[str, int], List[Atom]] = defaultdict(list)
        for atom in self.narrative:
            index[(atom.predicate, time_of(atom))].append(atom)
        return {key: tuple(sorted(atoms, key=str)) for key, atoms in index.items()}

    @cached_property
    def _annotation_by_time(self) -> Dict[int, FrozenSet[Atom]]:
        by_time: Dict[int, set] = defaultdict(set)
        for atom in self.annotation:
            by_time[time_of(atom)].add(atom.args[0])
        return {time: frozenset(fluents) for time, fluents in by_time.items()}

    def annotated_at(self, time: int) -> FrozenSet[Atom]:
        """Target fluents the annotation says hold at ``time``."""
        return self._annotation_by_time.get(time, frozenset())

    def annotated_state(self, time: int) -> FluentState:
        return FluentState(self.annotated_at(time))

    @cached_property
    def coordinates(self) -> Dict[Tuple[str, int], Tuple[float, float]]:
        """(entity, time) -> (x, y) from holdsAt(coords(E,X,Y),T) atoms."""
        return self._context_values("coords", 2)

    @cached_property
    def directions(self) -> Dict[Tuple[str, int], float]:
        """(entity, time) -> heading in degrees from holdsAt(direction(E,D),T)."""
        return {key: values[0] for key, values in self._context_values("direction", 1).items()}

    def _context_values(self, functor: str, width: int) -> Dict[Tuple[str, int], tuple]:
        values = {}
        for atom in self.narrative:
            if atom.predicate != "holdsAt":
                continue
            fluent = atom.args[0]
            if not isinstance(fluent, Atom) or fluent.predicate != functor:
                continue
            if len(fluent.args) != width + 1:
                continue
            entity = fluent.args[0]
            numbers = fluent.args[1:]
            if not isinstance(entity, Constant) or not all(
                isinstance(number, Constant) for number in numbers
            ):
                continue
            try:
                parsed = tuple(float(n.name) for n in numbers)
            except ValueError:
                continue
            values[(entity.name, time_of(atom))] = parsed
        return values
