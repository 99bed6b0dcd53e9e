"""Mode declarations and constant pools that bound the clause search space."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from src.models.Term import Atom, Constant, Term, Variable

HEAD_PREDICATES = ("initiatedAt", "terminatedAt")


class ModeDeclarationError(ValueError):
    """Raised for malformed mode declarations or pools."""


class ModeKind(str, Enum):
    HEAD = "modeh"
    BODY = "modeb"


class Role(str, Enum):
    INPUT = "+"
    OUTPUT = "-"
    CONSTANT = "#"


@dataclass(frozen=True)
class Placemarker:
    role: Role
    type_name: str

    def __str__(self) -> str:
        return f"{self.role.value}{self.type_name}"


def placemarker_of(term: Term) -> Optional[Placemarker]:
    """Return the placemarker a schema slot denotes, or None for ordinary terms."""
    if not isinstance(term, Constant) or len(term.name) < 2:
        return None
    prefix = term.name[0]
    for role in Role:
        if prefix == role.value and not term.name[1].isdigit():
            return Placemarker(role, term.name[1:])
    return None


@dataclass(frozen=True)
class ModeDeclaration:
    """A ``modeh``/``modeb`` schema. ``recall`` of None means unbounded."""

    kind: ModeKind
    schema: Atom
    recall: Optional[int] = None

    def __str__(self) -> str:
        if self.recall is None:
            return f"{self.kind.value}({self.schema})."
        return f"{self.kind.value}({self.recall},{self.schema})."

    def template(self) -> Tuple[Atom, Dict[Variable, Placemarker]]:
        """The schema with every placemarker replaced by a fresh slot variable.

        Slot variables are named ``_S0``, ``_S1``... left to right; the mapping
        gives the placemarker of each slot.
        """
        slots: Dict[Variable, Placemarker] = {}

        def rewrite(term: Term) -> Term:
            marker = placemarker_of(term)
            if marker is not None:
                slot = Variable(f"_S{len(slots)}")
                slots[slot] = marker
                return slot
            if isinstance(term, Atom):
                return Atom(term.predicate, tuple(rewrite(arg) for arg in term.args))
            return term

        atom = rewrite(self.schema)
        assert isinstance(atom, Atom)
        return atom, slots

    def placemarkers(self) -> List[Placemarker]:
        return list(self.template()[1].values())

    @property
    def fluent_name(self) -> Optional[str]:
        """Target fluent functor of a head mode, e.g. ``moving``."""
        if self.kind is not ModeKind.HEAD or not self.schema.args:
            return None
        fluent = self.schema.args[0]
        return fluent.predicate if isinstance(fluent, Atom) else None


@dataclass(frozen=True)
class ModeBias:
    """All mode declarations and constant pools of one run."""

    head_modes: Tuple[ModeDeclaration, ...] = ()
    body_modes: Tuple[ModeDeclaration, ...] = ()
    pools: Dict[str, Tuple[Constant, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for mode in self.head_modes:
            if mode.schema.predicate not in HEAD_PREDICATES:
                raise ModeDeclarationError(
                    f"Head mode {mode} must use initiatedAt or terminatedAt"
                )
        for mode in self.head_modes + self.body_modes:
            for marker in mode.placemarkers():
                if marker.role is Role.CONSTANT and not self.pools.get(marker.type_name):
                    raise ModeDeclarationError(
                        f"Mode {mode} uses #{marker.type_name} but no non-empty pool "
                        f"'{marker.type_name}' is declared"
                    )

    def head_modes_for(self, predicate: str) -> List[ModeDeclaration]:
        return [mode for mode in self.head_modes if mode.schema.predicate == predicate]

    @property
    def target_fluents(self) -> Tuple[str, ...]:
        names = []
        for mode in self.head_modes:
            name = mode.fluent_name
            if name is not None and name not in names:
                names.append(name)
        return tuple(names)

    def pool(self, type_name: str) -> Tuple[Constant, ...]:
        return self.pools.get(type_name, ())
