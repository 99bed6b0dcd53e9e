"""First-order terms, atoms and clause-body literals."""

from dataclasses import dataclass
from typing import Dict, Iterator, Tuple, Union


@dataclass(frozen=True)
class Constant:
    """A constant symbol, e.g. ``id1`` or ``25``."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Variable:
    """A logical variable, e.g. ``X`` or ``T``."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Atom:
    """A predicate applied to arguments.

    Atoms double as one-level function terms, so ``happensAt(walk(id1),1)``
    is an Atom whose first argument is the Atom ``walk(id1)``.
    """

    predicate: str
    args: Tuple["Term", ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(str(arg) for arg in self.args)})"

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def signature(self) -> Tuple[str, int]:
        return (self.predicate, len(self.args))


Term = Union[Constant, Variable, Atom]

# Variable -> bound term. Treated as immutable: extensions copy.
Substitution = Dict[Variable, Term]


def iter_variables(term: Term) -> Iterator[Variable]:
    """Yield every variable occurrence in ``term``, left to right."""
    if isinstance(term, Variable):
        yield term
    elif isinstance(term, Atom):
        for arg in term.args:
            yield from iter_variables(arg)


def is_ground(term: Term) -> bool:
    """True iff no Variable occurs anywhere in ``term``."""
    if isinstance(term, Variable):
        return False
    if isinstance(term, Atom):
        return all(is_ground(arg) for arg in term.args)
    return True


def time_of(atom: Atom) -> int:
    """Integer time stamp of a happensAt/holdsAt/initiatedAt/terminatedAt atom."""
    last = atom.args[-1]
    if not isinstance(last, Constant):
        raise ValueError(f"Atom {atom} has no ground time argument")
    return int(last.name)


def time_constant(time: int) -> Constant:
    return Constant(str(time))


@dataclass(frozen=True)
class Literal:
    """A positive body literal.

    ``inputs`` and ``outputs`` name the variables bound to ``+`` and ``-``
    placemarkers of the mode declaration the literal was built from. Literals
    parsed from theory text carry no mode information.
    """

    atom: Atom
    inputs: Tuple[str, ...] = ()
    outputs: Tuple[str, ...] = ()

    def __str__(self) -> str:
        return str(self.atom)

    @property
    def key(self) -> str:
        """Canonical rendering; identical on every replica of a clause."""
        return str(self.atom)
