"""
Event Calculus kernel.

Unification, clause-body coverage against an interpretation's narrative,
built-in spatial comparisons, and one-step inertia inference:

    initiatedAt(F,T)                        -> holdsAt(F,T+1)
    holdsAt(F,T), not terminatedAt(F,T)     -> holdsAt(F,T+1)

A fluent both initiated and terminated at T holds at T+1.
"""

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Set, Union

from src.models.Interpretation import FluentState, Interpretation
from src.models.Term import (
    Atom,
    Constant,
    Literal,
    Substitution,
    Term,
    Variable,
    is_ground,
    time_constant,
)

logger = logging.getLogger(__name__)

# Built-in comparisons: predicate -> arity. All take (A, B, Threshold, T).
BUILTINS: Dict[str, int] = {"distLessThan": 4, "distMoreThan": 4, "dirLessThan": 4}
SYMMETRIC_BUILTINS = frozenset(BUILTINS)

BodyItem = Union[Literal, Atom]


class BuiltinEvaluationError(ValueError):
    """Raised when a built-in comparison is evaluated with unbound arguments."""


def is_builtin(atom: Atom) -> bool:
    return BUILTINS.get(atom.predicate) == atom.arity


def walk(term: Term, theta: Substitution) -> Term:
    while isinstance(term, Variable) and term in theta:
        term = theta[term]
    return term


def substitute(term: Term, theta: Substitution) -> Term:
    """Apply ``theta`` to ``term`` all the way down."""
    term = walk(term, theta)
    if isinstance(term, Atom):
        return Atom(term.predicate, tuple(substitute(arg, theta) for arg in term.args))
    return term


def substitute_atom(atom: Atom, theta: Substitution) -> Atom:
    result = substitute(atom, theta)
    assert isinstance(result, Atom)
    return result


def unify(a: Term, b: Term, theta: Optional[Substitution] = None) -> Optional[Substitution]:
    """
    Most general extension of ``theta`` unifying ``a`` and ``b``.

    Returns a new substitution, or None when the terms do not unify. The
    input substitution is never modified. No occurs check is performed;
    terms here are at most one function level deep.
    """
    result: Substitution = dict(theta) if theta else {}
    pending = [(a, b)]
    while pending:
        left, right = pending.pop()
        left = walk(left, result)
        right = walk(right, result)
        if left == right:
            continue
        if isinstance(left, Variable):
            result[left] = right
        elif isinstance(right, Variable):
            result[right] = left
        elif (
            isinstance(left, Atom)
            and isinstance(right, Atom)
            and left.predicate == right.predicate
            and left.arity == right.arity
        ):
            pending.extend(zip(left.args, right.args))
        else:
            return None
    return result


def _number(term: Term, atom: Atom) -> float:
    if not isinstance(term, Constant):
        raise BuiltinEvaluationError(f"Built-in {atom} has a non-constant argument {term}")
    try:
        return float(term.name)
    except ValueError:
        raise BuiltinEvaluationError(
            f"Built-in {atom} expects a numeric threshold, got {term}"
        ) from None


def angle_difference(first: float, second: float) -> float:
    """Absolute difference of two headings in degrees, folded into [0, 180]."""
    difference = abs(first - second) % 360.0
    return min(difference, 360.0 - difference)


def evaluate_builtin(atom: Atom, interp: Interpretation, time: int) -> bool:
    """
    Evaluate a ground built-in comparison at ``time``.

    Distances are euclidean over holdsAt(coords(E,X,Y),T); directions compare
    holdsAt(direction(E,D),T) headings. Missing context makes the comparison false.

    Raises:
        BuiltinEvaluationError: if any argument is still a variable
    """
    if not is_ground(atom):
        raise BuiltinEvaluationError(f"Built-in {atom} evaluated with unbound arguments")
    first, second, threshold_term = atom.args[0], atom.args[1], atom.args[2]
    threshold = _number(threshold_term, atom)
    names = []
    for entity in (first, second):
        if not isinstance(entity, Constant):
            raise BuiltinEvaluationError(f"Built-in {atom} expects entity constants")
        names.append(entity.name)
    if atom.predicate == "dirLessThan":
        heading_a = interp.directions.get((names[0], time))
        heading_b = interp.directions.get((names[1], time))
        if heading_a is None or heading_b is None:
            return False
        return angle_difference(heading_a, heading_b) < threshold
    position_a = interp.coordinates.get((names[0], time))
    position_b = interp.coordinates.get((names[1], time))
    if position_a is None or position_b is None:
        return False
    distance = math.dist(position_a, position_b)
    if atom.predicate == "distLessThan":
        return distance < threshold
    return distance > threshold


def _atom_of(item: BodyItem) -> Atom:
    return item.atom if isinstance(item, Literal) else item


def extend_cover(
    item: BodyItem, interp: Interpretation, time: int, thetas: Iterable[Substitution]
) -> List[Substitution]:
    """Extend every substitution in ``thetas`` through one more body literal."""
    atom = _atom_of(item)
    time_term = time_constant(time)
    extended: List[Substitution] = []
    builtin = is_builtin(atom)
    for theta in thetas:
        if builtin:
            bound = unify(atom.args[-1], time_term, theta)
            if bound is None:
                continue
            if evaluate_builtin(substitute_atom(atom, bound), interp, time):
                extended.append(bound)
            continue
        grounded = substitute_atom(atom, theta)
        if is_ground(grounded):
            if grounded in interp.narrative and grounded.args[-1] == time_term:
                extended.append(theta)
            continue
        for fact in interp.narrative_index.get((atom.predicate, time), ()):
            match = unify(grounded, fact, theta)
            if match is not None:
                extended.append(match)
    return extended


def cover_body(
    body: Sequence[BodyItem],
    interp: Interpretation,
    time: int,
    theta: Optional[Substitution] = None,
) -> List[Substitution]:
    """
    All substitutions grounding ``body`` in ``interp`` at ``time``.

    Literals are matched depth-first in the order written, narrative literals
    through the (predicate, time) index and built-ins by evaluation. The empty
    body yields exactly one substitution, ``theta`` itself.

    Args:
        body: positive literals (happensAt/2, context holdsAt/2 or built-ins)
        interp: interpretation whose narrative is searched
        time: the time point the body is evaluated at
        theta: optional pre-bindings, typically the head variables

    Returns:
        Distinct substitutions; an empty list means the body is not covered.

    Raises:
        BuiltinEvaluationError: if a built-in is reached with unbound arguments
    """
    thetas: List[Substitution] = [dict(theta) if theta else {}]
    for item in body:
        thetas = extend_cover(item, interp, time, thetas)
        if not thetas:
            return []
    return _distinct(thetas)


def _distinct(thetas: List[Substitution]) -> List[Substitution]:
    seen: Set[frozenset] = set()
    unique = []
    for theta in thetas:
        key = frozenset(theta.items())
        if key not in seen:
            seen.add(key)
            unique.append(theta)
    return unique


def step_infer(
    prev: FluentState, initiated: Iterable[Atom], terminated: Iterable[Atom]
) -> FluentState:
    """One inference step: initiated | (prev - terminated). Initiation wins ties."""
    initiated_set = frozenset(initiated)
    persisting = prev.holding - frozenset(terminated)
    return FluentState(initiated_set | persisting)
