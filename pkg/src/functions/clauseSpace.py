"""
Clause search space.

Mode-file parsing, bottom-clause saturation of a seed example, single-literal
specialization candidates, candidate ground fluents and clause ids.
"""

import hashlib
import itertools
import logging
from typing import Dict, Iterable, List, Optional, Set, Tuple

from src.functions.ecKernel import (
    SYMMETRIC_BUILTINS,
    evaluate_builtin,
    is_builtin,
    substitute_atom,
    unify,
)
from src.functions.termParser import (
    LIST_FUNCTOR,
    TermSyntaxError,
    iter_statements,
    parse_atom,
    strip_period,
)
from src.models.Clause import PARENT_KEY, BottomClause, Candidate, Clause, ClauseKind
from src.models.Interpretation import Interpretation
from src.models.ModeDeclaration import (
    ModeBias,
    ModeDeclaration,
    ModeDeclarationError,
    ModeKind,
    Placemarker,
    Role,
)
from src.models.Term import Atom, Constant, Literal, Substitution, Term, Variable, time_constant

logger = logging.getLogger(__name__)

TIME_TYPE = "time"
TIME_VARIABLE = Variable("T")
MAX_VARIABLE_DEPTH = 1
_VARIABLE_LETTERS = ("X", "Y", "Z", "U", "V", "W")


def variable_name(index: int) -> str:
    """X, Y, Z, U, V, W, X1, Y1, ..."""
    letter = _VARIABLE_LETTERS[index % len(_VARIABLE_LETTERS)]
    round_number = index // len(_VARIABLE_LETTERS)
    return letter if round_number == 0 else f"{letter}{round_number}"


def parse_modes(text: str) -> ModeBias:
    """
    Parse a mode file.

    Accepted statements, one per '.':
        modeh(initiatedAt(moving(+person,+person),+time)).
        modeb(happensAt(walk(+person),+time)).
        modeb(2, holdsAt(coords(+person,-x,-y),+time)).   % recall 2
        pool(dist, [25,30,40]).

    Raises:
        ModeDeclarationError: on malformed statements, unknown directives,
            or #type placemarkers without a pool
    """
    head_modes: List[ModeDeclaration] = []
    body_modes: List[ModeDeclaration] = []
    pools: Dict[str, Tuple[Constant, ...]] = {}
    try:
        statements = list(iter_statements(text))
    except TermSyntaxError as e:
        raise ModeDeclarationError(str(e)) from e
    for line_number, statement in statements:
        try:
            directive = parse_atom(strip_period(statement))
        except TermSyntaxError as e:
            raise ModeDeclarationError(f"Line {line_number}: {e}") from e
        if directive.predicate in (ModeKind.HEAD.value, ModeKind.BODY.value):
            mode = _mode_from_directive(directive, line_number)
            (head_modes if mode.kind is ModeKind.HEAD else body_modes).append(mode)
        elif directive.predicate == "pool":
            name, values = _pool_from_directive(directive, line_number)
            pools[name] = values
        else:
            raise ModeDeclarationError(
                f"Line {line_number}: unknown directive '{directive.predicate}'"
            )
    bias = ModeBias(tuple(head_modes), tuple(body_modes), pools)
    logger.debug(
        f"Parsed {len(head_modes)} head modes, {len(body_modes)} body modes, "
        f"{len(pools)} pools"
    )
    return bias


def _mode_from_directive(directive: Atom, line_number: int) -> ModeDeclaration:
    kind = ModeKind(directive.predicate)
    recall: Optional[int] = None
    if directive.arity == 2:
        recall_term, schema = directive.args
        try:
            recall = int(str(recall_term))
        except ValueError:
            raise ModeDeclarationError(
                f"Line {line_number}: recall must be an integer, got {recall_term}"
            ) from None
        if recall < 1:
            raise ModeDeclarationError(f"Line {line_number}: recall must be positive")
    elif directive.arity == 1:
        schema = directive.args[0]
    else:
        raise ModeDeclarationError(f"Line {line_number}: {directive} has wrong arity")
    if not isinstance(schema, Atom) or schema.predicate == LIST_FUNCTOR:
        raise ModeDeclarationError(f"Line {line_number}: mode schema must be an atom")
    return ModeDeclaration(kind, schema, recall)


def _pool_from_directive(directive: Atom, line_number: int) -> Tuple[str, Tuple[Constant, ...]]:
    if directive.arity != 2:
        raise ModeDeclarationError(f"Line {line_number}: pool/2 expected, got {directive}")
    name, values = directive.args
    if not isinstance(name, Constant):
        raise ModeDeclarationError(f"Line {line_number}: pool name must be a constant")
    if not isinstance(values, Atom) or values.predicate != LIST_FUNCTOR:
        raise ModeDeclarationError(f"Line {line_number}: pool values must be a list")
    constants = []
    for value in values.args:
        if not isinstance(value, Constant):
            raise ModeDeclarationError(
                f"Line {line_number}: pool '{name}' holds a non-constant {value}"
            )
        constants.append(value)
    return name.name, tuple(constants)


def render_modes(bias: ModeBias) -> str:
    """Mode file text for ``bias``, head modes first, pools last."""
    lines = [str(mode) for mode in bias.head_modes + bias.body_modes]
    for name, values in bias.pools.items():
        lines.append(f"pool({name}, [{','.join(value.name for value in values)}]).")
    return "\n".join(lines) + "\n"


class _Variabilizer:
    """Consistent constant -> variable mapping for one bottom clause."""

    def __init__(self, seed_time: int):
        self.time = time_constant(seed_time)
        self.variables: Dict[Constant, Variable] = {}
        self.types: Dict[Variable, str] = {TIME_VARIABLE: TIME_TYPE}
        self.depths: Dict[Variable, int] = {TIME_VARIABLE: 0}
        self.order: List[Variable] = []

    def lookup(self, constant: Term, marker: Placemarker) -> Optional[Variable]:
        """Existing variable for ``constant`` when its type matches ``marker``, else None."""
        if marker.type_name == TIME_TYPE:
            return TIME_VARIABLE if constant == self.time else None
        variable = self.variables.get(constant)  # type: ignore[arg-type]
        if variable is None or self.types[variable] != marker.type_name:
            return None
        return variable

    def introduce(self, constant: Constant, marker: Placemarker, depth: int) -> Variable:
        """Name a fresh variable for ``constant`` at ``depth``."""
        variable = Variable(variable_name(len(self.order)))
        self.variables[constant] = variable
        self.types[variable] = marker.type_name
        self.depths[variable] = depth
        self.order.append(variable)
        return variable

    def of_type(self, type_name: str) -> List[Variable]:
        if type_name == TIME_TYPE:
            return [TIME_VARIABLE]
        return [variable for variable in self.order if self.types[variable] == type_name]

    def constant_of(self, variable: Variable) -> Term:
        """The seed constant ``variable`` stands for."""
        if variable == TIME_VARIABLE:
            return self.time
        for constant, candidate in self.variables.items():
            if candidate == variable:
                return constant
        raise KeyError(variable)


def _head_bindings(
    target_fluent: Atom, kind: ClauseKind, seed_time: int, modes: ModeBias
) -> Tuple[Atom, Dict[Variable, Placemarker], Substitution]:
    """First head mode of ``kind`` whose template unifies with the ground head."""
    ground_head = Atom(kind.value, (target_fluent, time_constant(seed_time)))
    for mode in modes.head_modes_for(kind.value):
        template, slots = mode.template()
        theta = unify(template, ground_head)
        if theta is not None:
            return template, slots, theta
    raise ModeDeclarationError(f"No {kind.value} head mode matches {target_fluent}")


def construct_bottom(
    seed: Interpretation,
    seed_time: int,
    target_fluent: Atom,
    kind: ClauseKind,
    modes: ModeBias,
) -> BottomClause:
    """
    Saturate ``seed`` at ``seed_time`` into a bottom clause for ``target_fluent``.

    The head is variabilized under the matching head mode. Body modes are
    visited in declaration order; narrative literals are collected from the
    atoms true at ``seed_time`` in rendering order, built-ins are enumerated
    over the typed variables seen so far and kept when they evaluate true.
    ``+`` slots must reuse an existing variable of the right type, ``-``
    slots may introduce one at depth at most one, ``#`` slots keep the
    constant. Symmetric built-ins appear once per unordered variable pair.

    Raises:
        ModeDeclarationError: if no head mode matches the target fluent
    """
    template, slots, theta = _head_bindings(target_fluent, kind, seed_time, modes)
    names = _Variabilizer(seed_time)
    head_theta: Substitution = {}
    for slot, marker in slots.items():
        constant = theta[slot]
        if marker.role is Role.CONSTANT:
            head_theta[slot] = constant
            continue
        variable = names.lookup(constant, marker)
        if variable is None:
            if marker.type_name == TIME_TYPE:
                raise ModeDeclarationError(f"Head time slot does not match {seed_time}")
            assert isinstance(constant, Constant)
            variable = names.introduce(constant, marker, 0)
        head_theta[slot] = variable
    head = substitute_atom(template, head_theta)

    literals: List[Literal] = []
    seen: Set[str] = set()
    for mode in modes.body_modes:
        body_template, body_slots = mode.template()
        if is_builtin(body_template):
            produced = _builtin_literals(body_template, body_slots, names, seed, seed_time, modes)
        else:
            produced = _narrative_literals(body_template, body_slots, names, seed, seed_time, modes)
        taken = 0
        for literal in produced:
            if mode.recall is not None and taken >= mode.recall:
                break
            if literal.key in seen:
                continue
            seen.add(literal.key)
            literals.append(literal)
            taken += 1
    bottom = BottomClause(head, tuple(literals))
    logger.debug(f"Bottom clause from {seed.interp_id}@{seed_time}: {bottom}")
    return bottom


def _narrative_literals(
    template: Atom,
    slots: Dict[Variable, Placemarker],
    names: _Variabilizer,
    seed: Interpretation,
    seed_time: int,
    modes: ModeBias,
) -> Iterable[Literal]:
    """Variabilized literals for the facts of ``template`` true at ``seed_time``."""
    for fact in seed.narrative_index.get((template.predicate, seed_time), ()):
        theta = unify(template, fact)
        if theta is None:
            continue
        literal = _variabilize_fact(template, slots, theta, names, modes)
        if literal is not None:
            yield literal


def _variabilize_fact(
    template: Atom,
    slots: Dict[Variable, Placemarker],
    theta: Substitution,
    names: _Variabilizer,
    modes: ModeBias,
) -> Optional[Literal]:
    """
    Map one matched fact onto variables, or None when the modes forbid it.

    ``+`` constants must already be named, ``#`` constants must be in their
    pool and new ``-`` variables sit one level deeper than the deepest input.
    """
    bound: Substitution = {}
    inputs: List[str] = []
    pending_outputs: List[Tuple[Variable, Constant, Placemarker]] = []
    for slot, marker in slots.items():
        constant = theta[slot]
        if marker.role is Role.CONSTANT:
            if constant not in modes.pool(marker.type_name):
                return None
            bound[slot] = constant
        elif marker.role is Role.INPUT:
            variable = names.lookup(constant, marker)
            if variable is None:
                return None
            bound[slot] = variable
            inputs.append(variable.name)
        else:
            variable = names.lookup(constant, marker)
            if variable is not None:
                bound[slot] = variable
            elif isinstance(constant, Constant):
                pending_outputs.append((slot, constant, marker))
            else:
                return None
    depth = 1 + max((names.depths[Variable(name)] for name in inputs), default=0)
    if pending_outputs and depth > MAX_VARIABLE_DEPTH:
        return None
    outputs: List[str] = []
    for slot, constant, marker in pending_outputs:
        variable = names.lookup(constant, marker) or names.introduce(constant, marker, depth)
        bound[slot] = variable
        outputs.append(variable.name)
    return Literal(substitute_atom(template, bound), tuple(inputs), tuple(outputs))


def _builtin_literals(
    template: Atom,
    slots: Dict[Variable, Placemarker],
    names: _Variabilizer,
    seed: Interpretation,
    seed_time: int,
    modes: ModeBias,
) -> Iterable[Literal]:
    """
    Built-in literals over the typed variables named so far that hold in ``seed``.

    Input slots take pairwise distinct variables. Symmetric built-ins keep
    only the ordering that follows variable introduction.

    Raises:
        ModeDeclarationError: if the built-in mode declares an output slot
    """
    choices: List[List[Term]] = []
    slot_list = list(slots.items())
    for _, marker in slot_list:
        if marker.role is Role.OUTPUT:
            raise ModeDeclarationError(f"Built-in {template.predicate} cannot have output slots")
        if marker.role is Role.CONSTANT:
            choices.append(list(modes.pool(marker.type_name)))
        else:
            choices.append(list(names.of_type(marker.type_name)))
    for combination in itertools.product(*choices):
        entity_variables = [
            term
            for term, (_, marker) in zip(combination, slot_list)
            if marker.role is Role.INPUT and marker.type_name != TIME_TYPE
        ]
        if len(set(entity_variables)) != len(entity_variables):
            continue
        if template.predicate in SYMMETRIC_BUILTINS and len(entity_variables) >= 2:
            first, second = entity_variables[0], entity_variables[1]
            if names.order.index(first) > names.order.index(second):  # type: ignore[arg-type]
                continue
        bound = {slot: term for (slot, _), term in zip(slot_list, combination)}
        literal_atom = substitute_atom(template, bound)
        ground = {
            variable: names.constant_of(variable)
            for variable in bound.values()
            if isinstance(variable, Variable)
        }
        if evaluate_builtin(substitute_atom(literal_atom, ground), seed, seed_time):
            inputs = tuple(
                term.name
                for term, (_, marker) in zip(combination, slot_list)
                if marker.role is Role.INPUT and isinstance(term, Variable)
            )
            yield Literal(literal_atom, inputs, ())


def seed_clause(clause_id: str, bottom: BottomClause) -> Clause:
    """The empty-bodied clause head(bottom) :- ."""
    return Clause(clause_id=clause_id, head=bottom.head, body=(), bottom=bottom)


def new_clause_id(node_id: str, counter: int) -> str:
    """Globally unique clause id derived from the originating node and its local counter."""
    return hashlib.sha1(f"{node_id}:{counter}".encode("utf-8")).hexdigest()[:12]


def specializations(clause: Clause) -> List[Candidate]:
    """
    The clause itself followed by every legal single-literal extension.

    A bottom literal is a legal extension when it is not already in the body
    and each of its input variables occurs in the head or as an output of an
    earlier body literal.
    """
    candidates = [Candidate(PARENT_KEY, None, clause.body)]
    in_body = set(clause.body_keys)
    available = {variable.name for variable in clause.head_variables}
    for literal in clause.body:
        available.update(literal.outputs)
    for literal in clause.bottom.literals:
        if literal.key in in_body:
            continue
        if not set(literal.inputs) <= available:
            continue
        candidates.append(Candidate(literal.key, literal, clause.body + (literal,)))
    return candidates


def typed_constants(
    interp: Interpretation, time: int, modes: ModeBias
) -> Dict[str, Set[Constant]]:
    """Constants occurring at ``time`` in a typed ``+``/``-`` slot of some narrative body mode."""
    typed: Dict[str, Set[Constant]] = {}
    for mode in modes.body_modes:
        template, slots = mode.template()
        if is_builtin(template):
            continue
        for fact in interp.narrative_index.get((template.predicate, time), ()):
            theta = unify(template, fact)
            if theta is None:
                continue
            for slot, marker in slots.items():
                if marker.role is Role.CONSTANT or marker.type_name == TIME_TYPE:
                    continue
                constant = theta[slot]
                if isinstance(constant, Constant):
                    typed.setdefault(marker.type_name, set()).add(constant)
    return typed


def candidate_fluents(
    interp: Interpretation, time: int, kind: ClauseKind, modes: ModeBias
) -> List[Atom]:
    """
    Ground target fluents a ``kind`` clause may fire on at ``time``.

    Each typed slot of a head mode's fluent ranges over the constants of that
    type present at ``time``; distinct slots take distinct constants and
    ``#`` slots range over their pool.
    """
    typed = typed_constants(interp, time, modes)
    fluents: Set[Atom] = set()
    for mode in modes.head_modes_for(kind.value):
        template, slots = mode.template()
        fluent_template = template.args[0]
        if not isinstance(fluent_template, Atom):
            continue
        fluent_slots = [
            (slot, slots[slot])
            for slot in fluent_template.args
            if isinstance(slot, Variable) and slot in slots
        ]
        choices = []
        for _, marker in fluent_slots:
            if marker.role is Role.CONSTANT:
                choices.append(sorted(modes.pool(marker.type_name), key=str))
            else:
                choices.append(sorted(typed.get(marker.type_name, ()), key=str))
        for combination in itertools.product(*choices):
            entity_values = [
                value
                for value, (_, marker) in zip(combination, fluent_slots)
                if marker.role is not Role.CONSTANT
            ]
            if len(set(entity_values)) != len(entity_values):
                continue
            bound = {slot: value for (slot, _), value in zip(fluent_slots, combination)}
            fluent = substitute_atom(fluent_template, bound)
            fluents.add(fluent)
    return sorted(fluents, key=str)
