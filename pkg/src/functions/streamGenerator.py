"""
Synthetic interpretation streams from a known ground-truth theory.

Every entity performs one simple event per time point and moves on a
bounded random walk whose position and heading are published as context.
Annotation is exact inference under the ground truth from an empty initial
state. With probability ``noise_rate`` a time point then has the label of
one candidate fluent, drawn uniformly, flipped.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Set, Tuple

import numpy as np

from src.functions.clauseEvaluation import fires
from src.functions.ecKernel import step_infer
from src.models.Clause import ClauseKind
from src.models.Interpretation import FluentState, Interpretation
from src.models.StreamSpec import GeneratorConfig
from src.models.Term import Atom, Constant, time_constant
from src.models.Theory import Theory

logger = logging.getLogger(__name__)

# Standard deviation of one random-walk step, as a fraction of the arena side.
STEP_SCALE = 0.08


@dataclass
class GeneratedStream:
    interpretations: List[Interpretation]
    clean_annotation: Dict[int, FrozenSet[Atom]]
    noisy_annotation: Dict[int, FrozenSet[Atom]]
    flipped_points: int
    total_points: int

    @property
    def flip_rate(self) -> float:
        """Share of annotated time points whose label was flipped."""
        return self.flipped_points / self.total_points if self.total_points else 0.0


def fluent_candidates(theory: Theory, entities: Tuple[str, ...]) -> List[Atom]:
    """Every ground instance of the ground truth's head fluents over distinct entities."""
    schemas = sorted({(c.head.args[0].predicate, c.head.args[0].arity) for c in theory.clauses()
                      if isinstance(c.head.args[0], Atom)})
    fluents = []
    for name, arity in schemas:
        for combo in itertools.permutations(entities, arity):
            fluents.append(Atom(name, tuple(Constant(entity) for entity in combo)))
    return sorted(fluents, key=str)


def _narrative_at(config: GeneratorConfig, rng: np.random.Generator, positions: np.ndarray,
                  time: int) -> Tuple[Set[Atom], np.ndarray]:
    count = len(config.entities)
    steps = rng.normal(0.0, STEP_SCALE * config.arena, size=(count, 2))
    moved = np.clip(positions + steps, 0.0, config.arena)
    headings = np.degrees(np.arctan2(steps[:, 1], steps[:, 0])) % 360.0
    events = rng.integers(0, len(config.events), size=count)
    stamp = time_constant(time)
    atoms: Set[Atom] = set()
    for index, entity in enumerate(config.entities):
        name = Constant(entity)
        x, y = (int(round(value)) for value in moved[index])
        atoms.add(Atom("happensAt", (Atom(config.events[int(events[index])], (name,)), stamp)))
        atoms.add(Atom("holdsAt", (Atom("coords", (name, Constant(str(x)), Constant(str(y)))), stamp)))
        atoms.add(Atom("holdsAt", (Atom("direction", (name, Constant(str(int(headings[index]))))), stamp)))
    return atoms, moved


def _annotation_atoms(fluents: FrozenSet[Atom], time: int) -> Set[Atom]:
    return {Atom("holdsAt", (fluent, time_constant(time))) for fluent in fluents}


def generate_detailed(config: GeneratorConfig) -> GeneratedStream:
    """Generate a stream and keep the clean annotation alongside the noisy one."""
    rng = np.random.default_rng(config.seed)
    candidates = fluent_candidates(config.ground_truth, config.entities)
    initiation = config.ground_truth.clauses(ClauseKind.INITIATION)
    termination = config.ground_truth.clauses(ClauseKind.TERMINATION)

    positions = rng.uniform(0.0, config.arena, size=(len(config.entities), 2))
    narrative: Dict[int, Set[Atom]] = {}
    clean: Dict[int, FrozenSet[Atom]] = {1: frozenset()}
    state = FluentState()
    for time in range(1, config.horizon + 1):
        narrative[time], positions = _narrative_at(config, rng, positions, time)
        window = Interpretation(f"t{time}", time, time, frozenset(narrative[time]))
        initiated = {f for f in candidates if any(fires(c, window, time, f) for c in initiation)}
        terminated = {f for f in state.holding if any(fires(c, window, time, f) for c in termination)}
        state = step_infer(state, initiated, terminated)
        clean[time + 1] = state.holding

    noisy: Dict[int, FrozenSet[Atom]] = {}
    flipped = 0
    for time in range(1, config.horizon + 2):
        holding = set(clean[time])
        if candidates and rng.random() < config.noise_rate:
            holding ^= {candidates[int(rng.integers(len(candidates)))]}
            flipped += 1
        noisy[time] = frozenset(holding)

    interpretations = []
    for index, t_start in enumerate(range(1, config.horizon + 1, config.chunk_size), start=1):
        t_end = min(t_start + config.chunk_size - 1, config.horizon)
        window_narrative = set().union(*(narrative[t] for t in range(t_start, t_end + 1)))
        window_annotation: Set[Atom] = set()
        for t in range(t_start, t_end + 2):
            window_annotation |= _annotation_atoms(noisy[t], t)
        interpretations.append(
            Interpretation(f"g{index}", t_start, t_end, frozenset(window_narrative), frozenset(window_annotation))
        )
    total = config.horizon + 1
    logger.info(
        f"Generated {len(interpretations)} interpretations over {config.horizon} time points "
        f"({flipped}/{total} time points with a flipped label)"
    )
    return GeneratedStream(interpretations, clean, noisy, flipped, total)


def generate(config: GeneratorConfig) -> List[Interpretation]:
    """Deterministic stream for ``config``; same seed, same stream."""
    return generate_detailed(config).interpretations
