"""
Clause scoring and the Hoeffding-bound decision rules.

Initiation clauses are scored by precision, termination clauses by recall.
A clause is specialized once the observed score gap between its best and
second-best candidate exceeds the Hoeffding bound (or the bound itself has
shrunk below the tie threshold); it is pruned once its score is confidently
below the pruning threshold.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

from src.functions.clauseSpace import specializations
from src.models.Clause import PARENT_KEY, Candidate, Clause, ClauseKind
from src.models.ClauseStats import ClauseStats
from src.models.HoeffdingParams import HoeffdingParams

logger = logging.getLogger(__name__)


def epsilon(delta: float, n: int) -> float:
    """
    Hoeffding bound sqrt(ln(1/delta) / 2n).

    Raises:
        ValueError: if n < 1 or delta is outside (0, 1]
    """
    if n < 1:
        raise ValueError(f"Hoeffding bound needs at least one observation, got n={n}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return math.sqrt(math.log(1.0 / delta) / (2.0 * n))


def precision(stats: ClauseStats) -> float:
    denominator = stats.tp + stats.fp
    return stats.tp / denominator if denominator else 0.0


def recall(stats: ClauseStats) -> float:
    denominator = stats.tp + stats.fn
    return stats.tp / denominator if denominator else 0.0


ScoreFunction = Callable[[ClauseStats], float]

SCORE_FUNCTIONS = {
    ClauseKind.INITIATION: precision,
    ClauseKind.TERMINATION: recall,
}


def g_score(stats: ClauseStats, kind: ClauseKind) -> float:
    """Precision for initiation clauses, recall for termination clauses; 0/0 scores 0."""
    return SCORE_FUNCTIONS[kind](stats)


@dataclass(frozen=True)
class Decision:
    """Outcome of a Hoeffding test: Keep when ``candidate_key`` is None."""

    candidate_key: Optional[str] = None
    margin: float = 0.0
    epsilon: Optional[float] = None

    @property
    def specialize(self) -> bool:
        return self.candidate_key is not None


KEEP = Decision()


def rank_candidates(clause: Clause) -> List[Tuple[float, Candidate]]:
    """Candidates with their scores, best first: highest score, then shortest body, then key."""
    scored = []
    for candidate in specializations(clause):
        if candidate.key == PARENT_KEY:
            stats = clause.stats
        else:
            stats = clause.refinement_stats.get(candidate.key, ClauseStats())
        scored.append((g_score(stats, clause.kind), candidate))
    scored.sort(key=lambda item: (-item[0], len(item[1].body), item[1].key))
    return scored


def hoeffding_decision(clause: Clause, params: HoeffdingParams) -> Decision:
    """
    Decide whether ``clause`` should be replaced by its best specialization.

    The clause competes with its own specializations. Specialize when the
    best candidate is not the clause itself and either its lead over the
    runner-up exceeds epsilon(delta, e) or epsilon has dropped below the
    tie threshold.
    """
    if clause.stats.e < 1:
        return KEEP
    ranked = rank_candidates(clause)
    if len(ranked) < 2:
        return KEEP
    (best_score, best), (second_score, _) = ranked[0], ranked[1]
    if best.key == PARENT_KEY:
        return KEEP
    bound = epsilon(params.delta, clause.stats.e)
    margin = best_score - second_score
    if margin > bound or bound < params.tie_threshold:
        logger.debug(
            f"Clause {clause.clause_id}: specialize with {best.key} "
            f"(margin={margin:.4f}, epsilon={bound:.4f}, e={clause.stats.e})"
        )
        return Decision(best.key, margin, bound)
    return KEEP


def should_prune(
    clause: Clause,
    avg_specialization_n: float,
    params: HoeffdingParams,
    stable_since: Optional[int] = None,
) -> bool:
    """
    True iff the clause has been stable for at least the average number of
    examples specializations needed, and its score plus epsilon over that
    stable period is still below the pruning threshold.

    ``stable_since`` overrides the clause's own counter, e.g. with a sum over
    replicas. With no specialization observed yet (average 0) nothing is pruned.
    """
    if avg_specialization_n <= 0:
        return False
    stable = clause.stable_since if stable_since is None else stable_since
    if stable < 1 or stable < avg_specialization_n:
        return False
    score = g_score(clause.stats, clause.kind)
    return score + epsilon(params.delta, stable) < params.prune_threshold


@dataclass
class SpecializationHistory:
    """Running mean of the example counts at which specialization tests fired."""

    count: int = 0
    total: int = 0

    def observe(self, n: int) -> None:
        self.count += 1
        self.total += n

    @property
    def average(self) -> float:
        return self.total / self.count if self.count else 0.0
