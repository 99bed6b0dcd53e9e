"""
Evaluation of a fixed theory on a test stream.

Recognition carries the inferred state across contiguous interpretations
and restarts from the annotated state wherever the stream has a gap.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple, TypeVar

from src.functions.clauseEvaluation import Classification, Label, classify_instances
from src.models.HoeffdingParams import ConfigError
from src.models.Interpretation import FluentState, Interpretation
from src.models.ModeDeclaration import ModeBias
from src.models.Term import Atom
from src.models.Theory import Theory

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class EvaluationResult:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def f1(self) -> float:
        return f1_score(self.tp, self.fp, self.fn)

    def __add__(self, other: "EvaluationResult") -> "EvaluationResult":
        return EvaluationResult(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def f1_score(tp: int, fp: int, fn: int) -> float:
    """2tp / (2tp + fp + fn); 0 when there is nothing to score."""
    denominator = 2 * tp + fp + fn
    if denominator == 0:
        return 0.0
    return 2 * tp / denominator


def _classify_stream(
    theory: Theory, stream: Sequence[Interpretation], modes: ModeBias
) -> Iterator[Classification]:
    state: Optional[FluentState] = None
    previous_end: Optional[int] = None
    for interp in stream:
        if state is None or previous_end is None or interp.t_start != previous_end + 1:
            state = interp.annotated_state(interp.t_start)
        classification = classify_instances(theory, interp, state, modes, carry=True)
        yield classification
        state = classification.state
        previous_end = interp.t_end


def evaluate(theory: Theory, stream: Sequence[Interpretation], modes: ModeBias) -> EvaluationResult:
    """Count TP/FP/FN of ``theory`` over ``stream``; TN instances are not counted."""
    tp = fp = fn = 0
    positives = 0
    for classification in _classify_stream(theory, stream, modes):
        counts = classification.counts()
        tp += counts[Label.TP]
        fp += counts[Label.FP]
        fn += counts[Label.FN]
        positives += counts[Label.TP] + counts[Label.FN]
    if positives == 0:
        logger.warning(f"Test stream of {len(stream)} interpretations has no positive instances")
    result = EvaluationResult(tp, fp, fn)
    logger.debug(f"Evaluation: tp={tp} fp={fp} fn={fn} f1={result.f1:.4f}")
    return result


def predictions(theory: Theory, stream: Sequence[Interpretation], modes: ModeBias) -> List[Tuple[Atom, int]]:
    """Every (fluent, time) ``theory`` recognises over ``stream``, ordered by time."""
    recognised: List[Tuple[Atom, int]] = []
    for classification in _classify_stream(theory, stream, modes):
        recognised.extend(classification.with_label(Label.TP))
        recognised.extend(classification.with_label(Label.FP))
    return sorted(recognised, key=lambda key: (key[1], str(key[0])))


def split_folds(items: Sequence[T], folds: int) -> List[Tuple[List[T], List[T]]]:
    """
    Contiguous (train, test) splits; test folds keep stream order and differ
    in size by at most one.

    Raises:
        ConfigError: if folds < 2 or folds exceeds the number of items
    """
    if folds < 2:
        raise ConfigError(f"Cross-validation needs at least 2 folds, got {folds}")
    if folds > len(items):
        raise ConfigError(f"{folds} folds requested for {len(items)} interpretations")
    base, extra = divmod(len(items), folds)
    splits = []
    start = 0
    for index in range(folds):
        end = start + base + (1 if index < extra else 0)
        test = list(items[start:end])
        train = list(items[:start]) + list(items[end:])
        splits.append((train, test))
        start = end
    return splits
