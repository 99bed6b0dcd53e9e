"""Learning parameters for the Hoeffding specialization and pruning tests."""

import logging
import os
from dataclasses import dataclass, replace
from typing import Callable, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


class ConfigError(ValueError):
    """Raised for invalid run parameters or configuration files."""


def _env_value(name: str, parse: Callable[[str], T]) -> Optional[T]:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return parse(raw)
    except ValueError as e:
        raise ConfigError(f"Environment variable {name}={raw!r} is invalid: {e}") from e


@dataclass(frozen=True)
class HoeffdingParams:
    """
    Parameters shared by every node of a run.

    Attributes:
        delta: confidence parameter of the Hoeffding bound, in (0, 1)
        tie_threshold: tie-breaking threshold; specialize anyway once epsilon drops below it
        prune_threshold: clauses whose score is confidently below this are pruned
        warm_up: minimum number of examples before a clause may be output
    """

    delta: float = 0.05
    tie_threshold: float = 0.05
    prune_threshold: float = 0.3
    warm_up: int = 20

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.tie_threshold < 1.0:
            raise ConfigError(
                f"tie_threshold must lie in (0, 1), got {self.tie_threshold}"
            )
        if not 0.0 <= self.prune_threshold <= 1.0:
            raise ConfigError(
                f"prune_threshold must lie in [0, 1], got {self.prune_threshold}"
            )
        if self.warm_up < 1:
            raise ConfigError(f"warm_up must be a positive integer, got {self.warm_up}")

    @classmethod
    def from_env(cls) -> "HoeffdingParams":
        """Build parameters from ECSTREAM_* environment variables, defaulting the rest."""
        params = cls()
        overrides = {
            "delta": _env_value("ECSTREAM_DELTA", float),
            "tie_threshold": _env_value("ECSTREAM_TIE_THRESHOLD", float),
            "prune_threshold": _env_value("ECSTREAM_PRUNE_THRESHOLD", float),
            "warm_up": _env_value("ECSTREAM_WARM_UP", int),
        }
        present = {key: value for key, value in overrides.items() if value is not None}
        if present:
            logger.debug(f"Learning parameters from environment: {present}")
            params = replace(params, **present)
        return params

    def with_overrides(self, **overrides) -> "HoeffdingParams":
        """Return a copy with every non-None override applied."""
        present = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **present) if present else self
