"""Stream source and synthetic generator configuration models."""

from dataclasses import dataclass, field
from typing import Optional, Tuple

from src.models.HoeffdingParams import ConfigError
from src.models.Theory import Theory

DEFAULT_EVENTS = ("walk", "active", "inactive", "running")


@dataclass(frozen=True)
class StreamSpec:
    """How a fact stream is cut into interpretations.

    Attributes:
        source: fact file path, or None when the stream is generated
        chunk_size: time points per interpretation
        targets: complex-event fluent functors treated as annotation
    """

    source: Optional[str] = None
    chunk_size: int = 1
    targets: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ConfigError(f"chunk_size must be >= 1, got {self.chunk_size}")


@dataclass
class GeneratorConfig:
    """Synthetic stream generator settings."""

    ground_truth: Theory
    entities: Tuple[str, ...] = ("id1", "id2", "id3")
    horizon: int = 1000
    noise_rate: float = 0.0
    seed: int = 0
    chunk_size: int = 1
    events: Tuple[str, ...] = DEFAULT_EVENTS
    arena: float = 100.0
    theory_path: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.noise_rate < 0.5:
            raise ConfigError(f"noise_rate must lie in [0, 0.5), got {self.noise_rate}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.chunk_size < 1:
            raise ConfigError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if len(self.entities) < 1:
            raise ConfigError("at least one entity is required")
        if len(set(self.entities)) != len(self.entities):
            raise ConfigError(f"entities must be distinct, got {list(self.entities)}")
        if not self.events:
            raise ConfigError("at least one simple event type is required")
        if self.arena <= 0:
            raise ConfigError(f"arena must be positive, got {self.arena}")
