"""Clause evaluation counters."""

from dataclasses import dataclass
from typing import Dict


@dataclass
class ClauseStats:
    """TP/FP/FN counters of a clause plus the number of examples it was evaluated on."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    e: int = 0

    def __add__(self, other: "ClauseStats") -> "ClauseStats":
        return ClauseStats(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.e + other.e
        )

    def __sub__(self, other: "ClauseStats") -> "ClauseStats":
        return ClauseStats(
            self.tp - other.tp, self.fp - other.fp, self.fn - other.fn, self.e - other.e
        )

    def copy(self) -> "ClauseStats":
        return ClauseStats(self.tp, self.fp, self.fn, self.e)

    def dominates(self, other: "ClauseStats") -> bool:
        """True iff every counter is at least the corresponding one in ``other``."""
        return (
            self.tp >= other.tp
            and self.fp >= other.fp
            and self.fn >= other.fn
            and self.e >= other.e
        )

    def to_dict(self) -> Dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "e": self.e}

    @classmethod
    def from_dict(cls, data: Dict[str, int]) -> "ClauseStats":
        return cls(
            tp=int(data["tp"]), fp=int(data["fp"]), fn=int(data["fn"]), e=int(data["e"])
        )
