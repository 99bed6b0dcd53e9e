"""Learning run report."""

from dataclasses import dataclass, field
from typing import Dict, List

from src.models.Theory import Theory


@dataclass
class RunReport:
    """Metrics of one learning run or the aggregate of a cross-validation."""

    training_seconds: float = 0.0
    f1: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    theory_size_literals: int = 0
    messages_sent: int = 0
    message_bytes: int = 0
    messages_by_type: Dict[str, int] = field(default_factory=dict)
    clauses_specialized: int = 0
    clauses_pruned: int = 0
    nodes: int = 1
    transport: str = "inproc"
    final_theory: Theory = field(default_factory=Theory)
    folds: List["RunReport"] = field(default_factory=list)

    def summary_lines(self) -> List[str]:
        if self.folds:
            size = f"theory size: {self.theory_size_literals} literals (mean over {len(self.folds)} folds)"
        else:
            size = f"theory size: {self.theory_size_literals} literals, {len(self.final_theory)} clauses"
        lines = [
            f"nodes: {self.nodes} ({self.transport})",
            f"training time: {self.training_seconds:.3f}s",
            f"f1: {self.f1:.4f} (tp={self.tp} fp={self.fp} fn={self.fn})",
            size,
            f"messages: {self.messages_sent} ({self.message_bytes} bytes)",
            f"specialized: {self.clauses_specialized}, pruned: {self.clauses_pruned}",
        ]
        for index, fold in enumerate(self.folds, start=1):
            lines.append(
                f"fold {index}: f1={fold.f1:.4f} messages={fold.messages_sent} "
                f"size={fold.theory_size_literals}"
            )
        return lines

    def to_key_values(self) -> Dict[str, str]:
        """Flat key/value view written to report files."""
        values = {
            "nodes": str(self.nodes),
            "transport": self.transport,
            "training_seconds": f"{self.training_seconds:.6f}",
            "f1": f"{self.f1:.6f}",
            "tp": str(self.tp),
            "fp": str(self.fp),
            "fn": str(self.fn),
            "theory_size_literals": str(self.theory_size_literals),
            "theory_clauses": str(len(self.final_theory)),
            "messages_sent": str(self.messages_sent),
            "message_bytes": str(self.message_bytes),
            "clauses_specialized": str(self.clauses_specialized),
            "clauses_pruned": str(self.clauses_pruned),
            "folds": str(len(self.folds)),
        }
        for key in sorted(self.messages_by_type):
            values[f"messages.{key}"] = str(self.messages_by_type[key])
        for index, fold in enumerate(self.folds, start=1):
            values[f"fold.{index}.f1"] = f"{fold.f1:.6f}"
            values[f"fold.{index}.messages_sent"] = str(fold.messages_sent)
            values[f"fold.{index}.theory_size_literals"] = str(fold.theory_size_literals)
        return values
