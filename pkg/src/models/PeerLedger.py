"""Per-peer record of the counts last received for each clause and candidate."""

from dataclasses import dataclass, field
from typing import Dict, Tuple

from src.models.ClauseStats import ClauseStats

LedgerKey = Tuple[str, str, str]


@dataclass
class PeerLedger:
    """Maps (peer id, clause id, candidate key) to the last ClauseStats merged from that peer."""

    entries: Dict[LedgerKey, ClauseStats] = field(default_factory=dict)

    def previous(self, peer_id: str, clause_id: str, key: str) -> ClauseStats:
        entry = self.entries.get((peer_id, clause_id, key))
        return entry.copy() if entry is not None else ClauseStats()

    def record(self, peer_id: str, clause_id: str, key: str, stats: ClauseStats) -> None:
        self.entries[(peer_id, clause_id, key)] = stats.copy()

    def totals(self, clause_id: str, key: str) -> ClauseStats:
        """Sum of everything merged from peers for one clause/candidate."""
        total = ClauseStats()
        for (_, entry_clause, entry_key), stats in self.entries.items():
            if entry_clause == clause_id and entry_key == key:
                total = total + stats
        return total

    def forget_clause(self, clause_id: str) -> None:
        for ledger_key in [k for k in self.entries if k[1] == clause_id]:
            del self.entries[ledger_key]

    def __len__(self) -> int:
        return len(self.entries)
