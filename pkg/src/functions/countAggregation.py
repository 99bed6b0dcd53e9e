"""
Delta-correct aggregation of clause counters across nodes.

A node's ``Clause.stats`` is its merged view: its own counts plus everything
merged from peers. The ledger remembers the last counts merged from each
peer, so merging a peer's new counts only adds the difference and replaying
a reply adds nothing. A node reports its own counts, i.e. the merged view
minus the ledger totals, so no count is ever merged twice.
"""

import logging
from typing import Dict, Iterable, Tuple

from src.models.Clause import PARENT_KEY, Clause
from src.models.ClauseStats import ClauseStats
from src.models.Message import Message, MessageType, ProtocolError
from src.models.PeerLedger import PeerLedger

logger = logging.getLogger(__name__)


def merge_counts(
    local: ClauseStats,
    ledger: PeerLedger,
    replies: Iterable[Tuple[str, ClauseStats]],
    clause_id: str,
    key: str = PARENT_KEY,
) -> ClauseStats:
    """
    Fold one round of peer counts into ``local``.

    For each (peer, C_new) the local counts grow by C_new - C_prev, where
    C_prev is the ledger entry for (peer, clause_id, key), and the ledger
    entry becomes C_new.

    Args:
        local: the node's merged counts before this round
        ledger: per-peer record, updated in place
        replies: (peer id, counts) pairs, at most one per peer
        clause_id: clause the counts belong to
        key: PARENT_KEY or a candidate key

    Returns:
        The updated merged counts.

    Raises:
        ProtocolError: if a peer appears twice or its counters went backward
    """
    merged = local.copy()
    seen = set()
    for peer_id, current in replies:
        if peer_id in seen:
            raise ProtocolError(f"Peer {peer_id} replied twice for {clause_id}/{key}")
        seen.add(peer_id)
        previous = ledger.previous(peer_id, clause_id, key)
        if not current.dominates(previous):
            raise ProtocolError(
                f"Counters of {peer_id} for {clause_id}/{key} went backward: "
                f"{previous} -> {current}"
            )
        merged = merged + (current - previous)
        ledger.record(peer_id, clause_id, key, current)
    return merged


def own_counts(clause: Clause, ledger: PeerLedger) -> Tuple[ClauseStats, Dict[str, ClauseStats]]:
    """This node's own contribution to the clause and to each candidate."""
    parent = clause.stats - ledger.totals(clause.clause_id, PARENT_KEY)
    refinements = {
        key: stats - ledger.totals(clause.clause_id, key)
        for key, stats in sorted(clause.refinement_stats.items())
    }
    return parent, refinements


def merge_reply(clause: Clause, ledger: PeerLedger, reply: Message) -> None:
    """Merge a StatsReply or PruneStatsReply into ``clause`` in place."""
    if reply.msg_type not in (MessageType.STATS_REPLY, MessageType.PRUNE_STATS_REPLY):
        raise ProtocolError(f"Cannot merge counts from {reply.msg_type.value}")
    if reply.clause_id != clause.clause_id:
        raise ProtocolError(
            f"Reply for {reply.clause_id} merged into clause {clause.clause_id}"
        )
    if reply.stats is not None:
        clause.stats = merge_counts(
            clause.stats, ledger, [(reply.sender, reply.stats)], clause.clause_id
        )
    for key, stats in sorted(reply.refinement_stats.items()):
        local = clause.refinement_stats.get(key, ClauseStats())
        clause.refinement_stats[key] = merge_counts(
            local, ledger, [(reply.sender, stats)], clause.clause_id, key
        )
    logger.debug(f"Merged {reply.msg_type.value} from {reply.sender} into {clause.clause_id}")


def global_counts(replicas: Iterable[Tuple[Clause, PeerLedger]]) -> ClauseStats:
    """Sum of every replica's own counts for one clause."""
    total = ClauseStats()
    for clause, ledger in replicas:
        total = total + own_counts(clause, ledger)[0]
    return total
