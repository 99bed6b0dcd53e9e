"""
Learner Node Service - one processing node of a learner group.

A node consumes its own stream of interpretations, updates the counters of
its replica of the theory, seeds new clauses and runs the local Hoeffding
and pruning tests. Structural changes are agreed with the other nodes
through mediator-arbitrated rounds: the requesting node collects every
peer's counts, decides on the merged counts and broadcasts the verdict.
With no peers every decision is applied locally and nothing is sent.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, List, Optional, Sequence, Tuple

from src.functions.clauseEvaluation import find_uncovered_instance, update_clause_counters
from src.functions.clauseSpace import construct_bottom, new_clause_id, seed_clause
from src.functions.countAggregation import merge_reply, own_counts
from src.functions.scoring import (
    SpecializationHistory,
    hoeffding_decision,
    should_prune,
)
from src.models.Clause import Clause, ClauseKind
from src.models.ClauseStats import ClauseStats
from src.models.HoeffdingParams import HoeffdingParams
from src.models.Interpretation import Interpretation
from src.models.Message import MEDIATOR_ID, Message, MessageType, ProtocolError, Purpose
from src.models.ModeDeclaration import ModeBias, ModeDeclarationError
from src.models.PeerLedger import PeerLedger
from src.models.Term import Atom
from src.models.Theory import Theory

logger = logging.getLogger(__name__)


class NodeBlockedError(RuntimeError):
    """Raised when stream input is offered to a node that is not Running."""


class NodePhase(str, Enum):
    RUNNING = "Running"
    AWAITING_STATS = "AwaitingStats"
    AWAITING_VERDICT = "AwaitingVerdict"


@dataclass
class OutstandingRequest:
    """This node's own specialize/prune request and the replies collected for it."""

    clause_id: str
    purpose: Purpose
    granted: bool = False
    replies: Dict[str, Message] = field(default_factory=dict)


class LearnerNode:
    """One node of a learner group: its theory replica, ledger and protocol state."""

    def __init__(
        self,
        node_id: str,
        peers: Sequence[str],
        kind: ClauseKind,
        modes: ModeBias,
        params: HoeffdingParams,
        structural_changes: bool = True,
    ):
        """
        Initialize the LearnerNode.

        Args:
            node_id: unique id of this node within its group
            peers: ids of the other nodes of the group
            kind: whether this group learns initiation or termination clauses
            modes: mode declarations bounding the clause search space
            params: Hoeffding test and pruning parameters
            structural_changes: when False the node only counts; no clause is
                generated, specialized or pruned
        """
        self.node_id = node_id
        self.peers = sorted(peer for peer in peers if peer != node_id)
        self.kind = kind
        self.modes = modes
        self.params = params
        self.structural_changes = structural_changes

        self.theory = Theory()
        self.ledger = PeerLedger()
        self.pending_queue: Deque[Message] = deque()
        self.request: Optional[OutstandingRequest] = None
        self.verdict_for: Optional[Tuple[str, str]] = None
        self.history = SpecializationHistory()

        self.interpretations_processed = 0
        self.clauses_generated = 0
        self.clauses_specialized = 0
        self.clauses_pruned = 0
        self._clause_counter = 0
        # Seed instance of every clause this node generated, and ids of removed clauses
        self.seed_instances: Dict[str, Tuple[Atom, int]] = {}
        self.pruned_clause_ids: List[str] = []

    @property
    def phase(self) -> NodePhase:
        if self.verdict_for is not None:
            return NodePhase.AWAITING_VERDICT
        if self.request is not None:
            return NodePhase.AWAITING_STATS
        return NodePhase.RUNNING

    @property
    def is_running(self) -> bool:
        return self.phase is NodePhase.RUNNING

    def clauses(self) -> List[Clause]:
        return self.theory.clauses(self.kind)

    # Stream input

    def process_interpretation(self, interp: Interpretation) -> List[Message]:
        """
        Consume one interpretation and return the messages it causes.

        Counters of every clause and candidate are updated first, then a new
        clause may be seeded (and broadcast), then the local specialization
        and pruning tests run; at most one request is issued per call.

        Raises:
            NodeBlockedError: if the node is waiting on a protocol round
        """
        if not self.is_running:
            raise NodeBlockedError(
                f"Node {self.node_id} is {self.phase.value}; cannot consume {interp.interp_id}"
            )
        self.interpretations_processed += 1
        update_clause_counters(self.clauses(), interp, self.modes)
        outbound: List[Message] = []
        if not self.structural_changes:
            return outbound

        clause = self.maybe_generate_clause(interp)
        if clause is not None:
            self.theory.add(clause)
            self.clauses_generated += 1
            for peer in self.peers:
                outbound.append(
                    Message(
                        MessageType.ADD_NEW_CLAUSE,
                        sender=self.node_id,
                        recipient=peer,
                        clause_id=clause.clause_id,
                        clause=clause,
                    )
                )
        outbound.extend(self.run_local_tests())
        return outbound

    def maybe_generate_clause(self, interp: Interpretation) -> Optional[Clause]:
        """Seed an empty-bodied clause from the earliest instance no clause accounts for."""
        instance = find_uncovered_instance(self.clauses(), interp, self.kind, self.modes)
        if instance is None:
            return None
        fluent, time = instance
        try:
            bottom = construct_bottom(interp, time, fluent, self.kind, self.modes)
        except ModeDeclarationError as e:
            logger.warning(f"Node {self.node_id}: cannot seed a clause from {fluent}@{time}: {e}")
            return None
        self._clause_counter += 1
        clause_id = new_clause_id(f"{self.kind.value}@{self.node_id}", self._clause_counter)
        clause = seed_clause(clause_id, bottom)
        self.seed_instances[clause_id] = (fluent, time)
        logger.info(
            f"Node {self.node_id}: new clause {clause_id} from {interp.interp_id} "
            f"({fluent}@{time}, bottom of {len(bottom.literals)} literals)"
        )
        return clause

    def run_local_tests(self) -> List[Message]:
        """Specialization then pruning test per clause in id order; at most one round starts."""
        for clause in self.clauses():
            decision = hoeffding_decision(clause, self.params)
            if decision.specialize:
                return self._start_round(clause, Purpose.SPECIALIZE)
            if should_prune(clause, self.history.average, self.params):
                return self._start_round(clause, Purpose.PRUNE)
        return []

    def _start_round(self, clause: Clause, purpose: Purpose) -> List[Message]:
        """
        Open a specialize or prune round for ``clause``.

        A node without peers decides on its own counts at once. Otherwise the
        node records the outstanding request, which blocks stream input, and
        asks the mediator for a grant.
        """
        if not self.peers:
            self._decide(clause, purpose, extra_stable=0)
            return []
        msg_type = (
            MessageType.SPECIALIZE_REQUEST if purpose is Purpose.SPECIALIZE else MessageType.PRUNE_REQUEST
        )
        self.request = OutstandingRequest(clause.clause_id, purpose)
        logger.debug(f"Node {self.node_id}: {msg_type.value} for {clause.clause_id}")
        return [
            Message(
                msg_type,
                sender=self.node_id,
                recipient=MEDIATOR_ID,
                clause_id=clause.clause_id,
                requester=self.node_id,
            )
        ]

    # Protocol input

    def handle(self, message: Message) -> List[Message]:
        """Process one inbound protocol message and return the messages it causes."""
        msg_type = message.msg_type
        if msg_type is MessageType.ADD_NEW_CLAUSE:
            self._on_add_new_clause(message)
            return []
        if msg_type.is_request:
            return self._on_forwarded_request(message)
        if msg_type is MessageType.MEDIATOR_GRANT:
            return self._on_grant(message)
        if msg_type in (MessageType.STATS_REPLY, MessageType.PRUNE_STATS_REPLY):
            return self._on_reply(message)
        if msg_type.is_verdict:
            return self.on_verdict(message)
        if msg_type is MessageType.MEDIATOR_ABANDON:
            return self._on_abandon(message)
        if msg_type.is_control:
            return []
        raise ProtocolError(f"Node {self.node_id} cannot handle {message}")

    def _on_add_new_clause(self, message: Message) -> None:
        """Adopt a clause seeded by a peer; the replica starts with zero counts."""
        clause = message.clause
        if clause is None:
            raise ProtocolError(f"AddNewClause without a clause from {message.sender}")
        if clause.clause_id in self.theory:
            logger.error(f"Node {self.node_id}: duplicate clause id {clause.clause_id}")
            return
        self.theory.add(clause)
        logger.debug(f"Node {self.node_id}: added clause {clause.clause_id} from {message.sender}")

    def _on_forwarded_request(self, message: Message) -> List[Message]:
        """
        Answer a peer's request relayed by the mediator.

        The reply carries this node's own counts for the clause, excluding
        everything merged from peers, so the requester never double counts.
        After replying the node waits for the verdict; further requests are
        deferred until it arrives.

        Raises:
            ProtocolError: if the node receives its own request
        """
        if message.requester == self.node_id:
            raise ProtocolError(f"Node {self.node_id} received its own request back")
        if self.verdict_for is not None:
            logger.warning(
                f"Node {self.node_id}: deferring {message} while awaiting verdict "
                f"for {self.verdict_for[0]}"
            )
            self.pending_queue.append(message)
            return []
        assert message.clause_id is not None and message.requester is not None
        clause = self.theory.get(message.clause_id)
        if clause is None:
            logger.error(f"Node {self.node_id}: request for unknown clause {message.clause_id}")
            stats, refinements = ClauseStats(), {}
            stable = 0
        else:
            stats, refinements = own_counts(clause, self.ledger)
            stable = clause.stable_since
        self.verdict_for = (message.clause_id, message.requester)
        if message.msg_type is MessageType.SPECIALIZE_REQUEST:
            reply = Message(
                MessageType.STATS_REPLY,
                sender=self.node_id,
                recipient=message.requester,
                clause_id=message.clause_id,
                stats=stats,
                refinement_stats=refinements,
            )
        else:
            reply = Message(
                MessageType.PRUNE_STATS_REPLY,
                sender=self.node_id,
                recipient=message.requester,
                clause_id=message.clause_id,
                stats=stats,
                stable_since=stable,
            )
        return [reply]

    def _on_grant(self, message: Message) -> List[Message]:
        """Mark the outstanding request as granted; replies may already be in."""
        if self.request is None or self.request.clause_id != message.clause_id:
            raise ProtocolError(f"Node {self.node_id}: unexpected grant {message}")
        self.request.granted = True
        return self._maybe_conclude()

    def _on_reply(self, message: Message) -> List[Message]:
        """
        Collect one peer's reply to the outstanding request.

        Raises:
            ProtocolError: for a reply without a matching request or a second
                reply from the same peer
        """
        if self.request is None or self.request.clause_id != message.clause_id:
            raise ProtocolError(f"Node {self.node_id}: reply without a matching request: {message}")
        if message.sender in self.request.replies:
            raise ProtocolError(f"Node {self.node_id}: second reply from {message.sender}")
        self.request.replies[message.sender] = message
        return self._maybe_conclude()

    def _maybe_conclude(self) -> List[Message]:
        """
        Finish the round once it is granted and every peer has replied.

        Replies are merged in peer order, the decision is taken on the merged
        counts and the verdict goes to every peer, followed by MediatorDone.
        A clause removed while the request was queued ends in Proceed.
        """
        request = self.request
        assert request is not None
        if not request.granted or set(request.replies) != set(self.peers):
            return []
        clause = self.theory.get(request.clause_id)
        extra_stable = 0
        if clause is not None:
            for peer in sorted(request.replies):
                reply = request.replies[peer]
                merge_reply(clause, self.ledger, reply)
                extra_stable += reply.stable_since or 0
        outbound = (
            self._decide(clause, request.purpose, extra_stable) if clause is not None else []
        )
        changed = any(m.msg_type in (MessageType.REPLACE, MessageType.REMOVE) for m in outbound)
        if clause is None:
            logger.error(f"Node {self.node_id}: granted clause {request.clause_id} is gone")
            outbound = self._broadcast(MessageType.PROCEED, request.clause_id)
        outbound.append(
            Message(
                MessageType.MEDIATOR_DONE,
                sender=self.node_id,
                recipient=MEDIATOR_ID,
                clause_id=request.clause_id,
                requester=self.node_id,
                purpose=request.purpose,
                changed=changed,
            )
        )
        self.request = None
        outbound.extend(self._drain_pending())
        return outbound

    def _decide(self, clause: Clause, purpose: Purpose, extra_stable: int) -> List[Message]:
        """Take the final decision on (merged) counts, apply it and build the verdict broadcast."""
        if purpose is Purpose.SPECIALIZE:
            decision = hoeffding_decision(clause, self.params)
            if decision.specialize:
                literal = next(
                    literal
                    for literal in clause.bottom.literals
                    if literal.key == decision.candidate_key
                )
                observed_n = clause.stats.e
                replacement = clause.extended(literal)
                self._apply_replace(replacement, observed_n)
                logger.info(
                    f"Node {self.node_id}: specialized {clause.clause_id} with {literal} "
                    f"after {observed_n} examples"
                )
                return self._broadcast(
                    MessageType.REPLACE, clause.clause_id, clause=replacement, observed_n=observed_n
                )
        else:
            stable = clause.stable_since + extra_stable
            if should_prune(clause, self.history.average, self.params, stable_since=stable):
                self._apply_remove(clause.clause_id)
                logger.info(
                    f"Node {self.node_id}: pruned {clause.clause_id} "
                    f"(stable for {stable} examples)"
                )
                return self._broadcast(MessageType.REMOVE, clause.clause_id)
        return self._broadcast(MessageType.PROCEED, clause.clause_id)

    def _broadcast(self, msg_type: MessageType, clause_id: str, **fields) -> List[Message]:
        return [
            Message(msg_type, sender=self.node_id, recipient=peer, clause_id=clause_id, **fields)
            for peer in self.peers
        ]

    def on_verdict(self, message: Message) -> List[Message]:
        """
        Apply a Replace, Remove or Proceed from the node that won the round.

        An unknown clause id is logged as a protocol error; the node is
        released either way and deferred messages are replayed.
        """
        clause_id = message.clause_id
        assert clause_id is not None
        try:
            if message.msg_type is MessageType.REPLACE:
                if message.clause is None or message.observed_n is None:
                    raise ProtocolError(f"Replace for {clause_id} lacks clause or observed_n")
                if clause_id not in self.theory:
                    raise ProtocolError(f"Replace for unknown clause {clause_id}")
                self._apply_replace(message.clause, message.observed_n)
            elif message.msg_type is MessageType.REMOVE:
                if clause_id not in self.theory:
                    raise ProtocolError(f"Remove for unknown clause {clause_id}")
                self._apply_remove(clause_id)
        except ProtocolError as e:
            logger.error(f"Node {self.node_id}: {e}")
        if self.verdict_for is not None and self.verdict_for[0] == clause_id:
            self.verdict_for = None
        return self._drain_pending()

    def _apply_replace(self, replacement: Clause, observed_n: int) -> None:
        """Swap in the specialized clause under the same id with fresh counts."""
        replacement.reset_statistics()
        self.theory.replace(replacement)
        self.ledger.forget_clause(replacement.clause_id)
        self.history.observe(observed_n)
        self.clauses_specialized += 1

    def _apply_remove(self, clause_id: str) -> None:
        self.theory.remove(clause_id)
        self.ledger.forget_clause(clause_id)
        self.pruned_clause_ids.append(clause_id)
        self.clauses_pruned += 1

    def _on_abandon(self, message: Message) -> List[Message]:
        """Drop a queued request the mediator abandoned because its clause changed."""
        if self.request is None or self.request.clause_id != message.clause_id:
            logger.error(f"Node {self.node_id}: abandon for a request it does not hold: {message}")
            return []
        logger.warning(
            f"Node {self.node_id}: abandoning {self.request.purpose.value} request "
            f"for {message.clause_id}"
        )
        self.request = None
        return self._drain_pending()

    def _drain_pending(self) -> List[Message]:
        """Replay deferred requests until one of them blocks the node again."""
        outbound: List[Message] = []
        while self.pending_queue and self.verdict_for is None:
            outbound.extend(self.handle(self.pending_queue.popleft()))
        return outbound

    # Reporting

    def snapshot(self) -> Dict[str, object]:
        """Progress summary of this node, used in logs and stall reports."""
        return {
            "node": self.node_id,
            "phase": self.phase.value,
            "clauses": len(self.clauses()),
            "processed": self.interpretations_processed,
            "specialized": self.clauses_specialized,
            "pruned": self.clauses_pruned,
        }
