"""
Mediator Service - serializes specialize/prune rounds of a learner group.

The mediator learns nothing. It grants one request at a time, forwards the
granted request to every other node, and queues the rest. Requests that
arrive within one arbitration tick are prioritized in seeded random order.
When the granted round changed or removed its clause, queued requests for
the same clause are abandoned; otherwise the next queued request is granted.
"""

import logging
import threading
from collections import deque
from enum import Enum
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np

from src.models.Message import MEDIATOR_ID, Message, MessageType, ProtocolError, Purpose

logger = logging.getLogger(__name__)


class Arbitration(str, Enum):
    GRANT = "grant"
    ENQUEUE = "enqueue"


class Mediator:
    """Arbitration node shared by the nodes of one learner group."""

    def __init__(self, node_ids: Sequence[str], seed: int = 0):
        """
        Initialize the Mediator.

        Args:
            node_ids: ids of every learner node of the group
            seed: seed of the prioritization among simultaneous requests
        """
        self.node_ids = sorted(node_ids)
        self.granted: Optional[Message] = None
        self.queue: Deque[Message] = deque()
        self.arrivals: List[Message] = []
        self.grants_issued = 0
        self.abandoned = 0
        self._rng = np.random.default_rng(seed)
        self._lock = threading.RLock()

    @property
    def is_idle(self) -> bool:
        with self._lock:
            return self.granted is None and not self.queue and not self.arrivals

    def handle(self, message: Message) -> List[Message]:
        """
        Accept one message addressed to the mediator.

        Requests are buffered until the next ``tick``; a MediatorDone closes
        the granted round and may grant the next queued request at once.

        Raises:
            ProtocolError: for a MediatorDone from a node that holds no grant,
                or a message type the mediator does not accept
        """
        with self._lock:
            if message.msg_type.is_request:
                self.arrivals.append(message)
                return []
            if message.msg_type is MessageType.MEDIATOR_DONE:
                return self._on_done(message)
            if message.msg_type.is_control:
                return []
            raise ProtocolError(f"Mediator cannot handle {message}")

    def tick(self) -> List[Message]:
        """Prioritize the requests buffered since the last tick and arbitrate each."""
        with self._lock:
            outbound: List[Message] = []
            if self.arrivals:
                order = self._rng.permutation(len(self.arrivals))
                batch = [self.arrivals[int(index)] for index in order]
                self.arrivals = []
                for request in batch:
                    _, messages = self.arbitrate(request)
                    outbound.extend(messages)
            return outbound

    def arbitrate(self, request: Message) -> Tuple[Arbitration, List[Message]]:
        """Grant ``request`` if no round is in progress, otherwise queue it."""
        with self._lock:
            if self.granted is None:
                return Arbitration.GRANT, self._grant(request)
            self.queue.append(request)
            logger.debug(f"Mediator: queued {request.msg_type.value} from {request.requester}")
            return Arbitration.ENQUEUE, []

    def _grant(self, request: Message) -> List[Message]:
        self.granted = request
        self.grants_issued += 1
        requester = request.requester
        assert requester is not None
        purpose = Purpose.of_request(request.msg_type)
        logger.debug(f"Mediator: granting {purpose.value} of {request.clause_id} to {requester}")
        outbound = [
            Message(
                MessageType.MEDIATOR_GRANT,
                sender=MEDIATOR_ID,
                recipient=requester,
                clause_id=request.clause_id,
                requester=requester,
                purpose=purpose,
            )
        ]
        for node_id in self.node_ids:
            if node_id == requester:
                continue
            outbound.append(
                Message(
                    request.msg_type,
                    sender=MEDIATOR_ID,
                    recipient=node_id,
                    clause_id=request.clause_id,
                    requester=requester,
                )
            )
        return outbound

    def _on_done(self, message: Message) -> List[Message]:
        """
        Close the granted round and grant the next queued request.

        After a round that changed its clause, queued and buffered requests
        for that clause are abandoned. Buffered requests for other clauses
        stay buffered for the next tick.
        """
        granted = self.granted
        if granted is None or granted.requester != message.requester or granted.clause_id != message.clause_id:
            raise ProtocolError(f"MediatorDone from {message.sender} which holds no grant")
        self.granted = None
        outbound: List[Message] = []
        if message.changed:
            self.queue = deque(self._abandon_stale(list(self.queue), message.clause_id, outbound))
            self.arrivals = self._abandon_stale(self.arrivals, message.clause_id, outbound)
        if self.queue:
            outbound.extend(self._grant(self.queue.popleft()))
        return outbound

    def _abandon_stale(
        self, requests: List[Message], clause_id: Optional[str], outbound: List[Message]
    ) -> List[Message]:
        kept: List[Message] = []
        for request in requests:
            if request.clause_id != clause_id:
                kept.append(request)
                continue
            self.abandoned += 1
            logger.warning(f"Mediator: {request.requester} abandons its request for {request.clause_id}")
            outbound.append(
                Message(
                    MessageType.MEDIATOR_ABANDON,
                    sender=MEDIATOR_ID,
                    recipient=request.requester or "",
                    clause_id=request.clause_id,
                    requester=request.requester,
                )
            )
        return kept
