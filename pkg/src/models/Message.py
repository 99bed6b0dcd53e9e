"""Protocol messages exchanged between learner nodes and the mediator."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional

from src.models.Clause import Clause
from src.models.ClauseStats import ClauseStats

MEDIATOR_ID = "mediator"


class MessageType(str, Enum):
    ADD_NEW_CLAUSE = "AddNewClause"
    SPECIALIZE_REQUEST = "SpecializeRequest"
    STATS_REPLY = "StatsReply"
    REPLACE = "Replace"
    PROCEED = "Proceed"
    PRUNE_REQUEST = "PruneRequest"
    PRUNE_STATS_REPLY = "PruneStatsReply"
    REMOVE = "Remove"
    MEDIATOR_GRANT = "MediatorGrant"
    MEDIATOR_DONE = "MediatorDone"
    MEDIATOR_ABANDON = "MediatorAbandon"
    STREAM_EXHAUSTED = "StreamExhausted"
    SHUTDOWN = "Shutdown"
    HELLO = "Hello"

    @property
    def is_control(self) -> bool:
        """Termination-detection messages, excluded from protocol accounting."""
        return self in (MessageType.STREAM_EXHAUSTED, MessageType.SHUTDOWN, MessageType.HELLO)

    @property
    def is_request(self) -> bool:
        return self in (MessageType.SPECIALIZE_REQUEST, MessageType.PRUNE_REQUEST)

    @property
    def is_verdict(self) -> bool:
        return self in (MessageType.REPLACE, MessageType.PROCEED, MessageType.REMOVE)


class Purpose(str, Enum):
    SPECIALIZE = "specialize"
    PRUNE = "prune"

    @classmethod
    def of_request(cls, msg_type: MessageType) -> "Purpose":
        if msg_type is MessageType.SPECIALIZE_REQUEST:
            return cls.SPECIALIZE
        if msg_type is MessageType.PRUNE_REQUEST:
            return cls.PRUNE
        raise ValueError(f"{msg_type.value} is not a request")


@dataclass(frozen=True)
class Message:
    """
    One protocol message.

    Only the fields a variant uses are set:
        AddNewClause       clause
        SpecializeRequest  clause_id, requester
        StatsReply         clause_id, stats, refinement_stats
        Replace            clause_id, clause, observed_n
        Proceed / Remove   clause_id
        PruneRequest       clause_id, requester
        PruneStatsReply    clause_id, stats, stable_since
        MediatorGrant      clause_id, requester, purpose
        MediatorDone       clause_id, requester, purpose, changed
        MediatorAbandon    clause_id, requester
        StreamExhausted, Shutdown, Hello carry no body

    ``sender`` is the responder of replies; ``seq`` is stamped by the transport.
    """

    msg_type: MessageType
    sender: str
    recipient: str
    seq: int = 0
    clause_id: Optional[str] = None
    requester: Optional[str] = None
    purpose: Optional[Purpose] = None
    clause: Optional[Clause] = None
    stats: Optional[ClauseStats] = None
    refinement_stats: Dict[str, ClauseStats] = field(default_factory=dict)
    stable_since: Optional[int] = None
    observed_n: Optional[int] = None
    changed: Optional[bool] = None

    def __str__(self) -> str:
        target = f" {self.clause_id}" if self.clause_id else ""
        return f"{self.msg_type.value}{target} {self.sender}->{self.recipient} #{self.seq}"

    @property
    def accounting_key(self) -> str:
        """Counter name for message accounting; requests relayed by the mediator count apart."""
        if self.msg_type.is_request and self.sender == MEDIATOR_ID:
            return f"{self.msg_type.value}:forwarded"
        return self.msg_type.value


class ProtocolError(RuntimeError):
    """Raised when a peer or the mediator violates the message protocol."""
