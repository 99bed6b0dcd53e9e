"""
Wire codec for protocol messages.

Each frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
object ``{"v", "type", "seq", "sender", "to", "body"}``. Clause bodies travel
as canonical literal strings; bottom clauses carry each literal's input and
output variables so receivers can rebuild the same search space.
"""

import json
import logging
import struct
from typing import Any, Dict, List, Optional

from src.functions.termParser import TermSyntaxError, parse_atom
from src.models.Clause import BottomClause, Clause
from src.models.ClauseStats import ClauseStats
from src.models.Message import Message, MessageType, ProtocolError, Purpose
from src.models.Term import Literal

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
HEADER = struct.Struct("!I")
DEFAULT_MAX_FRAME_SIZE = 16 * 1024 * 1024


class DecodeError(ProtocolError):
    """Raised for malformed frames; ``offset`` is the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def _literal_to_wire(literal: Literal) -> Dict[str, Any]:
    return {"atom": literal.key, "in": list(literal.inputs), "out": list(literal.outputs)}


def _clause_to_wire(clause: Clause) -> Dict[str, Any]:
    return {
        "id": clause.clause_id,
        "head": str(clause.head),
        "body": list(clause.body_keys),
        "bottom": {
            "head": str(clause.bottom.head),
            "literals": [_literal_to_wire(literal) for literal in clause.bottom.literals],
        },
    }


def _body_to_wire(message: Message) -> Dict[str, Any]:
    body: Dict[str, Any] = {}
    if message.clause_id is not None:
        body["clause"] = message.clause_id
    if message.requester is not None:
        body["requester"] = message.requester
    if message.purpose is not None:
        body["purpose"] = message.purpose.value
    if message.clause is not None:
        body["rule"] = _clause_to_wire(message.clause)
    if message.stats is not None:
        body["stats"] = message.stats.to_dict()
    if message.msg_type is MessageType.STATS_REPLY:
        body["refinements"] = {
            key: stats.to_dict() for key, stats in sorted(message.refinement_stats.items())
        }
    if message.stable_since is not None:
        body["stable_since"] = message.stable_since
    if message.observed_n is not None:
        body["observed_n"] = message.observed_n
    if message.changed is not None:
        body["changed"] = message.changed
    return body


def encode_payload(message: Message) -> bytes:
    document = {
        "v": SCHEMA_VERSION,
        "type": message.msg_type.value,
        "seq": message.seq,
        "sender": message.sender,
        "to": message.recipient,
        "body": _body_to_wire(message),
    }
    return json.dumps(document, sort_keys=True, separators=(",", ":")).encode("utf-8")


def encode(message: Message) -> bytes:
    """Serialize ``message`` into one length-prefixed frame."""
    payload = encode_payload(message)
    return HEADER.pack(len(payload)) + payload


def _literal_from_wire(data: Dict[str, Any]) -> Literal:
    return Literal(
        parse_atom(data["atom"]),
        tuple(str(name) for name in data.get("in", ())),
        tuple(str(name) for name in data.get("out", ())),
    )


def _clause_from_wire(data: Dict[str, Any]) -> Clause:
    bottom_data = data["bottom"]
    bottom = BottomClause(
        parse_atom(bottom_data["head"]),
        tuple(_literal_from_wire(item) for item in bottom_data["literals"]),
    )
    by_key = {literal.key: literal for literal in bottom.literals}
    body = []
    for text in data["body"]:
        literal = by_key.get(text)
        body.append(literal if literal is not None else Literal(parse_atom(text)))
    return Clause(
        clause_id=str(data["id"]),
        head=parse_atom(data["head"]),
        body=tuple(body),
        bottom=bottom,
    )


def _optional(body: Dict[str, Any], key: str) -> Optional[Any]:
    return body.get(key)


def decode_payload(payload: bytes, offset: int = HEADER.size) -> Message:
    """Rebuild a Message from a frame payload; ``offset`` locates the payload in its frame."""
    try:
        document = json.loads(payload.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise DecodeError(f"Payload is not UTF-8: {e.reason}", offset + e.start) from e
    except json.JSONDecodeError as e:
        raise DecodeError(f"Payload is not JSON: {e.msg}", offset + e.pos) from e
    if not isinstance(document, dict):
        raise DecodeError("Payload must be a JSON object", offset)
    try:
        if document["v"] != SCHEMA_VERSION:
            raise DecodeError(f"Unsupported schema version {document['v']}", offset)
        msg_type = MessageType(document["type"])
        body = document["body"]
        purpose = _optional(body, "purpose")
        stats = _optional(body, "stats")
        rule = _optional(body, "rule")
        return Message(
            msg_type=msg_type,
            sender=str(document["sender"]),
            recipient=str(document["to"]),
            seq=int(document["seq"]),
            clause_id=_optional(body, "clause"),
            requester=_optional(body, "requester"),
            purpose=Purpose(purpose) if purpose is not None else None,
            clause=_clause_from_wire(rule) if rule is not None else None,
            stats=ClauseStats.from_dict(stats) if stats is not None else None,
            refinement_stats={
                key: ClauseStats.from_dict(value)
                for key, value in body.get("refinements", {}).items()
            },
            stable_since=_optional(body, "stable_since"),
            observed_n=_optional(body, "observed_n"),
            changed=_optional(body, "changed"),
        )
    except DecodeError:
        raise
    except (KeyError, TypeError, ValueError, TermSyntaxError) as e:
        raise DecodeError(f"Invalid message schema: {e!r}", offset) from e


def decode(frame: bytes) -> Message:
    """
    Decode exactly one complete frame.

    Raises:
        DecodeError: on a short header, truncated or oversized payload, or a
            payload that is not a valid message
    """
    if len(frame) < HEADER.size:
        raise DecodeError("Truncated frame header", len(frame))
    (length,) = HEADER.unpack_from(frame, 0)
    available = len(frame) - HEADER.size
    if available < length:
        raise DecodeError(f"Truncated frame: expected {length} payload bytes", len(frame))
    if available > length:
        raise DecodeError("Trailing bytes after frame", HEADER.size + length)
    return decode_payload(frame[HEADER.size:])


class FrameDecoder:
    """Incremental decoder for a byte stream of concatenated frames."""

    def __init__(self, max_frame_size: int = DEFAULT_MAX_FRAME_SIZE):
        self.max_frame_size = max_frame_size
        self._buffer = bytearray()
        self._consumed = 0

    def feed(self, data: bytes) -> List[Message]:
        """Buffer ``data`` and return every message completed by it, in order."""
        self._buffer.extend(data)
        messages = []
        while len(self._buffer) >= HEADER.size:
            (length,) = HEADER.unpack_from(self._buffer, 0)
            if length > self.max_frame_size:
                raise DecodeError(
                    f"Frame of {length} bytes exceeds limit {self.max_frame_size}",
                    self._consumed,
                )
            end = HEADER.size + length
            if len(self._buffer) < end:
                break
            payload = bytes(self._buffer[HEADER.size:end])
            messages.append(decode_payload(payload, self._consumed + HEADER.size))
            del self._buffer[:end]
            self._consumed += end
        return messages

    @property
    def pending_bytes(self) -> int:
        return len(self._buffer)
