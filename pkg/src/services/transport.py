"""
Transport Service - reliable, per-sender FIFO delivery of protocol messages.

Two implementations share the wire codec and the message accounting:

- ``InProcessTransport``: bounded in-memory inboxes; every message is
  encoded and decoded on the way so sizes and codec behaviour match the
  socket transport.
- ``SocketHub`` / ``SocketEndpoint``: a TCP star. Nodes connect to the hub
  served by the mediator's thread; the hub relays node-to-node messages and
  hands messages addressed to the mediator to a callback. Each node
  connection has its own writer thread, so the hub keeps reading while a
  slow node drains its backlog.
"""

import logging
import queue
import selectors
import socket
import threading
import time
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field, replace
from functools import wraps
from typing import Callable, Deque, Dict, Iterable, List, Optional, Tuple

from src.functions.messageCodec import FrameDecoder, decode, encode
from src.models.Message import MEDIATOR_ID, Message, MessageType, ProtocolError

logger = logging.getLogger(__name__)

DEFAULT_INBOX_CAPACITY = 100_000


class TransportError(RuntimeError):
    """Raised when a transport cannot be set up or a message cannot be delivered."""


def retry_with_backoff(max_retries: int = 3, backoff_factor: float = 0.1):
    """Decorator for retrying connection attempts with exponential backoff."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            for attempt in range(max_retries + 1):
                try:
                    return func(*args, **kwargs)
                except (ConnectionError, socket.timeout, OSError) as e:
                    if attempt < max_retries:
                        wait_time = backoff_factor * (2 ** attempt)
                        logger.warning(
                            f"Connection failed (attempt {attempt + 1}/{max_retries + 1}): {e}. "
                            f"Retrying in {wait_time:.2f} seconds..."
                        )
                        time.sleep(wait_time)
                    else:
                        logger.error(f"Connection failed after {max_retries + 1} attempts: {e}")
                        raise TransportError(str(e)) from e
            raise RuntimeError("Retry decorator reached unexpected state")
        return wrapper
    return decorator


@dataclass
class MessageAccounting:
    """Counts and encoded sizes of protocol messages; control messages are not counted."""

    by_type: Counter = field(default_factory=Counter)
    total_bytes: int = 0
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False, compare=False)

    def record(self, message: Message, size: int) -> None:
        if message.msg_type.is_control:
            return
        with self._lock:
            self.by_type[message.accounting_key] += 1
            self.total_bytes += size

    @property
    def total_messages(self) -> int:
        return sum(self.by_type.values())

    def merge(self, other: "MessageAccounting") -> None:
        with self._lock:
            self.by_type.update(other.by_type)
            self.total_bytes += other.total_bytes


class SequenceTracker:
    """Checks that each sender's sequence numbers strictly increase."""

    def __init__(self):
        self._last: Dict[str, int] = {}

    def check(self, message: Message) -> None:
        last = self._last.get(message.sender, 0)
        if message.seq <= last:
            raise ProtocolError(
                f"Out-of-order message from {message.sender}: seq {message.seq} after {last}"
            )
        self._last[message.sender] = message.seq


class SequenceStamper:
    def __init__(self):
        self._next: Dict[str, int] = defaultdict(int)

    def stamp(self, message: Message) -> Message:
        self._next[message.sender] += 1
        return replace(message, seq=self._next[message.sender])


class InProcessTransport:
    """In-memory transport between the endpoints of one learner group.

    Each delivered message carries the sender's virtual clock reading at
    send time, used by the cluster's simulated parallel clock.
    """

    def __init__(self, endpoints: Iterable[str], capacity: int = DEFAULT_INBOX_CAPACITY):
        self._inboxes: Dict[str, Deque[Tuple[Message, float]]] = {
            endpoint: deque() for endpoint in endpoints
        }
        self._trackers: Dict[str, SequenceTracker] = {
            endpoint: SequenceTracker() for endpoint in self._inboxes
        }
        self._stamper = SequenceStamper()
        self.capacity = capacity
        self.accounting = MessageAccounting()

    def send(self, message: Message, stamp: float = 0.0) -> Message:
        """Stamp, encode, decode and enqueue ``message``; returns the delivered copy."""
        if message.recipient not in self._inboxes:
            raise TransportError(f"Unknown recipient {message.recipient!r} for {message}")
        inbox = self._inboxes[message.recipient]
        if len(inbox) >= self.capacity:
            raise TransportError(f"Inbox of {message.recipient} is full ({self.capacity})")
        frame = encode(self._stamper.stamp(message))
        delivered = decode(frame)
        self.accounting.record(delivered, len(frame))
        inbox.append((delivered, stamp))
        logger.debug(f"Sent {delivered} ({len(frame)} bytes)")
        return delivered

    def send_all(self, messages: Iterable[Message], stamp: float = 0.0) -> None:
        for message in messages:
            self.send(message, stamp)

    def receive(self, endpoint: str) -> Optional[Tuple[Message, float]]:
        inbox = self._inboxes[endpoint]
        if not inbox:
            return None
        message, stamp = inbox.popleft()
        self._trackers[endpoint].check(message)
        return message, stamp

    def pending(self, endpoint: str) -> int:
        return len(self._inboxes[endpoint])

    @property
    def is_idle(self) -> bool:
        return all(not inbox for inbox in self._inboxes.values())


class SocketEndpoint:
    """A node's connection to the hub."""

    def __init__(self, node_id: str, hub_address: Tuple[str, int], accounting: MessageAccounting,
                 connect_retries: int = 5, backoff_factor: float = 0.05):
        self.node_id = node_id
        self.hub_address = hub_address
        self.accounting = accounting
        self._decoder = FrameDecoder()
        self._tracker = SequenceTracker()
        self._stamper = SequenceStamper()
        self._inbox: Deque[Message] = deque()
        self._lock = threading.RLock()
        self._socket = retry_with_backoff(connect_retries, backoff_factor)(self._connect)()
        self.send(Message(MessageType.HELLO, sender=node_id, recipient=MEDIATOR_ID))

    def _connect(self) -> socket.socket:
        connection = socket.create_connection(self.hub_address, timeout=5.0)
        connection.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return connection

    def send(self, message: Message) -> None:
        with self._lock:
            frame = encode(self._stamper.stamp(message))
            try:
                self._socket.settimeout(None)
                self._socket.sendall(frame)
            except OSError as e:
                raise TransportError(f"Node {self.node_id} lost the hub: {e}") from e
            self.accounting.record(message, len(frame))

    def send_all(self, messages: Iterable[Message]) -> None:
        for message in messages:
            self.send(message)

    def receive(self, timeout: Optional[float]) -> Optional[Message]:
        """Next inbound message, waiting up to ``timeout`` seconds (0 polls)."""
        if not self._inbox:
            self._socket.settimeout(timeout)
            try:
                data = self._socket.recv(65536)
            except (BlockingIOError, socket.timeout):
                return None
            except OSError as e:
                raise TransportError(f"Node {self.node_id} lost the hub: {e}") from e
            if not data:
                raise TransportError(f"Hub closed the connection of {self.node_id}")
            for message in self._decoder.feed(data):
                self._tracker.check(message)
                self._inbox.append(message)
        return self._inbox.popleft() if self._inbox else None

    def close(self) -> None:
        try:
            self._socket.close()
        except OSError:
            pass


class ConnectionWriter:
    """FIFO outbound queue of one hub connection, drained by its own thread."""

    def __init__(self, node_id: str, connection: socket.socket):
        self.node_id = node_id
        self.error: Optional[OSError] = None
        self._connection = connection
        self._frames: "queue.Queue[Optional[bytes]]" = queue.Queue()
        self._thread = threading.Thread(target=self._run, name=f"hub-writer-{node_id}", daemon=True)
        self._thread.start()

    def put(self, frame: bytes) -> None:
        """
        Queue ``frame`` for sending; never blocks.

        Raises:
            TransportError: if an earlier write to this connection failed
        """
        if self.error is not None:
            raise TransportError(f"Hub lost {self.node_id}: {self.error}")
        self._frames.put(frame)

    @property
    def pending(self) -> int:
        return self._frames.qsize()

    def _run(self) -> None:
        while True:
            frame = self._frames.get()
            if frame is None:
                return
            try:
                self._connection.sendall(frame)
            except OSError as e:
                self.error = e
                logger.error(f"Hub cannot write to {self.node_id}: {e}")
                return

    def close(self, timeout: float = 5.0) -> None:
        """Send what is queued, then stop the thread."""
        self._frames.put(None)
        self._thread.join(timeout)


class SocketHub:
    """
    TCP hub run on the mediator's thread.

    Messages addressed to another node are relayed unchanged; messages
    addressed to the mediator go to ``on_message``, whose returned messages
    are sent from the mediator endpoint. ``on_idle`` runs after every batch
    of reads and may return further messages; ``serve`` stops once
    ``should_stop`` returns True.
    """

    def __init__(self, address: Tuple[str, int], expected_nodes: int, accounting: MessageAccounting):
        self.expected_nodes = expected_nodes
        self.accounting = accounting
        self._server = socket.create_server(address)
        self._server.setblocking(False)
        self.address: Tuple[str, int] = self._server.getsockname()[:2]
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._server, selectors.EVENT_READ, data=None)
        self._connections: Dict[str, socket.socket] = {}
        self._writers: Dict[str, ConnectionWriter] = {}
        self._decoders: Dict[socket.socket, FrameDecoder] = {}
        self._tracker = SequenceTracker()
        self._backlog: List[Tuple[Message, Optional[bytes]]] = []
        self._stamper = SequenceStamper()

    def _route(self, message: Message, raw: Optional[bytes] = None) -> None:
        writer = self._writers.get(message.recipient)
        if writer is None:
            if self.connected < self.expected_nodes:
                self._backlog.append((message, raw))
                return
            raise TransportError(f"No connection for recipient {message.recipient}")
        writer.put(raw if raw is not None else encode(message))

    def send_from_mediator(self, messages: Iterable[Message]) -> None:
        for message in messages:
            stamped = self._stamper.stamp(message)
            frame = encode(stamped)
            self.accounting.record(stamped, len(frame))
            self._route(stamped, frame)

    def broadcast_control(self, msg_type: MessageType) -> None:
        self.send_from_mediator(
            Message(msg_type, sender=MEDIATOR_ID, recipient=node_id)
            for node_id in sorted(self._connections)
        )

    def serve(
        self,
        on_message: Callable[[Message], List[Message]],
        on_idle: Callable[[], List[Message]],
        should_stop: Callable[[], bool],
        poll_interval: float = 0.01,
    ) -> None:
        while not should_stop():
            for key, _ in self._selector.select(timeout=poll_interval):
                if key.data is None:
                    self._accept()
                else:
                    self._read(key.fileobj, on_message)  # type: ignore[arg-type]
            self.send_from_mediator(on_idle())

    def _accept(self) -> None:
        connection, peer = self._server.accept()
        # Reads only happen once the selector reports data; writes block in the writer thread.
        connection.setblocking(True)
        connection.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._decoders[connection] = FrameDecoder()
        self._selector.register(connection, selectors.EVENT_READ, data=peer)
        logger.debug(f"Hub accepted connection from {peer}")

    def _read(self, connection: socket.socket, on_message: Callable[[Message], List[Message]]) -> None:
        try:
            data = connection.recv(65536)
        except BlockingIOError:
            return
        if not data:
            self._selector.unregister(connection)
            return
        for message in self._decoders[connection].feed(data):
            if message.msg_type is MessageType.HELLO:
                self._connections[message.sender] = connection
                self._writers[message.sender] = ConnectionWriter(message.sender, connection)
                logger.debug(f"Hub registered {message.sender}")
                if self.connected == self.expected_nodes:
                    backlog, self._backlog = self._backlog, []
                    for held, raw in backlog:
                        self._route(held, raw)
                continue
            if message.recipient == MEDIATOR_ID:
                self._tracker.check(message)
                self.send_from_mediator(on_message(message))
            else:
                self._route(message)

    @property
    def connected(self) -> int:
        return len(self._connections)

    def close(self) -> None:
        for writer in self._writers.values():
            writer.close()
        for connection in list(self._decoders):
            try:
                connection.close()
            except OSError:
                pass
        self._selector.close()
        self._server.close()
