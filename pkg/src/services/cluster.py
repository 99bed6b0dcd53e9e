"""
Cluster Service - runs one learner group (one clause kind) to stream exhaustion.

``InProcessCluster`` drives k nodes and the mediator in a deterministic
round-robin schedule over an ``InProcessTransport``. Each node context and
the mediator own a virtual clock advanced by the measured duration of their
own steps; a message carries its sender's clock and the receiver's clock
catches up to it. The maximum clock is the simulated parallel training time.

``SocketCluster`` runs the same group with one thread per node and the
mediator serving a TCP hub, and reports real wall-clock time.
"""

import logging
import threading
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from src.functions.countAggregation import own_counts
from src.functions.scoring import g_score
from src.models.Clause import Clause, ClauseKind
from src.models.ClauseStats import ClauseStats
from src.models.HoeffdingParams import HoeffdingParams
from src.models.Interpretation import Interpretation
from src.models.Message import MEDIATOR_ID, Message, MessageType
from src.models.ModeDeclaration import ModeBias
from src.models.Theory import Theory
from src.services.learnerNode import LearnerNode
from src.services.mediator import Mediator
from src.services.transport import (
    InProcessTransport,
    MessageAccounting,
    SocketEndpoint,
    SocketHub,
    TransportError,
)

logger = logging.getLogger(__name__)

# Rounds without any progress before an unfinished cluster is declared stalled.
STALL_LIMIT = 3


def default_node_ids(count: int) -> List[str]:
    return [f"n{index}" for index in range(1, count + 1)]


def global_stats(nodes: Sequence[LearnerNode], clause_id: str) -> ClauseStats:
    """Sum of every node's own counts for one clause."""
    total = ClauseStats()
    for node in nodes:
        clause = node.theory.get(clause_id)
        if clause is not None:
            total = total + own_counts(clause, node.ledger)[0]
    return total


def output_theory(nodes: Sequence[LearnerNode], kind: ClauseKind, params: HoeffdingParams) -> Theory:
    """
    The group's emitted clauses.

    A clause is emitted when its globally summed example count reached the
    warm-up and its global score is at least the pruning threshold. Emitted
    clauses carry the global counts.
    """
    theory = Theory()
    if not nodes:
        return theory
    for clause in nodes[0].theory.clauses(kind):
        total = global_stats(nodes, clause.clause_id)
        if total.e < params.warm_up:
            continue
        if g_score(total, kind) < params.prune_threshold:
            logger.debug(f"Withholding {clause.clause_id}: score below threshold on {total}")
            continue
        theory.add(
            Clause(
                clause_id=clause.clause_id,
                head=clause.head,
                body=clause.body,
                bottom=clause.bottom,
                stats=total,
            )
        )
    return theory


def build_nodes(
    node_ids: Sequence[str],
    kind: ClauseKind,
    modes: ModeBias,
    params: HoeffdingParams,
    structural_changes: bool,
) -> Dict[str, LearnerNode]:
    return {
        node_id: LearnerNode(node_id, node_ids, kind, modes, params, structural_changes)
        for node_id in node_ids
    }


class InProcessCluster:
    """A learner group scheduled deterministically inside one process."""

    def __init__(
        self,
        kind: ClauseKind,
        streams: Sequence[Sequence[Interpretation]],
        modes: ModeBias,
        params: HoeffdingParams,
        seed: int = 0,
        structural_changes: bool = True,
        node_ids: Optional[Sequence[str]] = None,
    ):
        """
        Initialize the InProcessCluster.

        Args:
            kind: clause kind learned by this group
            streams: one sub-stream per node
            modes: mode declarations shared by every node
            params: learning parameters shared by every node
            seed: mediator prioritization seed
            structural_changes: when False nodes only count (no new clauses,
                specializations or prunes)
            node_ids: node ids, defaulting to n1..nk
        """
        self.kind = kind
        self.node_ids = list(node_ids) if node_ids is not None else default_node_ids(len(streams))
        if len(self.node_ids) != len(streams):
            raise ValueError(f"{len(streams)} streams given for {len(self.node_ids)} nodes")
        self.streams = {node_id: list(stream) for node_id, stream in zip(self.node_ids, streams)}
        self.cursor = {node_id: 0 for node_id in self.node_ids}
        self.params = params
        self.nodes = build_nodes(self.node_ids, kind, modes, params, structural_changes)
        self.mediator = Mediator(self.node_ids, seed)
        self.transport = InProcessTransport(self.node_ids + [MEDIATOR_ID])
        self.clocks: Dict[str, float] = {endpoint: 0.0 for endpoint in self.node_ids + [MEDIATOR_ID]}
        self.steps = 0

    @property
    def accounting(self) -> MessageAccounting:
        return self.transport.accounting

    @property
    def training_seconds(self) -> float:
        return max(self.clocks.values())

    def node_list(self) -> List[LearnerNode]:
        return [self.nodes[node_id] for node_id in self.node_ids]

    def stream_exhausted(self, node_id: str) -> bool:
        return self.cursor[node_id] >= len(self.streams[node_id])

    def is_quiescent(self) -> bool:
        """No message in flight, every node Running and the mediator idle."""
        return (
            self.transport.is_idle
            and self.mediator.is_idle
            and all(node.is_running for node in self.nodes.values())
        )

    def is_finished(self) -> bool:
        return self.is_quiescent() and all(self.stream_exhausted(n) for n in self.node_ids)

    def theories_consistent(self) -> bool:
        signatures = {node.theory.signature() for node in self.nodes.values()}
        return len(signatures) <= 1

    def _timed(self, endpoint: str, action: Callable[[], List[Message]]) -> List[Message]:
        started = time.perf_counter()
        outbound = action()
        self.clocks[endpoint] += time.perf_counter() - started
        return outbound

    def _deliver(self, endpoint: str, handler: Callable[[Message], List[Message]]) -> bool:
        progressed = False
        while True:
            received = self.transport.receive(endpoint)
            if received is None:
                return progressed
            message, stamp = received
            progressed = True
            self.clocks[endpoint] = max(self.clocks[endpoint], stamp)
            outbound = self._timed(endpoint, lambda: handler(message))
            self.transport.send_all(outbound, self.clocks[endpoint])

    def step(self) -> bool:
        """
        One scheduling round; returns whether anything happened.

        Every node in id order first handles its whole inbox, then consumes
        one interpretation if it is Running. The mediator then handles its
        inbox and arbitrates the requests that arrived during the round.
        """
        self.steps += 1
        progressed = False
        for node_id in self.node_ids:
            node = self.nodes[node_id]
            progressed |= self._deliver(node_id, node.handle)
            if node.is_running and not self.stream_exhausted(node_id):
                interp = self.streams[node_id][self.cursor[node_id]]
                self.cursor[node_id] += 1
                outbound = self._timed(node_id, lambda: node.process_interpretation(interp))
                self.transport.send_all(outbound, self.clocks[node_id])
                progressed = True
        progressed |= self._deliver(MEDIATOR_ID, self.mediator.handle)
        granted = self._timed(MEDIATOR_ID, self.mediator.tick)
        if granted:
            progressed = True
        self.transport.send_all(granted, self.clocks[MEDIATOR_ID])
        return progressed

    def run(self, on_quiescent: Optional[Callable[["InProcessCluster"], None]] = None) -> "InProcessCluster":
        """
        Step until every stream is consumed and the group is quiescent.

        ``on_quiescent`` is called after every round that ends quiescent.

        Raises:
            RuntimeError: if rounds stop making progress before the group finishes
        """
        idle_rounds = 0
        logger.info(
            f"Running {self.kind.value} group with {len(self.node_ids)} node(s) on "
            f"{sum(len(s) for s in self.streams.values())} interpretations"
        )
        while not self.is_finished():
            if self.step():
                idle_rounds = 0
            else:
                idle_rounds += 1
                if idle_rounds >= STALL_LIMIT:
                    nodes = [node.snapshot() for node in self.node_list()]
                    raise RuntimeError(f"{self.kind.value} group stalled: {nodes}")
            if on_quiescent is not None and self.is_quiescent():
                on_quiescent(self)
        logger.info(
            f"{self.kind.value} group quiescent after {self.steps} rounds, "
            f"{self.accounting.total_messages} messages, {self.training_seconds:.3f}s simulated"
        )
        return self

    def final_theory(self) -> Theory:
        return output_theory(self.node_list(), self.kind, self.params)


class SocketCluster:
    """A learner group whose nodes run in threads and talk through a TCP hub."""

    def __init__(
        self,
        kind: ClauseKind,
        streams: Sequence[Sequence[Interpretation]],
        modes: ModeBias,
        params: HoeffdingParams,
        seed: int = 0,
        hub_address: Tuple[str, int] = ("127.0.0.1", 0),
        node_ids: Optional[Sequence[str]] = None,
        poll_interval: float = 0.01,
    ):
        self.kind = kind
        self.node_ids = list(node_ids) if node_ids is not None else default_node_ids(len(streams))
        if len(self.node_ids) != len(streams):
            raise ValueError(f"{len(streams)} streams given for {len(self.node_ids)} nodes")
        self.streams = {node_id: list(stream) for node_id, stream in zip(self.node_ids, streams)}
        self.params = params
        self.nodes = build_nodes(self.node_ids, kind, modes, params, True)
        self.mediator = Mediator(self.node_ids, seed)
        self.hub_address = hub_address
        self.poll_interval = poll_interval
        self.accounting = MessageAccounting()
        self.training_seconds = 0.0
        self._exhausted: set = set()
        self._errors: List[BaseException] = []

    def node_list(self) -> List[LearnerNode]:
        return [self.nodes[node_id] for node_id in self.node_ids]

    def _on_mediator_message(self, message: Message) -> List[Message]:
        if message.msg_type is MessageType.STREAM_EXHAUSTED:
            self._exhausted.add(message.sender)
            return []
        return self.mediator.handle(message)

    def _should_stop(self) -> bool:
        return bool(self._errors) or (
            len(self._exhausted) == len(self.node_ids) and self.mediator.is_idle
        )

    def _node_loop(self, node: LearnerNode, endpoint: SocketEndpoint) -> None:
        stream = self.streams[node.node_id]
        cursor = 0
        announced = False
        while True:
            exhausted = cursor >= len(stream)
            message = endpoint.receive(self.poll_interval if exhausted or not node.is_running else 0)
            if message is not None:
                if message.msg_type is MessageType.SHUTDOWN:
                    return
                endpoint.send_all(node.handle(message))
                continue
            if node.is_running and not exhausted:
                endpoint.send_all(node.process_interpretation(stream[cursor]))
                cursor += 1
            elif exhausted and not announced:
                endpoint.send(
                    Message(MessageType.STREAM_EXHAUSTED, sender=node.node_id, recipient=MEDIATOR_ID)
                )
                announced = True
            if self._errors:
                return

    def _run_node(self, node: LearnerNode, address: Tuple[str, int]) -> None:
        endpoint = None
        try:
            endpoint = SocketEndpoint(node.node_id, address, self.accounting)
            self._node_loop(node, endpoint)
        except BaseException as e:  # re-raised by run()
            logger.error(f"Node {node.node_id} failed: {e}")
            self._errors.append(e)
        finally:
            if endpoint is not None:
                endpoint.close()

    def run(self) -> "SocketCluster":
        """
        Serve the hub on the calling thread until every node is exhausted
        and the mediator is idle, then shut the nodes down.

        Raises:
            TransportError: if the hub cannot be bound or a connection fails
        """
        try:
            hub = SocketHub(self.hub_address, len(self.node_ids), self.accounting)
        except OSError as e:
            raise TransportError(f"Cannot bind hub at {self.hub_address}: {e}") from e
        logger.info(
            f"Running {self.kind.value} group with {len(self.node_ids)} node(s) "
            f"through hub {hub.address[0]}:{hub.address[1]}"
        )
        started = time.perf_counter()
        threads = [
            threading.Thread(
                target=self._run_node,
                args=(self.nodes[node_id], hub.address),
                name=f"{self.kind.value}-{node_id}",
                daemon=True,
            )
            for node_id in self.node_ids
        ]
        try:
            for thread in threads:
                thread.start()
            hub.serve(self._on_mediator_message, self.mediator.tick, self._should_stop, self.poll_interval)
            if not self._errors:
                hub.broadcast_control(MessageType.SHUTDOWN)
            for thread in threads:
                thread.join()
        finally:
            hub.close()
        self.training_seconds = time.perf_counter() - started
        if self._errors:
            error = self._errors[0]
            if isinstance(error, TransportError):
                raise error
            raise TransportError(f"{self.kind.value} group failed: {error}") from error
        logger.info(
            f"{self.kind.value} group finished in {self.training_seconds:.3f}s, "
            f"{self.accounting.total_messages} messages"
        )
        return self

    def theories_consistent(self) -> bool:
        return len({node.theory.signature() for node in self.nodes.values()}) <= 1

    def final_theory(self) -> Theory:
        return output_theory(self.node_list(), self.kind, self.params)
