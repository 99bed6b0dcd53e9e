"""
Experiment Runner Service - end-to-end learning runs and cross-validation.

A run partitions the training stream over k nodes, runs the initiation and
termination learner groups to exhaustion, merges their emitted clauses and
scores the result on a test stream.
"""

import logging
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from src.functions.dataIo import partition
from src.functions.evaluation import EvaluationResult, evaluate, split_folds
from src.models.Clause import ClauseKind
from src.models.HoeffdingParams import ConfigError, HoeffdingParams
from src.models.Interpretation import Interpretation
from src.models.ModeDeclaration import ModeBias
from src.models.RunReport import RunReport
from src.models.Theory import Theory
from src.models.Topology import Topology
from src.services.cluster import InProcessCluster, SocketCluster

logger = logging.getLogger(__name__)

TRANSPORTS = ("inproc", "socket")
GROUP_KINDS = (ClauseKind.INITIATION, ClauseKind.TERMINATION)

Cluster = Union[InProcessCluster, SocketCluster]


@dataclass
class LearningOutcome:
    """Both learner groups of one finished run."""

    groups: List[Cluster]
    training_seconds: float

    @property
    def theory(self) -> Theory:
        return Theory.merge(*(group.final_theory() for group in self.groups))


class ExperimentRunner:
    """Runs learning experiments with fixed modes, parameters and deployment."""

    def __init__(
        self,
        modes: ModeBias,
        params: HoeffdingParams,
        nodes: int = 1,
        transport: str = "inproc",
        seed: int = 0,
        topology: Optional[Topology] = None,
    ):
        """
        Initialize the ExperimentRunner.

        Args:
            modes: mode declarations of the run
            params: learning parameters shared by every node
            nodes: processing nodes per learner group
            transport: "inproc" or "socket"
            seed: mediator prioritization seed
            topology: socket deployment; its node list fixes the node count

        Raises:
            ConfigError: for an unknown transport, a node count below 1 or a
                topology that disagrees with ``nodes``
        """
        if transport not in TRANSPORTS:
            raise ConfigError(f"Unknown transport {transport!r}; expected one of {TRANSPORTS}")
        if nodes < 1:
            raise ConfigError(f"Node count must be >= 1, got {nodes}")
        if topology is not None:
            if transport != "socket":
                raise ConfigError("A topology only applies to the socket transport")
            if len(topology.nodes) != nodes:
                raise ConfigError(
                    f"Topology lists {len(topology.nodes)} nodes but {nodes} were requested"
                )
        self.modes = modes
        self.params = params
        self.nodes = nodes
        self.transport = transport
        self.seed = seed
        self.topology = topology

    def train(self, stream: Sequence[Interpretation]) -> LearningOutcome:
        streams = partition(stream, self.nodes)
        if self.transport == "inproc":
            groups: List[Cluster] = [
                InProcessCluster(kind, streams, self.modes, self.params, self.seed).run()
                for kind in GROUP_KINDS
            ]
            return LearningOutcome(groups, max(group.training_seconds for group in groups))

        addresses: Tuple[Tuple[str, int], Tuple[str, int]] = (("127.0.0.1", 0), ("127.0.0.1", 0))
        node_ids = None
        if self.topology is not None:
            addresses = self.topology.hub_addresses()
            node_ids = list(self.topology.nodes)
        sockets = [
            SocketCluster(kind, streams, self.modes, self.params, self.seed, address, node_ids)
            for kind, address in zip(GROUP_KINDS, addresses)
        ]
        started = time.perf_counter()
        with ThreadPoolExecutor(max_workers=len(sockets), thread_name_prefix="group") as pool:
            futures = [pool.submit(cluster.run) for cluster in sockets]
            for future in futures:
                future.result()
        return LearningOutcome(list(sockets), time.perf_counter() - started)

    def learn(
        self, train: Sequence[Interpretation], test: Optional[Sequence[Interpretation]] = None
    ) -> RunReport:
        """
        Learn on ``train`` and score on ``test`` (``train`` when not given).

        Raises:
            ConfigError: for invalid settings
            TransportError: if the socket transport fails
        """
        logger.info(
            f"Learning on {len(train)} interpretations with {self.nodes} node(s) ({self.transport})"
        )
        outcome = self.train(train)
        theory = outcome.theory
        result = evaluate(theory, test if test is not None else train, self.modes)
        report = self._report(outcome, theory, result)
        logger.info(
            f"Run finished: f1={report.f1:.4f}, {report.theory_size_literals} literals, "
            f"{report.messages_sent} messages"
        )
        return report

    def _report(self, outcome: LearningOutcome, theory: Theory, result: EvaluationResult) -> RunReport:
        by_type: Counter = Counter()
        message_bytes = 0
        specialized = pruned = 0
        for group in outcome.groups:
            by_type.update(group.accounting.by_type)
            message_bytes += group.accounting.total_bytes
            first = group.node_list()[0]
            specialized += first.clauses_specialized
            pruned += first.clauses_pruned
        return RunReport(
            training_seconds=outcome.training_seconds,
            f1=result.f1,
            tp=result.tp,
            fp=result.fp,
            fn=result.fn,
            theory_size_literals=theory.size_literals,
            messages_sent=sum(by_type.values()),
            message_bytes=message_bytes,
            messages_by_type=dict(sorted(by_type.items())),
            clauses_specialized=specialized,
            clauses_pruned=pruned,
            nodes=self.nodes,
            transport=self.transport,
            final_theory=theory,
        )

    def cross_validate(self, stream: Sequence[Interpretation], folds: int) -> RunReport:
        """
        Contiguous folds in stream order; F1 is micro-averaged over the
        summed fold counts, time, size and message metrics are fold means.

        Raises:
            ConfigError: if folds < 2 or folds exceeds the stream length
        """
        reports = []
        for index, (train, test) in enumerate(split_folds(stream, folds), start=1):
            logger.info(f"Fold {index}/{folds}: {len(train)} training, {len(test)} test interpretations")
            reports.append(self.learn(train, test))
        return aggregate_reports(reports)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def aggregate_reports(reports: Sequence[RunReport]) -> RunReport:
    totals = sum(
        (EvaluationResult(report.tp, report.fp, report.fn) for report in reports), EvaluationResult()
    )
    by_type: Counter = Counter()
    for report in reports:
        by_type.update(report.messages_by_type)
    count = max(len(reports), 1)
    first = reports[0] if reports else RunReport()
    return RunReport(
        training_seconds=_mean([report.training_seconds for report in reports]),
        f1=totals.f1,
        tp=totals.tp,
        fp=totals.fp,
        fn=totals.fn,
        theory_size_literals=round(_mean([report.theory_size_literals for report in reports])),
        messages_sent=round(_mean([report.messages_sent for report in reports])),
        message_bytes=round(_mean([report.message_bytes for report in reports])),
        messages_by_type={key: round(value / count) for key, value in sorted(by_type.items())},
        clauses_specialized=sum(report.clauses_specialized for report in reports),
        clauses_pruned=sum(report.clauses_pruned for report in reports),
        nodes=first.nodes,
        transport=first.transport,
        folds=list(reports),
    )
