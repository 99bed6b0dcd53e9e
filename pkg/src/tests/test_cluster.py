"""
Tests for learner groups: message accounting, count merging, replica
consistency, freedom from deadlock and determinism.

Run with: pytest src/tests/test_cluster.py -v
"""

import numpy as np
import pytest

from src.functions.clauseSpace import parse_modes
from src.functions.countAggregation import own_counts
from src.functions.dataIo import parse_theory, partition
from src.functions.streamGenerator import generate
from src.functions.termParser import parse_atom
from src.models.Clause import BottomClause, Clause, ClauseKind
from src.models.ClauseStats import ClauseStats
from src.models.HoeffdingParams import HoeffdingParams
from src.models.Message import MEDIATOR_ID, Purpose
from src.models.StreamSpec import GeneratorConfig
from src.models.Term import Literal
from src.services.cluster import (
    InProcessCluster,
    SocketCluster,
    default_node_ids,
    global_stats,
    output_theory,
)
from src.services.learnerNode import LearnerNode, OutstandingRequest
from src.services.mediator import Mediator
from src.services.transport import InProcessTransport

MODES_TEXT = """
modeh(initiatedAt(moving(+person,+person),+time)).
modeh(terminatedAt(moving(+person,+person),+time)).
modeb(happensAt(walk(+person),+time)).
modeb(happensAt(active(+person),+time)).
modeb(happensAt(inactive(+person),+time)).
modeb(happensAt(running(+person),+time)).
modeb(distLessThan(+person,+person,#dist,+time)).
modeb(distMoreThan(+person,+person,#dist,+time)).
pool(dist, [25,30,40]).
"""

GROUND_TRUTH = """
initiatedAt(moving(X,Y),T) :- happensAt(walk(X),T), happensAt(walk(Y),T), distLessThan(X,Y,25,T).
terminatedAt(moving(X,Y),T) :- happensAt(inactive(X),T), distMoreThan(X,Y,30,T).
"""

WALK_X = "happensAt(walk(X),T)"
WALK_Y = "happensAt(walk(Y),T)"
CLOSE = "distLessThan(X,Y,25,T)"


def fixed_clause(clause_id="c1"):
    head = parse_atom("initiatedAt(moving(X,Y),T)")
    bottom = BottomClause(
        head,
        (
            Literal(parse_atom(WALK_X), ("X", "T")),
            Literal(parse_atom(WALK_Y), ("Y", "T")),
            Literal(parse_atom(CLOSE), ("X", "Y", "T")),
        ),
    )
    return Clause(clause_id=clause_id, head=head, body=(), bottom=bottom)


def winning(clause):
    clause.stats = ClauseStats(tp=10, fp=90, e=100)
    clause.refinement_stats = {
        WALK_X: ClauseStats(tp=10, fp=0, e=100),
        WALK_Y: ClauseStats(tp=5, fp=50, e=100),
    }
    return clause


def prunable(clause, node):
    """Make ``clause`` fail its score test on ``node`` after a long stable period."""
    clause.stats = ClauseStats(tp=1, fp=99, e=100)
    clause.stable_since = 500
    node.history.observe(50)
    return clause


def small_stream(seed):
    """A generated stream of at most 200 interpretations whose shape varies with ``seed``."""
    config = GeneratorConfig(
        ground_truth=parse_theory(GROUND_TRUTH),
        horizon=20 + 3 * seed,
        seed=seed,
        chunk_size=1 + seed % 3,
    )
    return generate(config)


# Test Fixtures

@pytest.fixture
def modes():
    return parse_modes(MODES_TEXT)


@pytest.fixture
def params():
    return HoeffdingParams(delta=0.05, tie_threshold=0.05, prune_threshold=0.3, warm_up=20)


@pytest.fixture(scope="module")
def stream():
    config = GeneratorConfig(ground_truth=parse_theory(GROUND_TRUTH), horizon=300, seed=5, chunk_size=5)
    return generate(config)


# Message accounting

def test_single_node_sends_no_messages(stream, modes, params):
    """Test that k = 1 learns without any protocol traffic."""
    cluster = InProcessCluster(ClauseKind.INITIATION, [stream], modes, params).run()

    assert cluster.accounting.total_messages == 0
    assert cluster.accounting.total_bytes == 0
    assert len(cluster.nodes["n1"].clauses()) >= 1


def test_one_specialization_round_with_four_nodes(modes, params):
    """Test the exact message counts of one round: request, k-1 forwards, replies and verdicts."""
    cluster = InProcessCluster(ClauseKind.INITIATION, [[], [], [], []], modes, params)
    for node in cluster.node_list():
        node.theory.add(fixed_clause())
    n1 = cluster.nodes["n1"]
    winning(n1.theory.get("c1"))

    cluster.transport.send_all(n1.run_local_tests())
    cluster.run()

    assert dict(cluster.accounting.by_type) == {
        "SpecializeRequest": 1,
        "SpecializeRequest:forwarded": 3,
        "MediatorGrant": 1,
        "StatsReply": 3,
        "Replace": 3,
        "MediatorDone": 1,
    }
    assert cluster.accounting.total_bytes > 0
    assert cluster.theories_consistent()
    assert all(node.theory.get("c1").body_keys == (WALK_X,) for node in cluster.node_list())


def test_new_clauses_reach_every_replica(stream, modes, params):
    """Test that AddNewClause traffic appears with more than one node."""
    cluster = InProcessCluster(ClauseKind.INITIATION, partition(stream, 2), modes, params).run()

    assert cluster.accounting.by_type["AddNewClause"] >= 1
    assert cluster.theories_consistent()


# Count merging

def test_distributed_counts_equal_single_node_counts(stream, modes, params):
    """Test that summed own counts across k nodes equal one node on the whole stream."""
    single = InProcessCluster(ClauseKind.INITIATION, [stream], modes, params, structural_changes=False)
    split = InProcessCluster(
        ClauseKind.INITIATION, partition(stream, 3), modes, params, structural_changes=False
    )
    for cluster in (single, split):
        for node in cluster.node_list():
            node.theory.add(fixed_clause())
        cluster.run()

    expected = single.nodes["n1"].theory.get("c1")
    assert global_stats(split.node_list(), "c1") == expected.stats
    for key in (WALK_X, WALK_Y, CLOSE):
        total = ClauseStats()
        for node in split.node_list():
            total = total + own_counts(node.theory.get("c1"), node.ledger)[1].get(key, ClauseStats())
        assert total == expected.refinement_stats[key]


@pytest.mark.parametrize("seed", range(50))
@pytest.mark.parametrize("k", [2, 3, 4])
def test_merged_counts_match_one_node_on_random_streams(modes, params, k, seed):
    """Test the count-merge oracle over many generated streams and node counts."""
    stream = small_stream(seed)
    single = InProcessCluster(ClauseKind.INITIATION, [stream], modes, params, structural_changes=False)
    split = InProcessCluster(
        ClauseKind.INITIATION, partition(stream, k), modes, params, seed=seed, structural_changes=False
    )
    for cluster in (single, split):
        for node in cluster.node_list():
            node.theory.add(fixed_clause())
        cluster.run()

    expected = single.nodes["n1"].theory.get("c1")
    assert global_stats(split.node_list(), "c1") == expected.stats
    for key in (WALK_X, WALK_Y, CLOSE):
        total = ClauseStats()
        for node in split.node_list():
            total = total + own_counts(node.theory.get("c1"), node.ledger)[1].get(key, ClauseStats())
        assert total == expected.refinement_stats.get(key, ClauseStats())


def test_output_filter_uses_global_counts(modes, params):
    """Test that a clause is emitted only once its summed examples reach the warm-up."""
    nodes = [
        LearnerNode(node_id, ["n1", "n2"], ClauseKind.INITIATION, modes, params)
        for node_id in ("n1", "n2")
    ]
    for node in nodes:
        clause = fixed_clause()
        clause.stats = ClauseStats(tp=9, fp=1, e=12)
        node.theory.add(clause)

    emitted = output_theory(nodes, ClauseKind.INITIATION, params)

    assert [clause.clause_id for clause in emitted.clauses()] == ["c1"]
    assert emitted.get("c1").stats == ClauseStats(tp=18, fp=2, e=24)
    assert len(output_theory(nodes[:1], ClauseKind.INITIATION, params)) == 0


# Replica consistency

def test_replicas_agree_whenever_the_group_is_quiescent(stream, modes, params):
    """Test that every quiescent round sees identical theories on all nodes."""
    checks = []

    def check(cluster):
        checks.append(cluster.theories_consistent())

    InProcessCluster(ClauseKind.INITIATION, partition(stream, 4), modes, params, seed=3).run(check)

    assert checks
    assert all(checks)


@pytest.mark.parametrize("seed", range(100))
def test_four_node_replicas_agree_at_every_quiescent_point(modes, params, seed):
    """Test replica consistency at each quiescent round of many seeded four-node runs."""
    kind = ClauseKind.INITIATION if seed % 2 == 0 else ClauseKind.TERMINATION
    checks = []

    def check(cluster):
        checks.append(cluster.theories_consistent())

    cluster = InProcessCluster(kind, partition(small_stream(seed), 4), modes, params, seed=seed).run(check)

    assert checks
    assert all(checks)
    assert cluster.is_finished()


def test_termination_group_stays_consistent(stream, modes, params):
    """Test consistency for the termination group too."""
    cluster = InProcessCluster(ClauseKind.TERMINATION, partition(stream, 3), modes, params).run()

    assert cluster.theories_consistent()
    assert cluster.is_finished()


def test_stalled_group_is_reported(modes, params):
    """Test that a node blocked forever makes run raise instead of spinning."""
    cluster = InProcessCluster(ClauseKind.INITIATION, [[], []], modes, params)
    cluster.nodes["n1"].request = OutstandingRequest("c1", Purpose.SPECIALIZE)

    with pytest.raises(RuntimeError, match="stalled") as exc_info:
        cluster.run()

    assert "AwaitingStats" in str(exc_info.value)
    assert "'node': 'n1'" in str(exc_info.value)


# Deadlock freedom


def _random_schedule(rng, k, clause_count):
    node_ids = default_node_ids(k)
    modes = parse_modes(MODES_TEXT)
    params = HoeffdingParams()
    nodes = {n: LearnerNode(n, node_ids, ClauseKind.INITIATION, modes, params) for n in node_ids}
    mediator = Mediator(node_ids, seed=int(rng.integers(0, 1000)))
    transport = InProcessTransport(node_ids + [MEDIATOR_ID])
    for node in nodes.values():
        for index in range(clause_count):
            node.theory.add(fixed_clause(f"c{index}"))

    requests = 0
    for node_id in node_ids:
        if rng.random() < 0.8:
            node = nodes[node_id]
            target = node.theory.get(f"c{int(rng.integers(0, clause_count))}")
            if rng.random() < 0.5:
                winning(target)
            else:
                prunable(target, node)
            outbound = node.run_local_tests()
            requests += len(outbound)
            transport.send_all(outbound)

    delivered = 0
    limit = 10 * k * max(requests, 1)
    while delivered <= limit:
        ready = [endpoint for endpoint in node_ids + [MEDIATOR_ID] if transport.pending(endpoint)]
        can_tick = bool(mediator.arrivals)
        if not ready and not can_tick:
            break
        choice = int(rng.integers(0, len(ready) + (1 if can_tick else 0)))
        if choice == len(ready):
            transport.send_all(mediator.tick())
            continue
        endpoint = ready[choice]
        message, _ = transport.receive(endpoint)
        delivered += 1
        handler = mediator.handle if endpoint == MEDIATOR_ID else nodes[endpoint].handle
        transport.send_all(handler(message))
    return nodes, mediator, transport, delivered, limit


@pytest.mark.parametrize("k", [2, 3, 4, 6, 8])
def test_random_schedules_never_deadlock(k):
    """Test that colliding specialize and prune rounds always return every node to Running."""
    rng = np.random.default_rng(k)
    pruned = specialized = 0
    for _ in range(100):
        nodes, mediator, transport, delivered, limit = _random_schedule(rng, k, clause_count=2)

        assert delivered <= limit
        assert transport.is_idle
        assert mediator.is_idle
        assert all(node.is_running for node in nodes.values())
        assert len({node.theory.signature() for node in nodes.values()}) == 1
        first = nodes["n1"]
        pruned += first.clauses_pruned
        specialized += first.clauses_specialized

    assert pruned > 0
    assert specialized > 0

# Determinism and timing

def test_same_seed_same_run(stream, modes, params):
    """Test that two in-process runs with one seed produce the same theory and traffic."""
    runs = [
        InProcessCluster(ClauseKind.INITIATION, partition(stream, 3), modes, params, seed=9).run()
        for _ in range(2)
    ]

    assert runs[0].nodes["n1"].theory.signature() == runs[1].nodes["n1"].theory.signature()
    assert runs[0].accounting.by_type == runs[1].accounting.by_type


def test_simulated_time_is_at_most_the_sum_of_clocks(stream, modes, params):
    """Test that the simulated training time is the largest context clock."""
    cluster = InProcessCluster(ClauseKind.INITIATION, partition(stream, 2), modes, params).run()

    assert cluster.training_seconds == max(cluster.clocks.values())
    assert 0 < cluster.training_seconds <= sum(cluster.clocks.values())


# Sockets

def test_socket_group_learns_consistently(stream, modes, params):
    """Test a two-node group over localhost TCP."""
    cluster = SocketCluster(ClauseKind.INITIATION, partition(stream, 2), modes, params).run()

    assert cluster.theories_consistent()
    assert cluster.accounting.by_type["AddNewClause"] >= 1
    assert cluster.training_seconds > 0
