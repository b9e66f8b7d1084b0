"""Synchronous round-based execution of per-node programs.

A node program is a function that receives a :class:`Simulator` and advances
through communication barriers by calling its methods. Every barrier is one
or more rounds: an exchange moves each node's scalar across every incident
edge; a flood relays values hop by hop for a fixed radius; a row flood
relays annotated splitting rows during power-row precomputation. Node-local
updates between barriers are expressed as vectorized kernels over
node-indexed arrays, which matches the model: each row of the kernel reads
only that node's state plus values its neighbors just delivered.

Message accounting is exact. In logging mode every wire record
(round, src, dst, tag, level, value) is materialized; in counting mode only
per-tag totals are kept, which the large benchmark runs rely on. Gather
operations collect per-node outputs for the caller and are excluded from the
cost totals.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DeadlockError, ParameterError, ProtocolError
from .graphs import bfs_distances

TAG_COMP0 = "COMP0"
TAG_COMP1 = "COMP1"
TAG_FWD_U = "FWD_U"
TAG_BWD_ETA = "BWD_ETA"
TAG_RICH_U1 = "RICH_U1"
TAG_GATHER = "GATHER"

PHASE_OF_TAG = {
    TAG_COMP0: "comp",
    TAG_COMP1: "comp",
    TAG_FWD_U: "forward",
    TAG_BWD_ETA: "backward",
    TAG_RICH_U1: "richardson",
}

_TAG_ORDER = {t: i for i, t in enumerate(
    [TAG_COMP0, TAG_COMP1, TAG_FWD_U, TAG_BWD_ETA, TAG_RICH_U1, TAG_GATHER])}


@dataclass(frozen=True)
class OpRecord:
    phase: str
    tag: str
    kind: str      # exchange | flood | rowflood | raw | gather
    level: int
    rounds: int
    radius: int


@dataclass
class Transcript:
    n: int
    rounds: int = 0
    counts: dict = field(default_factory=dict)
    phase_rounds: dict = field(default_factory=dict)
    node_steps: np.ndarray = None
    messages: list = None           # wire records when logging is enabled
    ops: list = field(default_factory=list)
    gathered: dict = field(default_factory=dict)
    power_supports: dict = field(default_factory=dict)

    def sorted_messages(self):
        return sorted(self.messages or [],
                      key=lambda r: (r[0], r[1], r[2], _TAG_ORDER[r[3]], r[4]))

    def to_ndjson(self, path):
        with open(path, "w") as fh:
            for rec in self.sorted_messages():
                fh.write(json.dumps({
                    "round": rec[0], "src": rec[1], "dst": rec[2],
                    "tag": rec[3], "level": rec[4], "value": rec[5]}) + "\n")


@dataclass(frozen=True)
class CostReport:
    total_messages: int
    total_rounds: int
    breakdown_messages: dict
    breakdown_rounds: dict

    def to_dict(self):
        return {
            "total_messages": self.total_messages,
            "total_rounds": self.total_rounds,
            "messages": dict(self.breakdown_messages),
            "rounds": dict(self.breakdown_rounds),
        }


def message_stats(t):
    """Exact per-phase message/round counts; GATHER traffic is excluded."""
    msgs = {p: 0 for p in ("comp", "forward", "backward", "richardson")}
    rounds = {p: 0 for p in msgs}
    for tag, c in t.counts.items():
        if tag == TAG_GATHER:
            continue
        msgs[PHASE_OF_TAG[tag]] += c
    for op in t.ops:
        if op.tag == TAG_GATHER:
            continue
        rounds[op.phase] += op.rounds
    return CostReport(sum(msgs.values()), sum(rounds.values()), msgs, rounds)


class FloodPlan:
    """Precomputed hop distances and per-round flood message counts.

    Flooding a value vector for radius R: in round r every node at distance
    r-1 from an origin forwards that origin's value to all its neighbors.
    Row floods carry a node's splitting row plus its diagonal annotation,
    i.e. degree+1 scalars per forward.
    """

    def __init__(self, graph):
        self.graph = graph
        self.dist = np.vstack([bfs_distances(graph, s)
                               for s in range(graph.n)]) \
            if graph.n else np.zeros((0, 0), dtype=np.int64)
        self.deg = graph.degrees()
        self._value_counts = {}
        self._row_counts = {}

    def value_flood_counts(self, radius):
        """List of message counts for rounds 1..radius of a value flood."""
        if radius not in self._value_counts:
            cnts = []
            for r in range(1, radius + 1):
                senders = (self.dist == r - 1).sum(axis=0)  # origins per node
                cnts.append(int((senders * self.deg).sum()))
            self._value_counts[radius] = cnts
        return self._value_counts[radius]

    def row_flood_counts(self, rounds):
        """Scalar message counts for rounds 1..rounds of a row flood."""
        if rounds not in self._row_counts:
            payload = self.deg + 1
            cnts = []
            for r in range(1, rounds + 1):
                at = (self.dist == r - 1).astype(np.int64)
                cnts.append(int((at.T @ payload * self.deg).sum()))
            self._row_counts[rounds] = cnts
        return self._row_counts[rounds]

    def flood_senders(self, r):
        """Boolean mask of nodes forwarding anything in flood round r."""
        return (self.dist == r - 1).any(axis=0)


class Simulator:
    """Owns all node state bookkeeping for one program execution."""

    def __init__(self, graph, *, log_messages=False, strict=True, plan=None):
        self.graph = graph
        self.plan = plan if plan is not None else FloodPlan(graph)
        self.strict = strict
        self.t = Transcript(
            n=graph.n,
            node_steps=np.zeros(graph.n, dtype=np.int64),
            messages=[] if log_messages else None,
        )
        self._edge_set = None
        self.phase = "init"

    # -- bookkeeping -------------------------------------------------------

    def _count(self, tag, k):
        self.t.counts[tag] = self.t.counts.get(tag, 0) + k

    def _edges_ok(self, src, dst):
        if self._edge_set is None:
            self._edge_set = set(map(tuple, self.graph.edges))
        a, b = (src, dst) if src < dst else (dst, src)
        return (a, b) in self._edge_set

    def _log_all_edges(self, tag, level, values):
        rnd = self.t.rounds - 1
        g = self.graph
        for src in range(g.n):
            for dst in g.neighbors(src):
                self.t.messages.append(
                    (rnd, src, int(dst), tag, level, float(values[src])))

    # -- communication barriers --------------------------------------------

    def exchange(self, tag, level, values):
        """One round: every node sends values[k] to each of its neighbors."""
        self.phase = PHASE_OF_TAG[tag]
        self.t.rounds += 1
        self._count(tag, 2 * self.graph.m)
        self.t.node_steps += 1
        if self.t.messages is not None:
            self._log_all_edges(tag, level, values)
        self.t.ops.append(OpRecord(self.phase, tag, "exchange", level, 1, 1))
        return values

    def flood(self, tag, level, values, radius):
        """Relay values hop by hop for `radius` rounds; after the flood every
        node can read values originating within its radius-hop ball."""
        if radius == 1:
            return self.exchange(tag, level, values)
        self.phase = PHASE_OF_TAG[tag]
        counts = self.plan.value_flood_counts(radius)
        for r in range(1, radius + 1):
            self.t.rounds += 1
            self._count(tag, counts[r - 1])
            self.t.node_steps += self.plan.flood_senders(r).astype(np.int64)
            if self.t.messages is not None:
                self._log_flood_round(tag, level, values, r)
        self.t.ops.append(
            OpRecord(self.phase, tag, "flood", level, radius, radius))
        return values

    def _log_flood_round(self, tag, level, values, r):
        rnd = self.t.rounds - 1
        dist = self.plan.dist
        g = self.graph
        for src in range(g.n):
            origins = np.nonzero(dist[:, src] == r - 1)[0]
            for dst in g.neighbors(src):
                for o in origins:
                    self.t.messages.append(
                        (rnd, src, int(dst), tag, level, float(values[o])))

    def row_flood(self, tag, rounds):
        """Relay annotated splitting rows for `rounds` rounds (power-row
        precomputation). Each forwarded row costs degree+1 scalar messages;
        the diagonal annotations push knowledge one hop beyond the rows."""
        if rounds <= 0:
            return
        self.phase = PHASE_OF_TAG[tag]
        counts = self.plan.row_flood_counts(rounds)
        for r in range(1, rounds + 1):
            self.t.rounds += 1
            self._count(tag, counts[r - 1])
            self.t.node_steps += self.plan.flood_senders(r).astype(np.int64)
            if self.t.messages is not None:
                self._log_row_flood_round(tag, r)
        self.t.ops.append(
            OpRecord(self.phase, tag, "rowflood", 0, rounds, rounds + 1))

    def _log_row_flood_round(self, tag, r):
        rnd = self.t.rounds - 1
        dist = self.plan.dist
        g = self.graph
        for src in range(g.n):
            origins = np.nonzero(dist[:, src] == r - 1)[0]
            for dst in g.neighbors(src):
                for o in origins:
                    # one record per scalar of the annotated row of `o`
                    sl = slice(g.adj_ptr[o], g.adj_ptr[o + 1])
                    for v in g.adj_wts[sl]:
                        self.t.messages.append(
                            (rnd, src, int(dst), tag, r, float(v)))
                    self.t.messages.append(
                        (rnd, src, int(dst), tag, r, float(self.plan.deg[o])))

    def raw_round(self, sends, expects=(), tag=TAG_FWD_U):
        """One round of explicit messages; used by tests and adversarial
        programs. Raises DeadlockError when an expected message is missing."""
        self.phase = PHASE_OF_TAG.get(tag, "forward")
        self.t.rounds += 1
        rnd = self.t.rounds - 1
        delivered = set()
        for (src, dst, level, value) in sends:
            if self.strict and not self._edges_ok(src, dst):
                raise ProtocolError(
                    f"send ({src} -> {dst}) does not traverse a topology edge")
            self._count(tag, 1)
            if self.t.messages is not None:
                self.t.messages.append(
                    (rnd, src, dst, tag, level, float(value)))
            delivered.add((dst, src))
        for (node, src) in expects:
            if (node, src) not in delivered:
                raise DeadlockError(node, self.phase, rnd)
        self.t.ops.append(OpRecord(self.phase, tag, "raw", 0, 1, 1))

    def gather(self, name, values):
        """Collect per-node outputs; excluded from message accounting."""
        self._count(TAG_GATHER, self.graph.n)
        self.t.gathered[name] = np.array(values, dtype=np.float64)
        self.t.ops.append(OpRecord("gather", TAG_GATHER, "gather", 0, 0, 0))

    def note_power_support(self, name, indptr, indices):
        self.t.power_supports[name] = tuple(
            indices[indptr[k]:indptr[k + 1]].copy()
            for k in range(self.graph.n))


def run(graph, program, *, log_messages=False, strict=True, plan=None):
    """Execute a node program to completion and return its Transcript."""
    sim = Simulator(graph, log_messages=log_messages, strict=strict, plan=plan)
    program(sim)
    if sim.t.messages is not None:
        sim.t.messages = sim.t.sorted_messages()
    return sim.t


@dataclass(frozen=True)
class LocalityReport:
    ok: bool
    first_violation: object = None
    detail: str = ""


def assert_locality(t, graph, R):
    """Audit a transcript against the R-hop communication contract.

    Checks, in order: every logged message traverses a topology edge; round
    indices are contiguous; no communication op declares a radius beyond R
    (exchanges are single-hop, floods at most R, row floods reach R hops
    through their annotations); and every recorded power row has support
    inside the owner's R-hop ball.
    """
    edge_set = set(map(tuple, graph.edges))
    if t.messages is not None:
        for rec in t.messages:
            a, b = (rec[1], rec[2]) if rec[1] < rec[2] else (rec[2], rec[1])
            if (a, b) not in edge_set:
                return LocalityReport(
                    False, rec, f"message {rec} does not traverse an edge")
        rounds_seen = sorted({rec[0] for rec in t.messages})
        if rounds_seen and (rounds_seen[0] < 0
                            or rounds_seen[-1] >= t.rounds):
            return LocalityReport(False, rounds_seen[-1],
                                  "round index outside 0..rounds-1")
    for op in t.ops:
        if op.kind in ("exchange", "raw") and op.radius > 1:
            return LocalityReport(False, op, "multi-hop exchange")
        if op.kind in ("flood", "rowflood") and op.radius > max(R, 1):
            return LocalityReport(
                False, op, f"flood radius {op.radius} exceeds R={R}")
    if t.power_supports:
        dist = np.vstack([bfs_distances(graph, s) for s in range(graph.n)])
        for name, rows in t.power_supports.items():
            for k, cols in enumerate(rows):
                if len(cols) and np.any(dist[k, cols] > R):
                    return LocalityReport(
                        False, (name, k),
                        f"power row {name}[{k}] has support beyond {R} hops")
    return LocalityReport(True)
