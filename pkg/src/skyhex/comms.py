"""Simulated multi-master pub/sub with selective topic bridging.

Each robot runs its own namespace and declares its local topics; a sync rule
on a node selects which remote topics are bridged onto it over a lossy link.
Bridged topics are datagrams: at-most-once delivery, sampled latency,
independent drops, and hard loss while the link is partitioned (no
buffering). Arrival times per (publisher, topic, destination) are clamped
monotone, so the delivered stream is always an order-preserving subsequence
of the published one.

Reliability is layered on top only where the mission needs it: a large
payload moves as acknowledged fixed-size chunks with retransmission
(`chunked_transfer`), which rides out partition windows and reassembles
byte-identically.

The bus is a single-threaded event queue over virtual time. Random draws
(drop, latency) happen at publish time in sorted-destination order, so a run
is deterministic given the seed and the schedules.
"""

import fnmatch
import heapq
import itertools
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Set, Tuple

import numpy as np

from .errors import ConfigError, MaxRetriesExceeded, UndeclaredTopic

ACTIVE = "ACTIVE"
STALLED = "STALLED"
COMPLETE = "COMPLETE"

DEFAULT_CHUNK_SIZE = 64 * 1024
RETRANSMIT_TIMEOUT = 0.5  # s
MAX_CHUNK_RETRIES = 100

_CHUNK_HEADER = struct.Struct("!II")  # chunk index, total chunks
_ACK_HEADER = struct.Struct("!I")


@dataclass(frozen=True)
class LinkModel:
    """Latency/drop/partition model for one directed link."""

    latency_lo: float = 0.010
    latency_hi: float = 0.050
    drop: float = 0.05
    partitions: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.drop <= 1.0:
            raise ConfigError(f"drop probability {self.drop} outside [0, 1]")
        if not 0.0 <= self.latency_lo <= self.latency_hi:
            raise ConfigError("latency bounds must satisfy 0 <= lo <= hi")
        prev_end = -math.inf
        for start, end in self.partitions:
            if not start < end:
                raise ConfigError(f"empty partition interval ({start}, {end})")
            if start < prev_end:
                raise ConfigError("partition intervals overlap")
            prev_end = end

    def in_partition(self, t: float) -> bool:
        return any(start <= t < end for start, end in self.partitions)

    def sample_latency(self, rng: np.random.Generator) -> float:
        return self.latency_lo + (self.latency_hi - self.latency_lo) * float(rng.random())


class BusNode:
    """One namespace: its declared topics and which remote topics it syncs."""

    def __init__(self, namespace: str, topics=(), sync_rules=()):
        if not namespace.startswith("/") or len(namespace) < 2:
            raise ConfigError(f"namespace {namespace!r} must look like /name")
        self.namespace = namespace
        self.topics: Set[str] = set(topics)
        self.sync_rules: List[str] = list(sync_rules)


def sync_rule_filter(node: BusNode, fq_topic: str) -> bool:
    """True when a fully-qualified remote topic crosses onto this node."""
    return any(fnmatch.fnmatch(fq_topic, rule) for rule in node.sync_rules)


@dataclass(frozen=True)
class DeliveryEvent:
    t: float
    src: str
    dest: str
    topic: str  # fully qualified, e.g. /uav/points
    data: bytes


class Bus:
    """Discrete-event pub/sub network over virtual time."""

    def __init__(self, seed: int = 0):
        self.nodes: Dict[str, BusNode] = {}
        self.links: Dict[Tuple[str, str], LinkModel] = {}
        self.now = 0.0
        self.delivered: List[DeliveryEvent] = []
        self.log: List[Tuple[float, str, str, str, int]] = []
        self._queue: list = []
        self._seq = itertools.count()
        self._last_arrival: Dict[Tuple[str, str, str], float] = {}
        self._subs: Dict[str, List[Tuple[str, Callable]]] = {}
        self._rng = np.random.default_rng(seed)

    # --- topology ---

    def add_node(self, node: BusNode) -> BusNode:
        if node.namespace in self.nodes:
            raise ConfigError(f"duplicate namespace {node.namespace}")
        self.nodes[node.namespace] = node
        return node

    def node(self, namespace: str) -> BusNode:
        try:
            return self.nodes[namespace]
        except KeyError:
            raise ConfigError(f"unknown namespace {namespace}") from None

    def connect(self, a: str, b: str, link: LinkModel = LinkModel(), symmetric: bool = True):
        self.node(a), self.node(b)
        self.links[(a, b)] = link
        if symmetric:
            self.links[(b, a)] = link

    def subscribe(self, namespace: str, pattern: str, handler: Callable):
        """Handler(event) fires for every delivery on `namespace` whose fully
        qualified topic matches the fnmatch pattern."""
        self.node(namespace)
        self._subs.setdefault(namespace, []).append((pattern, handler))

    # --- datagram plane ---

    def publish(self, src: str, topic: str, data: bytes, t: Optional[float] = None):
        node = self.node(src)
        if topic not in node.topics:
            raise UndeclaredTopic(f"{topic!r} not declared on {src}")
        t = self.now if t is None else float(t)
        if t < self.now:
            raise ValueError(f"publish at t={t} before bus time {self.now}")
        fq = f"{src}/{topic}"
        self.log.append((t, src, fq, "publish", len(data)))
        if any(fnmatch.fnmatch(fq, pat) for pat, _ in self._subs.get(src, [])):
            # local subscribers: in-process, lossless, zero latency
            self._push(t, "deliver", DeliveryEvent(t, src, src, fq, data))
        for dest in sorted(self.nodes):
            if dest == src or not sync_rule_filter(self.nodes[dest], fq):
                continue
            link = self.links.get((src, dest))
            if link is None:
                continue
            if link.in_partition(t):
                self.log.append((t, src, fq, "partition_drop", len(data)))
                continue
            if float(self._rng.random()) < link.drop:
                self.log.append((t, src, fq, "drop", len(data)))
                continue
            arrival = t + link.sample_latency(self._rng)
            key = (src, fq, dest)
            arrival = max(arrival, self._last_arrival.get(key, 0.0))
            if link.in_partition(arrival):
                self.log.append((t, src, fq, "partition_drop", len(data)))
                continue
            self._last_arrival[key] = arrival
            self._push(arrival, "deliver", DeliveryEvent(arrival, src, dest, fq, data))

    def schedule(self, t: float, fn: Callable):
        if t < self.now:
            raise ValueError(f"schedule at t={t} before bus time {self.now}")
        self._push(t, "timer", fn)

    def _push(self, t: float, kind: str, payload):
        heapq.heappush(self._queue, (t, next(self._seq), kind, payload))

    def pending(self) -> bool:
        return bool(self._queue)

    def next_event_time(self) -> float:
        return self._queue[0][0] if self._queue else math.inf

    def run_until(self, t: float) -> List[DeliveryEvent]:
        """Process all events up to and including virtual time t; returns the
        deliveries that happened during this call."""
        out: List[DeliveryEvent] = []
        while self._queue and self._queue[0][0] <= t:
            et, _, kind, payload = heapq.heappop(self._queue)
            self.now = et
            if kind == "deliver":
                ev: DeliveryEvent = payload
                self.log.append((ev.t, ev.src, ev.topic, "deliver", len(ev.data)))
                self.delivered.append(ev)
                out.append(ev)
                for pattern, handler in self._subs.get(ev.dest, []):
                    if fnmatch.fnmatch(ev.topic, pattern):
                        handler(ev)
            else:
                payload()
        if math.isfinite(t):
            self.now = max(self.now, t)
        return out


def deliver(bus: Bus, t: float) -> List[DeliveryEvent]:
    """Advance the bus to virtual time t; returns deliveries in order."""
    return bus.run_until(t)


def events_csv_lines(bus: Bus) -> List[str]:
    lines = ["t,src,topic,event,bytes"]
    for t, src, topic, event, nbytes in bus.log:
        lines.append(f"{t:.6f},{src},{topic},{event},{nbytes}")
    return lines


# --- reliable chunked transfer ---


@dataclass
class TransferSession:
    """Sender-side state for one reliable payload handoff."""

    payload_id: str
    data: bytes
    chunk_size: int = DEFAULT_CHUNK_SIZE
    state: str = ACTIVE
    acked: Set[int] = field(default_factory=set)
    retransmits: int = 0
    completed_at: Optional[float] = None

    def __post_init__(self):
        if self.chunk_size <= 0:
            raise ConfigError("chunk size must be positive")

    @property
    def n_chunks(self) -> int:
        return (len(self.data) + self.chunk_size - 1) // self.chunk_size

    def chunk(self, i: int) -> bytes:
        return self.data[i * self.chunk_size : (i + 1) * self.chunk_size]


class ChunkedTransfer:
    """Stop-and-repeat chunk protocol between two namespaces.

    The sender bursts every unacked chunk, then retransmits the still-unacked
    ones every RETRANSMIT_TIMEOUT; the receiver stores chunks idempotently
    and acks each one it sees. A chunk that exhausts MAX_CHUNK_RETRIES
    retransmissions stalls the whole session.
    """

    def __init__(
        self,
        bus: Bus,
        session: TransferSession,
        src: str,
        dst: str,
        timeout: float = RETRANSMIT_TIMEOUT,
        max_retries: int = MAX_CHUNK_RETRIES,
    ):
        self.bus = bus
        self.session = session
        self.src = src
        self.dst = dst
        self.timeout = timeout
        self.max_retries = max_retries
        self.received: Dict[int, bytes] = {}
        self._retries: Dict[int, int] = {}
        self.chunk_topic = f"xfer/{session.payload_id}/chunk"
        self.ack_topic = f"xfer/{session.payload_id}/ack"
        # wire the protocol topics and the bridging rules for both directions
        bus.node(src).topics.add(self.chunk_topic)
        bus.node(dst).topics.add(self.ack_topic)
        bus.node(dst).sync_rules.append(f"{src}/{self.chunk_topic}")
        bus.node(src).sync_rules.append(f"{dst}/{self.ack_topic}")
        bus.subscribe(dst, f"{src}/{self.chunk_topic}", self._on_chunk)
        bus.subscribe(src, f"{dst}/{self.ack_topic}", self._on_ack)

    def start(self, t: float):
        if self.session.n_chunks == 0:
            self.session.state = COMPLETE
            self.session.completed_at = t
            return
        self.bus.schedule(t, self._tick_first)

    def _send(self, i: int):
        payload = _CHUNK_HEADER.pack(i, self.session.n_chunks) + self.session.chunk(i)
        self.bus.publish(self.src, self.chunk_topic, payload)

    def _tick_first(self):
        for i in range(self.session.n_chunks):
            self._retries[i] = 0
            self._send(i)
        self.bus.schedule(self.bus.now + self.timeout, self._tick)

    def _tick(self):
        ses = self.session
        if ses.state != ACTIVE:
            return
        for i in range(ses.n_chunks):
            if i in ses.acked:
                continue
            if self._retries[i] >= self.max_retries:
                ses.state = STALLED
                return
            self._retries[i] += 1
            ses.retransmits += 1
            self._send(i)
        self.bus.schedule(self.bus.now + self.timeout, self._tick)

    def _on_chunk(self, ev: DeliveryEvent):
        i, total = _CHUNK_HEADER.unpack_from(ev.data)
        if total != self.session.n_chunks:
            return  # stray frame from another session shape
        self.received.setdefault(i, ev.data[_CHUNK_HEADER.size :])
        self.bus.publish(self.dst, self.ack_topic, _ACK_HEADER.pack(i))

    def _on_ack(self, ev: DeliveryEvent):
        ses = self.session
        (i,) = _ACK_HEADER.unpack_from(ev.data)
        if ses.state != ACTIVE:
            return
        ses.acked.add(i)
        if len(ses.acked) == ses.n_chunks:
            ses.state = COMPLETE
            ses.completed_at = ev.t

    def run(self, until: float = math.inf):
        """Drive the bus until the session leaves ACTIVE (or `until`)."""
        while self.session.state == ACTIVE and self.bus.pending():
            t_next = self.bus.next_event_time()
            if t_next > until:
                break
            self.bus.run_until(t_next)
        if self.session.state == STALLED:
            raise MaxRetriesExceeded(
                f"transfer {self.session.payload_id}: a chunk exceeded "
                f"{self.max_retries} retransmissions"
            )

    def reassemble(self) -> bytes:
        missing = [i for i in range(self.session.n_chunks) if i not in self.received]
        if missing:
            raise ConfigError(f"cannot reassemble, missing chunks {missing[:4]}...")
        return b"".join(self.received[i] for i in range(self.session.n_chunks))


def chunked_transfer(
    bus: Bus, session: TransferSession, src: str, dst: str, t: float
) -> ChunkedTransfer:
    """Run a full handoff of `session` from src to dst starting at time t.

    Returns the transfer engine (receiver bytes under .received /
    .reassemble()); raises MaxRetriesExceeded after marking the session
    STALLED when a chunk runs out of retries.
    """
    engine = ChunkedTransfer(bus, session, src, dst)
    engine.start(t)
    engine.run()
    return engine
