"""Deterministic discrete-event core: virtual clock, ordered queue, seeded streams.

A full simulation run is a pure function of (config, master seed).  Events at
equal virtual time pop in insertion order; protocol behaviour must not depend
on that order.

Random streams: one numpy PCG64 generator per node plus one for the
UAV/environment, split from the master seed with ``SeedSequence.spawn``.
Stream k's draw sequence depends only on (master seed, k), never on how other
streams are consumed.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np


class EventKind:
    FRAME_ARRIVAL = "FrameArrival"
    WUC_DELIVERED = "WucDelivered"
    MST_DONE = "MstDone"
    BACKOFF_EXPIRED = "BackoffExpired"
    CCA_COMPLETE = "CcaComplete"
    TX_START = "TxStart"
    TX_END = "TxEnd"
    TDMA_ASSIGNED = "TdmaAssigned"
    SLOT_START = "SlotStart"
    ACK_DELIVERED = "AckDelivered"
    ROUND_END = "RoundEnd"
    TIMEOUT = "Timeout"


@dataclass(frozen=True, order=True)
class Event:
    time: float
    sequence: int
    actor: object = field(compare=False)     # node id, "uav", or "channel"
    kind: str = field(compare=False)
    detail: object = field(compare=False, default=None)


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


class EventQueue:
    """Min-ordered event collection keyed on (time, insertion sequence)."""

    def __init__(self):
        self._heap = []
        self._counter = itertools.count()
        self.clock = 0.0

    def __len__(self):
        return len(self._heap)

    def schedule(self, time, actor, kind, detail=None) -> Event:
        if time < self.clock:
            raise SchedulingError(
                f"cannot schedule {kind} at {time} before clock {self.clock}")
        event = Event(time, next(self._counter), actor, kind, detail)
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> Event:
        event = heapq.heappop(self._heap)
        assert event.time >= self.clock, "event queue delivered time backwards"
        self.clock = event.time
        return event


class NodeStream:
    """Deterministic substream with inverse-transform draws.

    Exponential convention: sample = -log(1 - u) / rate with u in [0, 1),
    so u -> 0 gives small samples and u -> 1 gives large ones.
    """

    def __init__(self, seed_seq: np.random.SeedSequence):
        self._gen = np.random.Generator(np.random.PCG64(seed_seq))

    def random(self) -> float:
        return float(self._gen.random())

    def exponential(self, rate: float) -> float:
        if rate <= 0:
            raise ValueError("rate must be > 0")
        return -math.log1p(-self._gen.random()) / rate

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self._gen.random()

    def uniform_int(self, low: int, high: int) -> int:
        """Unbiased integer in [low, high] (Lemire rejection under the hood)."""
        if low > high:
            raise ValueError("low must be <= high")
        return int(self._gen.integers(low, high + 1))

    def poisson(self, mean: float) -> int:
        if mean < 0:
            raise ValueError("mean must be >= 0")
        return int(self._gen.poisson(mean))

    def exponential_block(self, rate: float, size: int) -> np.ndarray:
        return -np.log1p(-self._gen.random(size)) / rate

    def uniform_int_block(self, low: int, high: int, size: int) -> np.ndarray:
        return self._gen.integers(low, high + 1, size=size)


class RandomStreams:
    """Master-seeded bundle: per node one traffic stream (arrivals, data
    volumes, response phases) and one MAC stream (backoff draws), plus the
    UAV/environment stream.

    Keeping MAC draws on their own substream means schemes that draw
    different numbers of backoffs still see identical traffic sequences, so
    degenerate-parameter runs can be compared event for event.
    """

    def __init__(self, master_seed: int, n_nodes: int):
        root = np.random.SeedSequence(master_seed)
        children = root.spawn(n_nodes + 1)
        self.nodes = []
        self.mac = []
        for seq in children[:n_nodes]:
            traffic_seq, mac_seq = seq.spawn(2)
            self.nodes.append(NodeStream(traffic_seq))
            self.mac.append(NodeStream(mac_seq))
        self.uav = NodeStream(children[n_nodes])

    def node(self, index: int) -> NodeStream:
        return self.nodes[index]

    def node_mac(self, index: int) -> NodeStream:
        return self.mac[index]


def draw_exponential(stream: NodeStream, rate: float) -> float:
    return stream.exponential(rate)


def draw_uniform_int(stream: NodeStream, low: int, high: int) -> int:
    return stream.uniform_int(low, high)
