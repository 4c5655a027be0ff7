"""Steady-state contention simulation mirroring the analytic model's world.

Each node receives Poisson frame arrivals into a two-slot queue (arrivals to
a full queue are cleared and counted separately).  The head-of-line frame is
served by the node's contention scheme: up to ma+1 attempts, each a scheme
backoff (zero for plain sensing) followed by one carrier-sense window.  An
idle verdict wins the channel for the mean exchange duration; the sensing
window itself never occupies the medium.  A frame is discarded after ma+1
busy verdicts.

Implementation notes: events are flat (time, seq, kind, node) tuples on a
heap rather than engine.Event objects; ordering semantics are identical and
the flat form keeps multi-million-event horizons fast.  Backoffs are not
separate events: the countdown ignores the channel (unslotted operation), so
each attempt schedules its verdict directly at backoff + sense time and the
ledger splits the span afterwards.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from ..config import MacScheme, ProtocolConfig, derive_timing
from ..engine import RandomStreams

_ARRIVAL = 0
_CCA_END = 1
_TX_END = 2

# Ledger state indices.
IDLE, BACKOFF, CCA, TX = 0, 1, 2, 3
STATE_NAMES = ("idle", "backoff", "cca", "tx")


@dataclass
class QueueLog:
    """Raw queue-mode run record; estimators live in wurlab.metrics."""

    n_nodes: int
    horizon: float
    frame_start: np.ndarray     # service start (frame reaches head of line)
    frame_end: np.ndarray       # last sensing verdict
    frame_busy: np.ndarray      # busy verdicts for the frame
    frame_won: np.ndarray       # delivered vs discarded
    frame_node: np.ndarray
    cycle_frames: np.ndarray    # frames served per busy cycle
    cycle_end: np.ndarray       # when each busy cycle closed
    tx_intervals: np.ndarray    # (k, 2) channel occupancy bursts
    state_durations: np.ndarray  # (n_nodes, 4) idle/backoff/cca/tx seconds
    blocked_arrivals: int
    total_arrivals: int

    @property
    def total_cca(self) -> int:
        return int(self.frame_busy.sum() + self.frame_won.sum())


class _Drain:
    """Block-buffered draws: arrivals off the traffic stream, backoff slot
    counts off the MAC stream, so draw counts on one never shift the other."""

    __slots__ = ("traffic", "mac", "lam", "exp_buf", "exp_i", "int_buf",
                 "int_i", "cw_high")

    def __init__(self, traffic, mac, lam, cw_high, block=2048):
        self.traffic = traffic
        self.mac = mac
        self.lam = lam
        self.cw_high = cw_high
        self.exp_buf = traffic.exponential_block(lam, block)
        self.exp_i = 0
        self.int_buf = mac.uniform_int_block(0, cw_high, block)
        self.int_i = 0

    def next_gap(self):
        if self.exp_i >= len(self.exp_buf):
            self.exp_buf = self.traffic.exponential_block(self.lam,
                                                          len(self.exp_buf))
            self.exp_i = 0
        v = self.exp_buf.item(self.exp_i)
        self.exp_i += 1
        return v

    def next_slots(self):
        if self.int_i >= len(self.int_buf):
            self.int_buf = self.mac.uniform_int_block(0, self.cw_high,
                                                      len(self.int_buf))
            self.int_i = 0
        v = self.int_buf.item(self.int_i)
        self.int_i += 1
        return v


def run_queue_mode(config: ProtocolConfig, scheme: MacScheme = None,
                   horizon: float = None, seed: int = None) -> QueueLog:
    config.validate()
    scheme = scheme or config.mac.scheme
    if scheme is MacScheme.SCM:
        raise ValueError("queue mode models the sensing schemes; SCM has no CCA")
    horizon = config.sim.horizon if horizon is None else horizon
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    seed = config.seed if seed is None else seed

    n = config.traffic.n_nodes
    lam = config.traffic.lam
    ma = config.mac.ma
    max_attempts = ma + 1
    sigma = config.mac.slot_duration
    cw_high = config.mac.cw - 1
    timing = derive_timing(config)
    t_cca = timing.t_cca
    t_occ = timing.t_tr_mean          # winner's channel occupancy
    threshold = config.mac.adp_threshold
    is_csma = scheme is MacScheme.CSMA_CA
    is_adp = scheme is MacScheme.ADP

    streams = RandomStreams(seed, n)
    drains = [_Drain(streams.node(i), streams.node_mac(i), lam, cw_high)
              for i in range(n)]

    # Per-node mutable state, plain lists for speed.
    queue_len = [0] * n
    attempt = [0] * n
    serving = [False] * n
    hol_start = [0.0] * n
    frames_in_cycle = [0] * n
    state = [IDLE] * n
    state_since = [0.0] * n
    durations = np.zeros((n, 4))

    f_start, f_end, f_busy, f_won, f_node = [], [], [], [], []
    cycles, cycle_end = [], []
    tx_starts, tx_ends = [], []
    blocked = 0
    total_arrivals = 0

    channel_max_end = float("-inf")
    active_end = float("-inf")

    heap = []
    seq = 0
    for i in range(n):
        t0 = drains[i].next_gap()
        if t0 <= horizon:
            heap.append((t0, seq, _ARRIVAL, i))
            seq += 1
    heapq.heapify(heap)
    push = heapq.heappush
    pop = heapq.heappop

    def note_state(i, now, new_state):
        durations[i, state[i]] += now - state_since[i]
        state[i] = new_state
        state_since[i] = now

    def begin_attempt(i, now):
        """Schedule attempt's verdict; ledger the backoff/sense split."""
        nonlocal seq
        j = attempt[i] + 1          # 1-based attempt number
        if is_csma or (is_adp and j >= threshold):
            bo = drains[i].next_slots() * sigma
        else:
            bo = 0.0
        if bo > 0.0:
            note_state(i, now, BACKOFF)
            durations[i, BACKOFF] += bo
            state_since[i] = now + bo
            state[i] = CCA
        else:
            note_state(i, now, CCA)
        push(heap, (now + bo + t_cca, seq, _CCA_END, i))
        seq += 1

    def start_service(i, now):
        serving[i] = True
        attempt[i] = 0
        hol_start[i] = now
        begin_attempt(i, now)

    def finish_frame(i, now):
        """Frame leaves the queue head; start successor or go idle."""
        queue_len[i] -= 1
        frames_in_cycle[i] += 1
        if queue_len[i] > 0:
            start_service(i, now)
        else:
            serving[i] = False
            cycles.append(frames_in_cycle[i])
            cycle_end.append(now)
            frames_in_cycle[i] = 0
            note_state(i, now, IDLE)

    while heap:
        now, _, kind, i = pop(heap)
        if now > horizon:
            break
        if kind == _ARRIVAL:
            total_arrivals += 1
            gap = drains[i].next_gap()
            if now + gap <= horizon:
                push(heap, (now + gap, seq, _ARRIVAL, i))
                seq += 1
            if queue_len[i] >= 2:
                blocked += 1          # blocked customer cleared
            else:
                queue_len[i] += 1
                assert queue_len[i] <= 2, "queue capacity invariant"
                if not serving[i]:
                    start_service(i, now)
        elif kind == _CCA_END:
            window_start = now - t_cca
            if channel_max_end > window_start:
                attempt[i] += 1
                if attempt[i] >= max_attempts:
                    f_start.append(hol_start[i])
                    f_end.append(now)
                    f_busy.append(max_attempts)
                    f_won.append(False)
                    f_node.append(i)
                    finish_frame(i, now)
                else:
                    begin_attempt(i, now)
            else:
                assert active_end <= now, "channel exclusivity violated"
                f_start.append(hol_start[i])
                f_end.append(now)
                f_busy.append(attempt[i])
                f_won.append(True)
                f_node.append(i)
                end = now + t_occ
                tx_starts.append(now)
                tx_ends.append(end)
                active_end = end
                if end > channel_max_end:
                    channel_max_end = end
                note_state(i, now, TX)
                push(heap, (end, seq, _TX_END, i))
                seq += 1
        else:  # _TX_END
            finish_frame(i, now)

    for i in range(n):
        durations[i, state[i]] += horizon - state_since[i]

    return QueueLog(
        n_nodes=n,
        horizon=horizon,
        frame_start=np.asarray(f_start, dtype=np.float64),
        frame_end=np.asarray(f_end, dtype=np.float64),
        frame_busy=np.asarray(f_busy, dtype=np.int32),
        frame_won=np.asarray(f_won, dtype=bool),
        frame_node=np.asarray(f_node, dtype=np.int32),
        cycle_frames=np.asarray(cycles, dtype=np.int64),
        cycle_end=np.asarray(cycle_end, dtype=np.float64),
        tx_intervals=np.column_stack([tx_starts, tx_ends])
        if tx_starts else np.zeros((0, 2)),
        state_durations=durations,
        blocked_arrivals=blocked,
        total_arrivals=total_arrivals,
    )
