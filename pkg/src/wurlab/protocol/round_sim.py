"""UAV round simulation: wake call, JReq contention, TDMA collection, sleep.

Round shape (virtual time, one cluster):

  T0                |--- WuC broadcast (t_wuc) ---|
  node i            wake listen | mode switch | stagger X_i | MAC procedure
  setup closes when every awake node has delivered its JReq or dropped
  UAV               assignment broadcast, then per-member data slots + ACKs
  node i            final mode switch, deep sleep until the next round

Nodes respond to the wake call desynchronized: X_i is uniform over one mean
service cycle (1/lambda + mean exchange), the stationary phase of a node's
own traffic/transmit renewal process.  Without it every node would sense and
transmit in lockstep, which no asynchronous deployment does and which would
make the no-MAC baseline collide always.

The no-MAC baseline (SCM) transmits blind: each awake node runs its whole
exchange as one uninterrupted burst anchored at its stagger offset, and two
exchanges destroy each other whenever their burst windows overlap.  The burst
window is the full per-node exchange duration t_tr(delta) - the same
vulnerable window the closed-form collision probability uses.  Bursts per
round don't interact otherwise, so they are resolved arithmetically instead
of through the event queue; the sensing schemes run event-driven.

Queues: each node holds at most two pending data batches.  Arrivals between
wake calls refill the queue (one Poisson draw per node per round over the
elapsed wall time).  A node with an empty queue at the wake call stays
asleep.  A served batch leaves the queue; dropped nodes retry next round.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import (MacScheme, PowerTable, ProtocolConfig,
                      derive_power, derive_timing)
from ..engine import EventKind, EventQueue, RandomStreams
from .channel import Channel

CLUSTERED, DROPPED, QUEUE_EMPTY = 0, 1, 2
OUTCOME_NAMES = ("Clustered", "Dropped", "QueueEmpty")

LEDGER_STATES = ("wuc_listen", "mode_switch", "idle", "backoff", "cca",
                 "tx", "rx", "tdma_wait", "sleep")


@dataclass
class RoundTrace:
    index: int
    start: float
    duration: float
    outcome: np.ndarray          # per node: CLUSTERED/DROPPED/QUEUE_EMPTY
    delay: np.ndarray            # WuC end -> ACK (or drop); nan when asleep
    energy: np.ndarray           # joules over the round, all nodes
    ledger: np.ndarray           # (n_nodes, len(LEDGER_STATES)) seconds
    cluster_size: int
    jreq_sent: int
    jreq_collided: int

    def counts(self):
        return (int((self.outcome == CLUSTERED).sum()),
                int((self.outcome == DROPPED).sum()),
                int((self.outcome == QUEUE_EMPTY).sum()))


class _Ledger:
    """Per-node state-duration bookkeeping for one round."""

    __slots__ = ("rows",)

    def __init__(self, n):
        self.rows = np.zeros((n, len(LEDGER_STATES)))

    def add(self, node, state, duration):
        assert duration >= -1e-12, f"negative ledger span for {state}"
        self.rows[node, LEDGER_STATES.index(state)] += max(0.0, duration)

    def energy(self, power: PowerTable, include_tdma_idle: bool) -> np.ndarray:
        watts = np.array([power.wuc_listen, power.mode_switch, power.idle,
                          power.backoff, power.cca, power.tx, power.rx,
                          power.idle if include_tdma_idle else 0.0,
                          power.sleep])
        return self.rows @ watts


def _stagger_width(lam, timing):
    return 1.0 / lam + timing.t_tr_mean


def run_round_mode(config: ProtocolConfig, scheme: MacScheme = None,
                   rounds: int = None, seed: int = None, trace=None):
    """Simulate independent UAV rounds; returns a list of RoundTrace."""
    config.validate()
    scheme = scheme or config.mac.scheme
    rounds = config.sim.rounds if rounds is None else rounds
    seed = config.seed if seed is None else seed
    n = config.traffic.n_nodes
    lam = config.traffic.lam
    timing = derive_timing(config)
    power = derive_power(config)
    streams = RandomStreams(seed, n)

    queue_len = [0] * n
    traces = []
    t0 = 0.0
    last_refill = -config.sim.round_gap   # stationary start: one gap of arrivals
    for index in range(rounds):
        if scheme is MacScheme.SCM:
            tr = _run_scm_round(config, timing, power, streams, queue_len,
                                index, t0, t0 - last_refill, trace)
        else:
            tr = _run_contention_round(config, scheme, timing, power, streams,
                                       queue_len, index, t0, t0 - last_refill,
                                       trace)
        traces.append(tr)
        last_refill = t0
        t0 = t0 + tr.duration + config.sim.round_gap
    return traces


def _refill_and_draws(config, timing, streams, queue_len, elapsed):
    """Per-node round draws in a fixed order: refill, then delta and stagger
    for awake nodes.  Returns (participants, delta, stagger)."""
    n = config.traffic.n_nodes
    lam = config.traffic.lam
    width = _stagger_width(lam, timing)
    participants, delta, stagger = [], {}, {}
    for i in range(n):
        s = streams.node(i)
        arrivals = s.poisson(lam * max(0.0, elapsed))
        queue_len[i] = min(2, queue_len[i] + arrivals)
        if queue_len[i] == 0:
            continue
        participants.append(i)
        delta[i] = s.uniform_int(config.traffic.delta_min,
                                 config.traffic.delta_max)
        stagger[i] = s.uniform(0.0, width)
    return participants, delta, stagger


def _emit(trace, offset, time, actor, kind, detail=""):
    if trace is not None:
        trace.write(f"{offset + time:.9f}\t{actor}\t{kind}\t{detail}\n")


def _run_scm_round(config, timing, power, streams, queue_len, index, t0,
                   elapsed, trace):
    """Blind-transmission baseline: overlap of exchange bursts = collision."""
    t0_abs, t0 = t0, 0.0          # round-local clock avoids precision drift
    n = config.traffic.n_nodes
    participants, delta, stagger = _refill_and_draws(config, timing, streams,
                                                     queue_len, elapsed)
    ledger = _Ledger(n)
    outcome = np.full(n, QUEUE_EMPTY, dtype=np.int8)
    delay = np.full(n, np.nan)
    wuc_end = t0 + timing.t_wuc
    _emit(trace, t0_abs, t0, "uav", EventKind.TX_START, "WuC")
    _emit(trace, t0_abs, wuc_end, "uav", EventKind.TX_END, "WuC")

    # Burst windows: full exchange duration anchored at the MAC start.
    bursts = []
    for i in participants:
        a = wuc_end + timing.t_mst + stagger[i]
        bursts.append((a, a + timing.t_tr(delta[i]), i))
        _emit(trace, t0_abs, a, i, EventKind.TX_START, f"exchange delta={delta[i]}")
    bursts.sort()
    collided = set()
    for k in range(len(bursts)):
        s_k, e_k, i_k = bursts[k]
        for m in range(k + 1, len(bursts)):
            s_m, _, i_m = bursts[m]
            if s_m >= e_k:
                break
            collided.add(i_k)
            collided.add(i_m)

    round_end = wuc_end
    for i in participants:
        a = wuc_end + timing.t_mst + stagger[i]
        seg_jreq = timing.t_jreq
        seg_data = delta[i] * timing.t_t + timing.t_oh
        ack_start = a + seg_jreq + timing.t_tdma + seg_data + timing.t_g
        ack_end = ack_start + timing.t_ack
        sleep_at = ack_end + timing.t_mst
        ledger.add(i, "wuc_listen", timing.t_wuc)
        ledger.add(i, "mode_switch", timing.t_mst)
        ledger.add(i, "idle", stagger[i])
        ledger.add(i, "tx", seg_jreq + seg_data)
        ledger.add(i, "rx", timing.t_tdma)
        ledger.add(i, "idle", timing.t_g)
        ledger.add(i, "mode_switch", timing.t_mst)
        if i in collided:
            # No ACK arrives; the window is spent waiting idle.
            ledger.add(i, "idle", timing.t_ack)
            outcome[i] = DROPPED
            _emit(trace, t0_abs, ack_end, i, EventKind.TIMEOUT, "no ACK, collided")
        else:
            ledger.add(i, "rx", timing.t_ack)
            outcome[i] = CLUSTERED
            queue_len[i] -= 1
            _emit(trace, t0_abs, ack_end, i, EventKind.ACK_DELIVERED, "")
        delay[i] = ack_end - wuc_end
        round_end = max(round_end, sleep_at)
        _emit(trace, t0_abs, sleep_at, i, EventKind.ROUND_END, "sleep")

    for i in range(n):
        total = ledger.rows[i].sum()
        ledger.add(i, "sleep", (round_end - t0) - total)
    return RoundTrace(
        index=index, start=t0_abs, duration=round_end - t0, outcome=outcome,
        delay=delay,
        energy=ledger.energy(power, config.energy.include_tdma_idle),
        ledger=ledger.rows, cluster_size=int((outcome == CLUSTERED).sum()),
        jreq_sent=len(participants), jreq_collided=len(collided))


def _run_contention_round(config, scheme, timing, power, streams, queue_len,
                          index, t0, elapsed, trace):
    """Event-driven setup contention plus serialized data collection."""
    t0_abs, t0 = t0, 0.0          # round-local clock avoids precision drift
    n = config.traffic.n_nodes
    mac = config.mac
    participants, delta, stagger = _refill_and_draws(config, timing, streams,
                                                     queue_len, elapsed)
    ledger = _Ledger(n)
    outcome = np.full(n, QUEUE_EMPTY, dtype=np.int8)
    delay = np.full(n, np.nan)
    wuc_end = t0 + timing.t_wuc
    channel = Channel()
    wuc_tx = channel.begin("uav", t0, timing.t_wuc, label="wuc")
    channel.end(wuc_tx)
    _emit(trace, t0_abs, t0, "uav", EventKind.TX_START, "WuC")
    _emit(trace, t0_abs, wuc_end, "uav", EventKind.TX_END, "WuC")

    queue = EventQueue()
    queue.clock = t0
    attempt = {i: 0 for i in participants}
    jreq_order = []            # (node, delta) in delivery order
    jreq_end_at = {}
    drop_at = {}
    pending = set(participants)
    width = _stagger_width(config.traffic.lam, timing)
    worst_attempt = (mac.cw - 1) * mac.slot_duration + timing.t_cca
    setup_timeout = (timing.t_mst + width
                     + (mac.ma + 1) * worst_attempt + timing.t_jreq) \
        * config.sim.setup_timeout_factor
    queue.schedule(wuc_end + setup_timeout, "uav", EventKind.TIMEOUT)

    def wants_backoff(i):
        return scheme is MacScheme.CSMA_CA or (
            scheme is MacScheme.ADP and attempt[i] + 1 >= mac.adp_threshold)

    def begin_attempt(i, now):
        bo = 0.0
        if wants_backoff(i):
            bo = streams.node_mac(i).uniform_int(0, mac.cw - 1) \
                * mac.slot_duration
            ledger.add(i, "backoff", bo)
        ledger.add(i, "cca", timing.t_cca)
        queue.schedule(now + bo + timing.t_cca, i, EventKind.CCA_COMPLETE)

    for i in participants:
        ledger.add(i, "wuc_listen", timing.t_wuc)
        ledger.add(i, "mode_switch", timing.t_mst)
        ledger.add(i, "idle", stagger[i])
        start = wuc_end + timing.t_mst + stagger[i]
        queue.schedule(start, i, EventKind.MST_DONE)

    active_jreq = {}
    setup_closed_at = None if pending else wuc_end
    while len(queue) and setup_closed_at is None:
        event = queue.pop()
        now, i, kind = event.time, event.actor, event.kind
        if kind == EventKind.MST_DONE:
            begin_attempt(i, now)
        elif kind == EventKind.CCA_COMPLETE:
            if channel.busy_window(now - timing.t_cca, now):
                attempt[i] += 1
                if attempt[i] >= mac.ma + 1:
                    # Exhausted: notify higher layer, switch back, sleep.
                    outcome[i] = DROPPED
                    delay[i] = now - wuc_end
                    drop_at[i] = now
                    ledger.add(i, "mode_switch", timing.t_mst)
                    pending.discard(i)
                    _emit(trace, t0_abs, now, i, EventKind.TIMEOUT,
                          f"dropped after {attempt[i]} busy CCAs")
                else:
                    begin_attempt(i, now)
            else:
                tx = channel.begin(i, now, timing.t_jreq, label="jreq")
                active_jreq[i] = tx
                ledger.add(i, "tx", timing.t_jreq)
                queue.schedule(now + timing.t_jreq, i, EventKind.TX_END)
                _emit(trace, t0_abs, now, i, EventKind.TX_START, "JReq")
        elif kind == EventKind.TX_END:
            tx = active_jreq.pop(i)
            delivered = channel.end(tx)
            jreq_end_at[i] = now
            if delivered:
                jreq_order.append((i, delta[i]))
            else:
                outcome[i] = DROPPED   # collided JReq: no retry this round
            pending.discard(i)
            _emit(trace, t0_abs, now, i, EventKind.TX_END,
                  "JReq" + ("" if delivered else " collided"))
        elif kind == EventKind.TIMEOUT:
            for straggler in sorted(pending):   # guard, normally empty
                outcome[straggler] = DROPPED
                delay[straggler] = now - wuc_end
                drop_at[straggler] = now
                ledger.add(straggler, "mode_switch", timing.t_mst)
            pending.clear()
        if not pending:
            setup_closed_at = queue.clock

    t_close = setup_closed_at if setup_closed_at is not None else wuc_end
    round_end = wuc_end

    if jreq_order:
        tdma_end = t_close + timing.t_tdma
        tx = channel.begin("uav", t_close, timing.t_tdma, label="tdma")
        channel.end(tx)
        _emit(trace, t0_abs, t_close, "uav", EventKind.TDMA_ASSIGNED,
              f"{len(jreq_order)} members")
        cursor = tdma_end
        for i, d in jreq_order:
            ledger.add(i, "tdma_wait", t_close - jreq_end_at[i])
            ledger.add(i, "rx", timing.t_tdma)
            ledger.add(i, "tdma_wait", cursor - tdma_end)
            data_len = d * timing.t_t + timing.t_oh
            tx = channel.begin(i, cursor, data_len, label="data")
            channel.end(tx)
            _emit(trace, t0_abs, cursor, i, EventKind.SLOT_START, f"{d} frames")
            cursor += data_len
            ledger.add(i, "tx", data_len)
            ledger.add(i, "idle", timing.t_g)
            cursor += timing.t_g
            ack = channel.begin("uav", cursor, timing.t_ack, label="ack")
            channel.end(ack)
            cursor += timing.t_ack
            ledger.add(i, "rx", timing.t_ack)
            ledger.add(i, "mode_switch", timing.t_mst)
            outcome[i] = CLUSTERED
            delay[i] = cursor - wuc_end
            queue_len[i] -= 1
            _emit(trace, t0_abs, cursor, i, EventKind.ACK_DELIVERED, "")
            round_end = max(round_end, cursor + timing.t_mst)

    # Nodes that sent a JReq but were not scheduled wait out the assignment
    # broadcast, then give up and sleep.
    for i in participants:
        if outcome[i] == DROPPED and i in jreq_end_at and i not in drop_at:
            waited_until = (t_close + timing.t_tdma) if jreq_order else t_close
            ledger.add(i, "tdma_wait", waited_until - jreq_end_at[i])
            ledger.add(i, "mode_switch", timing.t_mst)
            delay[i] = waited_until - wuc_end
            round_end = max(round_end, waited_until + timing.t_mst)
        elif i in drop_at:
            round_end = max(round_end, drop_at[i] + timing.t_mst)

    for i in range(n):
        total = ledger.rows[i].sum()
        ledger.add(i, "sleep", (round_end - t0) - total)

    collided = sum(1 for i in participants
                   if outcome[i] == DROPPED and i in jreq_end_at
                   and i not in drop_at)
    return RoundTrace(
        index=index, start=t0_abs, duration=round_end - t0, outcome=outcome,
        delay=delay,
        energy=ledger.energy(power, config.energy.include_tdma_idle),
        ledger=ledger.rows, cluster_size=len(jreq_order),
        jreq_sent=len([i for i in participants if i in jreq_end_at]),
        jreq_collided=collided)
