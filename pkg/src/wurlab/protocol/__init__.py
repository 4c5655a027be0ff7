"""Protocol behaviour: shared channel, queue-mode and round-mode simulators."""

from .channel import Channel, ChannelError, Transmission
from .queue_sim import QueueLog, run_queue_mode
from .round_sim import (CLUSTERED, DROPPED, LEDGER_STATES, OUTCOME_NAMES,
                        QUEUE_EMPTY, RoundTrace, run_round_mode)

__all__ = [
    "Channel", "ChannelError", "Transmission",
    "QueueLog", "run_queue_mode",
    "RoundTrace", "run_round_mode",
    "CLUSTERED", "DROPPED", "QUEUE_EMPTY", "OUTCOME_NAMES", "LEDGER_STATES",
]
