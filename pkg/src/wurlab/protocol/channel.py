"""Single shared medium: occupancy queries and overlap-collision marking.

Intervals are half-open [start, end): a transmission ending exactly where a
sensing window starts leaves the window idle, and two transmissions sharing
only an endpoint do not collide.  The channel is error-free; temporal overlap
is the only way a transmission is destroyed.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ChannelError(RuntimeError):
    """Protocol-bug fault: impossible channel usage (e.g. double start)."""


@dataclass
class Transmission:
    node: object
    start: float
    end: float
    collided: bool = False
    label: str = ""

    def overlaps(self, start: float, end: float) -> bool:
        return self.start < end and self.end > start


@dataclass
class Channel:
    transmissions: list = field(default_factory=list)
    _active: list = field(default_factory=list)
    max_end: float = float("-inf")     # latest end among begun transmissions
    busy_time: float = 0.0             # union length of all occupancy
    _cover_end: float = float("-inf")

    def begin(self, node, start: float, duration: float, label: str = "") -> Transmission:
        """Start an occupancy burst; marks collisions against ongoing bursts."""
        if duration < 0:
            raise ChannelError("negative transmission duration")
        end = start + duration
        self._active = [t for t in self._active if t.end > start]
        for other in self._active:
            if other.node == node:
                raise ChannelError(f"node {node} already transmitting")
        tx = Transmission(node=node, start=start, end=end, label=label)
        for other in self._active:
            if other.overlaps(start, end):
                other.collided = True
                tx.collided = True
        self._active.append(tx)
        self.transmissions.append(tx)
        # Union accounting: begins arrive in nondecreasing start order.
        self.busy_time += max(0.0, end - max(start, self._cover_end))
        self._cover_end = max(self._cover_end, end)
        self.max_end = max(self.max_end, end)
        return tx

    def end(self, tx: Transmission) -> bool:
        """Finish a burst; True when it was delivered (never overlapped)."""
        self._active = [t for t in self._active if t is not tx and t.end > tx.end]
        return not tx.collided

    def busy_window(self, start: float, end: float) -> bool:
        """Whether any begun transmission overlaps [start, end).

        Callers evaluate sensing verdicts at the window's end instant, so
        every transmission that could overlap has already begun; one scalar
        comparison suffices.
        """
        return self.max_end > start

    def sense(self, start: float, duration: float) -> bool:
        """Post-hoc sensing query over [start, start+duration): True when
        busy.  Pure read: the window never occupies the medium.  Unlike
        busy_window this scans, so it is correct at any point of the run."""
        end = start + duration
        return any(t.overlaps(start, end) for t in self.transmissions)

    def occupancy_intervals(self) -> list:
        """Merged, disjoint busy intervals for post-hoc accounting."""
        spans = sorted((t.start, t.end) for t in self.transmissions)
        merged = []
        for start, end in spans:
            if merged and start <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], end)
            else:
                merged.append([start, end])
        return [(s, e) for s, e in merged]

    def delivered(self) -> list:
        return [t for t in self.transmissions if not t.collided]
