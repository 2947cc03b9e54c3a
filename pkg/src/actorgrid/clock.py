"""Virtual time.

All timing in the system derives from a :class:`VirtualClock` counting ticks,
where one tick is one simulated nanosecond. Wall time is never consulted, so
two runs with the same schedule see identical timestamps everywhere.
"""

from __future__ import annotations

from .errors import ClockRegression

# One tick = one simulated nanosecond.
TICK = 1
MICROSECOND = 1_000
MILLISECOND = 1_000_000
SECOND = 1_000_000_000
MINUTE = 60 * SECOND
HOUR = 3_600 * SECOND
DAY = 24 * HOUR


class VirtualClock:
    """Monotonically nondecreasing virtual clock in ticks."""

    __slots__ = ("_now",)

    def __init__(self, start: int = 0):
        self._now = int(start)

    @property
    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> int:
        if t < self._now:
            raise ClockRegression(f"cannot move clock back from {self._now} to {t}")
        self._now = int(t)
        return self._now

    def __repr__(self) -> str:
        return f"VirtualClock(now={self._now})"
