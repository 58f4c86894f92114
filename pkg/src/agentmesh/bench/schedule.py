"""The 40-message experiment schedule.

Four presence pings, a solver job, nine more pings, and so on: solver
jobs sit at positions 5, 15, 25 and 35, everything else is a ping, one
message every 250 ms, 9.75 s from first to last send.
"""

from __future__ import annotations

from dataclasses import dataclass

SPACING_MS = 250
SOLVER_POSITIONS = (5, 15, 25, 35)
MESSAGE_COUNT = 40


@dataclass(frozen=True)
class ScheduleEntry:
    index: int        # 1-based position
    mtype: str        # "p" ping | "S" solver job
    offset_ms: int    # send time relative to experiment start


def build_default_schedule() -> list[ScheduleEntry]:
    return [ScheduleEntry(i, "S" if i in SOLVER_POSITIONS else "p",
                          (i - 1) * SPACING_MS)
            for i in range(1, MESSAGE_COUNT + 1)]
