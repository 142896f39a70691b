"""Task-sampling schedules: task-by-task, alternating, uniform, weighted, accumulated."""

from .plan import (
    BASELINE_TASK_ORDER,
    SCHEDULE_KINDS,
    ScheduleError,
    SchedulePlan,
    ScheduleStats,
    build,
    dump_lines,
    normalize_kind,
    parse_dump_counts,
    stats,
    truncate,
)

__all__ = [
    "BASELINE_TASK_ORDER",
    "SCHEDULE_KINDS",
    "ScheduleError",
    "SchedulePlan",
    "ScheduleStats",
    "build",
    "dump_lines",
    "normalize_kind",
    "parse_dump_counts",
    "stats",
    "truncate",
]
