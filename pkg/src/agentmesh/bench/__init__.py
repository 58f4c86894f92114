"""Latency-validation benchmark: schedule, workloads, experiment driver."""

from .driver import (LatencyReport, MODES, REPLY_TIMEOUT, Row, run_experiment)
from .schedule import (MESSAGE_COUNT, SOLVER_POSITIONS, SPACING_MS,
                       ScheduleEntry, build_default_schedule)
from .workload import (BenchError, WORKLOAD_TARGETS_MS, Workload,
                       build_workload, chain_source, make_workload,
                       measure_workload, standard_workloads)

__all__ = [
    "BenchError", "LatencyReport", "MESSAGE_COUNT", "MODES",
    "REPLY_TIMEOUT", "Row", "SOLVER_POSITIONS", "SPACING_MS",
    "ScheduleEntry", "WORKLOAD_TARGETS_MS", "Workload",
    "build_default_schedule", "build_workload", "chain_source",
    "make_workload", "measure_workload", "run_experiment",
    "standard_workloads",
]
