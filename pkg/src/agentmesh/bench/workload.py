"""Calibrated engine workloads with an analytic correctness oracle.

A workload is a transitive-closure rule base over an N-node chain. Its
running time scales with N; its final fact count is exactly N(N-1)/2,
so every timed run double-checks the engine. make_workload() picks N by
measuring short runs on this host until the duration lands within half
of the requested target, which is plenty for a latency contrast.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

from ..rulekit import Engine

WORKLOAD_TARGETS_MS = (200, 800, 1500, 2500)

_MIN_TARGET_MS = 50
_MAX_TARGET_MS = 10000
_MAX_NODES = 2000


class BenchError(Exception):
    pass


@dataclass(frozen=True)
class Workload:
    source: str
    nodes: int
    expected_facts: int     # closure size N(N-1)/2
    target_ms: float
    measured_ms: float


def chain_source(n: int) -> str:
    lines = [
        "(deftemplate edge (slot a) (slot b))",
        "(defrule close-chain"
        "  (edge (a ?x) (b ?y)) (edge (a ?y) (b ?z))"
        "  => (assert (edge (a ?x) (b ?z))))",
    ]
    lines.extend(f"(assert (edge (a {i}) (b {i + 1})))" for i in range(1, n))
    return "\n".join(lines)


def build_workload(n: int, target_ms: float = 0.0,
                   measured_ms: float = 0.0) -> Workload:
    return Workload(chain_source(n), n, n * (n - 1) // 2,
                    target_ms, measured_ms)


def measure_workload(w: Workload) -> float:
    """Wall time of one run on a fresh engine, in ms; verifies the oracle."""
    engine = Engine()
    engine.load_source(w.source)
    start = time.perf_counter()
    engine.run()
    elapsed = (time.perf_counter() - start) * 1000
    if engine.fact_count() != w.expected_facts:
        raise BenchError(
            f"closure count {engine.fact_count()} != {w.expected_facts} "
            f"for N={w.nodes}")
    return elapsed


def make_workload(target_ms: float, seed: int = 24) -> Workload:
    if not _MIN_TARGET_MS <= target_ms <= _MAX_TARGET_MS:
        raise BenchError(f"target {target_ms} ms outside "
                         f"[{_MIN_TARGET_MS}, {_MAX_TARGET_MS}]")
    n = max(4, min(seed, _MAX_NODES))
    for _ in range(10):
        w = build_workload(n, target_ms)
        elapsed = measure_workload(w)
        if target_ms * 0.5 <= elapsed <= target_ms * 1.5:
            return replace(w, measured_ms=elapsed)
        # assertion work grows roughly cubically in chain length
        scaled = int(n * (target_ms / max(elapsed, 0.1)) ** (1 / 3))
        scaled = max(4, min(scaled, _MAX_NODES))
        n = scaled if scaled != n else (n + 1 if elapsed < target_ms else n - 1)
        if n < 4 or (n == _MAX_NODES and elapsed < target_ms * 0.5):
            break
    raise BenchError(f"cannot calibrate a {target_ms} ms workload "
                     f"(last N={n}, {elapsed:.0f} ms)")


def standard_workloads() -> list[Workload]:
    """The four reference workloads, calibrated from one shared probe."""
    probe_n = 40
    probe_ms = measure_workload(build_workload(probe_n))
    out = []
    for target in WORKLOAD_TARGETS_MS:
        seed = int(probe_n * (target / max(probe_ms, 0.1)) ** (1 / 3))
        out.append(make_workload(target, seed=seed))
    return out
