"""Latency experiment: fire the schedule at a target, time every reply.

Sends fire at their schedule offsets no matter what is still
outstanding; a collector thread stamps replies as they land and pairs
them to requests by in-reply-to. Solver jobs run the calibrated
workloads in order; the next workload is staged (clear + build) right
behind each solver job in the target's FIFO queue, so staging never
delays a timed message.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field

from ..acl.model import (AgentId, CONTENT_ACTION, EngineCommand, Message,
                         ONTOLOGY_ACTIONS, ONTOLOGY_BENCH, ONTOLOGY_PRESENCE,
                         fresh_id, render_engine_action)
from ..runtime.agent import Agent, REPLY_PERFORMATIVES
from ..runtime.behaviour import behaviour_handler
from ..runtime.mailbox import MessageTemplate
from .schedule import ScheduleEntry, build_default_schedule
from .workload import Workload, standard_workloads

log = logging.getLogger("agentmesh.bench")

MODES = ("nonblocking", "blocking")
REPLY_TIMEOUT = 30.0


@dataclass
class Row:
    index: int
    mtype: str
    send_ms: float
    recv_ms: float | None = None
    delay_ms: float | None = None
    detail: str = ""

    def csv(self) -> str:
        recv = f"{self.recv_ms:.1f}" if self.recv_ms is not None else ""
        delay = f"{self.delay_ms:.1f}" if self.delay_ms is not None else ""
        return f"{self.index},{self.mtype},{self.send_ms:.1f},{recv},{delay}"


@dataclass
class LatencyReport:
    mode: str
    rows: list[Row] = field(default_factory=list)

    def delays(self, mtype: str) -> list[float]:
        return [r.delay_ms for r in self.rows
                if r.mtype == mtype and r.delay_ms is not None]

    @property
    def timeouts(self) -> int:
        return sum(1 for r in self.rows if r.delay_ms is None)

    def to_csv(self) -> str:
        lines = ["index,type,send_ms,recv_ms,delay_ms"]
        lines.extend(r.csv() for r in self.rows)
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        def stats(vals):
            if not vals:
                return "max - mean -"
            return (f"max {max(vals):.1f} ms "
                    f"mean {sum(vals) / len(vals):.1f} ms")
        p, s = self.delays("p"), self.delays("S")
        return (f"mode {self.mode}  p {stats(p)}  S {stats(s)}  "
                f"timeouts {self.timeouts}")


class _Collector:
    """Stamps replies against outstanding reply-with ids."""

    def __init__(self, agent: Agent):
        self.agent = agent
        self.stamps: dict[str, tuple[float, Message]] = {}
        self._expect: set[str] = set()
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True,
                                        name=f"bench-collect:{agent.name}")

    def expect(self, reply_with: str):
        with self._lock:
            self._expect.add(reply_with)

    def start(self):
        self._thread.start()

    def stop(self):
        self._stop.set()
        self._thread.join(timeout=5.0)

    def _run(self):
        template = MessageTemplate(performative=REPLY_PERFORMATIVES)
        while not self._stop.is_set():
            msg = self.agent.mailbox.receive(template, timeout=0.2)
            if msg is None:
                continue
            now = time.perf_counter()
            with self._lock:
                key = msg.in_reply_to
                if key not in self._expect:
                    log.debug("unmatched reply %s from %s",
                              msg.performative, msg.sender)
                    continue
                self._expect.discard(key)    # first reply wins
                self.stamps[key] = (now, msg)


def run_experiment(agent: Agent, target: AgentId,
                   workloads: list[Workload] | None = None,
                   mode: str = "nonblocking",
                   schedule: list[ScheduleEntry] | None = None,
                   timeout: float = REPLY_TIMEOUT) -> LatencyReport:
    """Run the schedule from `agent` against `target`.

    The caller is responsible for the target actually being in the
    named mode; this function only labels the report.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    schedule = schedule if schedule is not None else build_default_schedule()
    workloads = workloads if workloads is not None else standard_workloads()
    solver_count = sum(1 for e in schedule if e.mtype == "S")
    if len(workloads) < solver_count:
        raise ValueError(f"{solver_count} solver slots but only "
                         f"{len(workloads)} workloads")

    collector = _Collector(agent)
    collector.start()
    try:
        _stage(agent, target, collector, workloads[0])
        report = LatencyReport(mode)
        sent: dict[str, Row] = {}
        start = time.perf_counter()
        solver_i = 0
        for entry in schedule:
            _sleep_until(start, entry.offset_ms)
            reply_with = fresh_id()
            if entry.mtype == "p":
                msg = Message(
                    performative="REQUEST", sender=agent.id,
                    receivers=(target,), content="ping",
                    conversation_id=fresh_id("c"), reply_with=reply_with,
                    ontology=ONTOLOGY_PRESENCE)
            else:
                msg = Message(
                    performative="REQUEST", sender=agent.id,
                    receivers=(target,),
                    content=render_engine_action(
                        EngineCommand("RUN_INFINITY", ())),
                    conversation_id=fresh_id("c"), reply_with=reply_with,
                    ontology=ONTOLOGY_ACTIONS,
                    content_type=CONTENT_ACTION)
            collector.expect(reply_with)
            agent.send(msg)
            row = Row(entry.index, entry.mtype,
                      (time.perf_counter() - start) * 1000)
            sent[reply_with] = row
            report.rows.append(row)
            if entry.mtype == "S":
                solver_i += 1
                if solver_i < len(workloads):
                    # queue the next build behind the running job
                    _stage(agent, target, collector, workloads[solver_i],
                           wait=False)
        _await_replies(collector, sent, start, timeout)
    finally:
        collector.stop()
    return report


def _sleep_until(start: float, offset_ms: float):
    while True:
        remaining = offset_ms / 1000 - (time.perf_counter() - start)
        if remaining <= 0:
            return
        time.sleep(min(remaining, 0.05))


def _stage(agent: Agent, target: AgentId, collector: _Collector,
           workload: Workload, wait: bool = True):
    """Clear the target engine and install the workload rule base."""
    ids = []
    for code, params in (("MAKE_CLEAR", ()),
                         ("MAKE_BUILD", (workload.source,))):
        reply_with = fresh_id()
        collector.expect(reply_with)
        ids.append(reply_with)
        agent.send(Message(
            performative="REQUEST", sender=agent.id, receivers=(target,),
            content=render_engine_action(EngineCommand(code, params)),
            conversation_id=fresh_id("c"), reply_with=reply_with,
            ontology=ONTOLOGY_ACTIONS,
            content_type=CONTENT_ACTION))
    if not wait:
        return
    deadline = time.monotonic() + REPLY_TIMEOUT
    while time.monotonic() < deadline:
        with collector._lock:
            done = [collector.stamps.get(i) for i in ids]
        if all(d is not None for d in done):
            for _, msg in done:
                if msg.performative != "INFORM":
                    raise RuntimeError(f"staging failed: {msg.content}")
            return
        time.sleep(0.02)
    raise RuntimeError("staging timed out")


def _await_replies(collector: _Collector, sent: dict[str, Row],
                   start: float, timeout: float):
    last_send = max(r.send_ms for r in sent.values()) if sent else 0.0
    deadline = start + (last_send / 1000) + timeout
    while time.perf_counter() < deadline:
        with collector._lock:
            missing = [k for k in sent if k not in collector.stamps]
        if not missing:
            break
        time.sleep(0.05)
    for key, row in sent.items():
        stamp = collector.stamps.get(key)
        if stamp is None:
            log.warning("message %d (%s) timed out", row.index, row.mtype)
            continue
        recv, msg = stamp
        row.recv_ms = (recv - start) * 1000
        row.delay_ms = row.recv_ms - row.send_ms
        row.detail = msg.content.splitlines()[-1] if msg.content else ""


# ---------------------------------------------------------------------------
# manifest-driven analyzer

@behaviour_handler("analyzer-driver")
def _analyzer_driver(agent: Agent, inst):
    """One-shot: run the experiment in a side thread, file the report.

    Params: target=<agent name> (required), mode=nonblocking|blocking,
    out=<csv path, resource-relative>, report-to=<agent name>.
    """
    target_name = inst.spec.param("target")
    if not target_name:
        log.error("%s: analyzer-driver needs target=<name>", agent.name)
        return
    mode = inst.spec.param("mode") or "nonblocking"
    out = inst.spec.param("out")
    report_to = inst.spec.param("report-to")
    target = AgentId(target_name, *agent.node.platform_endpoint)

    def work():
        try:
            report = run_experiment(agent, target, mode=mode)
        except Exception:
            log.exception("%s: experiment against %s failed",
                          agent.name, target_name)
            return
        log.info("%s: %s", agent.name, report.summary())
        if out:
            import os
            path = out if os.path.isabs(out) else os.path.join(
                agent.node.resources_dir or ".", out)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(report.to_csv())
        if report_to:
            agent.send(Message(
                performative="INFORM", sender=agent.id,
                receivers=(AgentId(report_to,
                                   *agent.node.platform_endpoint),),
                content=report.summary() + "\n" + report.to_csv(),
                conversation_id=fresh_id("bench"),
                ontology=ONTOLOGY_BENCH))

    threading.Thread(target=work, daemon=True,
                     name=f"bench:{agent.name}").start()
