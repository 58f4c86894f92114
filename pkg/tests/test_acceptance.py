"""Acceptance gate: eight release criteria, one pass/fail line each.

Each criterion is one test; `pytest -v tests/test_acceptance.py` prints
exactly one PASSED/FAILED line per criterion. The checks re-drive the
oracle machinery from the unit modules (fixpoint saturation, the
plain-code alert scan, hand-assembled captures, the codec fuzzer) at
the counts and tolerances the release gate fixes, plus the live
latency-contrast experiment that motivates the whole architecture.
"""

import inspect
import os
import random
import threading
import time

import pytest

import test_acl
import test_bridge
import test_nids
import test_rulekit

from agentmesh.acl.model import (ACTION_ARITY, AgentId, NotUnderstood,
                                 ONTOLOGY_TICKETS, parse_engine_action)
from agentmesh.bench.driver import run_experiment
from agentmesh.bench.workload import standard_workloads
from agentmesh.bridge import attach_engine
from agentmesh.nids import synth
from agentmesh.nids.board import TicketBoard, parse_row_line
from agentmesh.nids.oracle import scan_alerts
from agentmesh.nids.pcap import read_pcap
from agentmesh.rulekit import Engine
from agentmesh.runtime.agent import LifecycleError
from agentmesh.runtime.node import Node

from conftest import BOARD_05, PRESENCE_01
from test_runtime import LADDER


def _report(n, label, detail=""):
    print(f"ACCEPTANCE {n} {label}: PASS" + (f" ({detail})" if detail else ""))


# ---------------------------------------------------------------------------
# 1. pings glide past a busy engine; an in-thread engine stalls them

NONBLOCKING_BOUND_MS = 100
BLOCKING_FLOOR_MS = 1000

FLUID_05 = "behaviour cyclic worker handler=engine-worker level=5\n"
STUCK_05 = ("behaviour cyclic worker handler=engine-worker mode=inline "
            "level=5\n")


def test_acceptance_01_nonblocking_integration(platform, manifest_factory):
    platform.spawn_agent(
        "fluid", manifest_factory({1: PRESENCE_01, 5: FLUID_05}), level=5)
    platform.spawn_agent(
        "stuck", manifest_factory({1: PRESENCE_01, 5: STUCK_05}), level=5)
    probe = platform.spawn_agent("probe", manifest_factory({}), level=0)

    workloads = standard_workloads()
    assert [w.target_ms for w in workloads] == [200, 800, 1500, 2500]
    for w in workloads:
        assert 0.5 * w.target_ms <= w.measured_ms <= 1.5 * w.target_ms

    fluid = run_experiment(probe, AgentId("fluid", *platform.endpoint),
                           workloads=workloads, mode="nonblocking")
    stuck = run_experiment(probe, AgentId("stuck", *platform.endpoint),
                           workloads=workloads, mode="blocking")

    for report in (fluid, stuck):
        assert len(report.rows) == 40
        assert report.timeouts == 0
        solver = [r for r in report.rows if r.mtype == "S"]
        assert len(solver) == 4
        assert all("rules fired" in r.detail for r in solver)

    worst_fluid = max(fluid.delays("p"))
    worst_stuck = max(stuck.delays("p"))
    assert all(d < NONBLOCKING_BOUND_MS for d in fluid.delays("p")), \
        f"nonblocking ping delays reached {worst_fluid:.1f} ms"
    assert worst_stuck > BLOCKING_FLOOR_MS, \
        f"blocking mode never stalled a ping past {BLOCKING_FLOOR_MS} ms"
    assert worst_fluid < worst_stuck
    _report(1, "nonblocking integration",
            f"p max {worst_fluid:.1f} ms vs {worst_stuck:.1f} ms blocking")


# ---------------------------------------------------------------------------
# 2. engine correctness against independent oracles

def test_acceptance_02_engine_correctness():
    start = time.perf_counter()
    assert len(test_rulekit.FIXPOINT_BASES) >= 3
    for base in range(len(test_rulekit.FIXPOINT_BASES)):
        for strategy in ("depth", "breadth"):
            test_rulekit.test_fixpoint_equivalence(base, strategy)
    # 240 random programs, agenda checked against brute recomputation
    test_rulekit.test_agenda_coherence_no_firing()
    test_rulekit.test_agenda_coherence_with_firing()
    test_rulekit.test_refraction_without_reassert()
    test_rulekit.test_duplicate_fact_suppressed()
    for n in (5, 20, 50):
        for strategy in ("depth", "breadth"):
            test_rulekit.test_transitive_closure_count(n, strategy)
    elapsed = time.perf_counter() - start
    assert elapsed < 30, f"engine suite took {elapsed:.1f} s"
    _report(2, "engine correctness", f"{elapsed:.1f} s")


# ---------------------------------------------------------------------------
# 3. the full command vocabulary, golden behaviour and arity rejection

def test_acceptance_03_command_vocabulary(tmp_path):
    start = time.perf_counter()
    goldens = [fn for name, fn in vars(test_bridge).items()
               if name.startswith("test_dispatch_")]
    covered = {fn.__name__.removeprefix("test_dispatch_").upper()
               for fn in goldens}
    assert covered == set(ACTION_ARITY), \
        f"golden coverage mismatch: {covered ^ set(ACTION_ARITY)}"
    assert len(goldens) == 23

    for i, fn in enumerate(sorted(goldens, key=lambda f: f.__name__)):
        work = tmp_path / f"g{i}"
        res = work / "res"
        res.mkdir(parents=True)
        agent = test_bridge.StubAgent(Node("stub-node",
                                           resources_dir=str(res)))
        worker = attach_engine(agent, Engine())
        try:
            if "tmp_path" in inspect.signature(fn).parameters:
                fn((agent, worker), work)
            else:
                fn((agent, worker))
        finally:
            worker.close()

    # every code rejects surplus parameters before touching the engine
    for code, arity in ACTION_ARITY.items():
        with pytest.raises(NotUnderstood, match="parameter"):
            parse_engine_action("\n".join([code] + ["x"] * (arity + 1)))

    elapsed = time.perf_counter() - start
    assert elapsed < 10, f"vocabulary suite took {elapsed:.1f} s"
    _report(3, "command vocabulary", f"23 goldens, {elapsed:.1f} s")


# ---------------------------------------------------------------------------
# 4. ticket grants stay exclusive under concurrent claimants

CLAIMANTS = 3
TICKETS = 100


def test_acceptance_04_ticket_state_machine(platform, manifest_factory):
    platform.spawn_agent("board", manifest_factory({5: BOARD_05}), level=5)
    claimants = [platform.spawn_agent(f"c{i}", manifest_factory({}), level=0)
                 for i in range(CLAIMANTS)]
    board_id = AgentId("board", *platform.endpoint)

    start = time.perf_counter()
    seeded = []
    for i in range(TICKETS):
        reply = claimants[0].request(
            board_id, f"announce /d/{i:03d}.facts seeder lab UDP",
            ontology=ONTOLOGY_TICKETS, timeout=10.0)
        assert reply.performative == "AGREE"
        seeded.append(reply.content.split()[1])

    grants: dict[str, str] = {}
    anomalies: list[str] = []
    lock = threading.Lock()

    def claim(agent, seed):
        rng = random.Random(seed)
        deadline = time.monotonic() + 15
        while time.monotonic() < deadline:
            with lock:
                if len(grants) == TICKETS:
                    return
            reply = agent.request(board_id, f"checkout {agent.name} *",
                                  ontology=ONTOLOGY_TICKETS, timeout=10.0)
            if reply is None or reply.performative != "INFORM":
                anomalies.append(f"checkout -> {reply and reply.performative}")
                return
            if reply.content.strip() == "none":
                time.sleep(0.005)
                continue
            row = parse_row_line(reply.content.split(" ", 1)[1])
            with lock:
                if row.tid in grants:
                    anomalies.append(f"double grant of {row.tid}")
                grants[row.tid] = agent.name
            time.sleep(rng.random() * 0.002)
            reply = agent.request(
                board_id,
                f"report {row.tid} {row.tidreply} finished Efficacy acc",
                ontology=ONTOLOGY_TICKETS, timeout=10.0)
            if reply is None or reply.performative != "AGREE":
                anomalies.append(
                    f"report {row.tid} -> {reply and reply.performative}")

    threads = [threading.Thread(target=claim, args=(a, i))
               for i, a in enumerate(claimants)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=30)

    assert anomalies == []
    assert sorted(grants) == sorted(seeded)
    listing = claimants[0].request(board_id, "list",
                                   ontology=ONTOLOGY_TICKETS, timeout=10.0)
    live_rows = listing.content.splitlines()
    assert len(live_rows) == TICKETS
    assert all(row.split()[6:8] == ["closed", "finished"]
               for row in live_rows)

    # the journal alone reproduces the final table
    replayed = TicketBoard(os.path.join(platform.resources_dir,
                                        "board.journal"))
    assert [t.line() for t in replayed.tickets()] == live_rows
    replayed.close()

    elapsed = time.perf_counter() - start
    assert elapsed < 20, f"ticket suite took {elapsed:.1f} s"
    _report(4, "ticket state machine",
            f"{TICKETS} tickets, {CLAIMANTS} claimants, {elapsed:.1f} s")


# ---------------------------------------------------------------------------
# 5. detection pipeline end to end, verdicts equal to the plain scan

def test_acceptance_05_nids_end_to_end(platform, manifest_factory):
    start = time.perf_counter()
    res = platform.resources_dir
    fixtures = {
        "a-flood.pcap": synth.build_pcap(synth.flood_frames(count=110)),
        "b-benign.pcap": synth.build_pcap(synth.benign_frames()),
    }
    for name, blob in fixtures.items():
        with open(os.path.join(res, name), "wb") as fh:
            fh.write(blob)

    board_agent = platform.spawn_agent(
        "board", manifest_factory({5: BOARD_05}), level=5)
    platform.spawn_agent("wd", manifest_factory({5: test_nids.WATCHDOG_05}),
                         level=5)
    platform.spawn_agent("x1", manifest_factory({5: test_nids.EXPERT_05}),
                         level=5)

    deadline = time.monotonic() + 60
    while time.monotonic() < deadline and not hasattr(board_agent, "board"):
        time.sleep(0.05)
    board_agent.board.announce("/nonexistent/gone.facts", "acc", "lab", "UDP")

    want = {"a-flood.pcap.facts": "ALERT !", "b-benign.pcap.facts": "finished",
            "gone.facts": "aborted"}
    while time.monotonic() < deadline:
        done = {os.path.basename(t.datastore): t.stateuntil
                for t in board_agent.board.tickets()
                if t.stateuntil in ("finished", "aborted", "ALERT !")}
        if len(done) == len(want):
            break
        time.sleep(0.1)
    assert done == want, f"pipeline stalled at {done}"

    for name in fixtures:
        records = read_pcap(os.path.join(res, name))
        alerts, _ = test_nids.engine_alerts(records)
        assert alerts == scan_alerts(records)

    elapsed = time.perf_counter() - start
    assert elapsed < 15, f"pipeline took {elapsed:.1f} s"
    _report(5, "detection pipeline", f"{elapsed:.1f} s")


# ---------------------------------------------------------------------------
# 6. capture decoding, byte order and robustness

def test_acceptance_06_pcap_parsing():
    start = time.perf_counter()
    for order in ("<", ">"):
        test_nids.test_hand_assembled_capture_decodes_field_exact(order)
    test_nids.test_byte_orders_decode_identically()
    test_nids.test_mutation_fuzz_decodes_or_raises_pcap_error()
    elapsed = time.perf_counter() - start
    assert elapsed < 30, f"pcap suite took {elapsed:.1f} s"
    _report(6, "capture decoding", f"10k mutations, {elapsed:.1f} s")


# ---------------------------------------------------------------------------
# 7. the runlevel ladder on a live node

def test_acceptance_07_runlevels(platform, manifest_factory):
    start = time.perf_counter()
    agent = platform.spawn_agent("x", manifest_factory(LADDER), level=0)
    assert agent.behaviours == []

    agent.set_runlevel(1)
    assert [b.spec.name for b in agent.behaviours] == ["presence"]
    assert agent.active_instances() == []       # staged, not yet active
    agent.set_runlevel(3)
    assert [b.spec.name for b in agent.active_instances()] == ["presence"]
    agent.set_runlevel(5)
    assert agent.runlevel == 5
    # init is one-shot and may already have run and been retired
    assert {"presence", "worker"} <= {b.spec.name for b in agent.behaviours}

    for bogus in (2, 4):
        with pytest.raises(LifecycleError, match="no such runlevel"):
            agent.set_runlevel(bogus)

    agent.set_runlevel(6)                       # hot reboot
    assert agent.runlevel == 0
    assert agent.behaviours == []
    entry = platform.directory.resolve("x")     # still registered, at 0
    assert entry is not None and entry.level == 0

    agent.set_runlevel(1)                       # the ladder works again
    assert [b.spec.name for b in agent.behaviours] == ["presence"]

    elapsed = time.perf_counter() - start
    assert elapsed < 5, f"runlevel suite took {elapsed:.1f} s"
    _report(7, "runlevel ladder", f"{elapsed:.1f} s")


# ---------------------------------------------------------------------------
# 8. wire codec: fuzzed round trips and the fact-batch size band

def test_acceptance_08_codec():
    start = time.perf_counter()
    test_acl.test_codec_fuzz_round_trip_10k()
    test_acl.test_fact_batch_size_band()
    elapsed = time.perf_counter() - start
    assert elapsed < 10, f"codec suite took {elapsed:.1f} s"
    _report(8, "wire codec", f"10k round trips, {elapsed:.1f} s")
