"""Engine-worker dispatch: one golden per action code, plus the edges.

Every case drives the real parse -> dispatch -> notification path via
EngineWorker.execute and checks the reply performative and body (status
line first, output after). The worker talks to a stub agent that records
outgoing mail instead of routing it; two end-of-file tests repeat the
trip over a live node to prove the behaviour wiring.
"""

import dataclasses
import queue

import pytest

from agentmesh.acl.model import (AgentId, CONTENT_ACTION, EngineCommand,
                                 Message, ONTOLOGY_ACTIONS,
                                 render_engine_action)
from agentmesh.bridge import (QUEUE_LIMIT, BridgeError, EngineWorker,
                              attach_engine, submit_remote, sync_shell)
from agentmesh.rulekit import Engine
from agentmesh.runtime.node import Node

from conftest import write_manifests

SOURCE = """\
(deftemplate item (slot n) (slot tag))
(deftemplate seen (slot n))
(defrule note
  (item (n ?v))
  =>
  (assert (seen (n ?v))))
(deffacts base
  (item (n 1) (tag a))
  (item (n 2) (tag b)))
"""
# 4 constructs; a dump of the reset engine adds one assert per base fact
DUMP_FORMS = 6


class StubAgent:
    """The slice of Agent a worker touches: an id, a node, send()."""

    def __init__(self, node=None):
        self.name = "stub"
        self.id = AgentId("stub", "127.0.0.1", 0)
        self.node = node
        self.engine = None
        self.engine_worker = None
        self.outbox = queue.Queue()

    def send(self, msg):
        self.outbox.put(msg)


@pytest.fixture
def rig(tmp_path):
    res = tmp_path / "res"
    res.mkdir()
    agent = StubAgent(Node("stub-node", resources_dir=str(res)))
    worker = attach_engine(agent, Engine())
    yield agent, worker
    worker.close()


def _request(code, params, session=""):
    extra = (("X-Shell-Session", session),) if session else ()
    return Message(performative="REQUEST",
                   sender=AgentId("op", "127.0.0.1", 1),
                   receivers=(AgentId("stub", "127.0.0.1", 0),),
                   content=render_engine_action(EngineCommand(code, tuple(params))),
                   conversation_id="c-golden", reply_with="rw-1",
                   ontology=ONTOLOGY_ACTIONS, content_type=CONTENT_ACTION,
                   extra_headers=extra)


def ask(rig, code, *params, session=""):
    agent, worker = rig
    worker.execute(_request(code, params, session))
    return agent.outbox.get(timeout=5)


def loaded(rig):
    """SOURCE installed and reset: facts f-1 f-2, two activations."""
    rig[1].engine.load_source(SOURCE)
    rig[1].engine.reset()


# ---------------------------------------------------------------------------
# the 23 goldens

def test_dispatch_load_file(rig, tmp_path):
    path = tmp_path / "src.clp"
    path.write_text(SOURCE)
    reply = ask(rig, "LOAD_FILE", str(path))
    assert reply.performative == "INFORM"
    assert reply.content == "ok\n4 forms"


def test_dispatch_load_facts(rig, tmp_path):
    loaded(rig)
    path = tmp_path / "extra.facts"
    path.write_text("(item (n 3) (tag c))\n(item (n 4) (tag d))\n")
    reply = ask(rig, "LOAD_FACTS", str(path))
    assert reply.content == "ok\n2 facts asserted"
    assert rig[1].engine.fact_count() == 4


def test_dispatch_load_from_resource(rig):
    node = rig[0].node
    with open(node.resource_path("boot.clp"), "w") as fh:
        fh.write(SOURCE)
    reply = ask(rig, "LOAD_FROM_RESOURCE", "boot.clp")
    assert reply.content == "ok\n4 forms"


def test_dispatch_load_from_string(rig):
    loaded(rig)
    csv_text = "template,n,tag\nitem,5,e\nitem,6,f\n"
    reply = ask(rig, "LOAD_FROM_STRING", csv_text)
    assert reply.content == "ok\n2 facts asserted"


def test_dispatch_load_assert_string(rig):
    loaded(rig)
    reply = ask(rig, "LOAD_ASSERT_STRING",
                "(item (n 7) (tag g)) (item (n 8) (tag h))")
    assert reply.content == "ok\n2 facts asserted"


def test_dispatch_load_bload(rig, tmp_path):
    donor = Engine()
    donor.load_source(SOURCE)
    donor.reset()
    path = tmp_path / "mem.dump"
    path.write_bytes(donor.dump_framed())
    reply = ask(rig, "LOAD_BLOAD", str(path))
    assert reply.content == f"ok\n{DUMP_FORMS} forms"
    assert rig[1].engine.fact_count() == 2


def test_dispatch_load_sload(rig, tmp_path):
    donor = Engine()
    donor.load_source(SOURCE)
    donor.reset()
    path = tmp_path / "mem.txt"
    path.write_text(donor.dump_text())
    reply = ask(rig, "LOAD_SLOAD", str(path))
    assert reply.content == f"ok\n{DUMP_FORMS} forms"


def test_dispatch_run_infinity(rig):
    loaded(rig)
    reply = ask(rig, "RUN_INFINITY")
    assert reply.content == "ok\n2 rules fired, 4 facts"


def test_dispatch_run_number_of_cycles(rig):
    loaded(rig)
    reply = ask(rig, "RUN_NUMBER_OF_CYCLES", "1")
    assert reply.content == "ok\n1 rules fired"


def test_dispatch_run_once_then_batch(rig):
    loaded(rig)
    reply = ask(rig, "RUN_ONCE_THEN_BATCH")
    assert reply.content == "ok\n1 rules fired, 1 remaining"


def test_dispatch_run_inner_shell(rig):
    loaded(rig)
    rig[1].engine.input_buffer = "(run)"
    reply = ask(rig, "RUN_INNER_SHELL", session="s-77")
    assert reply.content == "ok\n2 rules fired"
    assert rig[1].engine.input_buffer == ""


def test_dispatch_make_reset(rig):
    rig[1].engine.load_source(SOURCE)
    reply = ask(rig, "MAKE_RESET")
    assert reply.content == "ok\n2 facts"


def test_dispatch_make_clear(rig):
    loaded(rig)
    reply = ask(rig, "MAKE_CLEAR")
    assert reply.content == "ok\n"
    assert rig[1].engine.fact_count() == 0
    assert rig[1].engine.rule_names() == []


def test_dispatch_make_memory_dump(rig, tmp_path):
    loaded(rig)
    path = tmp_path / "out.dump"
    reply = ask(rig, "MAKE_MEMORY_DUMP", "text", str(path))
    assert reply.content == f"ok\ndumped {path}"
    # the dump must round-trip into a fresh engine
    assert Engine().load_source(path.read_text()) == DUMP_FORMS


def test_dispatch_make_assert_string(rig):
    loaded(rig)
    reply = ask(rig, "MAKE_ASSERT_STRING", "(item (n 9) (tag z))")
    assert reply.content == "ok\nf-3"
    # the duplicate is suppressed, reported as FALSE
    reply = ask(rig, "MAKE_ASSERT_STRING", "(item (n 9) (tag z))")
    assert reply.content == "ok\nFALSE"


def test_dispatch_make_build(rig):
    reply = ask(rig, "MAKE_BUILD", "(deftemplate extra (slot s))")
    assert reply.content == "ok\n1 forms"
    assert "extra" in rig[1].engine.templates


def test_dispatch_eval_command(rig):
    loaded(rig)
    reply = ask(rig, "EVAL_COMMAND", "(facts)")
    assert reply.performative == "INFORM"
    body = reply.content
    assert body.startswith("ok\n")
    assert "f-1" in body and "item" in body


def test_dispatch_set_input_buffer_count(rig):
    rig[1].engine.input_buffer = "(fac"
    reply = ask(rig, "SET_INPUT_BUFFER_COUNT")
    assert reply.content == "ok\n4"


def test_dispatch_append_input_buffer(rig):
    loaded(rig)
    reply = ask(rig, "APPEND_INPUT_BUFFER", "(fac")
    assert reply.content == "ok\n"          # incomplete form: no output yet
    reply = ask(rig, "APPEND_INPUT_BUFFER", "ts)")
    assert reply.content.startswith("ok\n")
    assert "f-1" in reply.content


def test_dispatch_set_watch(rig):
    reply = ask(rig, "SET_WATCH", "rules")
    assert reply.content == "ok\n"
    assert "rules" in rig[1].engine.watches


def test_dispatch_set_unwatch(rig):
    rig[1].engine.watch("rules")
    reply = ask(rig, "SET_UNWATCH", "rules")
    assert reply.content == "ok\n"
    assert "rules" not in rig[1].engine.watches


def test_dispatch_get_fact_slot(rig):
    loaded(rig)
    reply = ask(rig, "GET_FACT_SLOT", "f-1", "tag")
    assert reply.content == "ok\na"
    reply = ask(rig, "GET_FACT_SLOT", "2", "n")
    assert reply.content == "ok\n2"


def test_dispatch_fact_index(rig):
    loaded(rig)
    reply = ask(rig, "FACT_INDEX", "f-2")
    assert reply.content == "ok\nf-2"
    assert rig[1].engine.cursor == 2


# ---------------------------------------------------------------------------
# vocabulary and failure edges

def test_unknown_action_is_not_understood(rig):
    agent, worker = rig
    msg = _request("RUN_INFINITY", ())
    worker.execute(dataclasses.replace(msg, content="FROB_NICELY"))
    reply = agent.outbox.get(timeout=5)
    assert reply.performative == "NOT-UNDERSTOOD"
    assert "unknown engine action" in reply.content


@pytest.mark.parametrize("content", [
    "RUN_INFINITY\nsurplus",
    "LOAD_FILE",
    "MAKE_MEMORY_DUMP\ntext",
    "GET_FACT_SLOT\nf-1",
])
def test_wrong_arity_is_not_understood(rig, content):
    agent, worker = rig
    worker.execute(dataclasses.replace(_request("RUN_INFINITY", ()),
                                       content=content))
    reply = agent.outbox.get(timeout=5)
    assert reply.performative == "NOT-UNDERSTOOD"
    assert "parameter(s)" in reply.content


def test_missing_file_is_failure(rig, tmp_path):
    reply = ask(rig, "LOAD_FILE", str(tmp_path / "absent.clp"))
    assert reply.performative == "FAILURE"
    assert reply.content.startswith("error\n")


def test_rule_runtime_error_names_rule_and_count(rig):
    rig[1].engine.load_source("""\
(deftemplate tick (slot n))
(defrule boom
  ?f <- (tick (n 1))
  =>
  (retract ?f)
  (retract ?f))
""")
    rig[1].engine.load_source("(assert (tick (n 1)))")
    reply = ask(rig, "RUN_INFINITY")
    assert reply.performative == "FAILURE"
    assert reply.content == ("error\ncannot retract f-1: fact does not exist"
                             " (after 0 firings)")


def test_eval_error_text_becomes_failure(rig):
    reply = ask(rig, "EVAL_COMMAND", "(retract 77)")
    assert reply.performative == "FAILURE"
    assert reply.content.startswith("error\n")
    assert "77" in reply.content


def test_bad_dump_format_is_failure(rig, tmp_path):
    reply = ask(rig, "MAKE_MEMORY_DUMP", "xml", str(tmp_path / "o"))
    assert reply.performative == "FAILURE"
    assert reply.content == "error\nunknown dump format 'xml'"


def test_inner_shell_without_session_is_failure(rig):
    reply = ask(rig, "RUN_INNER_SHELL")
    assert reply.performative == "FAILURE"
    assert reply.content == "error\nRUN_INNER_SHELL needs a shell session"


def test_internal_crash_is_reported_not_raised(rig, monkeypatch):
    def boom(worker, cmd, msg):
        raise RuntimeError("wild")
    monkeypatch.setattr("agentmesh.bridge.dispatch", boom)
    reply = ask(rig, "RUN_INFINITY")
    assert reply.performative == "FAILURE"
    assert reply.content == "error\ninternal engine failure"


def test_full_queue_refuses():
    agent = StubAgent()
    worker = attach_engine(agent, Engine())
    worker.close()      # stop the drain thread so the queue actually fills
    for _ in range(QUEUE_LIMIT):
        worker.jobs.put_nowait(object())
    worker.submit(_request("RUN_INFINITY", ()))
    reply = agent.outbox.get(timeout=5)
    assert reply.performative == "REFUSE"
    assert reply.content == f"engine queue full ({QUEUE_LIMIT} pending)"


def test_attach_engine_twice_is_rejected(rig):
    with pytest.raises(BridgeError, match="already has an engine"):
        attach_engine(rig[0], Engine())


def test_sync_shell_guards():
    bare = StubAgent()
    with pytest.raises(BridgeError, match="no engine attached"):
        sync_shell(bare, "(facts)")
    agent = StubAgent()
    worker = attach_engine(agent, Engine())
    try:
        worker.busy = True
        with pytest.raises(BridgeError, match="engine busy"):
            sync_shell(agent, "(facts)")
        worker.busy = False
        assert sync_shell(agent, "(agenda)") == "0 activations"
    finally:
        worker.busy = False
        worker.close()


# ---------------------------------------------------------------------------
# the same trip over a live node

WORKER_MANIFEST = "behaviour cyclic engine handler=engine-worker level=5\n"


def _wait_inform(agent, cid, timeout=10.0):
    reply = agent.wait_reply(cid, timeout)
    assert reply is not None, "engine notification never arrived"
    return reply


def test_remote_engine_round_trip(tmp_path):
    node = Node("solo")
    node.start()
    try:
        mdir = write_manifests(tmp_path, {5: WORKER_MANIFEST})
        node.spawn_agent("calc", mdir, level=5)
        probe = node.spawn_agent("probe", write_manifests(tmp_path, {}),
                                 level=0)
        target = AgentId("calc", *node.endpoint)
        cid = submit_remote(probe, target, "MAKE_BUILD", (SOURCE,))
        assert _wait_inform(probe, cid).content == "ok\n4 forms"
        cid = submit_remote(probe, target, "MAKE_RESET")
        assert _wait_inform(probe, cid).content == "ok\n2 facts"
        cid = submit_remote(probe, target, "RUN_INFINITY")
        assert _wait_inform(probe, cid).content == "ok\n2 rules fired, 4 facts"
    finally:
        node.close()


def test_inline_worker_preloads_rules(tmp_path):
    rules = tmp_path / "boot.clp"
    rules.write_text(SOURCE)
    manifest = ("behaviour cyclic engine handler=engine-worker "
                f"mode=inline rules={rules} level=5\n")
    node = Node("solo")
    node.start()
    try:
        mdir = write_manifests(tmp_path, {5: manifest})
        node.spawn_agent("calc", mdir, level=5)
        probe = node.spawn_agent("probe", write_manifests(tmp_path, {}),
                                 level=0)
        target = AgentId("calc", *node.endpoint)
        # the preload already reset: base facts are in
        cid = submit_remote(probe, target, "EVAL_COMMAND", ("(facts)",))
        body = _wait_inform(probe, cid).content
        assert body.startswith("ok\n") and "item" in body
        cid = submit_remote(probe, target, "RUN_INFINITY")
        assert _wait_inform(probe, cid).content == "ok\n2 rules fired, 4 facts"
    finally:
        node.close()
