"""HTTP/WS gateway against a live node: every route, every status code.

One node, one gateway, shared by the whole module; tests that climb the
runlevel ladder spawn their own agents so nothing here depends on test
order. Event-stream checks use the synchronous websocket client.
"""

import os
import re
import time
from types import SimpleNamespace

import httpx
import pytest
from websockets.sync.client import connect as ws_connect

from agentmesh.acl.model import AgentId, Message, ONTOLOGY_BENCH, fresh_id
from agentmesh.gateway import Gateway, parse_headers_doc
from agentmesh.runtime.node import Node

from conftest import BOARD_05, PRESENCE_01, WORKER_05, write_manifests

TGT_MANIFESTS = {1: PRESENCE_01, 5: WORKER_05}


@pytest.fixture(scope="module")
def rig(tmp_path_factory):
    root = str(tmp_path_factory.mktemp("gateway"))
    node = Node("plat", resources_dir=os.path.join(root, "res"))
    os.makedirs(node.resources_dir)
    node.start()
    node.spawn_agent("board", write_manifests(root, {5: BOARD_05}), level=5)
    node.spawn_agent("tgt", write_manifests(root, TGT_MANIFESTS), level=5)
    probe = node.spawn_agent("probe", write_manifests(root, {}), level=0)
    gw = Gateway(node, port=0)
    gw.start()
    client = httpx.Client(base_url=f"http://127.0.0.1:{gw.port}", timeout=30)
    yield SimpleNamespace(node=node, gw=gw, http=client, root=root,
                          probe=probe,
                          ws_url=f"ws://127.0.0.1:{gw.port}/events")
    client.close()
    gw.close()
    node.close()


def _recv_until(ws, pred, timeout=15.0):
    deadline = time.monotonic() + timeout
    seen = []
    while time.monotonic() < deadline:
        try:
            frame = ws.recv(timeout=max(0.1, deadline - time.monotonic()))
        except TimeoutError:
            break
        seen.append(frame)
        if pred(frame):
            return frame
    raise AssertionError(f"expected frame never arrived; saw {seen!r}")


def test_parse_headers_doc():
    headers, content = parse_headers_doc(
        "Target: tgt\nAction: EVAL_COMMAND\n\n(facts)\nmore")
    assert headers == {"target": "tgt", "action": "EVAL_COMMAND"}
    assert content == "(facts)\nmore"
    # a line without a colon is not a header
    assert parse_headers_doc("no headers at all") == ({}, "")


def test_headers_doc_without_blank_line():
    headers, content = parse_headers_doc("Agent: x\nLevel: 3\n")
    assert headers == {"agent": "x", "level": "3"}
    assert content == ""


def test_agents_lists_the_directory(rig):
    resp = rig.http.get("/agents")
    assert resp.status_code == 200
    for name in ("ams", "board", "tgt", "gateway", "probe"):
        assert re.search(rf"^agent {name} \S+ \d+ \d+$", resp.text,
                         re.MULTILINE), resp.text


def test_tickets_starts_empty(rig):
    resp = rig.http.get("/tickets")
    assert resp.status_code == 200
    assert resp.text.strip() == ""


def test_runlevel_ladder_over_http(rig):
    rig.node.spawn_agent("lift", write_manifests(rig.root, {1: PRESENCE_01}),
                         level=1)
    post = lambda body: rig.http.post("/runlevel", content=body)

    resp = post("Agent: lift\nLevel: 3\n")
    assert (resp.status_code, resp.text) == (200, "Level: 3\n")
    resp = post("Agent: lift\nLevel: 5\n")
    assert (resp.status_code, resp.text) == (200, "Level: 5\n")

    resp = post("Agent: lift\nLevel: 4\n")
    assert resp.status_code == 409
    assert "no such runlevel" in resp.text
    resp = post("Agent: lift\nLevel: 3\n")          # downward: refused
    assert resp.status_code == 409

    resp = post("Agent: nobody\nLevel: 3\n")
    assert resp.status_code == 404
    resp = post("Agent: lift\nLevel: banana\n")
    assert resp.status_code == 400
    resp = post("Level: 3\n")
    assert resp.status_code == 400

    # 6 is the hot reboot: accepted, and the directory ends up at 0
    resp = post("Agent: lift\nLevel: 6\n")
    assert (resp.status_code, resp.text) == (200, "Level: 6\n")
    deadline = time.monotonic() + 10
    while time.monotonic() < deadline:
        body = rig.http.get("/agents").text
        if re.search(r"^agent lift \S+ \d+ 0$", body, re.MULTILINE):
            break
        time.sleep(0.1)
    else:
        raise AssertionError("reboot never reached the directory")


def test_shell_round_trip_lands_on_the_event_stream(rig):
    with ws_connect(rig.ws_url) as ws:
        resp = rig.http.post("/shell",
                             content="Target: tgt\nAction: MAKE_RESET\n")
        assert resp.status_code == 200
        assert resp.text.startswith("Conversation-Id: ")
        cid = resp.text.split(":", 1)[1].strip()
        frame = _recv_until(ws, lambda f: cid in f)
    head, body = frame.split("\n\n", 1)
    assert head.splitlines()[0] == "Event: shell"
    assert f"Conversation-Id: {cid}" in head
    assert "Performative: INFORM" in head
    assert body == "ok\n0 facts"


def test_shell_default_action_is_eval(rig):
    with ws_connect(rig.ws_url) as ws:
        resp = rig.http.post("/shell", content="Target: tgt\n\n(agenda)")
        assert resp.status_code == 200
        cid = resp.text.split(":", 1)[1].strip()
        frame = _recv_until(ws, lambda f: cid in f)
    assert frame.endswith("\n\nok\n0 activations")


def test_shell_session_header_reaches_the_engine(rig):
    with ws_connect(rig.ws_url) as ws:
        # without a session the inner shell refuses to run
        resp = rig.http.post(
            "/shell", content="Target: tgt\nAction: RUN_INNER_SHELL\n")
        cid = resp.text.split(":", 1)[1].strip()
        frame = _recv_until(ws, lambda f: cid in f)
        assert "Performative: FAILURE" in frame
        assert "needs a shell session" in frame

        resp = rig.http.post(
            "/shell",
            content="Target: tgt\nAction: RUN_INNER_SHELL\nSession: s1\n")
        cid = resp.text.split(":", 1)[1].strip()
        frame = _recv_until(ws, lambda f: cid in f)
        assert "Performative: INFORM" in frame


@pytest.mark.parametrize("body,complaint", [
    ("Action: MAKE_RESET\n", "Target"),
    ("Target: tgt\nAction: LOAD_RULES\n\nx", "not usable"),
    ("Target: tgt\nAction: MAKE_MEMORY_DUMP\n\nx", "not usable"),
    ("Target: tgt\n", "command body"),
], ids=["no-target", "unknown-action", "wide-action", "eval-no-body"])
def test_shell_rejects_bad_requests(rig, body, complaint):
    resp = rig.http.post("/shell", content=body)
    assert resp.status_code == 400
    assert complaint in resp.text


def test_shell_unknown_target_is_404(rig):
    resp = rig.http.post("/shell",
                         content="Target: nobody\nAction: MAKE_RESET\n")
    assert resp.status_code == 404


def test_ticket_mutations_stream_and_list(rig):
    board_agent = rig.node.agents["board"]
    deadline = time.monotonic() + 10
    while time.monotonic() < deadline and \
            getattr(board_agent, "board", None) is None:
        time.sleep(0.05)
    with ws_connect(rig.ws_url) as ws:
        tid = board_agent.board.announce("/tmp/x.facts", "testsuite", "lab",
                                         "UDP")
        frame = _recv_until(ws, lambda f: tid in f)
    head, body = frame.split("\n\n", 1)
    assert head == "Event: ticket"
    assert body == f"{tid} /tmp/x.facts testsuite - lab UDP pending unset - - -"

    resp = rig.http.get("/tickets")
    assert resp.status_code == 200
    assert body in resp.text


def test_bench_reports_stream_as_events(rig):
    with ws_connect(rig.ws_url) as ws:
        rig.probe.send(Message(
            performative="INFORM", sender=rig.probe.id,
            receivers=(AgentId("gateway", *rig.node.endpoint),),
            content="mode nonblocking  p max 1.0 ms", ontology=ONTOLOGY_BENCH,
            conversation_id=fresh_id("bench")))
        frame = _recv_until(ws, lambda f: f.startswith("Event: bench"))
    assert frame == "Event: bench\n\nmode nonblocking  p max 1.0 ms"


def test_tickets_without_a_board_is_404(tmp_path):
    node = Node("lonely")
    node.start()
    gw = Gateway(node, port=0)
    gw.start()
    try:
        client = httpx.Client(base_url=f"http://127.0.0.1:{gw.port}",
                              timeout=30)
        resp = client.get("/tickets")
        assert resp.status_code == 404
        client.close()
    finally:
        gw.close()
        node.close()
