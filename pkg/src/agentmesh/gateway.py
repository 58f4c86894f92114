"""HTTP/WebSocket gateway: the console's window into a deployment.

A thin proxy. Every state-changing HTTP call turns into exactly one
ACL message from the gateway's own agent; reads proxy directory and
board queries the same way; nothing is cached, so restarting the
gateway loses nothing. Shell responses never come back on the HTTP
request: POST /shell returns a conversation id immediately and the
notification arrives later on the /events stream.

Bodies and frames are header-line documents (Key: value lines, blank
line, free text), matching the wire codec's outer shape:

  POST /runlevel   "Agent: expert1\\nLevel: 5\\n"       -> 200/404/409
  POST /shell      "Target: expert1\\n\\n(facts)"        -> Conversation-Id
  GET  /agents     directory rows "agent <name> <host> <port> <level>"
  GET  /tickets    board rows (eleven shell-quoted columns)
  WS   /events     frames with Event: ticket | shell | bench
"""

from __future__ import annotations

import asyncio
import logging
import threading
import time
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
import uvicorn

from .acl.model import (ACTION_ARITY, AgentId, Message, ONTOLOGY_BENCH,
                        ONTOLOGY_DIRECTORY, ONTOLOGY_LIFECYCLE,
                        ONTOLOGY_TICKETS)
from .bridge import submit_remote
from .runtime.behaviour import BehaviourSpec
from .runtime.node import Node

log = logging.getLogger("agentmesh.gateway")

GATEWAY_AGENT = "gateway"
DEFAULT_BOARD = "board"


def parse_headers_doc(text: str) -> tuple[dict[str, str], str]:
    """Split a header-line document into (headers, content)."""
    head, _, content = text.partition("\n\n")
    headers = {}
    for line in head.splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if sep:
            headers[key.strip().lower()] = value.strip()
    return headers, content


class EventHub:
    """Fans out event frames to every connected websocket."""

    def __init__(self):
        self._lock = threading.Lock()
        self._queues: set[asyncio.Queue] = set()
        self._loop: asyncio.AbstractEventLoop | None = None

    def bind_loop(self, loop: asyncio.AbstractEventLoop):
        self._loop = loop

    def attach(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue(maxsize=1000)
        with self._lock:
            self._queues.add(q)
        return q

    def detach(self, q: asyncio.Queue):
        with self._lock:
            self._queues.discard(q)

    def push(self, frame: str):
        """Called from agent threads; hops onto the server loop."""
        loop = self._loop
        if loop is None or loop.is_closed():
            return
        with self._lock:
            targets = tuple(self._queues)

        def deliver():
            for q in targets:
                try:
                    q.put_nowait(frame)
                except asyncio.QueueFull:
                    log.warning("event queue full, dropping frame")
        try:
            loop.call_soon_threadsafe(deliver)
        except RuntimeError:
            pass   # loop shut down under us


class Gateway:
    def __init__(self, node: Node, host: str = "127.0.0.1", port: int = 0,
                 board_agent: str = DEFAULT_BOARD):
        self.node = node
        self.board_agent = board_agent
        self.hub = EventHub()
        self.agent = node.spawn_internal(
            GATEWAY_AGENT,
            [BehaviourSpec("cyclic", "events", "shell-gateway", 0)])
        self.agent.on_shell_event = self._on_event
        self.app = self._build_app()
        self._config = uvicorn.Config(self.app, host=host, port=port,
                                      log_level="warning", lifespan="on")
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run,
                                        name="gateway-http", daemon=True)
        self._subscriber = threading.Thread(target=self._subscribe_loop,
                                            name="gateway-subscribe",
                                            daemon=True)
        self._closing = threading.Event()

    # -- lifecycle ----------------------------------------------------------

    def start(self):
        self._thread.start()
        deadline = time.monotonic() + 10.0
        while time.monotonic() < deadline:
            if self._server.started:
                break
            time.sleep(0.02)
        else:
            raise RuntimeError("gateway HTTP server did not start")
        self._subscriber.start()

    def close(self):
        self._closing.set()
        self._server.should_exit = True
        self._thread.join(timeout=5.0)

    @property
    def port(self) -> int:
        for server in self._server.servers:
            for sock in server.sockets:
                return sock.getsockname()[1]
        raise RuntimeError("gateway not listening")

    # -- agent-side plumbing ------------------------------------------------

    def _board_id(self) -> AgentId:
        return AgentId(self.board_agent, *self.node.platform_endpoint)

    def _agent_id(self, name: str) -> AgentId:
        return AgentId(name, *self.node.platform_endpoint)

    def _on_event(self, msg: Message):
        if msg.ontology == ONTOLOGY_TICKETS:
            frame = f"Event: ticket\n\n{msg.content.removeprefix('ticket ')}"
        elif msg.ontology == ONTOLOGY_BENCH:
            frame = f"Event: bench\n\n{msg.content}"
        else:
            frame = (f"Event: shell\n"
                     f"Conversation-Id: {msg.conversation_id}\n"
                     f"Performative: {msg.performative}\n"
                     f"Sender: {msg.sender}\n\n{msg.content}")
        self.hub.push(frame)

    def _subscribe_loop(self):
        """Keep the board subscription alive; boards can come and go."""
        while not self._closing.is_set():
            try:
                reply = self.agent.request(
                    self._board_id(), "subscribe",
                    ontology=ONTOLOGY_TICKETS, timeout=5.0)
                if reply is not None and reply.performative == "AGREE":
                    self._closing.wait(15.0)
                    continue
            except Exception:
                log.exception("board subscription attempt failed")
            self._closing.wait(5.0)

    # -- HTTP surface -------------------------------------------------------

    def _build_app(self) -> FastAPI:
        hub = self.hub

        @asynccontextmanager
        async def lifespan(_app):
            hub.bind_loop(asyncio.get_running_loop())
            yield

        app = FastAPI(title="agentmesh gateway", docs_url=None,
                      redoc_url=None, openapi_url=None, lifespan=lifespan)
        # the console may be served from any static host
        app.add_middleware(CORSMiddleware, allow_origins=["*"],
                           allow_methods=["*"], allow_headers=["*"])

        @app.get("/agents")
        def agents() -> PlainTextResponse:
            reply = self.agent.request(self.node.ams_id, "list",
                                       ontology=ONTOLOGY_DIRECTORY,
                                       timeout=5.0)
            if reply is None:
                return PlainTextResponse("directory timeout\n",
                                         status_code=504)
            return PlainTextResponse(reply.content + "\n")

        @app.get("/tickets")
        def tickets() -> PlainTextResponse:
            reply = self.agent.request(self._board_id(), "list",
                                       ontology=ONTOLOGY_TICKETS,
                                       timeout=5.0)
            if reply is None:
                return PlainTextResponse("board timeout\n", status_code=504)
            if reply.performative == "FAILURE":
                return PlainTextResponse(reply.content + "\n",
                                         status_code=404)
            return PlainTextResponse(reply.content + "\n")

        @app.post("/runlevel")
        async def runlevel(request: Request) -> PlainTextResponse:
            headers, _ = parse_headers_doc((await request.body()).decode())
            name, level = headers.get("agent"), headers.get("level")
            if not name or level is None or not level.lstrip("-").isdigit():
                return PlainTextResponse("need Agent and numeric Level\n",
                                         status_code=400)
            reply = self.agent.request(
                self._agent_id(name), f"set-level {int(level)}",
                ontology=ONTOLOGY_LIFECYCLE, timeout=30.0)
            if reply is None:
                return PlainTextResponse("agent timeout\n", status_code=504)
            if reply.performative == "AGREE":
                return PlainTextResponse(f"Level: {int(level)}\n")
            if reply.performative == "FAILURE":
                return PlainTextResponse(reply.content + "\n",
                                         status_code=404)
            return PlainTextResponse(reply.content + "\n", status_code=409)

        @app.post("/shell")
        async def shell(request: Request) -> PlainTextResponse:
            headers, command = parse_headers_doc(
                (await request.body()).decode())
            target = headers.get("target")
            if not target:
                return PlainTextResponse("need a Target header\n",
                                         status_code=400)
            code = headers.get("action", "EVAL_COMMAND").upper()
            arity = ACTION_ARITY.get(code)
            if arity is None or arity > 1:
                return PlainTextResponse(
                    f"action {code!r} not usable over the gateway\n",
                    status_code=400)
            if arity == 1 and not command.strip():
                return PlainTextResponse("need a command body\n",
                                         status_code=400)
            resolve = self.agent.request(
                self.node.ams_id, f"resolve {target}",
                ontology=ONTOLOGY_DIRECTORY, timeout=5.0)
            if resolve is None or resolve.performative != "INFORM":
                return PlainTextResponse(f"unknown agent {target!r}\n",
                                         status_code=404)
            session = headers.get("session", "")
            params = (command.strip(),) if arity == 1 else ()
            cid = submit_remote(
                self.agent, self._agent_id(target), code, params,
                shell_session=session)
            return PlainTextResponse(f"Conversation-Id: {cid}\n")

        @app.websocket("/events")
        async def events(ws: WebSocket):
            # attach before the handshake: a client may push work the
            # instant connect() returns, and frames with no queue are lost
            q = hub.attach()
            try:
                await ws.accept()
                pump = asyncio.create_task(_pump(ws, q))
                idle = asyncio.create_task(ws.receive_text())
                done, pending = await asyncio.wait(
                    {pump, idle}, return_when=asyncio.FIRST_COMPLETED)
                for task in pending:
                    task.cancel()
            except WebSocketDisconnect:
                pass
            finally:
                hub.detach(q)

        async def _pump(ws: WebSocket, q: asyncio.Queue):
            while True:
                await ws.send_text(await q.get())

        return app
