"""Agent-to-engine integration: self-addressed commands, one worker.

An agent never calls its engine directly. Commands travel as ordinary
REQUEST messages (ontology "rbes-actions") into the agent's mailbox;
the engine-worker behaviour hands them to a dedicated worker thread
that owns the engine. Notifications come back as replies whose body is
a status line ("ok"/"error") followed by output text. Because the
worker is a separate thread, the agent keeps scheduling behaviours and
answering pings while the engine reasons; that independence is the
point of the whole design.

Jobs run strictly in arrival order, one at a time. The queue holds at
most 1024 pending jobs; beyond that the agent answers REFUSE.
"""

from __future__ import annotations

import csv
import io
import logging
import queue
import threading
from dataclasses import dataclass, field

from .acl.model import (AgentId, EngineCommand, Message, NotUnderstood,
                        ONTOLOGY_ACTIONS, ONTOLOGY_BENCH, ONTOLOGY_TICKETS,
                        fresh_id, parse_engine_action, render_engine_action)
from .rulekit import (Engine, EngineError, FactSpec, RuleRuntimeError, Symbol,
                      append_input, drain_input, eval_command, input_count,
                      parse_fact, parse_facts, render_value)
from .runtime.agent import Agent
from .runtime.behaviour import behaviour_handler
from .runtime.mailbox import MessageTemplate

log = logging.getLogger("agentmesh.bridge")

QUEUE_LIMIT = 1024
SHELL_SESSION_HEADER = "X-Shell-Session"

_ACTION_REQUEST = MessageTemplate(performative="REQUEST",
                                  ontology=ONTOLOGY_ACTIONS)


class BridgeError(Exception):
    pass


@dataclass
class ShellSession:
    """State of one operator shell window talking to one agent."""
    session_id: str
    origin: str
    target: AgentId
    pending: set[str] = field(default_factory=set)
    transcript: list[tuple[str, str]] = field(default_factory=list)


class EngineWorker:
    """The engine's single execution context, fed FIFO from the mailbox."""

    _STOP = object()

    def __init__(self, agent: Agent, engine: Engine, inline: bool = False):
        self.agent = agent
        self.engine = engine
        self.inline = inline
        self.jobs: queue.Queue = queue.Queue(maxsize=QUEUE_LIMIT)
        self.busy = False
        self._thread = threading.Thread(
            target=self._loop, name=f"engine:{agent.name}", daemon=True)
        self._thread.start()

    def idle(self) -> bool:
        return not self.busy and self.jobs.empty()

    def submit(self, msg: Message):
        try:
            self.jobs.put_nowait(msg)
        except queue.Full:
            self.agent.send(msg.reply(
                "REFUSE", f"engine queue full ({QUEUE_LIMIT} pending)",
                sender=self.agent.id))

    def close(self):
        self.jobs.put(self._STOP)
        self._thread.join(timeout=5.0)

    def _loop(self):
        while True:
            msg = self.jobs.get()
            if msg is self._STOP:
                return
            self.execute(msg)

    def execute(self, msg: Message):
        """Run one job to completion and send its notification."""
        self.busy = True
        try:
            reply = self._process(msg)
        except Exception:
            log.exception("engine job crashed unexpectedly")
            reply = msg.reply("FAILURE", "error\ninternal engine failure",
                              sender=self.agent.id)
        finally:
            self.busy = False
        self.agent.send(reply)

    def _process(self, msg: Message) -> Message:
        try:
            cmd = parse_engine_action(msg.content)
        except NotUnderstood as exc:
            return msg.reply("NOT-UNDERSTOOD", str(exc), sender=self.agent.id)
        try:
            output = dispatch(self, cmd, msg)
        except RuleRuntimeError as exc:
            return msg.reply(
                "FAILURE", f"error\n{exc} (after {exc.fired} firings)",
                sender=self.agent.id)
        except (EngineError, BridgeError, OSError, ValueError) as exc:
            return msg.reply("FAILURE", f"error\n{exc}", sender=self.agent.id)
        if output.startswith("ERROR:"):
            return msg.reply("FAILURE", f"error\n{output[len('ERROR:'):].strip()}",
                             sender=self.agent.id)
        return msg.reply("INFORM", f"ok\n{output}", sender=self.agent.id)


def attach_engine(agent: Agent, engine: Engine | None = None,
                  inline: bool = False) -> EngineWorker:
    if agent.engine is not None:
        raise BridgeError(f"agent {agent.name!r} already has an engine")
    engine = engine if engine is not None else Engine()
    worker = EngineWorker(agent, engine, inline)
    agent.engine = engine
    agent.engine_worker = worker
    return worker


# ---------------------------------------------------------------------------
# the command dispatch table

def dispatch(worker: EngineWorker, cmd: EngineCommand, msg: Message) -> str:
    engine = worker.engine
    code = cmd.code
    p = cmd.params

    if code == "LOAD_FILE":
        return f"{engine.load_source(_read_text(p[0]))} forms"
    if code == "LOAD_FACTS":
        return _assert_specs(engine, parse_facts(_read_text(p[0])))
    if code == "LOAD_FROM_RESOURCE":
        path = worker.agent.node.resource_path(p[0])
        return f"{engine.load_source(_read_text(path))} forms"
    if code == "LOAD_FROM_STRING":
        return _assert_specs(engine, _facts_from_csv(p[0]))
    if code == "LOAD_ASSERT_STRING":
        return _assert_specs(engine, parse_facts(p[0]))
    if code == "LOAD_BLOAD":
        with open(p[0], "rb") as fh:
            return f"{engine.load_framed(fh.read())} forms"
    if code == "LOAD_SLOAD":
        return f"{engine.load_source(_read_text(p[0]))} forms"

    if code == "RUN_INFINITY":
        return f"{engine.run()} rules fired, {engine.fact_count()} facts"
    if code == "RUN_NUMBER_OF_CYCLES":
        return f"{engine.run(_int(p[0]))} rules fired"
    if code == "RUN_ONCE_THEN_BATCH":
        fired = engine.run(1)
        return f"{fired} rules fired, {engine.agenda_size()} remaining"
    if code == "RUN_INNER_SHELL":
        if not msg.header(SHELL_SESSION_HEADER):
            raise BridgeError("RUN_INNER_SHELL needs a shell session")
        return drain_input(engine)

    if code == "MAKE_RESET":
        engine.reset()
        return f"{engine.fact_count()} facts"
    if code == "MAKE_CLEAR":
        engine.clear_all()
        return ""
    if code == "MAKE_MEMORY_DUMP":
        fmt, path = p
        if fmt == "text":
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(engine.dump_text())
        elif fmt == "framed":
            with open(path, "wb") as fh:
                fh.write(engine.dump_framed())
        else:
            raise BridgeError(f"unknown dump format {fmt!r}")
        return f"dumped {path}"
    if code == "MAKE_ASSERT_STRING":
        fid = engine.assert_spec(parse_fact(p[0]))
        return "FALSE" if fid is None else f"f-{fid}"
    if code == "MAKE_BUILD":
        return f"{engine.load_source(p[0])} forms"

    if code == "EVAL_COMMAND":
        return eval_command(engine, p[0])

    if code == "SET_INPUT_BUFFER_COUNT":
        return str(input_count(engine))
    if code == "APPEND_INPUT_BUFFER":
        return append_input(engine, p[0])
    if code == "SET_UNWATCH":
        engine.unwatch(p[0])
        return ""
    if code == "SET_WATCH":
        engine.watch(p[0])
        return ""

    if code == "GET_FACT_SLOT":
        return render_value(engine.fact_slot(_fact_id(p[0]), p[1]))
    if code == "FACT_INDEX":
        engine.set_cursor(_fact_id(p[0]))
        return f"f-{engine.cursor}"

    raise BridgeError(f"unmapped engine action {code!r}")  # unreachable


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise BridgeError(f"expected an integer, got {text!r}") from None


def _fact_id(text: str) -> int:
    return _int(text[2:] if text.startswith("f-") else text)


def _assert_specs(engine: Engine, specs: list[FactSpec]) -> str:
    asserted = 0
    for spec in specs:
        if engine.assert_spec(spec) is not None:
            asserted += 1
    return f"{asserted} facts asserted"


def _facts_from_csv(text: str) -> list[FactSpec]:
    """CSV fact batch: header `template,slot,...`, one fact per row."""
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        return []
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise BridgeError("CSV needs a 'template,slot,...' header")
    slots = header[1:]
    specs = []
    for row in rows[1:]:
        if len(row) != len(header):
            raise BridgeError(
                f"CSV row has {len(row)} cells, header has {len(header)}")
        template = row[0].strip()
        pairs = tuple((slot, _csv_atom(cell))
                      for slot, cell in zip(slots, row[1:]))
        specs.append(FactSpec(template, pairs))
    return specs


def _csv_atom(cell: str):
    cell = cell.strip()
    if cell == "":
        return Symbol("nil")
    if cell.startswith('"') and cell.endswith('"') and len(cell) >= 2:
        return cell[1:-1]
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        f = float(cell)
        if any(c.isdigit() for c in cell):
            return f
    except ValueError:
        pass
    return Symbol(cell)


# ---------------------------------------------------------------------------
# submission helpers

def submit_local(agent: Agent, code: str, params: tuple[str, ...] = (),
                 conversation_id: str = "") -> str:
    """Queue an engine command on the agent's own engine; returns the
    conversation id whose notification to wait for."""
    return submit_remote(agent, agent.id, code, params, conversation_id)


def submit_remote(agent: Agent, target: AgentId, code: str,
                  params: tuple[str, ...] = (), conversation_id: str = "",
                  shell_session: str = "") -> str:
    content = render_engine_action(EngineCommand(code, tuple(params)))
    extra = ((SHELL_SESSION_HEADER, shell_session),) if shell_session else ()
    msg = Message(
        performative="REQUEST", sender=agent.id, receivers=(target,),
        content=content, conversation_id=conversation_id or fresh_id("c"),
        reply_with=fresh_id(), ontology=ONTOLOGY_ACTIONS,
        content_type="application/x-engine-action", extra_headers=extra)
    agent.send(msg)
    return msg.conversation_id


def sync_shell(agent: Agent, line: str) -> str:
    """Direct, blocking engine access for development use only."""
    if agent.engine is None:
        raise BridgeError("no engine attached")
    worker = agent.engine_worker
    if worker is not None and not worker.idle():
        raise BridgeError("engine busy: worker has pending jobs")
    return eval_command(agent.engine, line)


# ---------------------------------------------------------------------------
# catalog behaviours

@behaviour_handler("engine-worker", interest=_ACTION_REQUEST)
def _engine_worker_behaviour(agent: Agent, inst):
    """Pump engine-action requests from the mailbox into the worker.

    Manifest params: mode=inline runs jobs on the scheduler thread (the
    blocking variant measured by the benchmark); rules=<path> preloads a
    source file into a freshly attached engine.
    """
    if agent.engine is None:
        worker = attach_engine(agent, Engine(),
                               inline=inst.spec.param("mode") == "inline")
        rules = inst.spec.param("rules")
        if rules:
            try:
                worker.engine.load_source(_read_text(rules))
                worker.engine.reset()
            except (OSError, EngineError):
                log.exception("preloading rules from %r failed", rules)
    msg = agent.mailbox.receive(inst.interest, timeout=0)
    if msg is None:
        inst.block(agent.mailbox.version)
        return
    worker = agent.engine_worker
    assert worker is not None
    if worker.inline or inst.spec.param("mode") == "inline":
        worker.execute(msg)
    else:
        worker.submit(msg)


# The streams a console cares about: engine notifications, board
# mutation broadcasts (always on the fixed "board-events" conversation,
# which keeps them apart from the gateway's own synchronous board
# queries), and benchmark reports.
_EVENT_TEMPLATES = (
    MessageTemplate(performative=("INFORM", "FAILURE", "REFUSE",
                                  "NOT-UNDERSTOOD"),
                    ontology=ONTOLOGY_ACTIONS),
    MessageTemplate(performative="INFORM", ontology=ONTOLOGY_TICKETS,
                    conversation_id="board-events"),
    MessageTemplate(performative="INFORM", ontology=ONTOLOGY_BENCH),
)


@behaviour_handler("shell-gateway")
def _shell_gateway_behaviour(agent: Agent, inst):
    """Forward console-bound events to the agent's event callback.

    The gateway agent installs this and sets `agent.on_shell_event` to
    push engine notifications, ticket mutations, and benchmark reports
    out to its clients. Without a callback, events are drained and
    dropped.
    """
    forwarded = False
    for template in _EVENT_TEMPLATES:
        while True:
            msg = agent.mailbox.receive(template, timeout=0)
            if msg is None:
                break
            forwarded = True
            callback = getattr(agent, "on_shell_event", None)
            if callback is not None:
                try:
                    callback(msg)
                except Exception:
                    log.exception("event callback failed")
    if not forwarded:
        inst.block(agent.mailbox.version)
