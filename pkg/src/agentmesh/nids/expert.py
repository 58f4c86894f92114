"""The demo's moving parts, as catalog behaviours.

ticket-board-server answers board requests and broadcasts mutations.
watchdog-converter turns capture files into fact files and announces
them. ticket-requester is the expert loop: check out a ticket, feed
the fact file to the local engine, report the verdict, reset, repeat.

All three speak plain-text request bodies (shell-quoted tokens) under
the "ticket-board" ontology; engine work goes through the normal
engine-action mailbox path, never by direct calls.
"""

from __future__ import annotations

import logging
import os
import shlex
import time
from importlib import resources

from ..acl.model import AgentId, Message, ONTOLOGY_TICKETS, fresh_id
from ..bridge import submit_local
from ..runtime.agent import Agent
from ..runtime.behaviour import behaviour_handler
from ..runtime.mailbox import MessageTemplate
from .board import BoardError, Ticket, TicketBoard
from .factfile import write_fact_file
from .pcap import PcapError, classify_capture, read_pcap

log = logging.getLogger("agentmesh.nids")

BUILTIN_SIGNATURES = ("telnet-probe", "ssdp-flood", "jumbo-udp")

_BOARD_REQUEST = MessageTemplate(performative="REQUEST",
                                 ontology=ONTOLOGY_TICKETS)
_REPLY = ("INFORM", "AGREE", "REFUSE", "FAILURE", "NOT-UNDERSTOOD")


def signature_source(names: str = "all") -> str:
    """Combined rule text for the given signatures.

    `names` is a comma-separated list of builtin signature names or
    filesystem paths; "all" selects every builtin. Shared templates and
    the result wrap-up rule are always included.
    """
    picked = [n.strip() for n in names.split(",") if n.strip()]
    if not picked or picked == ["all"]:
        picked = list(BUILTIN_SIGNATURES)
    parts = [_builtin("base.clp")]
    for name in picked:
        if name in BUILTIN_SIGNATURES:
            parts.append(_builtin(name + ".clp"))
        elif os.path.exists(name):
            with open(name, "r", encoding="utf-8") as fh:
                parts.append(fh.read())
        else:
            raise ValueError(f"unknown signature {name!r}")
    parts.append(_builtin("wrap-up.clp"))
    return "\n".join(parts)


def _builtin(fname: str) -> str:
    return (resources.files("agentmesh.nids") / "signatures"
            / fname).read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# board server

@behaviour_handler("ticket-board-server", interest=_BOARD_REQUEST)
def _board_server(agent: Agent, inst):
    """Serve announce/checkout/report/list/subscribe over the mailbox.

    Params: journal=<path> enables persistence (relative paths resolve
    under the node's resource root).
    """
    board = getattr(agent, "board", None)
    if board is None:
        board = _make_board(agent, inst)
    msg = agent.mailbox.receive(inst.interest, timeout=0)
    if msg is None:
        inst.block(agent.mailbox.version)
        return
    try:
        reply = _board_op(agent, board, msg)
    except BoardError as exc:
        reply = msg.reply("REFUSE", str(exc), sender=agent.id)
    except (ValueError, IndexError) as exc:
        reply = msg.reply("NOT-UNDERSTOOD", f"bad board request: {exc}",
                          sender=agent.id)
    agent.send(reply)


def _make_board(agent: Agent, inst) -> TicketBoard:
    journal = inst.spec.param("journal")
    path = None
    if journal:
        path = journal if os.path.isabs(journal) else os.path.join(
            agent.node.resources_dir or ".", journal)
    board = TicketBoard(path)
    agent.board = board
    agent.board_observers = set()
    board.on_mutation = lambda t: _broadcast(agent, t)
    return board


def _broadcast(agent: Agent, ticket: Ticket):
    for observer in tuple(agent.board_observers):
        agent.send(Message(
            performative="INFORM", sender=agent.id, receivers=(observer,),
            content=f"ticket {ticket.line()}",
            conversation_id="board-events", ontology=ONTOLOGY_TICKETS))


def _board_op(agent: Agent, board: TicketBoard, msg: Message) -> Message:
    parts = shlex.split(msg.content)
    op = parts[0] if parts else ""
    if op == "announce":
        datastore, sender, framework, deweycode = parts[1:]
        tid = board.announce(datastore, sender, framework, deweycode)
        return msg.reply("AGREE", f"tid {tid}", sender=agent.id)
    if op == "checkout":
        analyzer, dewey_filter = parts[1:]
        granted = board.checkout(analyzer, dewey_filter,
                                 conversation=msg.conversation_id)
        if granted is None:
            return msg.reply("INFORM", "none", sender=agent.id)
        return msg.reply("INFORM", f"ticket {granted.line()}",
                         sender=agent.id)
    if op == "report":
        tid, conversation, outcome, keymethod, engine = parts[1:]
        board.report(tid, conversation, outcome, keymethod, engine)
        return msg.reply("AGREE", f"closed {tid}", sender=agent.id)
    if op == "list":
        lines = [t.line() for t in board.tickets()]
        return msg.reply("INFORM", "\n".join(lines), sender=agent.id)
    if op == "subscribe":
        agent.board_observers.add(msg.sender)
        return msg.reply("AGREE", "subscribed", sender=agent.id)
    if op == "unsubscribe":
        agent.board_observers.discard(msg.sender)
        return msg.reply("AGREE", "unsubscribed", sender=agent.id)
    return msg.reply("NOT-UNDERSTOOD", f"unknown board op {op!r}",
                     sender=agent.id)


# ---------------------------------------------------------------------------
# watchdog

@behaviour_handler("watchdog-converter")
def _watchdog(agent: Agent, inst):
    """Convert new .pcap files under the watch dir and announce them.

    Params: board=<agent name> (required), watch=<subdir> under the
    resource root (default the root itself), framework=<label>.
    Runs as a ticker; each firing scans once. Files that fail to decode
    are skipped permanently and logged.
    """
    board_name = inst.spec.param("board")
    if not board_name:
        log.error("%s: watchdog-converter needs board=<name>", agent.name)
        inst.finish()
        return
    root = agent.node.resources_dir or "."
    watch = inst.spec.param("watch")
    directory = os.path.join(root, watch) if watch else root
    seen: set[str] = inst.scratch.setdefault("seen", set())
    try:
        names = sorted(os.listdir(directory))
    except OSError:
        return
    for name in names:
        if not name.endswith(".pcap") or name in seen:
            continue
        seen.add(name)
        path = os.path.join(directory, name)
        try:
            records = read_pcap(path)
        except (PcapError, OSError) as exc:
            log.warning("%s: skipped %s: %s", agent.name, name, exc)
            continue
        deweycode = classify_capture(records)
        facts_path = path + ".facts"
        write_fact_file(records, deweycode, facts_path, name=name)
        framework = inst.spec.param("framework") or "agentmesh-lab"
        content = shlex.join(["announce", facts_path, agent.name,
                              framework, deweycode])
        board = AgentId(board_name, *agent.node.platform_endpoint)
        reply = agent.request(board, content, ontology=ONTOLOGY_TICKETS,
                              timeout=10.0)
        if reply is None or reply.performative != "AGREE":
            log.warning("%s: announce of %s not accepted: %s",
                        agent.name, name, reply and reply.content)
            seen.discard(name)   # retry on a later scan
        else:
            log.info("%s: announced %s as %s (%s records)",
                     agent.name, name, reply.content, len(records))


# ---------------------------------------------------------------------------
# expert loop

# Conversation states the expert walks through for each ticket.
_IDLE = "idle"
_AWAIT_BUILD = "await-build"
_AWAIT_CHECKOUT = "await-checkout"
_AWAIT_LOAD = "await-load"
_AWAIT_RUN = "await-run"
_AWAIT_RESULT = "await-result"
_AWAIT_REPORT = "await-report"
_AWAIT_RESET = "await-reset"

_STEP_TIMEOUT = 30.0
_BACKOFF_START = 0.5
_BACKOFF_CAP = 8.0


@behaviour_handler("ticket-requester")
def _ticket_requester(agent: Agent, inst):
    """Drive the expert cycle against a ticket board.

    Params: board=<agent name> (required), dewey=<filter|*>,
    signatures=<names>, keymethod=<strategy label>.
    Runs as a ticker; each firing advances the conversation state
    machine by at most one transition.
    """
    s = inst.scratch
    if "state" not in s:
        board_name = inst.spec.param("board")
        if not board_name:
            log.error("%s: ticket-requester needs board=<name>", agent.name)
            inst.finish()
            return
        s["board"] = board_name
        s["dewey"] = inst.spec.param("dewey") or "*"
        s["signatures"] = inst.spec.param("signatures") or "all"
        s["keymethod"] = inst.spec.param("keymethod") or "Efficacy"
        s["backoff"] = _BACKOFF_START
        s["resume_at"] = 0.0
        _submit(agent, s, "MAKE_BUILD", (signature_source(s["signatures"]),))
        s["state"] = _AWAIT_BUILD
        return

    now = time.monotonic()
    if now < s["resume_at"]:
        return
    state = s["state"]

    if state == _IDLE:
        content = shlex.join(["checkout", agent.name, s["dewey"]])
        s["conversation"] = fresh_id("c")
        agent.send(Message(
            performative="REQUEST", sender=agent.id,
            receivers=(_board_id(agent, s),), content=content,
            conversation_id=s["conversation"], reply_with=fresh_id(),
            ontology=ONTOLOGY_TICKETS))
        _enter(s, _AWAIT_CHECKOUT)
        return

    reply = agent.mailbox.receive(MessageTemplate(
        performative=_REPLY, conversation_id=s["conversation"]), timeout=0)
    if reply is None:
        if now - s["since"] > _STEP_TIMEOUT:
            log.warning("%s: %s timed out, restarting cycle",
                        agent.name, state)
            _back_off(s, now)
        return

    if state == _AWAIT_BUILD:
        if reply.performative == "INFORM":
            s["state"] = _IDLE
        else:
            log.error("%s: signature build failed: %s",
                      agent.name, reply.content)
            inst.finish()
    elif state == _AWAIT_CHECKOUT:
        _on_checkout(agent, s, reply, now)
    elif state == _AWAIT_LOAD:
        if reply.performative == "INFORM":
            _submit(agent, s, "RUN_INFINITY")
            _enter(s, _AWAIT_RUN)
        else:
            _report(agent, s, "aborted")
    elif state == _AWAIT_RUN:
        if reply.performative == "INFORM":
            _submit(agent, s, "EVAL_COMMAND", ("(get-result)",))
            _enter(s, _AWAIT_RESULT)
        else:
            _report(agent, s, "aborted")
    elif state == _AWAIT_RESULT:
        if reply.performative == "INFORM":
            verdict = reply.content.splitlines()[-1].strip()
            _report(agent, s, "ALERT !" if verdict == "ALERT" else "finished")
        else:
            _report(agent, s, "aborted")
    elif state == _AWAIT_REPORT:
        if reply.performative != "AGREE":
            log.warning("%s: report rejected: %s", agent.name, reply.content)
        _submit(agent, s, "MAKE_RESET")
        _enter(s, _AWAIT_RESET)
    elif state == _AWAIT_RESET:
        s["backoff"] = _BACKOFF_START
        s["state"] = _IDLE


def _board_id(agent: Agent, s) -> AgentId:
    return AgentId(s["board"], *agent.node.platform_endpoint)


def _enter(s, state: str):
    s["state"] = state
    s["since"] = time.monotonic()


def _submit(agent: Agent, s, code: str, params: tuple[str, ...] = ()):
    s["conversation"] = submit_local(agent, code, params)
    s["since"] = time.monotonic()


def _back_off(s, now: float):
    s["resume_at"] = now + s["backoff"]
    s["backoff"] = min(s["backoff"] * 2, _BACKOFF_CAP)
    s["state"] = _IDLE


def _on_checkout(agent: Agent, s, reply: Message, now: float):
    if reply.performative != "INFORM" or reply.content.strip() == "none":
        _back_off(s, now)   # nothing to do, or board unreachable
        return
    try:
        from .board import parse_row_line
        ticket = parse_row_line(reply.content.split(" ", 1)[1])
    except (BoardError, IndexError) as exc:
        log.error("%s: bad checkout grant: %s", agent.name, exc)
        _back_off(s, now)
        return
    s["ticket"] = ticket
    s["grant_conversation"] = reply.conversation_id
    _submit(agent, s, "LOAD_FACTS", (ticket.datastore,))
    s["state"] = _AWAIT_LOAD


def _report(agent: Agent, s, outcome: str):
    ticket = s["ticket"]
    content = shlex.join([
        "report", ticket.tid, s.get("grant_conversation", ""), outcome,
        s["keymethod"], f"rulekit.{s['signatures']}"])
    s["conversation"] = fresh_id("c")
    agent.send(Message(
        performative="REQUEST", sender=agent.id,
        receivers=(_board_id(agent, s),), content=content,
        conversation_id=s["conversation"], reply_with=fresh_id(),
        ontology=ONTOLOGY_TICKETS))
    _enter(s, _AWAIT_REPORT)
