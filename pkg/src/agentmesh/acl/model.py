"""Message model: agent identities, performatives, engine commands.

Agents are addressed as name@host:port where host:port is the platform
endpoint; the node actually hosting the agent is found through the
platform directory. Seven performatives cover the request/notify
protocol; engine work is carried as an "engine action" content body
restricted to a closed set of 23 command codes with fixed arities.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field, replace

PERFORMATIVES = ("REQUEST", "INFORM", "AGREE", "REFUSE", "FAILURE",
                 "NOT-UNDERSTOOD", "CONFIRM")

ONTOLOGY_ACTIONS = "rbes-actions"
ONTOLOGY_DIRECTORY = "platform-directory"
ONTOLOGY_LIFECYCLE = "agent-lifecycle"
ONTOLOGY_PRESENCE = "presence"
ONTOLOGY_TICKETS = "ticket-board"
ONTOLOGY_BENCH = "bench-report"

CONTENT_PLAIN = "text/plain"
CONTENT_ACTION = "application/x-engine-action"
CONTENT_FACTS = "application/x-fact-batch"


class NotUnderstood(Exception):
    """Malformed or out-of-vocabulary request content."""


@dataclass(frozen=True)
class AgentId:
    name: str
    host: str
    port: int

    def __str__(self) -> str:
        return f"{self.name}@{self.host}:{self.port}"

    @classmethod
    def parse(cls, text: str) -> "AgentId":
        name, sep, rest = text.partition("@")
        host, sep2, port = rest.rpartition(":")
        if not (name and sep and host and sep2):
            raise ValueError(f"bad agent id {text!r}")
        try:
            return cls(name, host, int(port))
        except ValueError:
            raise ValueError(f"bad agent id {text!r}") from None


_mid_counter = itertools.count(1)
_mid_lock = threading.Lock()


def fresh_id(prefix: str = "m") -> str:
    with _mid_lock:
        n = next(_mid_counter)
    return f"{prefix}{int(time.time() * 1000)}-{n}"


@dataclass(frozen=True)
class Message:
    performative: str
    sender: AgentId
    receivers: tuple[AgentId, ...]
    content: str = ""
    conversation_id: str = ""
    reply_with: str = ""
    in_reply_to: str = ""
    ontology: str = ""
    content_type: str = CONTENT_PLAIN
    # unknown headers survive decode/encode untouched, in order
    extra_headers: tuple[tuple[str, str], ...] = field(default=())

    def __post_init__(self):
        if self.performative not in PERFORMATIVES:
            raise ValueError(f"unknown performative {self.performative!r}")
        if not self.receivers:
            raise ValueError("message needs at least one receiver")

    def reply(self, performative: str, content: str = "",
              sender: AgentId | None = None, *, ontology: str | None = None,
              content_type: str | None = None) -> "Message":
        """A reply addressed to this message's sender."""
        return Message(
            performative=performative,
            sender=sender if sender is not None else self.receivers[0],
            receivers=(self.sender,),
            content=content,
            conversation_id=self.conversation_id,
            reply_with=fresh_id(),
            in_reply_to=self.reply_with,
            ontology=ontology if ontology is not None else self.ontology,
            content_type=content_type if content_type is not None
            else CONTENT_PLAIN,
        )

    def header(self, name: str, default: str = "") -> str:
        for k, v in self.extra_headers:
            if k.lower() == name.lower():
                return v
        return default

    def with_headers(self, *pairs: tuple[str, str]) -> "Message":
        return replace(self, extra_headers=self.extra_headers + pairs)


def request(sender: AgentId, receiver: AgentId, content: str, *,
            ontology: str = "", content_type: str = CONTENT_PLAIN,
            conversation_id: str = "") -> Message:
    return Message(
        performative="REQUEST", sender=sender, receivers=(receiver,),
        content=content,
        conversation_id=conversation_id or fresh_id("c"),
        reply_with=fresh_id(), ontology=ontology, content_type=content_type)


# ---------------------------------------------------------------------------
# engine actions

# code -> parameter count; the closed command vocabulary
ACTION_ARITY = {
    "LOAD_FILE": 1,              # path of a rules/constructs file
    "LOAD_FACTS": 1,             # path of a fact file
    "LOAD_FROM_RESOURCE": 1,     # name under the node resource directory
    "LOAD_FROM_STRING": 1,       # CSV text: header row, one fact per line
    "LOAD_ASSERT_STRING": 1,     # fact forms as a string
    "LOAD_BLOAD": 1,             # path of a framed memory dump
    "LOAD_SLOAD": 1,             # path of a text memory dump
    "RUN_INFINITY": 0,
    "RUN_NUMBER_OF_CYCLES": 1,
    "RUN_ONCE_THEN_BATCH": 0,
    "RUN_INNER_SHELL": 0,        # needs an X-Shell-Session header
    "MAKE_RESET": 0,
    "MAKE_CLEAR": 0,
    "MAKE_MEMORY_DUMP": 2,       # format (text|framed), destination path
    "MAKE_ASSERT_STRING": 1,     # one fact form
    "MAKE_BUILD": 1,             # one construct source string
    "EVAL_COMMAND": 1,
    "SET_INPUT_BUFFER_COUNT": 0,
    "APPEND_INPUT_BUFFER": 1,
    "SET_UNWATCH": 1,
    "SET_WATCH": 1,
    "GET_FACT_SLOT": 2,          # fact id, slot name
    "FACT_INDEX": 1,             # fact id the cursor moves to
}

assert len(ACTION_ARITY) == 23


@dataclass(frozen=True)
class EngineCommand:
    code: str
    params: tuple[str, ...] = ()


def render_engine_action(cmd: EngineCommand) -> str:
    """Engine-action content body: code line, then one line per param.

    Parameters are single-line strings; embedded newlines are escaped so
    multi-line sources (MAKE_BUILD, APPEND_INPUT_BUFFER) survive.
    """
    arity = ACTION_ARITY.get(cmd.code)
    if arity is None:
        raise NotUnderstood(f"unknown engine action {cmd.code!r}")
    if len(cmd.params) != arity:
        raise NotUnderstood(
            f"{cmd.code} takes {arity} parameter(s), got {len(cmd.params)}")
    lines = [cmd.code]
    for p in cmd.params:
        lines.append(p.replace("\\", "\\\\").replace("\n", "\\n"))
    return "\n".join(lines)


def parse_engine_action(content: str) -> EngineCommand:
    lines = content.split("\n")
    while lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise NotUnderstood("empty engine action")
    code = lines[0].strip()
    arity = ACTION_ARITY.get(code)
    if arity is None:
        raise NotUnderstood(f"unknown engine action {code!r}")
    params = tuple(_unescape(p) for p in lines[1:])
    if len(params) != arity:
        raise NotUnderstood(
            f"{code} takes {arity} parameter(s), got {len(params)}")
    return EngineCommand(code, params)


def _unescape(line: str) -> str:
    out = []
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == "\\" and i + 1 < len(line):
            nxt = line[i + 1]
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)
