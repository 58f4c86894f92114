"""The agent: one mailbox, one behaviour scheduler, one runlevel.

Runlevels follow the 0/1/3/5 ladder strictly upward, plus 6 as the hot
reboot action. Entering a level loads that level's manifest
(level.00.bf, level.01.bf, level.03.bf, level.05.bf under the agent's
manifest dir). Behaviours activate by stage: none below 3, activation
level <= 1 at 3, everything at 5. Level 6 stops and removes all
behaviours and re-enters level 0; the agent stays registered.

The scheduler is cooperative: one round steps every active, runnable
behaviour once. Handlers must return promptly; long engine work is
delegated to the bridge worker thread. A handler that raises is logged
and its behaviour is retired; the agent keeps running.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from concurrent.futures import Future

from ..acl.model import (AgentId, Message, ONTOLOGY_ACTIONS,
                         ONTOLOGY_LIFECYCLE, ONTOLOGY_PRESENCE, fresh_id)
from .behaviour import (BehaviourInstance, BehaviourSpec, ManifestError,
                        behaviour_handler, parse_manifest)
from .mailbox import Mailbox, MessageTemplate

log = logging.getLogger("agentmesh.agent")

RUNLEVELS = (0, 1, 3, 5)
STALE_MAIL_SECONDS = 60.0
_NEXT_LEVEL = {0: 1, 1: 3, 3: 5}
REPLY_PERFORMATIVES = ("INFORM", "AGREE", "REFUSE", "FAILURE",
                       "NOT-UNDERSTOOD", "CONFIRM")

_LIFECYCLE = MessageTemplate(performative="REQUEST",
                             ontology=ONTOLOGY_LIFECYCLE)
_ANY_REQUEST = MessageTemplate(performative="REQUEST")


class LifecycleError(Exception):
    pass


class Agent:
    def __init__(self, name: str, node, manifest_dir: str | None = None):
        self.name = name
        self.node = node
        self.manifest_dir = manifest_dir
        self.mailbox = Mailbox()
        self.behaviours: list[BehaviourInstance] = []
        self.runlevel: int = 0
        self.engine = None        # set by bridge.attach_engine
        self.engine_worker = None
        self._control: list[tuple] = []
        self._control_lock = threading.Lock()
        self._thread: threading.Thread | None = None
        self._running = False

    @property
    def id(self) -> AgentId:
        host, port = self.node.platform_endpoint
        return AgentId(self.name, host, port)

    # -- lifecycle ----------------------------------------------------------

    def enter_initial(self, level: int):
        """Enter levels 0..level in ladder order (no scheduler yet)."""
        if level not in RUNLEVELS:
            raise LifecycleError(f"no such runlevel {level}")
        self.validate_manifests(level)
        for step in RUNLEVELS:
            self._enter_level(step)
            if step == level:
                break

    def validate_manifests(self, level: int):
        """Parse every manifest the ladder up to `level` will need."""
        names: set[str] = set()
        for step in RUNLEVELS:
            if step > level:
                break
            for spec in self._manifest_specs(step):
                if spec.name in names:
                    raise ManifestError(
                        f"duplicate behaviour name {spec.name!r} "
                        f"(level {step} manifest)")
                names.add(spec.name)

    def _manifest_path(self, level: int) -> str | None:
        if self.manifest_dir is None:
            return None
        return os.path.join(self.manifest_dir, f"level.{level:02d}.bf")

    def _manifest_specs(self, level: int) -> list[BehaviourSpec]:
        path = self._manifest_path(level)
        if path is None:
            return []
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError:
            raise LifecycleError(
                f"missing manifest for level {level}: {path}") from None
        return parse_manifest(text, source=path)

    def _enter_level(self, level: int):
        existing = {b.spec.name for b in self.behaviours}
        for spec in self._manifest_specs(level):
            if spec.name in existing:
                raise ManifestError(
                    f"duplicate behaviour name {spec.name!r}")
            existing.add(spec.name)
            self.behaviours.append(BehaviourInstance(spec, level))
        self.runlevel = level

    def set_runlevel(self, n: int):
        """Step the ladder (1, 3, 5) or hot-reboot (6).

        Thread-safe: from foreign threads the transition is handed to
        the scheduler; LifecycleError propagates to the caller.
        """
        if self._thread is None or self._on_scheduler_thread():
            self._transition(n)
            return
        fut: Future = Future()
        with self._control_lock:
            self._control.append((self._transition, (n,), fut))
        self.mailbox.nudge()
        exc = fut.exception(timeout=30.0)
        if exc is not None:
            raise exc

    def _transition(self, n: int):
        if n == 6:
            for inst in self.behaviours:
                inst.state = "done"
            self.behaviours.clear()
            self._enter_level(0)
        elif n in (1, 3, 5):
            if _NEXT_LEVEL.get(self.runlevel) != n:
                raise LifecycleError(
                    f"illegal transition {self.runlevel} -> {n}")
            self._enter_level(n)
        else:
            raise LifecycleError(f"no such runlevel {n}")
        if self.node is not None:
            self.node.agent_level_changed(self)

    # -- scheduler ----------------------------------------------------------

    def start(self):
        if self._thread is not None:
            return
        self._running = True
        self._thread = threading.Thread(
            target=self._loop, name=f"agent:{self.name}", daemon=True)
        self._thread.start()

    def stop(self):
        self._running = False
        self.mailbox.nudge()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def _on_scheduler_thread(self) -> bool:
        return self._thread is not None \
            and threading.current_thread() is self._thread

    def _loop(self):
        while self._running:
            self.step_round(wait=True)

    def active_instances(self) -> list[BehaviourInstance]:
        if self.runlevel == 5:
            return [b for b in self.behaviours if b.state != "done"]
        if self.runlevel == 3:
            return [b for b in self.behaviours
                    if b.state != "done" and b.spec.activation_level <= 1]
        return []

    def step_round(self, wait: bool = False) -> bool:
        """One scheduler round; returns whether any work happened."""
        progress = self._drain_control()
        progress |= self._handle_lifecycle()
        version = self.mailbox.version
        active = self.active_instances()
        progress |= self._answer_unhandled(active)
        now = time.monotonic()
        for inst in active:
            if not inst.ready(now, version):
                continue
            try:
                inst.step(self)
            except Exception:
                log.exception("behaviour %r failed; retiring it",
                              inst.spec.name)
                inst.state = "done"
            progress = True
        self.behaviours = [b for b in self.behaviours if b.state != "done"]
        if not progress and wait:
            deadlines = [d for d in (b.deadline() for b in active)
                         if d is not None]
            timeout = 1.0
            if deadlines:
                timeout = min(timeout, max(0.0, min(deadlines) - time.monotonic()))
            self.mailbox.wait_version(version, timeout)
        return progress

    def _drain_control(self) -> bool:
        with self._control_lock:
            pending, self._control = self._control, []
        for fn, args, fut in pending:
            try:
                result = fn(*args)
            except Exception as exc:
                fut.set_exception(exc)
            else:
                fut.set_result(result)
        return bool(pending)

    def _handle_lifecycle(self) -> bool:
        progress = False
        while True:
            msg = self.mailbox.receive(_LIFECYCLE, timeout=0)
            if msg is None:
                return progress
            progress = True
            words = msg.content.split()
            if len(words) == 2 and words[0] == "set-level":
                try:
                    n = int(words[1])
                except ValueError:
                    self.send(msg.reply("NOT-UNDERSTOOD",
                                        f"bad level {words[1]!r}",
                                        sender=self.id))
                    continue
                try:
                    self._transition(n)
                except LifecycleError as exc:
                    self.send(msg.reply("REFUSE", str(exc), sender=self.id))
                else:
                    self.send(msg.reply("AGREE", f"level {self.runlevel}",
                                        sender=self.id))
            elif words == ["query-level"]:
                self.send(msg.reply("INFORM", f"level {self.runlevel}",
                                    sender=self.id))
            else:
                self.send(msg.reply("NOT-UNDERSTOOD",
                                    f"unknown lifecycle request {msg.content!r}",
                                    sender=self.id))

    def _answer_unhandled(self, active: list[BehaviourInstance]) -> bool:
        """Reject REQUESTs no active behaviour will ever consume.

        Also evicts long-stale leftovers (replies whose waiter gave up,
        broadcasts nothing here consumes) so the mailbox stays bounded.
        """
        stale = self.mailbox.expire(
            STALE_MAIL_SECONDS,
            keep=lambda m: any(inst.claims(m) for inst in active))
        for msg in stale:
            log.debug("%s: dropping stale %s from %s",
                      self.name, msg.performative, msg.sender)
        progress = bool(stale)
        for msg in self.mailbox.peek_matching(_ANY_REQUEST):
            if any(inst.claims(msg) for inst in active):
                continue
            if not self.mailbox.remove(msg):
                continue
            progress = True
            if msg.ontology == ONTOLOGY_ACTIONS and self.engine is None:
                self.send(msg.reply("REFUSE", "no engine attached",
                                    sender=self.id))
            elif any(inst.claims(msg) for inst in self.behaviours):
                self.send(msg.reply(
                    "REFUSE", f"agent not in service (level {self.runlevel})",
                    sender=self.id))
            else:
                self.send(msg.reply(
                    "NOT-UNDERSTOOD",
                    f"no behaviour handles ontology {msg.ontology!r}",
                    sender=self.id))
        return progress

    # -- messaging ----------------------------------------------------------

    def send(self, msg: Message):
        self.node.send(msg)

    def request(self, receiver: AgentId, content: str, *, ontology: str = "",
                content_type: str = "text/plain",
                conversation_id: str = "", timeout: float = 10.0,
                extra_headers: tuple[tuple[str, str], ...] = ()) -> Message | None:
        """Send a REQUEST and wait for the reply in this conversation."""
        msg = Message(
            performative="REQUEST", sender=self.id, receivers=(receiver,),
            content=content,
            conversation_id=conversation_id or fresh_id("c"),
            reply_with=fresh_id(), ontology=ontology,
            content_type=content_type, extra_headers=extra_headers)
        self.send(msg)
        return self.wait_reply(msg.conversation_id, timeout)

    def wait_reply(self, conversation_id: str,
                   timeout: float = 10.0) -> Message | None:
        template = MessageTemplate(performative=REPLY_PERFORMATIVES,
                                   conversation_id=conversation_id)
        return self.mailbox.receive(template, timeout)

    def attach_behaviour(self, spec: BehaviourSpec,
                         loaded_at_level: int = 0) -> BehaviourInstance:
        """Programmatic attach, used by internal service agents."""
        if any(b.spec.name == spec.name for b in self.behaviours):
            raise ManifestError(f"duplicate behaviour name {spec.name!r}")
        inst = BehaviourInstance(spec, loaded_at_level)
        self.behaviours.append(inst)
        self.mailbox.nudge()
        return inst


# ---------------------------------------------------------------------------
# catalog: liveness probe

@behaviour_handler("presence-responder",
                   interest=MessageTemplate(performative="REQUEST",
                                            ontology=ONTOLOGY_PRESENCE))
def _presence_responder(agent: Agent, inst: BehaviourInstance):
    msg = agent.mailbox.receive(inst.interest, timeout=0)
    if msg is None:
        inst.block(agent.mailbox.version)
        return
    agent.send(msg.reply("CONFIRM", sender=agent.id,
                         ontology=ONTOLOGY_PRESENCE))
