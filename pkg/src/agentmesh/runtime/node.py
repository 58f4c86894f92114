"""Node: one process-level container of agents plus its TCP listener.

The first node of a deployment is started without a platform address
and becomes the platform node: it hosts the directory (as service
agent "ams") and relays messages between the other nodes. Every other
node sends non-local traffic to the platform, which either delivers
locally or forwards to the hosting node. Mirrors the main-container
role of classic agent platforms without a discovery protocol.
"""

from __future__ import annotations

import logging
import os
import threading

from ..acl.directory import DirectoryService, handle_directory_request
from ..acl.model import (AgentId, Message, ONTOLOGY_DIRECTORY, fresh_id)
from ..acl.transport import Endpoint, TcpTransport, TransportError
from .agent import Agent
from .behaviour import BehaviourSpec, behaviour_handler
from .mailbox import MessageTemplate

log = logging.getLogger("agentmesh.node")


class NodeError(Exception):
    pass


class Node:
    def __init__(self, name: str, host: str = "127.0.0.1", port: int = 0,
                 platform: Endpoint | None = None,
                 resources_dir: str | None = None):
        self.name = name
        self.transport = TcpTransport(host, port, self._on_wire)
        self.is_platform = platform is None
        self._platform = platform
        self.directory: DirectoryService | None = \
            DirectoryService() if self.is_platform else None
        self.resources_dir = resources_dir
        self.agents: dict[str, Agent] = {}
        self._agents_lock = threading.Lock()
        self._started = False

    # -- lifecycle ----------------------------------------------------------

    def start(self):
        if self._started:
            return
        self.transport.start()
        self._started = True
        if self.is_platform:
            self._platform = self.transport.endpoint
            self._spawn_ams()

    def close(self):
        with self._agents_lock:
            agents = list(self.agents.values())
            self.agents.clear()
        for agent in agents:
            if agent.name != "ams":
                self._deregister(agent)
            agent.stop()
        self.transport.close()

    @property
    def endpoint(self) -> Endpoint:
        return self.transport.endpoint

    @property
    def platform_endpoint(self) -> Endpoint:
        if self._platform is None:
            raise NodeError("node not started")
        return self._platform

    @property
    def ams_id(self) -> AgentId:
        host, port = self.platform_endpoint
        return AgentId("ams", host, port)

    def _spawn_ams(self):
        ams = Agent("ams", self, None)
        ams.runlevel = 5
        ams.attach_behaviour(
            BehaviourSpec("cyclic", "directory-server", "directory-server", 0))
        with self._agents_lock:
            self.agents["ams"] = ams
        assert self.directory is not None
        self.directory.register("ams", *self.endpoint, 5)
        ams.start()

    # -- agents -------------------------------------------------------------

    def spawn_agent(self, name: str, manifest_dir: str | None = None,
                    level: int = 0) -> Agent:
        """Create, register, and start an agent at the given runlevel.

        Manifests for every level up to `level` are validated before the
        agent is registered; a bad or missing manifest leaves no trace.
        """
        if not self._started:
            raise NodeError("node not started")
        with self._agents_lock:
            if name in self.agents:
                raise NodeError(f"agent {name!r} already hosted here")
        agent = Agent(name, self, manifest_dir)
        agent.validate_manifests(level)  # raises before any registration
        with self._agents_lock:
            if name in self.agents:
                raise NodeError(f"agent {name!r} already hosted here")
            self.agents[name] = agent
        try:
            self._register(agent, level)
            agent.enter_initial(level)
        except Exception:
            with self._agents_lock:
                self.agents.pop(name, None)
            raise
        agent.start()
        return agent

    def spawn_internal(self, name: str,
                       specs: list[BehaviourSpec]) -> Agent:
        """Manifest-less service agent at level 5 (gateway and kin)."""
        if not self._started:
            raise NodeError("node not started")
        with self._agents_lock:
            if name in self.agents:
                raise NodeError(f"agent {name!r} already hosted here")
            agent = Agent(name, self, None)
            agent.runlevel = 5
            for spec in specs:
                agent.attach_behaviour(spec)
            self.agents[name] = agent
        try:
            self._register(agent, 5)
        except Exception:
            with self._agents_lock:
                self.agents.pop(name, None)
            raise
        agent.start()
        return agent

    def _register(self, agent: Agent, level: int):
        host, port = self.endpoint
        if self.is_platform:
            assert self.directory is not None
            if not self.directory.register(agent.name, host, port, level):
                raise NodeError(f"duplicate agent id {agent.name!r}")
            return
        # Reply must reach *this* node even though the name is unregistered
        # (or contested), so the sender id carries our own endpoint.
        msg = Message(
            performative="REQUEST",
            sender=AgentId(agent.name, host, port),
            receivers=(self.ams_id,),
            content=f"register {agent.name} {host} {port} {level}",
            conversation_id=fresh_id("c"), reply_with=fresh_id(),
            ontology=ONTOLOGY_DIRECTORY)
        agent.send(msg)
        reply = agent.wait_reply(msg.conversation_id, 5.0)
        if reply is None:
            raise NodeError("platform did not answer registration")
        if reply.performative == "REFUSE":
            raise NodeError(f"duplicate agent id {agent.name!r}")
        if reply.performative != "AGREE":
            raise NodeError(f"registration failed: {reply.content}")

    def _deregister(self, agent: Agent):
        if self.is_platform:
            assert self.directory is not None
            self.directory.deregister(agent.name)
            return
        try:
            msg = Message(performative="REQUEST", sender=agent.id,
                          receivers=(self.ams_id,),
                          content=f"deregister {agent.name}",
                          conversation_id=fresh_id("c"),
                          reply_with=fresh_id(),
                          ontology=ONTOLOGY_DIRECTORY)
            self.transport.send(self.platform_endpoint, msg)
        except TransportError:
            pass

    def agent_level_changed(self, agent: Agent):
        if self.is_platform:
            assert self.directory is not None
            self.directory.update_level(agent.name, agent.runlevel)
            return
        msg = Message(performative="REQUEST", sender=agent.id,
                      receivers=(self.ams_id,),
                      content=f"update-level {agent.name} {agent.runlevel}",
                      conversation_id=fresh_id("c"), reply_with=fresh_id(),
                      ontology=ONTOLOGY_DIRECTORY)
        try:
            self.transport.send(self.platform_endpoint, msg)
        except TransportError as exc:
            log.warning("level update for %s lost: %s", agent.name, exc)

    def resource_path(self, name: str) -> str:
        """Resolve a resource name inside the node resource directory."""
        if self.resources_dir is None:
            raise NodeError("node has no resource directory")
        root = os.path.realpath(self.resources_dir)
        path = os.path.realpath(os.path.join(root, name))
        if path != root and not path.startswith(root + os.sep):
            raise NodeError(f"resource {name!r} escapes the resource directory")
        return path

    # -- routing ------------------------------------------------------------

    def send(self, msg: Message):
        """Deliver to each receiver: locally, or toward its hosting node."""
        for receiver in msg.receivers:
            self._route(msg, receiver, from_wire=False)

    def _on_wire(self, msg: Message):
        for receiver in msg.receivers:
            self._route(msg, receiver, from_wire=True)

    def _route(self, msg: Message, receiver: AgentId, from_wire: bool):
        with self._agents_lock:
            agent = self.agents.get(receiver.name)
        if agent is not None:
            agent.mailbox.post(msg)
            return
        target = (receiver.host, receiver.port)
        if target != self.endpoint and target != self._platform:
            # An id naming a foreign endpoint outranks directory routing.
            # Needed for the registration handshake, where the name is not
            # (or not uniquely) in the directory yet.
            try:
                self.transport.send(target, msg)
            except TransportError as exc:
                self._bounce(msg, receiver, f"unreachable: {exc}")
            return
        if self.is_platform:
            assert self.directory is not None
            entry = self.directory.resolve(receiver.name)
            if entry is None or (entry.host, entry.port) == self.endpoint:
                self._bounce(msg, receiver, f"unknown agent {receiver.name}")
                return
            try:
                self.transport.send((entry.host, entry.port), msg)
            except TransportError as exc:
                self._bounce(msg, receiver, f"unreachable: {exc}")
        elif from_wire:
            # stale forward: the directory thinks the agent lives here
            self._bounce(msg, receiver, f"unknown agent {receiver.name}")
        else:
            try:
                self.transport.send(self.platform_endpoint, msg)
            except TransportError as exc:
                self._bounce(msg, receiver, f"platform unreachable: {exc}")

    def _bounce(self, msg: Message, receiver: AgentId, reason: str):
        if msg.performative == "FAILURE":
            log.warning("dropping undeliverable FAILURE to %s: %s",
                        receiver, reason)
            return
        failure = Message(
            performative="FAILURE", sender=receiver, receivers=(msg.sender,),
            content=f"cannot deliver to {receiver}: {reason}",
            conversation_id=msg.conversation_id, reply_with=fresh_id(),
            in_reply_to=msg.reply_with, ontology=msg.ontology)
        with self._agents_lock:
            origin = self.agents.get(msg.sender.name)
        if origin is not None:
            origin.mailbox.post(failure)
        elif self.is_platform:
            assert self.directory is not None
            entry = self.directory.resolve(msg.sender.name)
            if entry is not None and (entry.host, entry.port) != self.endpoint:
                try:
                    self.transport.send((entry.host, entry.port), failure)
                except TransportError:
                    log.warning("could not report delivery failure to %s",
                                msg.sender)
        else:
            log.warning("could not report delivery failure to %s", msg.sender)


# ---------------------------------------------------------------------------
# catalog: the platform directory service

@behaviour_handler("directory-server",
                   interest=MessageTemplate(performative="REQUEST",
                                            ontology=ONTOLOGY_DIRECTORY))
def _directory_server(agent: Agent, inst):
    msg = agent.mailbox.receive(inst.interest, timeout=0)
    if msg is None:
        inst.block(agent.mailbox.version)
        return
    service = agent.node.directory
    if service is None:
        agent.send(msg.reply("FAILURE", "no directory at this node",
                             sender=agent.id))
        return
    reply = handle_directory_request(service, msg, agent.id)
    if reply is not None:
        agent.send(reply)
