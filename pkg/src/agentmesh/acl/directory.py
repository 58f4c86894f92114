"""Platform directory: the name -> hosting-node registry.

One node per platform (the one started without a --platform flag) hosts
this registry and exposes it as the service agent "ams". Other nodes
talk to it with plain-text commands over ordinary messages:

    register <name> <host> <port> <level>
    deregister <name>
    update-level <name> <level>     (no reply; fire-and-forget)
    resolve <name>
    list

Agent ids keep the platform endpoint in their address; this registry is
what maps a name to the node actually hosting it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .model import AgentId, Message, ONTOLOGY_DIRECTORY


@dataclass(frozen=True)
class DirectoryEntry:
    name: str
    host: str
    port: int
    level: int

    def line(self) -> str:
        return f"agent {self.name} {self.host} {self.port} {self.level}"


class DirectoryService:
    def __init__(self):
        self._entries: dict[str, DirectoryEntry] = {}
        self._lock = threading.Lock()

    def register(self, name: str, host: str, port: int, level: int) -> bool:
        with self._lock:
            if name in self._entries:
                return False
            self._entries[name] = DirectoryEntry(name, host, port, level)
            return True

    def deregister(self, name: str) -> bool:
        with self._lock:
            return self._entries.pop(name, None) is not None

    def update_level(self, name: str, level: int) -> bool:
        with self._lock:
            entry = self._entries.get(name)
            if entry is None:
                return False
            self._entries[name] = DirectoryEntry(name, entry.host,
                                                 entry.port, level)
            return True

    def resolve(self, name: str) -> DirectoryEntry | None:
        with self._lock:
            return self._entries.get(name)

    def entries(self) -> list[DirectoryEntry]:
        with self._lock:
            return sorted(self._entries.values(), key=lambda e: e.name)


def handle_directory_request(service: DirectoryService, msg: Message,
                             self_id: AgentId) -> Message | None:
    """Map one directory command message to its reply (None = no reply)."""
    words = msg.content.split()
    cmd = words[0] if words else ""
    if cmd == "register" and len(words) == 5:
        name, host, port_s, level_s = words[1:]
        try:
            port, level = int(port_s), int(level_s)
        except ValueError:
            return msg.reply("NOT-UNDERSTOOD", f"bad register {msg.content!r}",
                             sender=self_id, ontology=ONTOLOGY_DIRECTORY)
        if service.register(name, host, port, level):
            return msg.reply("AGREE", f"registered {name}", sender=self_id,
                             ontology=ONTOLOGY_DIRECTORY)
        return msg.reply("REFUSE", f"duplicate agent {name}", sender=self_id,
                         ontology=ONTOLOGY_DIRECTORY)
    if cmd == "deregister" and len(words) == 2:
        service.deregister(words[1])
        return msg.reply("AGREE", f"deregistered {words[1]}", sender=self_id,
                         ontology=ONTOLOGY_DIRECTORY)
    if cmd == "update-level" and len(words) == 3:
        try:
            service.update_level(words[1], int(words[2]))
        except ValueError:
            pass
        return None  # notification, no reply expected
    if cmd == "resolve" and len(words) == 2:
        entry = service.resolve(words[1])
        if entry is None:
            return msg.reply("FAILURE", f"unknown agent {words[1]}",
                             sender=self_id, ontology=ONTOLOGY_DIRECTORY)
        return msg.reply("INFORM", entry.line(), sender=self_id,
                         ontology=ONTOLOGY_DIRECTORY)
    if cmd == "list" and len(words) == 1:
        body = "\n".join(e.line() for e in service.entries())
        return msg.reply("INFORM", body, sender=self_id,
                         ontology=ONTOLOGY_DIRECTORY)
    return msg.reply("NOT-UNDERSTOOD", f"unknown directory command {cmd!r}",
                     sender=self_id, ontology=ONTOLOGY_DIRECTORY)
