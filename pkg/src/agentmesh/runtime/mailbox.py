"""Per-agent mailbox with selective receive.

post() is safe from any thread. receive() consumes the oldest message
matching a template and leaves everything else queued in order; that
property is what lets one scheduler thread and any number of
request/reply waiters share a single mailbox without stealing each
other's mail, as long as their templates are disjoint.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass

from ..acl.model import Message


@dataclass(frozen=True)
class MessageTemplate:
    """Match over performative / ontology / conversation id.

    A None field matches anything; performative may be a tuple of
    alternatives.
    """
    performative: str | tuple[str, ...] | None = None
    ontology: str | None = None
    conversation_id: str | None = None

    def matches(self, msg: Message) -> bool:
        if self.performative is not None:
            allowed = (self.performative,) if isinstance(self.performative, str) \
                else self.performative
            if msg.performative not in allowed:
                return False
        if self.ontology is not None and msg.ontology != self.ontology:
            return False
        if self.conversation_id is not None \
                and msg.conversation_id != self.conversation_id:
            return False
        return True


MATCH_ANY = MessageTemplate()


class Mailbox:
    def __init__(self):
        self._q: deque[Message] = deque()
        self._arrived: dict[int, float] = {}   # id(msg) -> monotonic arrival
        self._cond = threading.Condition()
        self._version = 0  # bumps on every post/nudge; schedulers wait on it

    def post(self, msg: Message):
        with self._cond:
            self._q.append(msg)
            self._arrived[id(msg)] = time.monotonic()
            self._version += 1
            self._cond.notify_all()

    def nudge(self):
        """Wake waiters without queueing anything (control-path wakeup)."""
        with self._cond:
            self._version += 1
            self._cond.notify_all()

    @property
    def version(self) -> int:
        with self._cond:
            return self._version

    def receive(self, template: MessageTemplate = MATCH_ANY,
                timeout: float | None = 0.0) -> Message | None:
        """Oldest matching message, else None after `timeout` seconds.

        timeout 0 polls; None waits indefinitely.
        """
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            while True:
                for i, msg in enumerate(self._q):
                    if template.matches(msg):
                        del self._q[i]
                        self._arrived.pop(id(msg), None)
                        return msg
                if deadline is None:
                    self._cond.wait()
                    continue
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self._cond.wait(remaining)

    def peek_matching(self, template: MessageTemplate) -> list[Message]:
        """Snapshot of queued messages matching `template` (not consumed)."""
        with self._cond:
            return [m for m in self._q if template.matches(m)]

    def remove(self, msg: Message) -> bool:
        """Remove this exact message (by identity) if still queued."""
        with self._cond:
            for i, queued in enumerate(self._q):
                if queued is msg:
                    del self._q[i]
                    self._arrived.pop(id(msg), None)
                    return True
            return False

    def expire(self, max_age: float, keep=None) -> list[Message]:
        """Drop and return messages queued longer than `max_age` seconds.

        `keep(msg)` true retains a message regardless of age; it runs
        under the mailbox lock and must not touch the mailbox.
        """
        cutoff = time.monotonic() - max_age
        with self._cond:
            stale = [m for m in self._q
                     if self._arrived.get(id(m), cutoff) < cutoff
                     and not (keep is not None and keep(m))]
            for m in stale:
                self._q.remove(m)
                self._arrived.pop(id(m), None)
            return stale

    def wait_version(self, seen: int, timeout: float | None) -> int:
        """Block until the version moves past `seen`; returns the version."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            while self._version == seen:
                if deadline is None:
                    self._cond.wait()
                    continue
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                self._cond.wait(remaining)
            return self._version

    def __len__(self) -> int:
        with self._cond:
            return len(self._q)
