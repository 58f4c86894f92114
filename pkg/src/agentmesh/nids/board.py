"""The ticket board: shared repository of capture-analysis work items.

Each ticket tracks one converted capture through its life: announced by
a watchdog (pending/unset), checked out by exactly one analyzer, then
closed with a terminal outcome. Mutations append to a journal file and
replay on restart, so the board survives its agent.

Display/wire convention: a ticket row is the eleven fields below in
order, shell-quoted, with "-" standing in for an empty field (the
outcome "ALERT !" contains a space, hence the quoting).
"""

from __future__ import annotations

import datetime
import shlex
import threading
import time
from dataclasses import dataclass, field, replace

FIELDS = ("tid", "datastore", "sender", "tidreply", "framework",
          "deweycode", "statefrom", "stateuntil", "keymethod",
          "parmethod", "engine")
TERMINAL_STATES = ("finished", "aborted", "ALERT !")


class BoardError(Exception):
    pass


@dataclass(frozen=True)
class Ticket:
    tid: str
    datastore: str
    sender: str
    framework: str
    deweycode: str
    tidreply: str = ""
    statefrom: str = "pending"
    stateuntil: str = "unset"
    keymethod: str = ""
    parmethod: str = ""
    engine: str = ""

    def row(self) -> tuple[str, ...]:
        return tuple(getattr(self, f) for f in FIELDS)

    def line(self) -> str:
        return shlex.join(v if v else "-" for v in self.row())


def parse_row_line(line: str) -> Ticket:
    parts = [("" if p == "-" else p) for p in shlex.split(line)]
    if len(parts) != len(FIELDS):
        raise BoardError(f"ticket row needs {len(FIELDS)} fields")
    return Ticket(**dict(zip(FIELDS, parts)))


class TicketBoard:
    """In-memory ticket table with an append-only mutation journal."""

    def __init__(self, journal_path: str | None = None):
        self._lock = threading.Lock()
        self._tickets: dict[str, Ticket] = {}
        self._seq: dict[str, int] = {}   # date prefix -> last sequence
        self._journal = None
        self.on_mutation = None          # callable(Ticket), set by host
        if journal_path:
            self._replay(journal_path)
            self._journal = open(journal_path, "a", encoding="utf-8")

    def close(self):
        if self._journal:
            self._journal.close()
            self._journal = None

    # -- mutations ---------------------------------------------------------

    def announce(self, datastore: str, sender: str, framework: str,
                 deweycode: str) -> str:
        with self._lock:
            tid = self._next_tid()
            ticket = Ticket(tid, datastore, sender, framework, deweycode)
            self._tickets[tid] = ticket
            self._log("announce", tid, datastore, sender, framework,
                      deweycode)
        self._notify(ticket)
        return tid

    def checkout(self, analyzer: str, dewey_filter: str,
                 conversation: str = "") -> Ticket | None:
        """Grant the oldest open ticket matching the filter, or none.

        The grant is atomic: a ticket leaves the unset state exactly
        once, no matter how many analyzers race for it. `conversation`
        is the id of the exchange in which the analyzer asked; it lands
        in the ticket's tidreply column.
        """
        with self._lock:
            for tid in sorted(self._tickets):
                t = self._tickets[tid]
                if t.stateuntil != "unset":
                    continue
                if dewey_filter != "*" and t.deweycode != dewey_filter:
                    continue
                if not conversation:
                    conversation = f"tb-{tid}-{int(time.time() * 1000)}"
                granted = replace(t, stateuntil="checkout",
                                  parmethod=analyzer,
                                  tidreply=conversation)
                self._tickets[tid] = granted
                self._log("checkout", tid, analyzer, conversation)
                break
            else:
                return None
        self._notify(granted)
        return granted

    def report(self, tid: str, conversation: str, outcome: str,
               keymethod: str, engine: str) -> Ticket:
        with self._lock:
            t = self._tickets.get(tid)
            if t is None:
                raise BoardError(f"no ticket {tid}")
            if t.stateuntil != "checkout":
                raise BoardError(
                    f"ticket {tid} is not checked out (state {t.stateuntil!r})")
            if conversation and conversation != t.tidreply:
                raise BoardError(f"conversation mismatch for ticket {tid}")
            if outcome not in TERMINAL_STATES:
                raise BoardError(f"illegal outcome {outcome!r}")
            closed = replace(t, stateuntil=outcome, statefrom="closed",
                             keymethod=keymethod, engine=engine)
            self._tickets[tid] = closed
            self._log("report", tid, outcome, keymethod, engine)
        self._notify(closed)
        return closed

    # -- queries -----------------------------------------------------------

    def tickets(self) -> list[Ticket]:
        with self._lock:
            return [self._tickets[tid] for tid in sorted(self._tickets)]

    def get(self, tid: str) -> Ticket | None:
        with self._lock:
            return self._tickets.get(tid)

    # -- internals ---------------------------------------------------------

    def _next_tid(self) -> str:
        prefix = datetime.date.today().strftime("%y%m%d")
        seq = self._seq.get(prefix, 0) + 1
        self._seq[prefix] = seq
        return f"{prefix}{seq:03d}"

    def _log(self, op: str, tid: str, *fields: str):
        if self._journal:
            stamp = f"{time.time():.3f}"
            self._journal.write(shlex.join((stamp, op, tid) + fields) + "\n")
            self._journal.flush()

    def _notify(self, ticket: Ticket):
        cb = self.on_mutation
        if cb is not None:
            cb(ticket)

    def _replay(self, path: str):
        try:
            fh = open(path, "r", encoding="utf-8")
        except FileNotFoundError:
            return
        with fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    self._apply_journal(shlex.split(line))
                except (BoardError, ValueError, IndexError) as exc:
                    raise BoardError(
                        f"{path}:{lineno}: corrupt journal entry: {exc}"
                    ) from None

    def _apply_journal(self, parts: list[str]):
        _stamp, op, tid = parts[0], parts[1], parts[2]
        rest = parts[3:]
        if op == "announce":
            datastore, sender, framework, deweycode = rest
            self._tickets[tid] = Ticket(tid, datastore, sender, framework,
                                        deweycode)
            prefix, seq = tid[:6], int(tid[6:])
            self._seq[prefix] = max(self._seq.get(prefix, 0), seq)
        elif op == "checkout":
            analyzer, conversation = rest
            t = self._tickets[tid]
            if t.stateuntil != "unset":
                raise BoardError(f"replayed double checkout of {tid}")
            self._tickets[tid] = replace(t, stateuntil="checkout",
                                         parmethod=analyzer,
                                         tidreply=conversation)
        elif op == "report":
            outcome, keymethod, engine = rest
            t = self._tickets[tid]
            if t.stateuntil != "checkout" or outcome not in TERMINAL_STATES:
                raise BoardError(f"replayed illegal report on {tid}")
            self._tickets[tid] = replace(t, stateuntil=outcome,
                                         statefrom="closed",
                                         keymethod=keymethod, engine=engine)
        else:
            raise BoardError(f"unknown journal op {op!r}")
