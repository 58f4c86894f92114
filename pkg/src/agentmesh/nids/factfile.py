"""Capture-to-fact-file conversion.

A fact file is plain rule-language text: one compact `(packet ...)`
assertion per record plus a trailing `(capture ...)` summary, loadable
straight into an engine whose signature rules define the templates.
TCP flag slots are 0/1 integers so signatures can match them with
ordinary literal constraints.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from ..rulekit import FactSpec, Symbol
from .pcap import PacketRecord

# Installed by every signature file; identical re-installs are harmless.
TEMPLATES_SOURCE = """\
(deftemplate packet
  (slot pid) (slot ts) (slot src) (slot dst) (slot sport) (slot dport)
  (slot proto) (slot len)
  (slot syn) (slot ack) (slot fin) (slot rst) (slot psh) (slot urg))
(deftemplate capture (slot name) (slot deweycode) (slot count))
"""

_FLAG_SLOTS = (("syn", "SYN"), ("ack", "ACK"), ("fin", "FIN"),
               ("rst", "RST"), ("psh", "PSH"), ("urg", "URG"))


@dataclass(frozen=True)
class FactFile:
    path: str
    name: str
    deweycode: str
    count: int


def packet_fact(pid: int, rec: PacketRecord) -> FactSpec:
    flags = rec.tcp_flags or frozenset()
    nil = Symbol("nil")
    pairs = [
        ("pid", pid),
        ("ts", rec.ts_sec + rec.ts_usec / 1_000_000),
        ("src", rec.src_ip if rec.src_ip else nil),
        ("dst", rec.dst_ip if rec.dst_ip else nil),
        ("sport", rec.src_port if rec.src_port is not None else nil),
        ("dport", rec.dst_port if rec.dst_port is not None else nil),
        ("proto", Symbol(rec.protocol)),
        ("len", rec.length),
    ]
    pairs.extend((slot, int(name in flags)) for slot, name in _FLAG_SLOTS)
    return FactSpec("packet", tuple(pairs))


def capture_fact(name: str, deweycode: str, count: int) -> FactSpec:
    return FactSpec("capture", (("name", name),
                                ("deweycode", Symbol(deweycode)),
                                ("count", count)))


def write_fact_file(records: list[PacketRecord], deweycode: str,
                    path: str, name: str = "") -> FactFile:
    name = name or os.path.basename(path)
    lines = [packet_fact(i + 1, rec).render_compact()
             for i, rec in enumerate(records)]
    lines.append(capture_fact(name, deweycode, len(records)).render_compact())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return FactFile(path, name, deweycode, len(records))
