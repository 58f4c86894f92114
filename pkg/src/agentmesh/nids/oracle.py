"""Direct reimplementation of the shipped signatures, no rules involved.

Used to cross-check engine output: on any capture, the alert set the
rules derive must equal the set this scan computes.
"""

from __future__ import annotations

from collections import Counter

from .pcap import PacketRecord

FLOOD_THRESHOLD = 100
JUMBO_BYTES = 4096


def scan_alerts(records: list[PacketRecord]) -> set[tuple[str, str]]:
    """Returns {(kind, source-ip)} for the three reference signatures."""
    alerts: set[tuple[str, str]] = set()
    ssdp_by_src: Counter[str] = Counter()
    for r in records:
        if (r.protocol == "TCP" and r.dst_port == 23
                and r.tcp_flags is not None and "SYN" in r.tcp_flags):
            alerts.add(("telnet-probe", r.src_ip))
        if r.protocol == "UDP":
            if r.length >= JUMBO_BYTES:
                alerts.add(("jumbo-udp", r.src_ip))
            if r.dst_port == 1900:
                ssdp_by_src[r.src_ip] += 1
    for src, n in ssdp_by_src.items():
        if n >= FLOOD_THRESHOLD:
            alerts.add(("ssdp-flood", src))
    return alerts
