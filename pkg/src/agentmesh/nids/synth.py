"""Synthetic capture builder for demos and tests.

Assembles well-formed classic pcap bytes from scratch: Ethernet II,
IPv4 without options, UDP or TCP. Checksums are left zero; the reader
never verifies them. Not a general pcap writer, just enough to feed
the detection pipeline deterministic traffic.
"""

from __future__ import annotations

import struct

_BASE_TS = 1_616_900_000   # fixed epoch so fixtures are reproducible


def _ip(addr: str) -> bytes:
    return bytes(int(p) for p in addr.split("."))


def ethernet(payload: bytes, ethertype: int = 0x0800) -> bytes:
    return (b"\x02\x00\x00\x00\x00\x01" + b"\x02\x00\x00\x00\x00\x02"
            + struct.pack("!H", ethertype) + payload)


def ipv4(src: str, dst: str, protocol: int, payload: bytes) -> bytes:
    total = 20 + len(payload)
    header = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total, 0, 0, 64,
                         protocol, 0, _ip(src), _ip(dst))
    return header + payload

_FLAG_BITS = {"FIN": 0x01, "SYN": 0x02, "RST": 0x04,
              "PSH": 0x08, "ACK": 0x10, "URG": 0x20}


def udp_frame(src: str, dst: str, sport: int, dport: int,
              payload_len: int = 16) -> bytes:
    udp = struct.pack("!HHHH", sport, dport, 8 + payload_len, 0)
    return ethernet(ipv4(src, dst, 17, udp + b"\x00" * payload_len))


def tcp_frame(src: str, dst: str, sport: int, dport: int,
              flags: tuple[str, ...] = ("SYN",)) -> bytes:
    bits = 0
    for f in flags:
        bits |= _FLAG_BITS[f]
    tcp = struct.pack("!HHIIBBHHH", sport, dport, 1, 0, 5 << 4, bits,
                      8192, 0, 0)
    return ethernet(ipv4(src, dst, 6, tcp))


def arp_frame() -> bytes:
    """A non-IPv4 frame; decodes to protocol OTHER."""
    return ethernet(b"\x00" * 28, ethertype=0x0806)


def build_pcap(frames: list[bytes], byte_order: str = "<",
               ts_step_usec: int = 1000) -> bytes:
    """Wrap raw frames into a capture file, timestamps 1 ms apart."""
    out = [struct.pack(byte_order + "IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0,
                       65535, 1)]
    for i, frame in enumerate(frames):
        usec = i * ts_step_usec
        out.append(struct.pack(byte_order + "IIII",
                               _BASE_TS + usec // 1_000_000,
                               usec % 1_000_000, len(frame), len(frame)))
        out.append(frame)
    return b"".join(out)


# -- canned traffic ---------------------------------------------------------

def flood_frames(count: int = 120, src: str = "10.0.0.66") -> list[bytes]:
    """SSDP flood: `count` UDP/1900 packets from one source."""
    return [udp_frame(src, "239.255.255.250", 40000 + i % 100, 1900)
            for i in range(count)]


def benign_frames() -> list[bytes]:
    """Three quiet SSDP packets; triggers nothing."""
    return [udp_frame(f"10.0.0.{i}", "239.255.255.250", 40000 + i, 1900)
            for i in range(1, 4)]


def probe_frames() -> list[bytes]:
    """Mixed traffic with one telnet SYN probe and one jumbo datagram."""
    return [
        tcp_frame("10.0.0.5", "10.0.0.9", 51000, 80, ("SYN",)),
        tcp_frame("10.0.0.7", "10.0.0.9", 51001, 23, ("SYN",)),
        tcp_frame("10.0.0.5", "10.0.0.9", 51000, 23, ("ACK",)),
        udp_frame("10.0.0.8", "10.0.0.9", 5353, 5353, payload_len=4100),
        arp_frame(),
    ]
