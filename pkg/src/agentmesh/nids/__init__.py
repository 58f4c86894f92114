"""Network-intrusion-detection demo: watchdogs, ticket board, experts."""

from .board import (BoardError, FIELDS, TERMINAL_STATES, Ticket, TicketBoard,
                    parse_row_line)
from .expert import BUILTIN_SIGNATURES, signature_source
from .factfile import (FactFile, TEMPLATES_SOURCE, capture_fact, packet_fact,
                       write_fact_file)
from .oracle import FLOOD_THRESHOLD, JUMBO_BYTES, scan_alerts
from .pcap import (PacketRecord, PcapError, classify_capture, decode_pcap,
                   read_pcap)

__all__ = [
    "BUILTIN_SIGNATURES", "BoardError", "FIELDS", "FLOOD_THRESHOLD",
    "FactFile", "JUMBO_BYTES", "PacketRecord", "PcapError",
    "TEMPLATES_SOURCE", "TERMINAL_STATES", "Ticket", "TicketBoard",
    "capture_fact", "classify_capture", "decode_pcap", "packet_fact",
    "parse_row_line", "read_pcap", "scan_alerts", "signature_source",
    "write_fact_file",
]
