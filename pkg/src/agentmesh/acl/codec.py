"""Wire codec: length-prefixed, human-readable message frames.

Frame: 4-byte big-endian payload length, then the UTF-8 payload. The
payload is a versioned header/body document:

    ACL/1
    Performative: REQUEST
    Sender: analyzer@10.0.0.2:7001
    Receiver: target@10.0.0.2:7001
    Conversation-Id: c17...
    Reply-With: m17...
    Ontology: rbes-actions
    Content-Type: application/x-engine-action
    <blank line>
    RUN_NUMBER_OF_CYCLES
    10

One Receiver line per receiver. Header keys outside the known set are
carried through decode/encode untouched, in order. Frames larger than
1 MiB are rejected outright so a bad peer cannot balloon memory.
"""

from __future__ import annotations

import struct

from .model import AgentId, Message

MAX_FRAME = 1 << 20  # payload byte limit

_KNOWN = ("performative", "sender", "receiver", "conversation-id",
          "reply-with", "in-reply-to", "ontology", "content-type")


class CodecError(Exception):
    pass


def encode_payload(msg: Message) -> bytes:
    for value in (msg.conversation_id, msg.reply_with, msg.in_reply_to,
                  msg.ontology, msg.content_type):
        if "\n" in value:
            raise CodecError(f"newline in header value {value!r}")
    lines = ["ACL/1", f"Performative: {msg.performative}",
             f"Sender: {msg.sender}"]
    for r in msg.receivers:
        lines.append(f"Receiver: {r}")
    if msg.conversation_id:
        lines.append(f"Conversation-Id: {msg.conversation_id}")
    if msg.reply_with:
        lines.append(f"Reply-With: {msg.reply_with}")
    if msg.in_reply_to:
        lines.append(f"In-Reply-To: {msg.in_reply_to}")
    if msg.ontology:
        lines.append(f"Ontology: {msg.ontology}")
    if msg.content_type:
        lines.append(f"Content-Type: {msg.content_type}")
    for k, v in msg.extra_headers:
        if not k or ":" in k or "\n" in k or "\n" in v:
            raise CodecError(f"bad extra header {k!r}")
        lines.append(f"{k}: {v}")
    doc = "\n".join(lines) + "\n\n" + msg.content
    return doc.encode("utf-8")


def encode(msg: Message) -> bytes:
    payload = encode_payload(msg)
    if len(payload) > MAX_FRAME:
        raise CodecError(f"frame too large ({len(payload)} bytes)")
    return struct.pack(">I", len(payload)) + payload


def decode_payload(payload: bytes) -> Message:
    try:
        doc = payload.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CodecError(f"payload is not UTF-8: {exc}") from None
    head, sep, content = doc.partition("\n\n")
    if not sep:
        raise CodecError("missing blank line after headers")
    lines = head.split("\n")
    if not lines or lines[0] != "ACL/1":
        raise CodecError(f"unsupported envelope version {lines[0]!r}")

    fields: dict[str, str] = {}
    receivers: list[AgentId] = []
    extras: list[tuple[str, str]] = []
    for line in lines[1:]:
        key, sep2, value = line.partition(": ")
        if not sep2 or not key:
            raise CodecError(f"malformed header line {line!r}")
        lk = key.lower()
        if lk == "receiver":
            try:
                receivers.append(AgentId.parse(value))
            except ValueError as exc:
                raise CodecError(str(exc)) from None
        elif lk in _KNOWN:
            if lk in fields:
                raise CodecError(f"duplicate header {key}")
            fields[lk] = value
        else:
            extras.append((key, value))

    if "performative" not in fields:
        raise CodecError("missing Performative header")
    if "sender" not in fields:
        raise CodecError("missing Sender header")
    if not receivers:
        raise CodecError("missing Receiver header")
    try:
        sender = AgentId.parse(fields["sender"])
    except ValueError as exc:
        raise CodecError(str(exc)) from None
    try:
        return Message(
            performative=fields["performative"],
            sender=sender,
            receivers=tuple(receivers),
            content=content,
            conversation_id=fields.get("conversation-id", ""),
            reply_with=fields.get("reply-with", ""),
            in_reply_to=fields.get("in-reply-to", ""),
            ontology=fields.get("ontology", ""),
            content_type=fields.get("content-type", ""),
            extra_headers=tuple(extras),
        )
    except ValueError as exc:
        raise CodecError(str(exc)) from None


class FrameDecoder:
    """Incremental frame splitter for one byte stream."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Message]:
        self._buf.extend(data)
        out = []
        while True:
            if len(self._buf) < 4:
                return out
            (length,) = struct.unpack_from(">I", self._buf)
            if length > MAX_FRAME:
                raise CodecError(f"frame too large ({length} bytes)")
            if len(self._buf) < 4 + length:
                return out
            payload = bytes(self._buf[4:4 + length])
            del self._buf[:4 + length]
            out.append(decode_payload(payload))

    def pending(self) -> int:
        return len(self._buf)
