"""Agent communication: message model, wire codec, TCP transport."""

from .codec import CodecError, FrameDecoder, MAX_FRAME, decode_payload, encode
from .model import (ACTION_ARITY, AgentId, EngineCommand, Message,
                    NotUnderstood, ONTOLOGY_ACTIONS, PERFORMATIVES,
                    parse_engine_action, render_engine_action)

__all__ = [
    "ACTION_ARITY", "AgentId", "CodecError", "EngineCommand", "FrameDecoder",
    "MAX_FRAME", "Message", "NotUnderstood", "ONTOLOGY_ACTIONS",
    "PERFORMATIVES", "decode_payload", "encode", "parse_engine_action",
    "render_engine_action",
]
