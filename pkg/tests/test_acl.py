"""Message model, wire codec, and transport contracts.

The fuzz corpus here is generated, not recorded: 10k random valid
messages must round-trip bit-identically, and random byte mutations of
valid frames must either decode or raise CodecError, never anything
else.
"""

import random
import string
import threading
import time

import pytest

from agentmesh.acl.codec import (CodecError, FrameDecoder, MAX_FRAME, decode_payload,
                                 encode, encode_payload)
from agentmesh.acl.model import (ACTION_ARITY, AgentId, EngineCommand,
                                 Message, NotUnderstood, PERFORMATIVES,
                                 parse_engine_action, render_engine_action)
from agentmesh.acl.transport import TcpTransport, TransportError

A = AgentId("alice", "127.0.0.1", 7001)
B = AgentId("bob", "127.0.0.1", 7001)


# ---------------------------------------------------------------------------
# identities and the message dataclass

def test_agent_id_round_trip():
    for text in ("x@h:1", "a.b-c@10.0.0.7:65535", "n@fe80::1:9"):
        assert str(AgentId.parse(text)) == text


@pytest.mark.parametrize("bad", ["", "noat", "@h:1", "x@:1", "x@h:", "x@h:pq"])
def test_agent_id_rejects(bad):
    with pytest.raises(ValueError):
        AgentId.parse(bad)


def test_message_validation():
    with pytest.raises(ValueError):
        Message(performative="SHOUT", sender=A, receivers=(B,))
    with pytest.raises(ValueError):
        Message(performative="INFORM", sender=A, receivers=())


def test_reply_threads_conversation():
    req = Message(performative="REQUEST", sender=A, receivers=(B,),
                  content="do", conversation_id="c9", reply_with="m1",
                  ontology="x")
    rep = req.reply("INFORM", "done")
    assert rep.receivers == (A,)
    assert rep.sender == B
    assert rep.conversation_id == "c9"
    assert rep.in_reply_to == "m1"
    assert rep.ontology == "x"


def test_extra_headers_lookup_case_insensitive():
    m = Message(performative="INFORM", sender=A, receivers=(B,),
                extra_headers=(("X-Thing", "7"),))
    assert m.header("x-thing") == "7"
    assert m.header("absent", "d") == "d"


# ---------------------------------------------------------------------------
# engine action bodies

def test_action_vocabulary_is_closed_at_23():
    assert len(ACTION_ARITY) == 23


@pytest.mark.parametrize("code,arity", sorted(ACTION_ARITY.items()))
def test_action_render_parse_round_trip(code, arity):
    params = tuple(f"param-{i}\nline2\\tail" for i in range(arity))
    cmd = EngineCommand(code, params)
    assert parse_engine_action(render_engine_action(cmd)) == cmd


@pytest.mark.parametrize("code,arity", sorted(ACTION_ARITY.items()))
def test_action_wrong_arity_rejected(code, arity):
    with pytest.raises(NotUnderstood):
        render_engine_action(EngineCommand(code, ("x",) * (arity + 1)))
    with pytest.raises(NotUnderstood):
        parse_engine_action("\n".join([code] + ["x"] * (arity + 2)))


def test_action_unknown_code():
    with pytest.raises(NotUnderstood):
        parse_engine_action("MAKE_COFFEE")
    with pytest.raises(NotUnderstood):
        parse_engine_action("")


# ---------------------------------------------------------------------------
# codec

def test_codec_golden_payload():
    msg = Message(performative="REQUEST", sender=A, receivers=(B,),
                  content="RUN_NUMBER_OF_CYCLES\n10",
                  conversation_id="c1", reply_with="m1",
                  ontology="rbes-actions",
                  content_type="application/x-engine-action")
    payload = encode_payload(msg)
    assert payload == (b"ACL/1\n"
                       b"Performative: REQUEST\n"
                       b"Sender: alice@127.0.0.1:7001\n"
                       b"Receiver: bob@127.0.0.1:7001\n"
                       b"Conversation-Id: c1\n"
                       b"Reply-With: m1\n"
                       b"Ontology: rbes-actions\n"
                       b"Content-Type: application/x-engine-action\n"
                       b"\n"
                       b"RUN_NUMBER_OF_CYCLES\n10")
    assert decode_payload(payload) == msg
    framed = encode(msg)
    assert framed[:4] == len(payload).to_bytes(4, "big")


def test_codec_rejects_newline_headers():
    msg = Message(performative="INFORM", sender=A, receivers=(B,),
                  conversation_id="a\nb")
    with pytest.raises(CodecError):
        encode_payload(msg)


def test_codec_rejects_bad_extra_header():
    msg = Message(performative="INFORM", sender=A, receivers=(B,),
                  extra_headers=(("Bad:Key", "v"),))
    with pytest.raises(CodecError):
        encode_payload(msg)


@pytest.mark.parametrize("payload,why", [
    (b"ACL/2\nPerformative: INFORM\nSender: a@h:1\nReceiver: b@h:1\n\n", "version"),
    (b"ACL/1\nPerformative: INFORM\nSender: a@h:1\n\n", "no receiver"),
    (b"ACL/1\nSender: a@h:1\nReceiver: b@h:1\n\n", "no performative"),
    (b"ACL/1\nPerformative: INFORM\nSender: a@h:1\nReceiver: b@h:1", "no blank"),
    (b"ACL/1\nPerformative: INFORM\nPerformative: X\nSender: a@h:1\nReceiver: b@h:1\n\n", "dup"),
    (b"ACL/1\nPerformative: SHOUT\nSender: a@h:1\nReceiver: b@h:1\n\n", "performative"),
    (b"\xff\xfe", "not utf-8"),
])
def test_codec_rejects_malformed(payload, why):
    with pytest.raises(CodecError):
        decode_payload(payload)


def test_frame_cap():
    msg = Message(performative="INFORM", sender=A, receivers=(B,),
                  content="x" * (MAX_FRAME + 1))
    with pytest.raises(CodecError):
        encode(msg)
    dec = FrameDecoder()
    with pytest.raises(CodecError):
        dec.feed((MAX_FRAME + 1).to_bytes(4, "big"))


_NAME_CHARS = string.ascii_letters + string.digits + ".-_"
_HDR_CHARS = string.ascii_letters + string.digits + " .-_/+=;"
_CONTENT_CHARS = string.printable + "äöü€→"


def _random_message(rng: random.Random) -> Message:
    def name():
        return "".join(rng.choices(_NAME_CHARS, k=rng.randint(1, 12)))

    def agent():
        return AgentId(name(), f"10.0.{rng.randrange(256)}.{rng.randrange(256)}",
                       rng.randint(1, 65535))

    def hdr_value():
        return "".join(rng.choices(_HDR_CHARS, k=rng.randint(0, 20))).strip()

    extras = []
    used = {k.lower() for k in
            ("performative", "sender", "receiver", "conversation-id",
             "reply-with", "in-reply-to", "ontology", "content-type")}
    for _ in range(rng.randint(0, 3)):
        key = "X-" + name()
        if key.lower() in used:
            continue
        used.add(key.lower())
        extras.append((key, hdr_value()))
    content = "".join(rng.choices(_CONTENT_CHARS, k=rng.randint(0, 200)))
    return Message(
        performative=rng.choice(PERFORMATIVES),
        sender=agent(),
        receivers=tuple(agent() for _ in range(rng.randint(1, 3))),
        content=content,
        conversation_id=hdr_value(),
        reply_with=hdr_value(),
        in_reply_to=hdr_value(),
        ontology=hdr_value(),
        content_type=rng.choice(("text/plain", "application/x-engine-action",
                                 "application/x-fact-batch")),
        extra_headers=tuple(extras))


def test_codec_fuzz_round_trip_10k():
    rng = random.Random(42)
    for i in range(10_000):
        msg = _random_message(rng)
        assert decode_payload(encode_payload(msg)) == msg, f"case {i}"


def test_codec_fuzz_mutations_never_crash():
    rng = random.Random(7)
    base = encode_payload(_random_message(rng))
    for i in range(2_000):
        blob = bytearray(base)
        for _ in range(rng.randint(1, 6)):
            op = rng.random()
            if op < 0.5 and blob:
                blob[rng.randrange(len(blob))] = rng.randrange(256)
            elif op < 0.75:
                del blob[rng.randrange(len(blob) + 1):]
            else:
                blob.insert(rng.randrange(len(blob) + 1), rng.randrange(256))
        try:
            decode_payload(bytes(blob))
        except CodecError:
            pass   # rejection is the expected failure mode


def test_frame_decoder_reassembles_arbitrary_chunks():
    rng = random.Random(11)
    msgs = [_random_message(rng) for _ in range(50)]
    stream = b"".join(encode(m) for m in msgs)
    for trial in range(30):
        dec = FrameDecoder()
        got = []
        i = 0
        while i < len(stream):
            step = rng.randint(1, 97)
            got.extend(dec.feed(stream[i:i + step]))
            i += step
        assert got == msgs
        assert dec.pending() == 0


def test_fact_batch_size_band():
    """A 40-fact batch request stays in the low-single-digit-kB band."""
    header = "packet,pid,ts,src,dst,sport,dport,proto,len,syn,ack,fin,rst,psh,urg"
    rows = [header]
    for i in range(40):
        rows.append(f"packet,{i},1616900000.{i:06d},192.168.1.{i % 250},"
                    f"239.255.255.250,49{i:03d},1900,UDP,320,0,0,0,0,0,0")
    body = render_engine_action(
        EngineCommand("LOAD_FROM_STRING", ("\n".join(rows),)))
    msg = Message(performative="REQUEST", sender=A, receivers=(B,),
                  content=body, conversation_id="c1", reply_with="m1",
                  ontology="rbes-actions",
                  content_type="application/x-engine-action")
    size = len(encode_payload(msg))
    assert 2048 <= size <= 5120, f"batch payload {size} bytes"


# ---------------------------------------------------------------------------
# transport

@pytest.fixture
def pipe():
    """Two live transports; b's inbox collects whatever arrives."""
    inbox: list[Message] = []
    got = threading.Event()

    def on_message(msg):
        inbox.append(msg)
        got.set()

    a = TcpTransport("127.0.0.1", 0, lambda m: None)
    b = TcpTransport("127.0.0.1", 0, on_message)
    a.start()
    b.start()
    yield a, b, inbox, got
    a.close()
    b.close()


def _msg(i, sender="alice"):
    return Message(performative="INFORM",
                   sender=AgentId(sender, "127.0.0.1", 1),
                   receivers=(B,), content=str(i))


def test_transport_preserves_send_order(pipe):
    a, b, inbox, _ = pipe
    for i in range(100):
        a.send(b.endpoint, _msg(i))
    deadline = time.monotonic() + 5
    while len(inbox) < 100 and time.monotonic() < deadline:
        time.sleep(0.01)
    assert [m.content for m in inbox] == [str(i) for i in range(100)]


def test_transport_interleaves_but_keeps_per_sender_order(pipe):
    a, b, inbox, _ = pipe
    c = TcpTransport("127.0.0.1", 0, lambda m: None)
    c.start()
    try:
        def blast(t, who):
            for i in range(200):
                t.send(b.endpoint, _msg(i, who))
        ta = threading.Thread(target=blast, args=(a, "alice"))
        tc = threading.Thread(target=blast, args=(c, "carol"))
        ta.start()
        tc.start()
        ta.join()
        tc.join()
        deadline = time.monotonic() + 5
        while len(inbox) < 400 and time.monotonic() < deadline:
            time.sleep(0.01)
        assert len(inbox) == 400
        for who in ("alice", "carol"):
            seq = [int(m.content) for m in inbox if m.sender.name == who]
            assert seq == list(range(200))
    finally:
        c.close()


def test_transport_dead_endpoint_raises(pipe):
    a, b, _, _ = pipe
    dead = ("127.0.0.1", b.endpoint[1])
    b.close()
    time.sleep(0.05)
    with pytest.raises(TransportError):
        a.send(dead, _msg(0))
        # a cached connection may absorb the first write; the next must fail
        a.send(dead, _msg(1))
        time.sleep(0.2)
        a.send(dead, _msg(2))


def test_transport_closed_refuses_sends(pipe):
    a, b, _, _ = pipe
    a.close()
    with pytest.raises(TransportError):
        a.send(b.endpoint, _msg(0))
