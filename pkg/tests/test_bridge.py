"""Bridge tests: both transports, busy refusal, link tracking."""

import asyncio
import base64
import os
from pathlib import Path

import pytest

from padsim import bridge, plant
from padsim import protocol as proto

ROOT = Path(__file__).resolve().parents[1]
PARAMS = plant.PlantParams.from_text((ROOT / "plant.default.params").read_text())

# run fast: 50x wall clock makes one firmware tick 10 ms
TIME_SCALE = 50.0


def run_async(coro):
    return asyncio.new_event_loop().run_until_complete(coro)


async def with_server(fn):
    server = bridge.BridgeServer(PARAMS, time_scale=TIME_SCALE)
    await server.start("127.0.0.1", 0)
    try:
        return await fn(server)
    finally:
        await server.stop()


async def read_messages(reader, decoder, want, timeout=5.0):
    got = []
    while not any(want(m) for m in got):
        data = await asyncio.wait_for(reader.read(4096), timeout)
        if not data:
            raise ConnectionError("server closed the stream")
        got.extend(decoder.feed(data))
    return got


def test_ws_accept_key_rfc_example():
    # the handshake example value from RFC 6455 section 1.3
    assert (bridge.ws_accept_key("dGhlIHNhbXBsZSBub25jZQ==")
            == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=")


def test_ws_frame_lengths():
    assert bridge.ws_frame(b"ab")[:2] == b"\x82\x02"
    long = bridge.ws_frame(b"x" * 300)
    assert long[1] == 126
    assert int.from_bytes(long[2:4], "big") == 300


def test_raw_client_auth_and_telemetry():
    async def scenario(server):
        reader, writer = await asyncio.open_connection("127.0.0.1", server.port)
        writer.write(proto.encode(proto.Auth(b"warmth")))
        writer.write(proto.encode(proto.SetLevel(2)))
        writer.write(proto.encode(proto.StartHeat()))
        await writer.drain()
        dec = proto.FrameDecoder()
        got = await read_messages(
            reader, dec, lambda m: isinstance(m, proto.Telemetry) and m.duty_bits == 7)
        assert proto.AuthResult(True) in got
        writer.close()
        return got

    got = run_async(with_server(scenario))
    heating = [m for m in got if isinstance(m, proto.Telemetry) and m.duty_bits]
    assert heating


def test_second_client_gets_busy_nack():
    async def scenario(server):
        r1, w1 = await asyncio.open_connection("127.0.0.1", server.port)
        w1.write(proto.encode(proto.Ping()))
        await w1.drain()
        await read_messages(r1, proto.FrameDecoder(),
                            lambda m: isinstance(m, proto.Pong))
        r2, w2 = await asyncio.open_connection("127.0.0.1", server.port)
        w2.write(proto.encode(proto.Ping()))
        await w2.drain()
        data = await asyncio.wait_for(r2.read(4096), 5.0)
        msgs, _ = proto.decode(data)
        w1.close()
        w2.close()
        return msgs

    msgs = run_async(with_server(scenario))
    assert proto.Nack(proto.NACK_BUSY) in msgs


def test_disconnect_frees_slot_and_drops_link():
    async def scenario(server):
        r1, w1 = await asyncio.open_connection("127.0.0.1", server.port)
        w1.write(proto.encode(proto.Auth(b"warmth")))
        await w1.drain()
        await read_messages(r1, proto.FrameDecoder(),
                            lambda m: isinstance(m, proto.AuthResult))
        w1.close()
        await w1.wait_closed()
        # wait a couple of scaled ticks for the server to notice
        await asyncio.sleep(0.2)
        assert server.client is None
        r2, w2 = await asyncio.open_connection("127.0.0.1", server.port)
        w2.write(proto.encode(proto.Ping()))
        await w2.drain()
        got = await read_messages(r2, proto.FrameDecoder(),
                                  lambda m: isinstance(m, proto.Pong))
        w2.close()
        return got

    got = run_async(with_server(scenario))
    assert any(isinstance(m, proto.Pong) for m in got)


async def ws_connect(port):
    reader, writer = await asyncio.open_connection("127.0.0.1", port)
    key = base64.b64encode(os.urandom(16)).decode()
    writer.write((
        "GET /device HTTP/1.1\r\n"
        f"Host: 127.0.0.1:{port}\r\n"
        "Upgrade: websocket\r\nConnection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
    ).encode())
    await writer.drain()
    head = await reader.readuntil(b"\r\n\r\n")
    assert b"101" in head.split(b"\r\n")[0]
    assert bridge.ws_accept_key(key).encode() in head
    return reader, writer


def ws_client_frame(payload: bytes) -> bytes:
    mask = os.urandom(4)
    masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    assert len(payload) < 126
    return bytes([0x82, 0x80 | len(payload)]) + mask + masked


def test_websocket_path():
    async def scenario(server):
        reader, writer = await ws_connect(server.port)
        writer.write(ws_client_frame(proto.encode(proto.Auth(b"warmth"))))
        await writer.drain()
        dec = proto.FrameDecoder()
        got = []
        while not any(isinstance(m, proto.Telemetry) for m in got):
            op, payload = await asyncio.wait_for(bridge.ws_read_frame(reader), 5.0)
            assert op == bridge.OP_BINARY
            got.extend(dec.feed(payload))
        writer.close()
        return got

    got = run_async(with_server(scenario))
    assert proto.AuthResult(True) in got
    assert any(isinstance(m, proto.Telemetry) for m in got)


def test_http_wrong_path_is_404():
    async def scenario(server):
        reader, writer = await asyncio.open_connection("127.0.0.1", server.port)
        writer.write(b"GET /other HTTP/1.1\r\nHost: x\r\n\r\n")
        await writer.drain()
        head = await asyncio.wait_for(reader.readuntil(b"\r\n\r\n"), 5.0)
        writer.close()
        return head

    head = run_async(with_server(scenario))
    assert b"404" in head.split(b"\r\n")[0]


def test_time_scale_must_be_at_least_one():
    with pytest.raises(ValueError):
        bridge.BridgeServer(PARAMS, time_scale=0.5)
