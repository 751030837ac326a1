"""Network bridge exposing one simulated device on a single TCP port.

Two client flavours share the port. A raw TCP client just speaks the
framed binary protocol. A browser connects with an HTTP upgrade to
``ws:///device`` and exchanges the same frames inside binary WebSocket
messages; the handshake and frame codec are small enough that they are
implemented here directly rather than pulling in a server dependency.

Only one client may be attached at a time. A second connection receives
a busy Nack and is closed. The device keeps ticking on the wall clock
whether or not anyone is connected; dropping the client takes the
firmware link down within one tick.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import logging
import struct

from . import firmware as fw
from . import harness, plant
from . import protocol as proto

log = logging.getLogger(__name__)

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
WS_PATH = "/device"

OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


def ws_accept_key(key: str) -> str:
    digest = hashlib.sha1((key + WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def ws_frame(payload: bytes, opcode: int = OP_BINARY) -> bytes:
    """One unmasked server-to-client frame (FIN set)."""
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 1 << 16:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


async def ws_read_frame(reader: asyncio.StreamReader) -> tuple[int, bytes]:
    """Read one client frame; returns (opcode, unmasked payload)."""
    b0, b1 = await reader.readexactly(2)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    length = b1 & 0x7F
    if length == 126:
        length = struct.unpack(">H", await reader.readexactly(2))[0]
    elif length == 127:
        length = struct.unpack(">Q", await reader.readexactly(8))[0]
    mask = await reader.readexactly(4) if masked else b"\x00" * 4
    payload = await reader.readexactly(length)
    if masked:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, payload


class _Client:
    """One attached transport; hides whether it is raw TCP or WebSocket."""

    def __init__(self, writer: asyncio.StreamWriter, websocket: bool):
        self.writer = writer
        self.websocket = websocket

    def send(self, frame: bytes):
        if self.websocket:
            frame = ws_frame(frame)
        self.writer.write(frame)


class BridgeServer:
    """Single-device, single-client bridge with a wall-clock tick loop."""

    def __init__(self, params: plant.PlantParams, secret: bytes = harness.DEFAULT_SECRET,
                 seed: int = 0, time_scale: float = 1.0,
                 initial_soc: float = 1.0):
        if time_scale < 1.0:
            raise ValueError("time_scale must be >= 1")
        self.device = harness.DeviceSim(params, seed=seed, initial_soc=initial_soc,
                                        secret=secret)
        self.time_scale = time_scale
        self.inbox: list[proto.Message] = []
        self.client: _Client | None = None
        self._server: asyncio.Server | None = None
        self._tick_task: asyncio.Task | None = None

    @property
    def port(self) -> int:
        return self._server.sockets[0].getsockname()[1]

    async def start(self, host: str, port: int):
        self._server = await asyncio.start_server(self._handle, host, port)
        self._tick_task = asyncio.create_task(self._tick_loop())

    async def stop(self):
        if self._tick_task is not None:
            self._tick_task.cancel()
            try:
                await self._tick_task
            except asyncio.CancelledError:
                pass
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def serve_forever(self):
        async with self._server:
            await self._server.serve_forever()

    async def _tick_loop(self):
        loop = asyncio.get_running_loop()
        interval = fw.TICK_S / self.time_scale
        start = loop.time()
        k = 0
        while True:
            k += 1
            # schedule against the start time so drift does not accumulate
            await asyncio.sleep(max(0.0, start + k * interval - loop.time()))
            inbox, self.inbox = self.inbox, []
            self.device.link_ok = self.client is not None
            _, outbox = self.device.tick(inbox)
            client = self.client
            if client is not None:
                try:
                    for msg in outbox:
                        client.send(proto.encode(msg))
                    await client.writer.drain()
                except (ConnectionError, RuntimeError):
                    self._detach(client)

    def _detach(self, client: _Client):
        if self.client is client:
            self.client = None

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        try:
            first = await reader.readexactly(1)
        except (asyncio.IncompleteReadError, ConnectionError):
            writer.close()
            return
        try:
            if first == bytes([proto.SYNC]):
                await self._handle_raw(reader, writer, first)
            else:
                await self._handle_http(reader, writer, first)
        except (asyncio.IncompleteReadError, ConnectionError):
            pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    def _attach(self, writer: asyncio.StreamWriter, websocket: bool) -> _Client | None:
        """Claim the device, or send a busy Nack and refuse."""
        client = _Client(writer, websocket)
        if self.client is not None:
            client.send(proto.encode(proto.Nack(proto.NACK_BUSY)))
            return None
        self.client = client
        return client

    async def _handle_raw(self, reader, writer, first: bytes):
        client = self._attach(writer, websocket=False)
        if client is None:
            await writer.drain()
            return
        decoder = proto.FrameDecoder()
        try:
            data = first
            while data:
                self.inbox.extend(decoder.feed(data))
                data = await reader.read(4096)
        finally:
            self._detach(client)

    async def _handle_http(self, reader, writer, first: bytes):
        request = first + await reader.readuntil(b"\r\n\r\n")
        head, _, _ = request.partition(b"\r\n\r\n")
        lines = head.decode("latin-1").split("\r\n")
        method, path, _ = (lines[0].split(" ") + ["", ""])[:3]
        headers = {}
        for line in lines[1:]:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()
        key = headers.get("sec-websocket-key")
        if (method != "GET" or path != WS_PATH
                or headers.get("upgrade", "").lower() != "websocket" or not key):
            writer.write(b"HTTP/1.1 404 Not Found\r\nConnection: close\r\n"
                         b"Content-Length: 0\r\n\r\n")
            await writer.drain()
            return
        writer.write(
            b"HTTP/1.1 101 Switching Protocols\r\n"
            b"Upgrade: websocket\r\n"
            b"Connection: Upgrade\r\n"
            b"Sec-WebSocket-Accept: " + ws_accept_key(key).encode() + b"\r\n\r\n")
        await writer.drain()

        client = self._attach(writer, websocket=True)
        if client is None:
            await writer.drain()
            return
        decoder = proto.FrameDecoder()
        try:
            while True:
                opcode, payload = await ws_read_frame(reader)
                if opcode == OP_CLOSE:
                    writer.write(ws_frame(payload, OP_CLOSE))
                    await writer.drain()
                    return
                if opcode == OP_PING:
                    writer.write(ws_frame(payload, OP_PONG))
                    await writer.drain()
                elif opcode == OP_BINARY:
                    self.inbox.extend(decoder.feed(payload))
        finally:
            self._detach(client)


def serve(host: str, port: int, params: plant.PlantParams,
          secret: bytes = harness.DEFAULT_SECRET, seed: int = 0,
          time_scale: float = 1.0):
    """Blocking entry point used by the command line."""

    async def _main():
        server = BridgeServer(params, secret=secret, seed=seed, time_scale=time_scale)
        await server.start(host, port)
        log.info("listening on %s:%d", host, server.port)
        print(f"bridge listening on {host}:{server.port}", flush=True)
        try:
            await server.serve_forever()
        finally:
            await server.stop()

    try:
        asyncio.run(_main())
    except KeyboardInterrupt:
        pass
