"""Framed binary codec for the app<->device link.

Frame layout (big-endian throughout):

    sync (1B, 0xA5) | length (1B, payload size 0..64) | msg_type (1B)
    | payload | crc (2B, CRC-16/CCITT-FALSE over length+msg_type+payload)

The decoder resynchronizes on the sync byte, drops frames that fail the
CRC and keeps a partial trailing frame for the next call, so it is safe
to feed it arbitrary split or corrupted byte streams.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

SYNC = 0xA5
MAX_PAYLOAD = 64
HEADER_LEN = 3  # sync + length + msg_type
CRC_LEN = 2

TYPE_AUTH = 0x01
TYPE_AUTH_RESULT = 0x02
TYPE_SET_LEVEL = 0x03
TYPE_START_HEAT = 0x04
TYPE_STOP_HEAT = 0x05
TYPE_SET_TIMER = 0x06
TYPE_RESET_LATCH = 0x07
TYPE_PING = 0x08
TYPE_PONG = 0x09
TYPE_TELEMETRY = 0x0A
TYPE_ANOMALY = 0x0B
TYPE_NACK = 0x0C

NACK_WRONG_MODE = 0x01
NACK_AUTH_REQUIRED = 0x02
NACK_LOCKED_OUT = 0x03
NACK_BATTERY_LOW = 0x04
NACK_BAD_ARGUMENT = 0x05
NACK_BUSY = 0x06


class ProtocolError(ValueError):
    pass


def crc16_ccitt(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection)."""
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


@dataclass(frozen=True)
class Auth:
    secret: bytes


@dataclass(frozen=True)
class AuthResult:
    ok: bool


@dataclass(frozen=True)
class SetLevel:
    level: int  # 0 low, 1 medium, 2 high


@dataclass(frozen=True)
class StartHeat:
    pass


@dataclass(frozen=True)
class StopHeat:
    pass


@dataclass(frozen=True)
class SetTimer:
    minutes: int


@dataclass(frozen=True)
class ResetLatch:
    pass


@dataclass(frozen=True)
class Ping:
    pass


@dataclass(frozen=True)
class Pong:
    pass


@dataclass(frozen=True)
class Telemetry:
    zone_temps: tuple[float, float, float]  # degC, 0.01 resolution
    skin_est: float
    soc_percent: int
    mode: int
    duty_bits: int


@dataclass(frozen=True)
class Anomaly:
    code: int


@dataclass(frozen=True)
class Nack:
    reason: int


@dataclass(frozen=True)
class Unknown:
    msg_type: int
    payload: bytes


Message = (Auth | AuthResult | SetLevel | StartHeat | StopHeat | SetTimer
           | ResetLatch | Ping | Pong | Telemetry | Anomaly | Nack | Unknown)


def _centi(value: float) -> int:
    scaled = round(value * 100.0)
    if not -32768 <= scaled <= 32767:
        raise ProtocolError(f"temperature out of s16 centi-degree range: {value}")
    return scaled


def _check_u8(value: int, what: str) -> int:
    if not 0 <= value <= 255:
        raise ProtocolError(f"{what} out of u8 range: {value}")
    return value


def _payload(msg: Message) -> tuple[int, bytes]:
    match msg:
        case Auth(secret):
            if len(secret) > 32:
                raise ProtocolError("secret longer than 32 bytes")
            return TYPE_AUTH, bytes(secret)
        case AuthResult(ok):
            return TYPE_AUTH_RESULT, bytes([1 if ok else 0])
        case SetLevel(level):
            if level not in (0, 1, 2):
                raise ProtocolError(f"bad level code: {level}")
            return TYPE_SET_LEVEL, bytes([level])
        case StartHeat():
            return TYPE_START_HEAT, b""
        case StopHeat():
            return TYPE_STOP_HEAT, b""
        case SetTimer(minutes):
            return TYPE_SET_TIMER, bytes([_check_u8(minutes, "minutes")])
        case ResetLatch():
            return TYPE_RESET_LATCH, b""
        case Ping():
            return TYPE_PING, b""
        case Pong():
            return TYPE_PONG, b""
        case Telemetry(zone_temps, skin_est, soc_percent, mode, duty_bits):
            if len(zone_temps) != 3:
                raise ProtocolError("telemetry needs 3 zone temperatures")
            return TYPE_TELEMETRY, struct.pack(
                ">hhhhBBB",
                *(_centi(t) for t in zone_temps),
                _centi(skin_est),
                _check_u8(soc_percent, "soc"),
                _check_u8(mode, "mode"),
                _check_u8(duty_bits, "duty bits"),
            )
        case Anomaly(code):
            return TYPE_ANOMALY, bytes([_check_u8(code, "anomaly code")])
        case Nack(reason):
            return TYPE_NACK, bytes([_check_u8(reason, "nack reason")])
        case Unknown(msg_type, payload):
            return msg_type, bytes(payload)
    raise ProtocolError(f"cannot encode {msg!r}")


def _parse(msg_type: int, payload: bytes) -> Message:
    if msg_type == TYPE_AUTH:
        return Auth(payload)
    if msg_type == TYPE_AUTH_RESULT and len(payload) == 1:
        return AuthResult(payload[0] != 0)
    if msg_type == TYPE_SET_LEVEL and len(payload) == 1 and payload[0] in (0, 1, 2):
        return SetLevel(payload[0])
    if msg_type == TYPE_START_HEAT and not payload:
        return StartHeat()
    if msg_type == TYPE_STOP_HEAT and not payload:
        return StopHeat()
    if msg_type == TYPE_SET_TIMER and len(payload) == 1:
        return SetTimer(payload[0])
    if msg_type == TYPE_RESET_LATCH and not payload:
        return ResetLatch()
    if msg_type == TYPE_PING and not payload:
        return Ping()
    if msg_type == TYPE_PONG and not payload:
        return Pong()
    if msg_type == TYPE_TELEMETRY and len(payload) == 11:
        t0, t1, t2, skin, soc, mode, duties = struct.unpack(">hhhhBBB", payload)
        return Telemetry((t0 / 100.0, t1 / 100.0, t2 / 100.0), skin / 100.0,
                         soc, mode, duties)
    if msg_type == TYPE_ANOMALY and len(payload) == 1:
        return Anomaly(payload[0])
    if msg_type == TYPE_NACK and len(payload) == 1:
        return Nack(payload[0])
    return Unknown(msg_type, payload)


def encode(msg: Message) -> bytes:
    """Serialize one message as a complete frame."""
    msg_type, payload = _payload(msg)
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError(f"payload too large: {len(payload)} bytes")
    body = bytes([len(payload), msg_type]) + payload
    return bytes([SYNC]) + body + struct.pack(">H", crc16_ccitt(body))


@dataclass
class FrameDecoder:
    """Streaming decoder; keeps partial frames and counts CRC drops."""

    buffer: bytes = b""
    dropped: int = 0

    def feed(self, data: bytes) -> list[Message]:
        self.buffer += data
        messages = []
        buf = self.buffer
        pos = 0
        while True:
            sync = buf.find(bytes([SYNC]), pos)
            if sync < 0:
                pos = len(buf)
                break
            if len(buf) - sync < HEADER_LEN:
                pos = sync
                break
            length = buf[sync + 1]
            if length > MAX_PAYLOAD:
                # cannot be a frame header; skip this sync byte
                pos = sync + 1
                continue
            total = HEADER_LEN + length + CRC_LEN
            if len(buf) - sync < total:
                pos = sync
                break
            body = buf[sync + 1:sync + HEADER_LEN + length]
            crc = struct.unpack(">H", buf[sync + HEADER_LEN + length:sync + total])[0]
            if crc16_ccitt(body) != crc:
                self.dropped += 1
                pos = sync + 1
                continue
            messages.append(_parse(body[1], body[2:]))
            pos = sync + total
        self.buffer = buf[pos:]
        return messages


def decode(stream: bytes) -> tuple[list[Message], bytes]:
    """Decode every complete frame in a buffer; returns messages + remainder."""
    decoder = FrameDecoder()
    messages = decoder.feed(stream)
    return messages, decoder.buffer
