// Binary codec for the device link. Mirrors the firmware side exactly:
// sync 0xA5 | length u8 | msg_type u8 | payload | crc16 big-endian,
// CRC-16/CCITT-FALSE over length+msg_type+payload.

export const SYNC = 0xa5;
export const MAX_PAYLOAD = 64;

export const enum MsgType {
  Auth = 0x01,
  AuthResult = 0x02,
  SetLevel = 0x03,
  StartHeat = 0x04,
  StopHeat = 0x05,
  SetTimer = 0x06,
  ResetLatch = 0x07,
  Ping = 0x08,
  Pong = 0x09,
  Telemetry = 0x0a,
  Anomaly = 0x0b,
  Nack = 0x0c,
}

export const NACK_REASONS: Record<number, string> = {
  1: "wrong mode",
  2: "authentication required",
  3: "locked out",
  4: "battery low",
  5: "bad argument",
  6: "device busy with another client",
};

export const ANOMALY_NAMES: Record<number, string> = {
  1: "sensor spread trip",
  2: "over-temperature",
  3: "link lost",
  4: "sensor open circuit",
  5: "overcurrent",
  6: "battery low",
  7: "authentication lockout",
};

export interface Telemetry {
  zoneTemps: [number, number, number];
  skinEst: number;
  socPercent: number;
  mode: number;
  dutyBits: number;
}

export type Message =
  | { kind: "auth"; secret: Uint8Array }
  | { kind: "authResult"; ok: boolean }
  | { kind: "setLevel"; level: number }
  | { kind: "startHeat" }
  | { kind: "stopHeat" }
  | { kind: "setTimer"; minutes: number }
  | { kind: "resetLatch" }
  | { kind: "ping" }
  | { kind: "pong" }
  | { kind: "telemetry"; telemetry: Telemetry }
  | { kind: "anomaly"; code: number }
  | { kind: "nack"; reason: number }
  | { kind: "unknown"; msgType: number; payload: Uint8Array };

export function crc16(data: Uint8Array): number {
  let crc = 0xffff;
  for (const byte of data) {
    crc ^= byte << 8;
    for (let i = 0; i < 8; i++) {
      crc = crc & 0x8000 ? ((crc << 1) ^ 0x1021) & 0xffff : (crc << 1) & 0xffff;
    }
  }
  return crc;
}

function frame(msgType: number, payload: Uint8Array): Uint8Array {
  if (payload.length > MAX_PAYLOAD) {
    throw new Error(`payload too large: ${payload.length}`);
  }
  const body = new Uint8Array(2 + payload.length);
  body[0] = payload.length;
  body[1] = msgType;
  body.set(payload, 2);
  const crc = crc16(body);
  const out = new Uint8Array(1 + body.length + 2);
  out[0] = SYNC;
  out.set(body, 1);
  out[out.length - 2] = crc >> 8;
  out[out.length - 1] = crc & 0xff;
  return out;
}

const EMPTY = new Uint8Array(0);

export function encode(msg: Message): Uint8Array {
  switch (msg.kind) {
    case "auth":
      return frame(MsgType.Auth, msg.secret);
    case "authResult":
      return frame(MsgType.AuthResult, Uint8Array.of(msg.ok ? 1 : 0));
    case "setLevel":
      return frame(MsgType.SetLevel, Uint8Array.of(msg.level));
    case "startHeat":
      return frame(MsgType.StartHeat, EMPTY);
    case "stopHeat":
      return frame(MsgType.StopHeat, EMPTY);
    case "setTimer":
      return frame(MsgType.SetTimer, Uint8Array.of(msg.minutes));
    case "resetLatch":
      return frame(MsgType.ResetLatch, EMPTY);
    case "ping":
      return frame(MsgType.Ping, EMPTY);
    case "pong":
      return frame(MsgType.Pong, EMPTY);
    case "telemetry": {
      const t = msg.telemetry;
      const buf = new Uint8Array(11);
      const view = new DataView(buf.buffer);
      view.setInt16(0, Math.round(t.zoneTemps[0] * 100));
      view.setInt16(2, Math.round(t.zoneTemps[1] * 100));
      view.setInt16(4, Math.round(t.zoneTemps[2] * 100));
      view.setInt16(6, Math.round(t.skinEst * 100));
      buf[8] = t.socPercent;
      buf[9] = t.mode;
      buf[10] = t.dutyBits;
      return frame(MsgType.Telemetry, buf);
    }
    case "anomaly":
      return frame(MsgType.Anomaly, Uint8Array.of(msg.code));
    case "nack":
      return frame(MsgType.Nack, Uint8Array.of(msg.reason));
    case "unknown":
      return frame(msg.msgType, msg.payload);
  }
}

function parse(msgType: number, payload: Uint8Array): Message {
  switch (msgType) {
    case MsgType.Auth:
      return { kind: "auth", secret: payload };
    case MsgType.AuthResult:
      if (payload.length === 1) return { kind: "authResult", ok: payload[0] !== 0 };
      break;
    case MsgType.SetLevel:
      if (payload.length === 1 && payload[0] <= 2) {
        return { kind: "setLevel", level: payload[0] };
      }
      break;
    case MsgType.StartHeat:
      if (payload.length === 0) return { kind: "startHeat" };
      break;
    case MsgType.StopHeat:
      if (payload.length === 0) return { kind: "stopHeat" };
      break;
    case MsgType.SetTimer:
      if (payload.length === 1) return { kind: "setTimer", minutes: payload[0] };
      break;
    case MsgType.ResetLatch:
      if (payload.length === 0) return { kind: "resetLatch" };
      break;
    case MsgType.Ping:
      if (payload.length === 0) return { kind: "ping" };
      break;
    case MsgType.Pong:
      if (payload.length === 0) return { kind: "pong" };
      break;
    case MsgType.Telemetry:
      if (payload.length === 11) {
        const view = new DataView(payload.buffer, payload.byteOffset, 11);
        return {
          kind: "telemetry",
          telemetry: {
            zoneTemps: [
              view.getInt16(0) / 100,
              view.getInt16(2) / 100,
              view.getInt16(4) / 100,
            ],
            skinEst: view.getInt16(6) / 100,
            socPercent: payload[8],
            mode: payload[9],
            dutyBits: payload[10],
          },
        };
      }
      break;
    case MsgType.Anomaly:
      if (payload.length === 1) return { kind: "anomaly", code: payload[0] };
      break;
    case MsgType.Nack:
      if (payload.length === 1) return { kind: "nack", reason: payload[0] };
      break;
  }
  return { kind: "unknown", msgType, payload };
}

// Streaming decoder: tolerates split frames, resynchronizes after noise
// and counts CRC failures.
export class FrameDecoder {
  private buffer = new Uint8Array(0);
  dropped = 0;

  feed(data: Uint8Array): Message[] {
    const buf = new Uint8Array(this.buffer.length + data.length);
    buf.set(this.buffer);
    buf.set(data, this.buffer.length);

    const messages: Message[] = [];
    let pos = 0;
    for (;;) {
      const sync = buf.indexOf(SYNC, pos);
      if (sync < 0) {
        pos = buf.length;
        break;
      }
      if (buf.length - sync < 3) {
        pos = sync;
        break;
      }
      const length = buf[sync + 1];
      if (length > MAX_PAYLOAD) {
        pos = sync + 1;
        continue;
      }
      const total = 3 + length + 2;
      if (buf.length - sync < total) {
        pos = sync;
        break;
      }
      const body = buf.subarray(sync + 1, sync + 2 + length + 1);
      const crc = (buf[sync + total - 2] << 8) | buf[sync + total - 1];
      if (crc16(body) !== crc) {
        this.dropped += 1;
        pos = sync + 1;
        continue;
      }
      messages.push(parse(body[1], body.slice(2)));
      pos = sync + total;
    }
    this.buffer = buf.slice(pos);
    return messages;
  }
}

export function toHex(data: Uint8Array): string {
  return Array.from(data, (b) => b.toString(16).padStart(2, "0")).join("");
}
