// Connection state machine for one device. Transport-agnostic so tests
// can drive it without a socket; the browser wires it to a WebSocket.

import {
  ANOMALY_NAMES,
  FrameDecoder,
  Message,
  NACK_REASONS,
  Telemetry,
  encode,
} from "./protocol.js";

export interface Transport {
  send(data: Uint8Array): void;
  close(): void;
}

export const MODE_NAMES: Record<number, string> = {
  0: "disconnected",
  1: "unauthenticated",
  2: "idle",
  3: "heating",
  4: "safety latched",
  5: "battery low",
};

// telemetry arrives every 0.5 s; past this silence the data is stale
export const STALE_AFTER_MS = 3000;

export interface DeviceEvents {
  onTelemetry?: (t: Telemetry, at: number) => void;
  onAnomaly?: (code: number, text: string) => void;
  onAuthResult?: (ok: boolean) => void;
  onNack?: (reason: number, text: string) => void;
  onDisconnect?: () => void;
}

export class DeviceClient {
  private decoder = new FrameDecoder();
  private transport: Transport | null = null;

  authed = false;
  lockedOut = false;
  lastTelemetry: Telemetry | null = null;
  lastTelemetryAt = 0;
  failedAuths = 0;

  constructor(
    private events: DeviceEvents,
    private now: () => number = () => Date.now(),
  ) {}

  attach(transport: Transport) {
    this.transport = transport;
    this.decoder = new FrameDecoder();
    this.authed = false;
  }

  detach() {
    this.transport = null;
    this.authed = false;
    this.events.onDisconnect?.();
  }

  get connected(): boolean {
    return this.transport !== null;
  }

  /** Milliseconds since the last telemetry, or null before any arrived. */
  staleness(): number | null {
    if (!this.lastTelemetryAt) return null;
    return this.now() - this.lastTelemetryAt;
  }

  isStale(): boolean {
    const age = this.staleness();
    return this.connected && age !== null && age > STALE_AFTER_MS;
  }

  receive(data: Uint8Array) {
    for (const msg of this.decoder.feed(data)) {
      this.handle(msg);
    }
  }

  private handle(msg: Message) {
    switch (msg.kind) {
      case "telemetry":
        this.lastTelemetry = msg.telemetry;
        this.lastTelemetryAt = this.now();
        this.events.onTelemetry?.(msg.telemetry, this.lastTelemetryAt);
        break;
      case "authResult":
        this.authed = msg.ok;
        if (msg.ok) {
          this.failedAuths = 0;
        } else {
          this.failedAuths += 1;
          if (this.failedAuths >= 5) this.lockedOut = true;
        }
        this.events.onAuthResult?.(msg.ok);
        break;
      case "anomaly": {
        if (msg.code === 7) this.lockedOut = true;
        const text = ANOMALY_NAMES[msg.code] ?? `anomaly ${msg.code}`;
        this.events.onAnomaly?.(msg.code, text);
        break;
      }
      case "nack": {
        if (msg.reason === 3) this.lockedOut = true;
        const text = NACK_REASONS[msg.reason] ?? `refused (${msg.reason})`;
        this.events.onNack?.(msg.reason, text);
        break;
      }
      default:
        break;
    }
  }

  private send(msg: Message) {
    if (!this.transport) throw new Error("not connected");
    this.transport.send(encode(msg));
  }

  auth(secret: string) {
    this.send({ kind: "auth", secret: new TextEncoder().encode(secret) });
  }

  setLevel(level: number) {
    this.send({ kind: "setLevel", level });
  }

  start() {
    this.send({ kind: "startHeat" });
  }

  stop() {
    this.send({ kind: "stopHeat" });
  }

  setTimer(minutes: number) {
    this.send({ kind: "setTimer", minutes });
  }

  resetLatch() {
    this.send({ kind: "resetLatch" });
  }
}

/** Browser transport: the bridge serves binary WebSocket at /device. */
export function connectWebSocket(
  client: DeviceClient,
  url: string,
): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const ws = new WebSocket(url);
    ws.binaryType = "arraybuffer";
    const transport: Transport = {
      send: (data) => ws.send(data),
      close: () => ws.close(),
    };
    ws.onopen = () => {
      client.attach(transport);
      resolve(transport);
    };
    ws.onmessage = (ev) => {
      if (ev.data instanceof ArrayBuffer) client.receive(new Uint8Array(ev.data));
    };
    ws.onerror = () => reject(new Error(`cannot reach ${url}`));
    ws.onclose = () => client.detach();
  });
}
