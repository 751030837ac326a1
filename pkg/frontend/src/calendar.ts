// Heat-cycle calendar: a local log of heating sessions, grouped by day,
// persisted in localStorage so it survives reloads.

export interface SessionRecord {
  startedAt: number; // ms epoch
  endedAt: number | null;
  level: number; // 0 low, 1 medium, 2 high
}

const STORAGE_KEY = "padsim.sessions";
export const MAX_RECORDS = 500;

export interface StringStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export class SessionLog {
  private records: SessionRecord[];

  constructor(private store: StringStore) {
    this.records = this.load();
  }

  private load(): SessionRecord[] {
    try {
      const raw = this.store.getItem(STORAGE_KEY);
      if (!raw) return [];
      const parsed = JSON.parse(raw);
      return Array.isArray(parsed) ? parsed : [];
    } catch {
      return []; // corrupted storage starts a fresh log
    }
  }

  private save() {
    if (this.records.length > MAX_RECORDS) {
      this.records = this.records.slice(-MAX_RECORDS);
    }
    this.store.setItem(STORAGE_KEY, JSON.stringify(this.records));
  }

  begin(level: number, at: number): void {
    this.endOpen(at);
    this.records.push({ startedAt: at, endedAt: null, level });
    this.save();
  }

  /** Close any still-open session; a crash mid-session leaves one behind. */
  endOpen(at: number): void {
    const open = this.records.find((r) => r.endedAt === null);
    if (open) {
      open.endedAt = Math.max(at, open.startedAt);
      this.save();
    }
  }

  all(): SessionRecord[] {
    return [...this.records];
  }

  /** Sessions grouped by local calendar day, most recent day first. */
  byDay(): { day: string; sessions: SessionRecord[]; totalMinutes: number }[] {
    const groups = new Map<string, SessionRecord[]>();
    for (const r of this.records) {
      const day = new Date(r.startedAt).toLocaleDateString();
      const list = groups.get(day) ?? [];
      list.push(r);
      groups.set(day, list);
    }
    return [...groups.entries()]
      .map(([day, sessions]) => ({
        day,
        sessions,
        totalMinutes: sessions.reduce(
          (sum, s) =>
            sum + (s.endedAt === null ? 0 : (s.endedAt - s.startedAt) / 60000),
          0,
        ),
      }))
      .sort(
        (a, b) => b.sessions[0].startedAt - a.sessions[0].startedAt,
      );
  }
}
