// Dashboard wiring: connects the device client to the DOM.

import { SessionLog } from "./calendar.js";
import { StripChart } from "./chart.js";
import { DeviceClient, MODE_NAMES, connectWebSocket } from "./device.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const hostInput = $<HTMLInputElement>("host");
const secretInput = $<HTMLInputElement>("secret");
const connectBtn = $<HTMLButtonElement>("connect");
const statusEl = $("status");
const staleEl = $("stale");
const banner = $("banner");
const modeEl = $("mode");
const socEl = $("soc");
const zoneEls = [0, 1, 2].map((z) => $(`zone${z}`));
const skinEl = $("skin");
const timerInput = $<HTMLInputElement>("timer-minutes");
const calendarEl = $("calendar");

const chart = new StripChart($<HTMLCanvasElement>("chart"));
const log = new SessionLog(window.localStorage);

let bannerTimer: number | undefined;
function showBanner(text: string, sticky = false) {
  banner.textContent = text;
  banner.classList.add("visible");
  window.clearTimeout(bannerTimer);
  if (!sticky) {
    bannerTimer = window.setTimeout(() => banner.classList.remove("visible"), 8000);
  }
}

let heating = false;
let level = 1;

const client = new DeviceClient({
  onTelemetry(t, at) {
    chart.push({ at, zones: t.zoneTemps, skin: t.skinEst });
    modeEl.textContent = MODE_NAMES[t.mode] ?? `mode ${t.mode}`;
    socEl.textContent = `${t.socPercent}%`;
    t.zoneTemps.forEach((temp, z) => {
      zoneEls[z].textContent = `${temp.toFixed(1)} °C`;
      zoneEls[z].classList.toggle("powered", (t.dutyBits & (1 << z)) !== 0);
    });
    skinEl.textContent = `${t.skinEst.toFixed(1)} °C`;

    const nowHeating = t.mode === 3;
    if (nowHeating && !heating) log.begin(level, Date.now());
    if (!nowHeating && heating) log.endOpen(Date.now());
    heating = nowHeating;
    renderCalendar();
  },
  onAnomaly(_code, text) {
    showBanner(`Device anomaly: ${text}`, true);
  },
  onAuthResult(ok) {
    statusEl.textContent = ok
      ? "connected, authenticated"
      : client.lockedOut
        ? "locked out: too many failed attempts"
        : "wrong secret";
    setControlsEnabled(ok);
  },
  onNack(_reason, text) {
    showBanner(`Refused: ${text}`);
    if (client.lockedOut) statusEl.textContent = "locked out: too many failed attempts";
  },
  onDisconnect() {
    statusEl.textContent = "disconnected";
    setControlsEnabled(false);
    log.endOpen(Date.now());
    heating = false;
  },
});

function setControlsEnabled(on: boolean) {
  for (const id of ["level-low", "level-medium", "level-high", "start", "stop",
                    "set-timer", "reset-latch"]) {
    $<HTMLButtonElement>(id).disabled = !on;
  }
}

connectBtn.addEventListener("click", async () => {
  statusEl.textContent = "connecting...";
  try {
    await connectWebSocket(client, `ws://${hostInput.value}/device`);
    statusEl.textContent = "connected, authenticating...";
    client.auth(secretInput.value);
  } catch (err) {
    statusEl.textContent = String(err);
  }
});

for (const [id, lv] of [["level-low", 0], ["level-medium", 1], ["level-high", 2]] as const) {
  $<HTMLButtonElement>(id).addEventListener("click", () => {
    level = lv;
    client.setLevel(lv);
  });
}
$<HTMLButtonElement>("start").addEventListener("click", () => client.start());
$<HTMLButtonElement>("stop").addEventListener("click", () => client.stop());
$<HTMLButtonElement>("set-timer").addEventListener("click", () => {
  const minutes = Number(timerInput.value);
  if (Number.isInteger(minutes) && minutes >= 0 && minutes <= 255) {
    client.setTimer(minutes);
  } else {
    showBanner("Timer must be 0-255 minutes");
  }
});
$<HTMLButtonElement>("reset-latch").addEventListener("click", () => client.resetLatch());

// ordering flow is not part of this prototype
$<HTMLButtonElement>("request-pad").disabled = true;

window.setInterval(() => {
  staleEl.classList.toggle("visible", client.isStale());
}, 500);

function renderCalendar() {
  const days = log.byDay().slice(0, 7);
  calendarEl.innerHTML = "";
  for (const { day, sessions, totalMinutes } of days) {
    const row = document.createElement("div");
    row.className = "calendar-day";
    row.textContent =
      `${day}: ${sessions.length} session${sessions.length === 1 ? "" : "s"}, ` +
      `${totalMinutes.toFixed(0)} min of heat`;
    calendarEl.appendChild(row);
  }
  if (!days.length) calendarEl.textContent = "No sessions recorded yet.";
}

setControlsEnabled(false);
renderCalendar();
