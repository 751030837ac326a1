"""Deterministic co-simulation of plant + battery + firmware.

Scenarios are declarative text files; runs are reproducible bit-for-bit
for a given seed, and every trace row corresponds to one 0.5 s firmware
tick (with five 0.1 s plant substeps in between).
"""

from __future__ import annotations

import io
import random
from dataclasses import dataclass, field

from . import battery as bat
from . import firmware as fw
from . import plant
from . import protocol as proto

PLANT_DT = 0.1
SUBSTEPS_PER_TICK = 5

DEFAULT_SECRET = b"warmth"

LEVEL_NAMES = {"low": 0, "medium": 1, "high": 2}

TRACE_COLUMNS = [
    "time",
    "coil_0", "coil_1", "coil_2",
    "reading_0", "reading_1", "reading_2",
    "skin",
    "duty_bits",
    "power_w",
    "soc",
    "voltage",
    "mode",
    "anomalies",
]


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    at: float
    kind: str  # "app" | "inject" | "link" | "set_ambient"
    command: proto.Message | None = None
    fault: plant.SensorFault | None = None
    link_up: bool = False
    ambient: float = 0.0


@dataclass
class Scenario:
    name: str
    duration: float
    ambient: float = 30.0
    initial_soc: float = 1.0
    expected_anomalies: frozenset[int] = frozenset()
    events: list[Event] = field(default_factory=list)

    def __post_init__(self):
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        if not 0.0 <= self.initial_soc <= 1.0:
            raise ScenarioError("soc must be in [0,1]")
        times = [e.at for e in self.events]
        if times != sorted(times):
            raise ScenarioError("events must be sorted by time")
        if any(t < 0 for t in times):
            raise ScenarioError("event times must be >= 0")


ANOMALY_BY_NAME = {c.name: int(c) for c in fw.AnomalyCode}


def _parse_app_command(args: list[str]) -> proto.Message:
    if not args:
        raise ScenarioError("empty app command")
    cmd, *rest = args
    if cmd == "auth":
        return proto.Auth(" ".join(rest).encode())
    if cmd == "level":
        if len(rest) != 1 or rest[0] not in LEVEL_NAMES:
            raise ScenarioError(f"bad level: {rest}")
        return proto.SetLevel(LEVEL_NAMES[rest[0]])
    if cmd == "start":
        return proto.StartHeat()
    if cmd == "stop":
        return proto.StopHeat()
    if cmd == "timer":
        return proto.SetTimer(int(rest[0]))
    if cmd == "reset":
        return proto.ResetLatch()
    if cmd == "ping":
        return proto.Ping()
    raise ScenarioError(f"unknown app command: {cmd}")


def _parse_inject(at: float, args: list[str]) -> plant.SensorFault:
    if not args:
        raise ScenarioError("empty inject action")
    kind, *rest = args
    if kind == "stuck":
        return plant.SensorFault("stuck", zone=int(rest[0]), value=float(rest[1]),
                                 active_from=at)
    if kind == "drift":
        return plant.SensorFault("drift", zone=int(rest[0]), value=float(rest[1]),
                                 active_from=at)
    if kind in ("open", "open_circuit"):
        return plant.SensorFault("open_circuit", zone=int(rest[0]), active_from=at)
    if kind == "none":
        return plant.SensorFault("none", zone=int(rest[0]), active_from=at)
    raise ScenarioError(f"unknown fault kind: {kind}")


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    """Parse the line-oriented scenario format.

    Header lines: `name|duration|ambient|soc|expect = value`; event lines:
    `at=<seconds> <action> <args...>` with actions app/inject/link/set_ambient.
    """
    header = {"name": name, "duration": None, "ambient": 30.0, "soc": 1.0}
    expect: set[int] = set()
    events: list[Event] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("at="):
            head, *args = line.split()
            at = float(head[3:])
            if not args:
                raise ScenarioError(f"line {lineno}: event without action")
            action, *rest = args
            if action == "app":
                events.append(Event(at, "app", command=_parse_app_command(rest)))
            elif action == "inject":
                events.append(Event(at, "inject", fault=_parse_inject(at, rest)))
            elif action == "link":
                if rest not in (["up"], ["down"]):
                    raise ScenarioError(f"line {lineno}: link must be up or down")
                events.append(Event(at, "link", link_up=rest == ["up"]))
            elif action == "set_ambient":
                events.append(Event(at, "set_ambient", ambient=float(rest[0])))
            else:
                raise ScenarioError(f"line {lineno}: unknown action {action!r}")
        elif "=" in line:
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "name":
                header["name"] = value
            elif key == "duration":
                header["duration"] = float(value)
            elif key == "ambient":
                header["ambient"] = float(value)
            elif key == "soc":
                header["soc"] = float(value)
            elif key == "expect":
                for item in value.replace(",", " ").split():
                    if item not in ANOMALY_BY_NAME:
                        raise ScenarioError(f"line {lineno}: unknown anomaly {item!r}")
                    expect.add(ANOMALY_BY_NAME[item])
            else:
                raise ScenarioError(f"line {lineno}: unknown header key {key!r}")
        else:
            raise ScenarioError(f"line {lineno}: cannot parse {raw!r}")
    if header["duration"] is None:
        raise ScenarioError("scenario needs a duration header")
    events.sort(key=lambda e: e.at)  # stable: simultaneous events keep file order
    return Scenario(name=header["name"], duration=header["duration"],
                    ambient=header["ambient"], initial_soc=header["soc"],
                    expected_anomalies=frozenset(expect), events=events)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as f:
        text = f.read()
    import os
    return parse_scenario(text, name=os.path.splitext(os.path.basename(path))[0])


@dataclass
class TraceRow:
    time: float
    coil: tuple[float, float, float]
    readings: tuple[float, float, float]
    skin: float
    duty_bits: int
    power_w: float
    soc: float
    voltage: float
    mode: str
    anomalies: tuple[str, ...]


@dataclass
class Trace:
    scenario: str
    rows: list[TraceRow] = field(default_factory=list)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(TRACE_COLUMNS) + "\n")
        for r in self.rows:
            cells = [
                f"{r.time:.1f}",
                *(f"{c:.4f}" for c in r.coil),
                *(f"{x:.4f}" for x in r.readings),
                f"{r.skin:.4f}",
                str(r.duty_bits),
                f"{r.power_w:.4f}",
                f"{r.soc:.6f}",
                f"{r.voltage:.4f}",
                r.mode,
                ";".join(r.anomalies),
            ]
            out.write(",".join(cells) + "\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, scenario: str = "trace") -> "Trace":
        lines = [l for l in text.splitlines() if l.strip()]
        if not lines or lines[0].split(",") != TRACE_COLUMNS:
            raise ScenarioError("trace CSV missing the expected header row")
        rows = []
        for line in lines[1:]:
            c = line.split(",")
            rows.append(TraceRow(
                time=float(c[0]),
                coil=(float(c[1]), float(c[2]), float(c[3])),
                readings=(float(c[4]), float(c[5]), float(c[6])),
                skin=float(c[7]),
                duty_bits=int(c[8]),
                power_w=float(c[9]),
                soc=float(c[10]),
                voltage=float(c[11]),
                mode=c[12],
                anomalies=tuple(a for a in c[13].split(";") if a),
            ))
        return cls(scenario=scenario, rows=rows)


class DeviceSim:
    """One simulated device: plant, battery and firmware advanced in lockstep.

    Also the engine behind the bridge service, which drives it in wall-clock
    time instead of as fast as possible.
    """

    def __init__(self, params: plant.PlantParams, seed: int = 0,
                 initial_soc: float = 1.0, ambient: float | None = None,
                 secret: bytes = DEFAULT_SECRET):
        self.params = params
        ambient = params.ambient if ambient is None else ambient
        self.state = plant.PlantState.at_ambient(ambient)
        self.battery = bat.BatteryState.at_soc(initial_soc)
        self.config = fw.FirmwareConfig(secret=secret)
        self.snapshot = fw.FirmwareSnapshot()
        self.rng = random.Random(seed)
        self.link_ok = False
        self.faults: dict[int, plant.SensorFault] = {}
        self.time = 0.0

    def inject(self, fault: plant.SensorFault):
        if fault.kind == "none":
            self.faults.pop(fault.zone, None)
        else:
            self.faults[fault.zone] = fault

    def set_ambient(self, ambient: float):
        self.state.ambient_temp = ambient

    def _read(self, zone: int) -> float:
        return plant.thermistor_read(self.state, self.params, zone,
                                     fault=self.faults.get(zone), rng=self.rng)

    def tick(self, inbox) -> tuple[TraceRow, list[proto.Message]]:
        """One 0.5 s firmware tick followed by five plant substeps."""
        readings = tuple(self._read(z) for z in range(plant.ZONES))
        self.snapshot, outbox = fw.tick(self.snapshot, self.config, readings,
                                        self.battery, self.link_ok, inbox)
        duties = self.snapshot.zone_duty

        power_avg = 0.0
        for _ in range(SUBSTEPS_PER_TICK):
            load_g = sum(duties) / self.params.coil_resistance
            supply = bat.loaded_voltage(self.battery, load_g)
            current = supply * load_g
            power = sum(plant.electrical_power(d, supply, self.params.coil_resistance)
                        for d in duties)
            power_avg += power / SUBSTEPS_PER_TICK
            self.state = plant.step(self.state, self.params, duties, supply, PLANT_DT)
            if current > 0:
                self.battery = bat.draw(self.battery, current, PLANT_DT)

        anomalies = tuple(fw.AnomalyCode(m.code).name for m in outbox
                          if isinstance(m, proto.Anomaly))
        row = TraceRow(
            time=self.time,
            coil=tuple(self.state.zone_coil_temp),
            readings=readings,
            skin=self.state.skin_temp,
            duty_bits=sum(1 << i for i in range(3) if duties[i] > 0),
            power_w=power_avg,
            soc=self.battery.soc,
            voltage=self.battery.terminal_voltage,
            mode=self.snapshot.mode.name,
            anomalies=anomalies,
        )
        self.time += fw.TICK_S
        return row, outbox


def run(scenario: Scenario, params: plant.PlantParams, seed: int = 0,
        secret: bytes = DEFAULT_SECRET) -> Trace:
    """Execute a scenario and record one trace row per firmware tick."""
    dev = DeviceSim(params, seed=seed, initial_soc=scenario.initial_soc,
                    ambient=scenario.ambient, secret=secret)
    trace = Trace(scenario=scenario.name)
    ticks = int(round(scenario.duration / fw.TICK_S))
    pending = list(scenario.events)
    for k in range(ticks):
        now = k * fw.TICK_S
        inbox: list[proto.Message] = []
        while pending and pending[0].at <= now:
            e = pending.pop(0)
            if e.kind == "app":
                inbox.append(e.command)
            elif e.kind == "inject":
                dev.inject(e.fault)
            elif e.kind == "link":
                dev.link_ok = e.link_up
            elif e.kind == "set_ambient":
                dev.set_ambient(e.ambient)
        row, _ = dev.tick(inbox)
        trace.rows.append(row)
    return trace


def summarize(trace: Trace, rise_threshold: float = 55.0,
              settle_margin_s: float = 60.0) -> dict:
    """Headline statistics of a trace.

    ripple_sd is the worst per-zone coil standard deviation over the window
    starting settle_margin_s after the first crossing of rise_threshold;
    None when the window is empty (never "0 by default").
    """
    if not trace.rows:
        raise ScenarioError("empty trace")
    rise_time = None
    for r in trace.rows:
        if max(r.coil) >= rise_threshold:
            rise_time = r.time
            break
    runtime_to_empty = None
    for r in trace.rows:
        if r.soc <= 0.0:
            runtime_to_empty = r.time
            break
    max_coil = max(max(r.coil) for r in trace.rows)

    ripple_sd = None
    if rise_time is not None:
        window = [r for r in trace.rows if r.time >= rise_time + settle_margin_s]
        if len(window) >= 2:
            sds = []
            for z in range(3):
                xs = [r.coil[z] for r in window]
                mean = sum(xs) / len(xs)
                sds.append((sum((x - mean) ** 2 for x in xs) / len(xs)) ** 0.5)
            ripple_sd = max(sds)

    anomalies = []
    for r in trace.rows:
        anomalies.extend(r.anomalies)
    return {
        "rise_time_s": rise_time,
        "ripple_sd_c": ripple_sd,
        "max_coil_c": max_coil,
        "runtime_to_empty_s": runtime_to_empty,
        "anomalies": anomalies,
    }
