"""Fail-safe control firmware: a deterministic 2 Hz state machine.

Every safety rule runs on the raw thermistor readings, never on plant
truth, so a faulted sensor cannot be papered over. Any trip zeroes all
duties on the same tick and latches until an explicit operator reset.
"""

from __future__ import annotations

import enum
import hmac
import math
from dataclasses import dataclass, field, replace

from . import protocol as proto
from .battery import LOW_SOC_THRESHOLD, BatteryState

TICK_S = 0.5
ZONES = 3

# Readings at or below this are treated as the open-circuit sentinel.
OPEN_CIRCUIT_THRESHOLD_C = -200.0

# Trips latch only once a reading clears the cap by this allowance; a
# strict >cap check would false-trip on sensor noise while regulating in
# the top band.
OVERTEMP_MARGIN_C = 0.75

HYSTERESIS_C = 0.5
MAX_AUTH_FAILURES = 5
COIL_SKIN_OFFSET_C = 10.0


class FirmwareError(ValueError):
    pass


class Mode(enum.IntEnum):
    DISCONNECTED = 0
    UNAUTHENTICATED = 1
    IDLE = 2
    HEATING = 3
    SAFETY_LATCHED = 4
    BATTERY_LOW = 5


class AnomalyCode(enum.IntEnum):
    SIGMA_TRIP = 1
    OVER_TEMP = 2
    LINK_LOST = 3
    SENSOR_OPEN_CIRCUIT = 4
    OVERCURRENT = 5
    BATTERY_LOW = 6
    AUTH_FAILURE = 7


class HeatLevel(enum.IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2

    @property
    def skin_setpoint(self) -> float:
        return {HeatLevel.LOW: 38.0, HeatLevel.MEDIUM: 42.0, HeatLevel.HIGH: 46.0}[self]


@dataclass(frozen=True)
class SafetyLimits:
    stddev_trip: float = 2.5  # fixed by the safety design, not tunable
    coil_cap: float = 55.0
    tick_rate_hz: float = 2.0
    link_timeout_s: float = 3.0
    low_battery_soc: float = LOW_SOC_THRESHOLD
    max_session_s: float = 480.0

    def __post_init__(self):
        if self.stddev_trip != 2.5:
            raise FirmwareError("stddev trip threshold is fixed at 2.5")
        if self.coil_cap > 55.0:
            raise FirmwareError("coil cap cannot exceed 55 degC")


@dataclass(frozen=True)
class FirmwareConfig:
    secret: bytes = b"warmth"
    limits: SafetyLimits = field(default_factory=SafetyLimits)
    hysteresis: float = HYSTERESIS_C


@dataclass(frozen=True)
class FirmwareSnapshot:
    mode: Mode = Mode.DISCONNECTED
    zone_duty: tuple[float, float, float] = (0.0, 0.0, 0.0)
    last_readings: tuple[float, float, float] = (0.0, 0.0, 0.0)
    battery_soc: float = 1.0
    anomaly_queue: tuple[AnomalyCode, ...] = ()
    tick_count: int = 0
    # controller bookkeeping
    level: HeatLevel = HeatLevel.MEDIUM
    heat_elapsed_s: float = 0.0
    timer_remaining_s: float | None = None
    pending_timer_s: float | None = None
    trip_code: AnomalyCode | None = None
    auth_failures: int = 0
    locked_out: bool = False
    link_down_ticks: int = 0
    session_overrun: bool = False


def coil_setpoint(level: HeatLevel, limits: SafetyLimits) -> float:
    """Coil target: skin setpoint + insulation offset, clamped to the cap."""
    return min(level.skin_setpoint + COIL_SKIN_OFFSET_C, limits.coil_cap)


def stddev(readings) -> float:
    """Population standard deviation of the three zone readings."""
    if len(readings) != ZONES:
        raise FirmwareError(f"expected {ZONES} readings")
    if not all(math.isfinite(r) for r in readings):
        raise FirmwareError("non-finite reading reached stddev")
    mean = sum(readings) / ZONES
    return math.sqrt(sum((r - mean) ** 2 for r in readings) / ZONES)


def regulate(zone_reading: float, setpoint: float, hysteresis: float,
             prev_duty: float) -> float:
    """Bang-bang with a +/-hysteresis band; holds the previous duty inside it."""
    if zone_reading < setpoint - hysteresis:
        return 1.0
    if zone_reading > setpoint + hysteresis:
        return 0.0
    return prev_duty


def check_safety(readings, limits: SafetyLimits, link_ok: bool,
                 battery: BatteryState) -> list[AnomalyCode]:
    """Every violated trip condition; empty means heating may proceed."""
    trips = []
    finite = [r if math.isfinite(r) else OPEN_CIRCUIT_THRESHOLD_C - 73.0
              for r in readings]
    if stddev(finite) > limits.stddev_trip:
        trips.append(AnomalyCode.SIGMA_TRIP)
    if any(r > limits.coil_cap + OVERTEMP_MARGIN_C for r in finite):
        trips.append(AnomalyCode.OVER_TEMP)
    if any(r <= OPEN_CIRCUIT_THRESHOLD_C for r in finite):
        trips.append(AnomalyCode.SENSOR_OPEN_CIRCUIT)
    if not link_ok:
        trips.append(AnomalyCode.LINK_LOST)
    if battery.overcurrent:
        trips.append(AnomalyCode.OVERCURRENT)
    if battery.depleted:
        trips.append(AnomalyCode.BATTERY_LOW)
    return trips


def authenticate(attempt: bytes, stored: bytes, failure_count: int) -> tuple[str, int]:
    """Constant-time secret check with a 5-strike lockout.

    Returns (verdict, new_failure_count); verdict is one of
    "granted" | "denied" | "locked_out". Lockout persists until power cycle.
    """
    if failure_count >= MAX_AUTH_FAILURES:
        return "locked_out", failure_count
    if hmac.compare_digest(bytes(attempt), bytes(stored)):
        return "granted", 0
    failure_count += 1
    if failure_count >= MAX_AUTH_FAILURES:
        return "locked_out", failure_count
    return "denied", failure_count


def _queue(snapshot: FirmwareSnapshot, code: AnomalyCode) -> FirmwareSnapshot:
    if code in snapshot.anomaly_queue:
        return snapshot
    return replace(snapshot, anomaly_queue=snapshot.anomaly_queue + (code,))


def _stop_heating(snap: FirmwareSnapshot, mode: Mode) -> FirmwareSnapshot:
    return replace(snap, mode=mode, zone_duty=(0.0, 0.0, 0.0),
                   heat_elapsed_s=0.0, timer_remaining_s=None,
                   session_overrun=False)


def _handle_command(snap: FirmwareSnapshot, cfg: FirmwareConfig,
                    msg: proto.Message, outbox: list) -> FirmwareSnapshot:
    authed = snap.mode in (Mode.IDLE, Mode.HEATING, Mode.SAFETY_LATCHED,
                           Mode.BATTERY_LOW)
    match msg:
        case proto.Ping():
            outbox.append(proto.Pong())
            return snap
        case proto.Auth(secret):
            if snap.mode != Mode.UNAUTHENTICATED:
                outbox.append(proto.Nack(proto.NACK_WRONG_MODE))
                return snap
            if snap.locked_out:
                outbox.append(proto.AuthResult(False))
                return snap
            verdict, count = authenticate(secret, cfg.secret, snap.auth_failures)
            if verdict == "granted":
                outbox.append(proto.AuthResult(True))
                mode = Mode.SAFETY_LATCHED if snap.trip_code is not None else Mode.IDLE
                if mode == Mode.IDLE and snap.battery_soc < cfg.limits.low_battery_soc:
                    mode = Mode.BATTERY_LOW
                return replace(snap, mode=mode, auth_failures=0)
            outbox.append(proto.AuthResult(False))
            snap = replace(snap, auth_failures=count,
                           locked_out=(verdict == "locked_out"))
            if verdict == "locked_out":
                snap = _queue(snap, AnomalyCode.AUTH_FAILURE)
            return snap
        case proto.SetLevel(level):
            if not authed or snap.mode == Mode.SAFETY_LATCHED:
                outbox.append(proto.Nack(proto.NACK_AUTH_REQUIRED if not authed
                                         else proto.NACK_WRONG_MODE))
                return snap
            return replace(snap, level=HeatLevel(level))
        case proto.StartHeat():
            if snap.mode == Mode.BATTERY_LOW or (
                    snap.mode == Mode.IDLE
                    and snap.battery_soc < cfg.limits.low_battery_soc):
                outbox.append(proto.Nack(proto.NACK_BATTERY_LOW))
                return _queue(snap, AnomalyCode.BATTERY_LOW)
            if snap.mode != Mode.IDLE:
                outbox.append(proto.Nack(proto.NACK_AUTH_REQUIRED if not authed
                                         else proto.NACK_WRONG_MODE))
                return snap
            return replace(snap, mode=Mode.HEATING, heat_elapsed_s=0.0,
                           timer_remaining_s=snap.pending_timer_s,
                           pending_timer_s=None, session_overrun=False)
        case proto.StopHeat():
            if snap.mode != Mode.HEATING:
                outbox.append(proto.Nack(proto.NACK_AUTH_REQUIRED if not authed
                                         else proto.NACK_WRONG_MODE))
                return snap
            return _stop_heating(snap, Mode.IDLE)
        case proto.SetTimer(minutes):
            if snap.mode == Mode.HEATING:
                return replace(snap, timer_remaining_s=minutes * 60.0)
            if snap.mode in (Mode.IDLE, Mode.BATTERY_LOW):
                return replace(snap, pending_timer_s=minutes * 60.0)
            outbox.append(proto.Nack(proto.NACK_AUTH_REQUIRED if not authed
                                     else proto.NACK_WRONG_MODE))
            return snap
        case proto.ResetLatch():
            if snap.mode != Mode.SAFETY_LATCHED:
                outbox.append(proto.Nack(proto.NACK_AUTH_REQUIRED if not authed
                                         else proto.NACK_WRONG_MODE))
                return snap
            mode = (Mode.BATTERY_LOW
                    if snap.battery_soc < cfg.limits.low_battery_soc else Mode.IDLE)
            return replace(snap, mode=mode, trip_code=None)
        case _:
            outbox.append(proto.Nack(proto.NACK_BAD_ARGUMENT))
            return snap


def tick(snap: FirmwareSnapshot, cfg: FirmwareConfig, readings, battery: BatteryState,
         link_ok: bool, inbox) -> tuple[FirmwareSnapshot, list[proto.Message]]:
    """One 0.5 s control step. Pure: same inputs, same outputs."""
    outbox: list[proto.Message] = []
    readings = tuple(float(r) for r in readings)
    snap = replace(snap, tick_count=snap.tick_count + 1,
                   last_readings=readings, battery_soc=battery.soc)

    # Link watchdog: heating survives a short radio dropout, then everything
    # falls back to Disconnected and the session must re-authenticate.
    if link_ok:
        if snap.mode == Mode.DISCONNECTED:
            snap = replace(snap, mode=Mode.UNAUTHENTICATED)
        snap = replace(snap, link_down_ticks=0)
    else:
        down = snap.link_down_ticks + 1
        snap = replace(snap, link_down_ticks=down)
        if down * TICK_S >= cfg.limits.link_timeout_s and snap.mode != Mode.DISCONNECTED:
            if snap.mode == Mode.HEATING:
                snap = _queue(snap, AnomalyCode.LINK_LOST)
            snap = _stop_heating(snap, Mode.DISCONNECTED)

    for msg in inbox:
        snap = _handle_command(snap, cfg, msg, outbox)

    # Safety evaluation before any duty is computed.
    trips = check_safety(readings, cfg.limits, link_ok=True, battery=battery)
    if snap.mode == Mode.HEATING:
        latching = [t for t in trips if t in (
            AnomalyCode.SIGMA_TRIP, AnomalyCode.OVER_TEMP,
            AnomalyCode.SENSOR_OPEN_CIRCUIT, AnomalyCode.OVERCURRENT)]
        if latching:
            for code in latching:
                snap = _queue(snap, code)
            snap = _stop_heating(snap, Mode.SAFETY_LATCHED)
            snap = replace(snap, trip_code=latching[0])
        elif battery.depleted:
            snap = _queue(snap, AnomalyCode.BATTERY_LOW)
            snap = _stop_heating(snap, Mode.BATTERY_LOW)

    # Session timers.
    if snap.mode == Mode.HEATING:
        elapsed = snap.heat_elapsed_s + TICK_S
        overrun = snap.session_overrun or elapsed > cfg.limits.max_session_s
        snap = replace(snap, heat_elapsed_s=elapsed, session_overrun=overrun)
        if snap.timer_remaining_s is not None:
            remaining = snap.timer_remaining_s - TICK_S
            if remaining <= 0:
                snap = _stop_heating(snap, Mode.IDLE)
            else:
                snap = replace(snap, timer_remaining_s=remaining)

    # Duty computation; zero in every non-heating mode.
    if snap.mode == Mode.HEATING:
        target = coil_setpoint(snap.level, cfg.limits)
        duties = tuple(
            regulate(readings[i], target, cfg.hysteresis, snap.zone_duty[i])
            for i in range(ZONES))
    else:
        duties = (0.0, 0.0, 0.0)
    snap = replace(snap, zone_duty=duties)

    # Anomaly queue drains only while a link exists.
    if link_ok:
        for code in snap.anomaly_queue:
            outbox.append(proto.Anomaly(int(code)))
        snap = replace(snap, anomaly_queue=())

    duty_bits = sum(1 << i for i in range(ZONES) if duties[i] > 0)
    outbox.append(proto.Telemetry(
        zone_temps=tuple(max(-273.0, min(327.0, r)) for r in readings),
        skin_est=max(-273.0, min(327.0, sum(readings) / ZONES - COIL_SKIN_OFFSET_C)),
        soc_percent=int(round(battery.soc * 100)),
        mode=int(snap.mode),
        duty_bits=duty_bits,
    ))
    return snap, outbox
