"""Coulomb-counting model of the single 2200 mAh LiPo cell."""

from __future__ import annotations

import math
from dataclasses import dataclass

CAPACITY_MAH = 2200.0
INTERNAL_RESISTANCE = 0.05  # ohm, plausible for a 2200 mAh pouch cell
MAX_CURRENT_A = 5.0
VOLTAGE_MIN = 3.3
VOLTAGE_MAX = 4.2
LOW_SOC_THRESHOLD = 0.10


class BatteryError(ValueError):
    pass


def ocv(soc: float) -> float:
    """Open-circuit voltage: 3-point piecewise-linear curve.

    4.2 V full, 3.7 V at 10% charge, 3.3 V empty; monotone in soc.
    """
    if not 0.0 <= soc <= 1.0:
        raise BatteryError(f"soc out of [0,1]: {soc}")
    if soc >= LOW_SOC_THRESHOLD:
        frac = (soc - LOW_SOC_THRESHOLD) / (1.0 - LOW_SOC_THRESHOLD)
        return 3.7 + frac * (4.2 - 3.7)
    return 3.3 + (soc / LOW_SOC_THRESHOLD) * (3.7 - 3.3)


@dataclass(frozen=True)
class BatteryState:
    charge: float = CAPACITY_MAH  # mAh remaining
    terminal_voltage: float = VOLTAGE_MAX
    current: float = 0.0  # instantaneous draw, A
    soc: float = 1.0
    depleted: bool = False
    overcurrent: bool = False

    @classmethod
    def at_soc(cls, soc: float) -> "BatteryState":
        if not 0.0 <= soc <= 1.0:
            raise BatteryError(f"soc out of [0,1]: {soc}")
        return cls(
            charge=soc * CAPACITY_MAH,
            terminal_voltage=max(VOLTAGE_MIN, min(VOLTAGE_MAX, ocv(soc))),
            soc=soc,
            depleted=soc <= 0.0,
        )


def draw(state: BatteryState, current: float, dt: float) -> BatteryState:
    """Remove current*dt of charge and update the terminal voltage.

    A draw above 5 A raises the overcurrent flag (the caller must shed the
    load); the integration still proceeds with the current clamped to 5 A.
    An exhausted cell is clamped at zero charge with the depleted flag set.
    """
    if current < 0:
        raise BatteryError("charging is out of scope; current must be >= 0")
    if dt <= 0 or not math.isfinite(dt):
        raise BatteryError(f"dt must be positive, got {dt}")

    overcurrent = current > MAX_CURRENT_A
    applied = min(current, MAX_CURRENT_A)
    if state.depleted:
        applied = 0.0

    charge = state.charge - applied * dt / 3600.0 * 1000.0
    depleted = charge <= 0.0
    charge = max(charge, 0.0)
    soc = charge / CAPACITY_MAH
    sag = applied * INTERNAL_RESISTANCE
    terminal = max(VOLTAGE_MIN, min(VOLTAGE_MAX, ocv(soc) - sag))
    return BatteryState(
        charge=charge,
        terminal_voltage=terminal,
        current=applied,
        soc=soc,
        depleted=depleted,
        overcurrent=overcurrent,
    )


def loaded_voltage(state: BatteryState, load_conductance: float) -> float:
    """Terminal voltage with a resistive load of the given conductance attached.

    Solves V = OCV - I*R_int with I = V * G. A depleted cell supplies nothing.
    """
    if state.depleted:
        return 0.0
    v = ocv(state.soc) / (1.0 + load_conductance * INTERNAL_RESISTANCE)
    return min(v, VOLTAGE_MAX)
