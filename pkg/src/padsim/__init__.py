"""Digital twin of a wearable three-zone heating pad and its control app."""

from .battery import BatteryState, draw, ocv
from .firmware import (AnomalyCode, FirmwareConfig, FirmwareSnapshot, HeatLevel,
                       Mode, SafetyLimits, check_safety, regulate, stddev, tick)
from .harness import DeviceSim, Scenario, Trace, load_scenario, parse_scenario, run, summarize
from .plant import (PlantParams, PlantState, SensorFault, calibrate,
                    electrical_power, nichrome_resistance, step, thermistor_read)
from .protocol import FrameDecoder, Message, decode, encode

__all__ = [
    "AnomalyCode", "BatteryState", "DeviceSim", "FirmwareConfig",
    "FirmwareSnapshot", "FrameDecoder", "HeatLevel", "Message", "Mode",
    "PlantParams", "PlantState", "SafetyLimits", "Scenario", "SensorFault",
    "Trace", "calibrate", "check_safety", "decode", "draw", "electrical_power",
    "encode", "load_scenario", "nichrome_resistance", "ocv", "parse_scenario",
    "regulate", "run", "step", "stddev", "summarize", "thermistor_read", "tick",
]
