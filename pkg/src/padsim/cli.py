"""Command-line front end: simulate, summarize, calibrate, bridge."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import harness, plant


def _load_params(path: str | None) -> plant.PlantParams:
    if path is None:
        return plant.PlantParams()
    with open(path, encoding="utf-8") as f:
        return plant.PlantParams.from_text(f.read())


def _cmd_simulate(args) -> int:
    scenario = harness.load_scenario(args.scenario)
    params = _load_params(args.params)
    trace = harness.run(scenario, params, seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(trace.to_csv())
    summary = harness.summarize(trace)
    observed = {harness.ANOMALY_BY_NAME[name] for name in summary["anomalies"]}
    unexpected = observed - set(scenario.expected_anomalies)
    missing = set(scenario.expected_anomalies) - observed
    for code in sorted(unexpected):
        print(f"unexpected anomaly: {_anomaly_name(code)}", file=sys.stderr)
    for code in sorted(missing):
        print(f"expected anomaly did not occur: {_anomaly_name(code)}",
              file=sys.stderr)
    print(f"wrote {len(trace.rows)} rows to {args.out}")
    return 0 if not unexpected and not missing else 1


def _anomaly_name(code: int) -> str:
    from . import firmware as fw
    return fw.AnomalyCode(code).name


def _cmd_summarize(args) -> int:
    with open(args.trace, encoding="utf-8") as f:
        trace = harness.Trace.from_csv(f.read())
    summary = harness.summarize(trace)
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        for key, value in summary.items():
            print(f"{key}: {value}")
    return 0


def _load_targets(path: str | None) -> plant.CalibrationTargets:
    if path is None:
        return plant.CalibrationTargets()
    values = {}
    fields = {f.name for f in dataclasses.fields(plant.CalibrationTargets)}
    with open(path, encoding="utf-8") as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, _, value = line.partition("=")
            name = name.strip()
            if name not in fields:
                raise plant.PlantError(f"unknown calibration target: {name}")
            values[name] = float(value.strip())
    return plant.CalibrationTargets(**values)


def _cmd_calibrate(args) -> int:
    targets = _load_targets(args.targets)
    try:
        params = plant.calibrate(targets)
    except plant.CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        for name, value in exc.residuals.items():
            print(f"  {name}: {value}", file=sys.stderr)
        return 1
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(params.to_text())
    print(f"wrote calibrated parameters to {args.out}")
    return 0


def _cmd_bridge(args) -> int:
    from . import bridge
    host, _, port = args.listen.rpartition(":")
    params = _load_params(args.params)
    bridge.serve(host or "127.0.0.1", int(port), params,
                 secret=args.secret.encode(), seed=args.seed,
                 time_scale=args.time_scale)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="padsim",
        description="Simulator for a three-zone wearable heating pad.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and write a trace CSV")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--params", default=None)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_cmd_simulate)

    summ = sub.add_parser("summarize", help="print headline stats for a trace")
    summ.add_argument("--trace", required=True)
    summ.add_argument("--json", action="store_true")
    summ.set_defaults(func=_cmd_summarize)

    cal = sub.add_parser("calibrate", help="fit plant parameters to targets")
    cal.add_argument("--targets", default=None)
    cal.add_argument("--out", required=True)
    cal.set_defaults(func=_cmd_calibrate)

    br = sub.add_parser("bridge", help="serve a live device over TCP/WebSocket")
    br.add_argument("--listen", default="127.0.0.1:7420")
    br.add_argument("--params", default=None)
    br.add_argument("--secret", default=harness.DEFAULT_SECRET.decode())
    br.add_argument("--seed", type=int, default=0)
    br.add_argument("--time-scale", type=float, default=1.0)
    br.set_defaults(func=_cmd_bridge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
