"""Command line entry point: ``climbsim run | compare | presets``."""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .control import ControllerMode
from .gait import StrideUnreachable
from .output import emit_outputs
from .scenario import (PRESETS, NumericalDivergence, ScenarioError, load_preset, resolve_scenario, run_simulation,
                       scenario_model)
from .spatial import ModelError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGED = 3

_MODES = {"baseline": ControllerMode.BASELINE, "admittance": ControllerMode.BASE_ADMITTANCE}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="climbsim", description="Quadruped climbing-robot admittance simulations.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario")
    run.add_argument("scenario", help="scenario file or preset name")
    run.add_argument("--mode", choices=sorted(_MODES), help="override the scenario's controller")
    run.add_argument("--out", type=Path, help="output directory (default: scenario output_dir)")
    run.add_argument("--dt", type=float, help="override the integration step [s]")

    cmp_ = sub.add_parser("compare", help="run baseline and admittance and write a comparison")
    cmp_.add_argument("scenario", help="scenario file or preset name")
    cmp_.add_argument("--out", type=Path, required=True, help="output directory")
    cmp_.add_argument("--dt", type=float, help="override the integration step [s]")

    sub.add_parser("presets", help="list the shipped scenarios")
    return p


def _print_written(written: dict) -> None:
    for p in written["csv"] + written["plots"] + [written["summary"]]:
        print(p)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "presets":
        for name in PRESETS:
            sc = load_preset(name)
            print(f"{name:14s} g={sc.gravity_magnitude:.6g} m/s^2  duration={sc.duration:g} s  "
                  f"events={len(sc.disturbances)}")
        return EXIT_OK

    try:
        scenario = resolve_scenario(args.scenario)
        if args.dt is not None and not args.dt > 0:
            raise ScenarioError("dt: must be positive")
        model = scenario_model(scenario)
        if args.command == "run":
            mode = _MODES[args.mode] if args.mode else scenario.mode
            log = run_simulation(model, scenario, mode=mode, dt=args.dt)
            written = emit_outputs({mode.value: log}, scenario, args.out, model)
        else:
            # the two rollouts share no mutable state
            with ThreadPoolExecutor(max_workers=2) as pool:
                futures = {label: pool.submit(run_simulation, model, scenario, mode, args.dt)
                           for label, mode in _MODES.items()}
                logs = {label: f.result() for label, f in futures.items()}
            written = emit_outputs(logs, scenario, args.out, model)
            sys.stdout.write(written["summary"].read_text(encoding="utf-8"))
    except (ScenarioError, ModelError, StrideUnreachable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    _print_written(written)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
