"""CSV, text summary and SVG plots for simulation logs."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .metrics import SimulationLog, ZeroDistance, cost_of_transport, rolling_maxima

# published average cost of transport per preset, (baseline, admittance); None where unavailable
REFERENCE_COT = {
    "case1_earth": (None, 1.31),
    "case1_lunar": (1.42, 1.38),
    "case2_micro": (8.88e4, 6.86e4),
}


def csv_header(n_feet: int, n_joints: int) -> list:
    cols = ["t"]
    for i in range(n_feet):
        cols += [f"fx_{i}", f"fy_{i}", f"fz_{i}"]
    cols += [f"tau_{j}" for j in range(n_joints)]
    cols += ["base_x", "base_y", "base_z", "base_qw", "base_qx", "base_qy", "base_qz"]
    cols += ["tsm", "giam", "power", "detach_event", "control_fault"]
    return cols


def _num(x: float) -> str:
    return repr(float(x))


def log_to_csv(log: SimulationLog) -> str:
    if len(log) == 0:
        raise ValueError("empty log")
    n_feet = log.foot_force.shape[1]
    n_joints = log.tau.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(n_feet, n_joints))
    for k in range(len(log)):
        row = [_num(log.t[k])]
        row += [_num(v) for v in log.foot_force[k].reshape(-1)]
        row += [_num(v) for v in log.tau[k]]
        row += [_num(v) for v in log.base_position[k]]
        row += [_num(v) for v in log.base_orientation[k]]
        row += [_num(log.tsm[k]), _num(log.giam[k]), _num(log.power[k])]
        row += [log.detach_event[k], log.control_fault[k]]
        w.writerow(row)
    return buf.getvalue()


def average_cot(log: SimulationLog, mass: float, g_env: float) -> Optional[float]:
    """Cost of transport, or None when the robot did not make progress or did not finish."""
    if not log.completed:
        return None
    try:
        return cost_of_transport(log, mass, g_env)
    except ZeroDistance:
        return None


def summarize(log: SimulationLog, mass: float, g_env: float) -> dict:
    mx = rolling_maxima(log)
    tsm = np.asarray(log.tsm)
    return {
        "samples": len(log),
        "completed": log.completed,
        "detach_events": log.n_detach_events,
        "control_faults": sum(1 for f in log.control_fault if f),
        "peak_reaction_force": mx.peak_force,
        "peak_joint_torque": mx.peak_torque,
        "average_cot": average_cot(log, mass, g_env),
        "min_tsm": float(np.nanmin(tsm)) if np.any(np.isfinite(tsm)) else math.nan,
        "min_giam": float(np.min(log.giam)),
        "travel": float(np.linalg.norm(log.base_position[-1, :2] - log.base_position[0, :2])),
    }


def _fmt(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.6g}"


def summary_text(name: str, results: dict) -> str:
    """Flat text report; ``results`` maps a controller label to :func:`summarize` output."""
    labels = list(results)
    keys = list(next(iter(results.values())))
    width = max(len(k) for k in keys) + 2
    lines = [f"scenario: {name}", "", "quantity".ljust(width) + "".join(l.rjust(16) for l in labels)]
    for k in keys:
        lines.append(k.ljust(width) + "".join(_fmt(results[l][k]).rjust(16) for l in labels))
    ref = REFERENCE_COT.get(name)
    if ref is not None:
        lines += ["", "published average_cot (baseline, admittance): "
                  + ", ".join(_fmt(v) for v in ref) + "  (reference only)"]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "climbsim"
    plt.rcParams["svg.fonttype"] = "path"
    return plt


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def write_plots(logs: dict, out_dir: Path) -> list:
    """Four SVG figures overlaying every log in ``logs`` (label -> SimulationLog)."""
    plt = _pyplot()
    out_dir = Path(out_dir)
    paths = []

    fig, ax = plt.subplots(figsize=(7, 3.5))
    for label, log in logs.items():
        ax.plot(log.t, rolling_maxima(log).max_force, label=label, lw=1)
    ax.set(xlabel="time [s]", ylabel="max reaction force [N]")
    ax.legend()
    fig.tight_layout()
    paths.append(out_dir / "max_reaction_force.svg")
    _save(fig, paths[-1])
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 3.5))
    for label, log in logs.items():
        ax.plot(log.t, rolling_maxima(log).max_torque, label=label, lw=1)
    ax.set(xlabel="time [s]", ylabel="max joint torque [N m]")
    ax.legend()
    fig.tight_layout()
    paths.append(out_dir / "max_joint_torque.svg")
    _save(fig, paths[-1])
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax2 = ax.twinx()
    for label, log in logs.items():
        ax.plot(log.t, log.tsm, label=f"TSM {label}", lw=1)
        ax2.plot(log.t, log.giam, label=f"GIAM {label}", lw=1, ls="--")
    ax.set(xlabel="time [s]", ylabel="TSM [m]")
    ax2.set_ylabel("GIAM [-]")
    h1, l1 = ax.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax.legend(h1 + h2, l1 + l2, fontsize="small")
    fig.tight_layout()
    paths.append(out_dir / "stability_margins.svg")
    _save(fig, paths[-1])
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 5))
    for label, log in logs.items():
        ax.plot(log.base_position[:, 0], log.base_position[:, 1], label=label, lw=1)
    ax.set(xlabel="x [m]", ylabel="y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend()
    fig.tight_layout()
    paths.append(out_dir / "base_trajectory.svg")
    _save(fig, paths[-1])
    plt.close(fig)
    return paths


def emit_outputs(logs, scenario, out_dir=None, model=None) -> dict:
    """Write one CSV per log, the shared plots and ``summary.txt``; returns the written paths.

    ``logs`` is a single log or a mapping from controller label to log.
    """
    from .scenario import scenario_model, transport_mass

    if isinstance(logs, SimulationLog):
        logs = {scenario.mode.value: logs}
    if not logs or any(len(log) == 0 for log in logs.values()):
        raise ValueError("need at least one non-empty log")
    model = model if model is not None else scenario_model(scenario)
    mass = transport_mass(model, scenario)
    out_dir = Path(out_dir if out_dir is not None else scenario.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {"csv": [], "plots": [], "summary": out_dir / "summary.txt"}
    for label, log in logs.items():
        p = out_dir / f"{scenario.name}_{label}.csv"
        p.write_text(log_to_csv(log), encoding="utf-8")
        written["csv"].append(p)
    written["plots"] = write_plots(logs, out_dir)
    results = {label: summarize(log, mass, scenario.gravity_magnitude) for label, log in logs.items()}
    written["summary"].write_text(summary_text(scenario.name, results), encoding="utf-8")
    return written
