"""CSV and JSON writers for simulation results."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from lossycacc.simulator import EnsembleSummary, SimRun

RUN_SIGNALS = ("q", "v", "a", "e", "u", "delta")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_series_csv(path, time: np.ndarray, values: np.ndarray) -> None:
    """One row per time step: ``time`` with 6 decimals, then one column per vehicle."""
    values = np.asarray(values)
    n_cols = values.shape[1]
    lines = ["time," + ",".join(str(i) for i in range(n_cols))]
    integer = np.issubdtype(values.dtype, np.integer)
    for t, row in zip(time, values):
        cells = (str(int(x)) for x in row) if integer else (_fmt(x) for x in row)
        lines.append(f"{t:.6f}," + ",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_series_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]


def write_run(run: SimRun, out_dir) -> list[Path]:
    """Write every logged signal of ``run``; ``x_hat`` is split per component."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = run.time
    written = []
    for name in RUN_SIGNALS:
        path = out / f"{name}.csv"
        write_series_csv(path, t, getattr(run, name))
        written.append(path)
    for c in range(run.x_hat.shape[-1]):
        path = out / f"x_hat_{c}.csv"
        write_series_csv(path, t, run.x_hat[..., c])
        written.append(path)
    return written


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def summary_dict(summary: EnsembleSummary) -> dict:
    """JSON-ready ensemble summary; per-step arrays are ``[step][vehicle]``."""
    u_var_time = summary.u_var.mean(axis=0)
    return {
        "runs": summary.runs,
        "seed": summary.seed,
        "digest": summary.digest,
        "Ts": summary.Ts,
        "seed_rule": "SeedSequence(seed, spawn_key=(run, vehicle, stream)); stream 0 losses, 1 noise",
        "time_avg_u_var": u_var_time.tolist(),
        "u_mean": summary.u_mean.tolist(),
        "u_var": summary.u_var.tolist(),
        "u_se": summary.u_se.tolist(),
        "e_mean": summary.e_mean.tolist(),
        "e_var": summary.e_var.tolist(),
        "run_u_l2": summary.run_u_l2.tolist(),
        "run_u_var": summary.run_u_var.tolist(),
    }
