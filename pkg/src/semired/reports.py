"""Deterministic delimited output and the run manifest.

Numbers are written with round-trip %.17g formatting and files carry no
timestamps, so identical inputs produce byte-identical outputs.
Non-finite floats become JSON nulls in the manifest.
"""

from __future__ import annotations

import json
import math

import numpy as np

__all__ = [
    "format_float",
    "write_states_csv",
    "write_strain_csv",
    "write_diagnostics_csv",
    "write_convergence_csv",
    "write_manifest",
]


def format_float(value) -> str:
    return "%.17g" % float(value)


def write_states_csv(path, times, nodes, nodal_states) -> None:
    """Long-format (t, x, u) table, one row per time/node pair."""
    nodal_states = np.asarray(nodal_states, dtype=float)
    xs = [format_float(x) for x in np.asarray(nodes, dtype=float)]
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("t,x,u\n")
        for t, row in zip(times, nodal_states):
            ft = format_float(t)
            for x, u in zip(xs, row):
                handle.write(f"{ft},{x},{format_float(u)}\n")


def write_strain_csv(path, times, midpoints, strains) -> None:
    """Long-format (t, x, e) table over cell midpoints."""
    strains = np.asarray(strains, dtype=float)
    xs = [format_float(x) for x in np.asarray(midpoints, dtype=float)]
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("t,x,e\n")
        for t, row in zip(times, strains):
            ft = format_float(t)
            for x, e in zip(xs, row):
                handle.write(f"{ft},{x},{format_float(e)}\n")


def write_diagnostics_csv(
    path, times, mass, potential, step_residuals, inner_iterations
) -> None:
    """Per-time-point scalars; the t = 0 row carries zero residual/iterations."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("t,mass,potential,step_residual,inner_iterations\n")
        for t, m, q, r, k in zip(
            times, mass, potential, step_residuals, inner_iterations
        ):
            handle.write(
                f"{format_float(t)},{format_float(m)},{format_float(q)},"
                f"{format_float(r)},{int(k)}\n"
            )


def write_convergence_csv(path, report) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("n_steps,dt,error,decay_rate\n")
        for n, dt, err, rate in zip(
            report.step_counts, report.dts, report.errors, report.decay_rates
        ):
            handle.write(
                f"{int(n)},{format_float(dt)},{format_float(err)},{format_float(rate)}\n"
            )


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_manifest(path, payload: dict) -> None:
    """Sorted, indented JSON with non-finite floats mapped to null."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(_jsonable(payload), handle, indent=2, sort_keys=True)
        handle.write("\n")
