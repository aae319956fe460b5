"""CSV artifacts with fixed formatting.

Floats are written as ``%.16e`` (17 significant digits), with ``.`` as the
decimal separator and ``\\n`` line endings, so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import math
import os
from typing import Iterable, Sequence

import numpy as np

from .diagnostics import RateTableRow, true_exploration_cost

SUMMARY_COLUMNS = ("mean_action", "steps", "stationary", "nash_gap", "eta", "t_final")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.16e}"


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def density_rows(result):
    grid = result.config.grid
    for s in result.samples:
        pdf = s.density.pdf
        if grid.ndim == 1:
            for x, p in zip(grid.x, pdf):
                yield (s.t, x, p)
        else:
            for x, z, p in zip(grid.x, grid.z, pdf):
                yield (s.t, x, z, p)


def write_density_csv(path, result) -> None:
    header = ("t", "x", "pdf") if result.config.grid.ndim == 1 else ("t", "x", "z", "pdf")
    write_rows(path, header, density_rows(result))


def write_eta_csv(path, result) -> None:
    cfg = result.config
    if cfg.protocol.kind == "pairwise":
        h = cfg.hjb
        rows = ((t, e, true_exploration_cost(e, h.chi, h.xi, h.epsilon))
                for t, e in zip(result.eta_times, result.eta_values))
        write_rows(path, ("t", "eta", "E_t"), rows)
    else:
        write_rows(path, ("t", "eta"), zip(result.eta_times, result.eta_values))


def summary_row(result) -> tuple:
    last = result.samples[-1]
    return (last.mean_action, result.steps_taken, result.stationary, last.nash_gap,
            last.eta, result.t_final)


def write_summary_csv(path, result) -> None:
    write_rows(path, SUMMARY_COLUMNS, [summary_row(result)])


def write_table1_csv(path, rows: Sequence[RateTableRow]) -> None:
    write_rows(path, ("I", "epsilon", "average", "error", "rate"),
               ((r.level, r.epsilon, r.mean, r.error, r.rate) for r in rows))


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
