"""Exploration cost, Nash gap, convergence rates and run-to-run comparisons."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptySupport, IncompatibleRuns, InvalidParams

INFINITE_RATE = math.inf
REL_FLOOR = 1e-300


@dataclass(frozen=True)
class RateTableRow:
    level: int
    epsilon: float
    mean: float
    error: float
    rate: Optional[float] = None


def true_exploration_cost(eta: float, chi: float, xi: float, epsilon: float) -> float:
    """Fraction of the budget spent on exploration: ``1 - chi / (eps eta^(2+xi))``."""
    if not (eta > 0 and epsilon > 0):
        raise InvalidParams("eta and epsilon must be > 0")
    e = 1.0 - chi / (epsilon * eta ** (2.0 + xi))
    if eta >= (chi / epsilon) ** (1.0 / (2.0 + xi)):
        # nonnegative in exact arithmetic above the multiplier's lower bound
        e = max(e, 0.0)
    return e


def nash_gap(u_values, density, support_threshold: float = 1e-8) -> float:
    """``max U - min_{support} U``; zero at a discrete Nash equilibrium."""
    if support_threshold < 0:
        raise InvalidParams("support_threshold must be >= 0")
    u = np.asarray(u_values, dtype=np.float64)
    masses = density.masses if hasattr(density, "masses") else np.asarray(density, dtype=np.float64)
    support = masses > support_threshold
    if not support.any():
        raise EmptySupport(f"no cell carries mass above {support_threshold:g}")
    return float(u.max() - u[support].min())


def convergence_rate(eps_prev: float, eps_cur: float, err_prev: float, err_cur: float) -> float:
    """Observed order ``ln(err_prev/err_cur) / ln(eps_cur/eps_prev)``.

    Returns :data:`INFINITE_RATE` when ``err_cur`` is exactly zero.
    """
    if min(eps_prev, eps_cur, err_prev) <= 0 or err_cur < 0:
        raise InvalidParams("convergence_rate arguments must be positive")
    if eps_cur == eps_prev:
        raise InvalidParams("eps_cur must differ from eps_prev")
    if err_cur == 0:
        return INFINITE_RATE
    return math.log(err_prev / err_cur) / math.log(eps_cur / eps_prev)


def rate_table(epsilons: Sequence[float], means: Sequence[float], reference: float = 0.25) -> list[RateTableRow]:
    rows: list[RateTableRow] = []
    for i, (eps, m) in enumerate(zip(epsilons, means)):
        err = abs(m - reference)
        rate = None
        if i > 0:
            prev = rows[-1]
            rate = convergence_rate(prev.epsilon, eps, prev.error, err) if prev.error > 0 else None
        rows.append(RateTableRow(i + 1, float(eps), float(m), err, rate))
    return rows


def eta_constancy(eta_history) -> float:
    """``max_t |eta_t - eta_0|`` over a history of values or ``(t, eta)`` pairs."""
    v = np.asarray(eta_history, dtype=np.float64)
    if v.size == 0:
        raise InvalidParams("empty eta history")
    if v.ndim == 2:
        v = v[:, 1]
    return float(np.max(np.abs(v - v[0])))


def mean_relative_difference(a, b) -> float:
    """Mean of ``|a - b| / mean(|a|, |b|)`` in percent."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(0.5 * (np.abs(a) + np.abs(b)), REL_FLOOR)
    return float(np.mean(np.abs(a - b) / denom) * 100.0)


def restrict_masses(masses, fine_grid, coarse_grid) -> np.ndarray:
    """Sum fine-cell masses onto the coarse cells they tile."""
    m = np.asarray(masses, dtype=np.float64)
    if fine_grid.ndim != coarse_grid.ndim:
        raise IncompatibleRuns("grids differ in dimension")
    if fine_grid.ndim == 1:
        n_f, n_c = fine_grid.n_cells, coarse_grid.n_cells
        if n_f % n_c:
            raise IncompatibleRuns(f"{n_c} coarse cells do not tile {n_f} fine cells")
        return m.reshape(n_c, n_f // n_c).sum(axis=1)
    if fine_grid.nx % coarse_grid.nx or fine_grid.nz % coarse_grid.nz:
        raise IncompatibleRuns("coarse 2D grid does not tile the fine grid")
    rx, rz = fine_grid.nx // coarse_grid.nx, fine_grid.nz // coarse_grid.nz
    blocks = m.reshape(coarse_grid.nz, rz, coarse_grid.nx, rx)
    return blocks.sum(axis=(1, 3)).ravel()


def _compare_density(a, b) -> float:
    ga, gb = a.final_density.grid, b.final_density.grid
    if ga.size < gb.size:
        a, b, ga, gb = b, a, gb, ga
    coarse = restrict_masses(a.final_density.masses, ga, gb)
    return mean_relative_difference(coarse / gb.cell_area, b.final_density.pdf)


def _compare_eta(a, b) -> float:
    dt_a, dt_b = a.config.dt, b.config.dt
    if dt_a < dt_b:
        a, b, dt_a, dt_b = b, a, dt_b, dt_a
    # a is coarse in time
    ratio = dt_a / dt_b
    if abs(ratio - round(ratio)) > 1e-9:
        raise IncompatibleRuns(f"dt {dt_a} is not a multiple of {dt_b}")
    ratio = int(round(ratio))
    n = min(a.eta_values.size, (b.eta_values.size - 1) // ratio + 1)
    if n < 1:
        raise IncompatibleRuns("eta histories do not overlap")
    coarse = a.eta_values[:n]
    fine = b.eta_values[: (n - 1) * ratio + 1 : ratio]
    return mean_relative_difference(coarse, fine)


def compare_runs(a, b, mode: str = "density") -> float:
    """Mean relative absolute difference (percent) between two runs.

    ``density`` compares final pdfs after restricting the finer grid onto the
    coarser one; ``eta_history`` compares eta at the coarse run's step times.
    """
    if mode == "density":
        return _compare_density(a, b)
    if mode in ("eta", "eta_history"):
        return _compare_eta(a, b)
    raise InvalidParams(f"unknown comparison mode {mode!r}")
