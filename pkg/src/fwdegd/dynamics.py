"""Explicit-Euler evolution of the action density coupled to the per-step HJB solve."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .diagnostics import nash_gap, true_exploration_cost
from .errors import FwdEgdError, InvalidParams, SimulationError, TimestepTooLarge, Unsupported
from .grid import Density, Grid, Grid1D, Grid2D, mean_action, sup_pdf_diff, uniform_density
from .hjb import (HjbParams, HjbSolution, LambdaWeights, logit_masses, solve_hjb_logit,
                  solve_hjb_quadratic)
from .utility import UtilitySpec, eval_utility

FORCED_SAMPLE_TIMES = (0.0, 1.0, 2.0, 10.0)
SUPPORT_THRESHOLD = 1e-8


@dataclass(frozen=True)
class ProtocolSpec:
    """``pairwise`` with weight ``w`` (0 replicator, 1 BNN) or ``logit``."""

    kind: str = "logit"
    w: float = 0.0

    def __post_init__(self):
        if self.kind not in ("pairwise", "logit"):
            raise InvalidParams(f"unknown protocol {self.kind!r}")
        if not 0.0 <= self.w <= 1.0:
            raise InvalidParams(f"w must be in [0, 1], got {self.w}")

    @classmethod
    def replicator(cls):
        return cls("pairwise", 0.0)

    @classmethod
    def bnn(cls):
        return cls("pairwise", 1.0)

    @classmethod
    def logit(cls):
        return cls("logit")

    @property
    def label(self) -> str:
        if self.kind == "logit":
            return "logit"
        return {0.0: "replicator", 1.0: "bnn"}.get(self.w, f"pairwise(w={self.w:g})")


@dataclass(frozen=True)
class SimConfig:
    grid: Grid = field(default_factory=lambda: Grid1D(250))
    dt: float = 0.005
    t_max: float = 10.0
    protocol: ProtocolSpec = field(default_factory=ProtocolSpec)
    utility: UtilitySpec = field(default_factory=UtilitySpec)
    hjb: HjbParams = field(default_factory=HjbParams)
    initial: Optional[Density] = None
    stationary_tol: float = 1e-10
    sample_every: int = 200
    max_steps: Optional[int] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParams("dt must be > 0")
        if not self.t_max >= 0:
            raise InvalidParams("t_max must be >= 0")
        if not self.stationary_tol >= 0:
            raise InvalidParams("stationary_tol must be >= 0")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise InvalidParams("sample_every must be a positive integer")
        if self.initial is not None and self.initial.grid != self.grid:
            raise InvalidParams("initial density lives on a different grid")

    def initial_density(self) -> Density:
        return self.initial if self.initial is not None else uniform_density(self.grid)

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass
class Sample:
    t: float
    density: Density
    eta: float
    mean_action: float
    exploration_cost: Optional[float]
    nash_gap: float


@dataclass
class SimResult:
    config: SimConfig
    samples: list[Sample]
    eta_times: np.ndarray
    eta_values: np.ndarray
    phi_final: np.ndarray
    stationary: bool
    steps_taken: int
    t_final: float
    last_change: float

    @property
    def final_density(self) -> Density:
        return self.samples[-1].density

    @property
    def eta_history(self) -> list[tuple[float, float]]:
        return list(zip(self.eta_times.tolist(), self.eta_values.tolist()))

    @property
    def eta_final(self) -> float:
        return float(self.eta_values[-1]) if self.eta_values.size else math.nan

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.samples]


@dataclass(frozen=True)
class StepInfo:
    """Everything a monitor sees for one Euler step ``k -> k+1``."""

    step: int
    t: float
    before: Density
    after: Density
    utility: np.ndarray
    solution: HjbSolution
    lam: Optional[LambdaWeights]
    u_max: float


# ---------------------------------------------------------------------------
# Euler steps
# ---------------------------------------------------------------------------

def step_pairwise(mu: Density, phi, eta: float, lam: LambdaWeights, dt: float) -> Density:
    if not eta > 0:
        raise InvalidParams("eta must be > 0")
    m = mu.masses
    rhs = _kernels.pairwise_rhs(m, np.asarray(phi, dtype=np.float64), eta, lam.weights)
    new = m + dt * rhs
    if np.any(new < 0.0):
        i = int(np.argmin(new))
        raise TimestepTooLarge(f"mass in cell {i} would become {new[i]:.3e}; reduce dt")
    return Density(new, mu.grid)


def step_logit(mu: Density, phi, eta: float, dt: float, grid: Optional[Grid] = None) -> Density:
    if dt > 1.0:
        raise TimestepTooLarge(f"logit step needs dt <= 1, got {dt}")
    if not eta > 0:
        raise InvalidParams("eta must be > 0")
    target = logit_masses(phi, eta)
    return Density((1.0 - dt) * mu.masses + dt * target, mu.grid)


def logit_distribution(phi, eta: float, grid: Grid) -> Density:
    return Density(logit_masses(phi, eta), grid)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _is_forced(t: float, dt: float) -> bool:
    return any(abs(t - s) < 0.5 * dt for s in FORCED_SAMPLE_TIMES)


def _sample(t, mu, u, sol, cfg) -> Sample:
    e_t = None
    if cfg.protocol.kind == "pairwise":
        e_t = true_exploration_cost(sol.eta, cfg.hjb.chi, cfg.hjb.xi, cfg.hjb.epsilon)
    return Sample(t, mu, sol.eta, mean_action(mu), e_t, nash_gap(u, mu, SUPPORT_THRESHOLD))


def _solve(cfg: SimConfig, u, mu: Density, eta_prev):
    if cfg.protocol.kind == "logit":
        return solve_hjb_logit(u, cfg.hjb, cfg.grid, eta_prev), None
    lam = LambdaWeights.mix(mu.masses, cfg.protocol.w)
    return solve_hjb_quadratic(u, lam, cfg.hjb, eta_prev), lam


def _drive(cfg: SimConfig, monitor: Optional[Callable[[StepInfo], None]]) -> SimResult:
    grid = cfg.grid
    mu = cfg.initial_density()
    u_max = cfg.utility.upper_bound(grid)
    n_steps = int(math.floor(cfg.t_max / cfg.dt + 1e-9))
    if cfg.max_steps is not None:
        n_steps = min(n_steps, int(cfg.max_steps))

    samples: list[Sample] = []
    eta_t: list[float] = []
    eta_v: list[float] = []
    eta_prev = None
    phi = np.full(grid.size, math.nan)
    stationary = False
    last_change = math.inf
    k = 0

    while k < n_steps:
        t = k * cfg.dt
        try:
            u = eval_utility(cfg.utility, grid, mu)
            sol, lam = _solve(cfg, u, mu, eta_prev)
            if cfg.protocol.kind == "logit":
                new = step_logit(mu, sol.phi, sol.eta, cfg.dt, grid)
            else:
                new = step_pairwise(mu, sol.phi, sol.eta, lam, cfg.dt)
        except FwdEgdError as exc:
            raise SimulationError(k, exc) from exc
        if k == 0 or k % cfg.sample_every == 0 or _is_forced(t, cfg.dt):
            samples.append(_sample(t, mu, u, sol, cfg))
        eta_t.append(t)
        eta_v.append(sol.eta)
        eta_prev = sol.eta
        phi = sol.phi
        if monitor is not None:
            monitor(StepInfo(k, t, mu, new, u, sol, lam, u_max))
        last_change = sup_pdf_diff(new, mu)
        mu = new
        k += 1
        if last_change < cfg.stationary_tol:
            stationary = True
            break

    t_final = k * cfg.dt
    # the final state is never sampled inside the loop
    try:
        u = eval_utility(cfg.utility, grid, mu)
        sol, _ = _solve(cfg, u, mu, eta_prev)
        samples.append(_sample(t_final, mu, u, sol, cfg))
        if k == 0:
            phi = sol.phi
    except FwdEgdError as exc:
        if k > 0:
            raise SimulationError(k, exc) from exc
        # t_max = 0 with an unsolvable state: keep the density, no diagnostics
        samples.append(Sample(t_final, mu, math.nan, mean_action(mu), None, math.nan))

    return SimResult(cfg, samples, np.asarray(eta_t), np.asarray(eta_v), np.asarray(phi),
                     stationary, k, t_final, last_change)


def run_simulation(config: SimConfig, monitor: Optional[Callable[[StepInfo], None]] = None) -> SimResult:
    """Evolve the density until it is stationary or ``t_max`` is reached.

    Every step evaluates the utility at the current density, solves the HJB
    system (warm-starting eta from the previous step), then takes one Euler
    step.  ``monitor`` is called after each step with a :class:`StepInfo`.
    """
    if config.grid.ndim == 2:
        return run_simulation_2d(config, monitor)
    if config.utility.ndim != 1:
        raise InvalidParams(f"utility {config.utility.name!r} needs a 2D grid")
    return _drive(config, monitor)


def run_simulation_2d(config: SimConfig, monitor: Optional[Callable[[StepInfo], None]] = None) -> SimResult:
    if not isinstance(config.grid, Grid2D):
        raise InvalidParams("run_simulation_2d needs a Grid2D")
    if config.protocol.kind != "logit":
        raise Unsupported("two-dimensional runs support the logit protocol only")
    if config.utility.ndim != 2:
        raise InvalidParams(f"utility {config.utility.name!r} is not two-dimensional")
    return _drive(config, monitor)


def run_sweep(configs: Sequence[SimConfig], jobs: int = 1) -> list[SimResult]:
    """Run independent simulations; results follow the input order."""
    if jobs <= 1 or len(configs) <= 1:
        return [run_simulation(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_simulation, configs))
