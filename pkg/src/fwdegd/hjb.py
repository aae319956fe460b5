"""Per-step value function and optimal Lagrangian multiplier.

Quadratic cost (BNN / replicator): the coupled system

    phi_i = U_i + 1/(2 eta delta) sum_j (phi_j - phi_i)_+^2 lam_j
    eps   = 1/(2 eta^2) sum_ij (phi_j - phi_i)_+^2 lam_i lam_j + chi / eta^(2 + xi)

is solved by relaxed Picard iteration.  Entropic cost (logit): the value
function is explicit given eta, and eta is the root of the entropy
constraint, found by the relaxed fixed-point map
``eta <- r eta + (1 - r) <W>_q / (eps + ln Z)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .errors import BracketError, InvalidParams, MaxIterExceeded, NoSolution
from .grid import Grid

CONSTANT_TOL = 1e-12
DAMPING_RETRIES = 3


@dataclass(frozen=True)
class HjbParams:
    delta: float = 1.0
    epsilon: float = 0.375
    chi: float = 1e-5
    xi: float = 2.0
    relax: float = 0.05
    phi_relax: float = 0.7
    tol: float = 1e-10
    max_iter: int = 10000
    eta_init: float = 1.0

    def __post_init__(self):
        checks = [
            (self.delta > 0, "delta must be > 0"),
            (self.epsilon > 0, "epsilon must be > 0"),
            (self.chi >= 0, "chi must be >= 0"),
            (self.xi >= 0, "xi must be >= 0"),
            (0 < self.relax <= 1, "relax must be in (0, 1]"),
            (0 <= self.phi_relax < 1, "phi_relax must be in [0, 1)"),
            (self.tol > 0, "tol must be > 0"),
            (int(self.max_iter) == self.max_iter and self.max_iter >= 1, "max_iter must be a positive integer"),
            (self.eta_init > 0, "eta_init must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidParams(msg)


@dataclass(frozen=True)
class LambdaWeights:
    """Switching reference measure ``w * kappa + (1 - w) * mu`` (kappa uniform)."""

    weights: np.ndarray

    @classmethod
    def mix(cls, mu, w: float) -> "LambdaWeights":
        if not 0.0 <= w <= 1.0:
            raise InvalidParams(f"w must be in [0, 1], got {w}")
        mu = np.asarray(mu, dtype=np.float64)
        if w == 0.0:
            return cls(mu)
        return cls(w / mu.size + (1.0 - w) * mu)

    def __post_init__(self):
        v = np.asarray(self.weights, dtype=np.float64)
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-12:
            raise InvalidParams("lambda weights must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", v)


@dataclass(frozen=True)
class HjbSolution:
    phi: np.ndarray
    eta: float
    iterations: int
    residual: float


# ---------------------------------------------------------------------------
# quadratic cost
# ---------------------------------------------------------------------------

def solve_hjb_quadratic(u_values, lam: LambdaWeights, params: HjbParams,
                        eta_start: float | None = None) -> HjbSolution:
    """Solve the quadratic-cost value function and multiplier.

    ``eta_start`` overrides ``params.eta_init`` (warm start).  Phi always
    starts from U.  ``params.phi_relax = 0`` gives the undamped value sweep.
    A sweep that does not converge within ``max_iter`` is restarted with the
    damping moved halfway to 1, at most ``DAMPING_RETRIES`` times.
    """
    if params.chi <= 0:
        raise InvalidParams("quadratic cost requires chi > 0")
    u = np.asarray(u_values, dtype=np.float64)
    if np.any(u < 0):
        raise InvalidParams("utility values must be nonnegative")
    eta0 = params.eta_init if eta_start is None else float(eta_start)
    damp = params.phi_relax
    total = 0
    for _ in range(1 + DAMPING_RETRIES):
        phi, eta, it, err, status = _kernels.quadratic_solve(
            u, lam.weights, params.delta, params.epsilon, params.chi, params.xi,
            params.relax, damp, params.tol, params.max_iter, eta0)
        total += it
        if status == _kernels.CONVERGED:
            break
        # small discounts can make the sweep oscillate; damp harder and restart
        damp = 0.5 * (1.0 + damp)
    else:
        raise MaxIterExceeded(
            f"quadratic HJB solve did not converge after {total} iterations "
            f"(residual {err:.3e}, eta {eta:.6g}, start eta {eta0:.6g}, final damping {damp:.4g})",
            err, total)
    # the constraint gives eta >= (chi/eps)^(1/(2+xi)); drop roundoff below it
    eta = max(float(eta), (params.chi / params.epsilon) ** (1.0 / (2.0 + params.xi)))
    phi = np.asarray(phi)
    phi.flags.writeable = False
    return HjbSolution(phi, eta, int(total), float(err))


def quadratic_residuals(u_values, lam: LambdaWeights, phi, eta: float,
                        params: HjbParams) -> tuple[float, float]:
    """Sup-norm residual of the value equation and absolute residual of the constraint."""
    u = np.asarray(u_values, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    a, s = _kernels.pos_sq_sums_np(phi, lam.weights)
    r_phi = float(np.max(np.abs(u + a / (2.0 * eta * params.delta) - phi)))
    r_eta = abs(s / (2.0 * eta * eta) + params.chi / eta ** (2.0 + params.xi) - params.epsilon)
    return r_phi, r_eta


def eta_bounds_quadratic(u_max: float, epsilon: float, chi: float, xi: float) -> tuple[float, float]:
    """A priori bracket for the quadratic-cost multiplier.

    For ``xi > 0`` the upper bound becomes ``max(1, sqrt((U^2 + chi)/eps))``
    because ``chi / eta^(2+xi) <= chi / eta^2`` only holds for ``eta >= 1``.
    """
    if chi <= 0:
        raise InvalidParams("chi must be > 0")
    lo = (chi / epsilon) ** (1.0 / (2.0 + xi))
    hi = math.sqrt((u_max * u_max + chi) / epsilon)
    if xi > 0:
        hi = max(1.0, hi)
    return lo, max(lo, hi)


# ---------------------------------------------------------------------------
# entropic cost
# ---------------------------------------------------------------------------

def _discounted(u, delta):
    return (delta / (delta + 1.0)) * np.asarray(u, dtype=np.float64)


def _log_partition(a: np.ndarray, area: float) -> float:
    amax = float(a.max())
    return amax + math.log(float(np.exp(a - amax).sum()) * area)


def phi_logit_closed_form(u_values, eta: float, delta: float, grid: Grid) -> np.ndarray:
    if not eta > 0:
        raise InvalidParams("eta must be > 0")
    w = _discounted(u_values, delta)
    log_z = _log_partition(w / eta, grid.cell_area)
    return w + (eta / delta) * log_z


def logit_masses(phi, eta: float) -> np.ndarray:
    """Normalized exponential of ``phi / eta`` as per-cell masses (uniform cells)."""
    a = np.asarray(phi, dtype=np.float64) / eta
    e = np.exp(a - a.max())
    return e / e.sum()


def entropic_cost_forms(u_values, eta: float, delta: float, grid: Grid) -> tuple[float, float]:
    """The entropy constraint value evaluated two algebraically equal ways.

    Returns ``(sum q ln q area, <W>_q / eta - ln Z)``.
    """
    w = _discounted(u_values, delta)
    area = grid.cell_area
    a = w / eta
    log_z = _log_partition(a, area)
    q = np.exp(a - log_z)
    nz = q > 0.0
    direct = float(np.sum(q[nz] * np.log(q[nz])) * area)
    mass = q * area
    closed = float(np.dot(a, mass) / mass.sum()) - log_z
    return direct, closed


def entropic_cost(u_values, eta: float, delta: float, grid: Grid) -> float:
    if not eta > 0:
        raise InvalidParams("eta must be > 0")
    return entropic_cost_forms(u_values, eta, delta, grid)[1]


def _check_logit_solvable(u, params: HjbParams, grid: Grid):
    lo, hi = float(u.min()), float(u.max())
    if hi - lo <= CONSTANT_TOL:
        raise NoSolution("utility is constant; entropic cost is identically 0")
    # the cost tends to -ln(area * #argmax) as eta -> 0
    n_top = int(np.count_nonzero(u >= hi - CONSTANT_TOL))
    sup_cost = -math.log(grid.cell_area * n_top)
    if params.epsilon >= sup_cost:
        raise NoSolution(f"epsilon {params.epsilon} >= supremum {sup_cost:.6g} of the entropic cost")


def solve_eta_logit(u_values, params: HjbParams, grid: Grid, eta_start: float | None = None) -> float:
    """Multiplier of the entropic cost constraint via the relaxed fixed-point map.

    When the map contracts slowly, Newton corrections of the same fixed-point
    equation are tried as steps (kept only if they lower the cost residual),
    and convergence requires that correction to be below ``tol`` as well.
    """
    u = np.asarray(u_values, dtype=np.float64)
    _check_logit_solvable(u, params, grid)
    w = _discounted(u, params.delta)
    eta0 = params.eta_init if eta_start is None else float(eta_start)
    eta, it, err, status = _kernels.logit_eta(
        w, params.epsilon, grid.cell_area, params.relax, params.tol, params.max_iter, eta0)
    if status != _kernels.CONVERGED:
        raise MaxIterExceeded(
            f"logit eta iteration did not converge after {it} iterations "
            f"(residual {err:.3e}, eta {eta:.6g})", err, it)
    return float(eta)


def solve_hjb_logit(u_values, params: HjbParams, grid: Grid,
                    eta_start: float | None = None) -> HjbSolution:
    eta = solve_eta_logit(u_values, params, grid, eta_start)
    phi = phi_logit_closed_form(u_values, eta, params.delta, grid)
    phi.flags.writeable = False
    return HjbSolution(phi, eta, 0, 0.0)


def eta_bisection_oracle(cost_fn: Callable[[float], float], epsilon: float,
                         bracket_lo: float, bracket_hi: float, width: float = 1e-12) -> float:
    """Root of a decreasing ``cost_fn(eta) = epsilon`` by plain bisection."""
    lo, hi = float(bracket_lo), float(bracket_hi)
    if not (lo < hi and cost_fn(lo) > epsilon > cost_fn(hi)):
        raise BracketError(f"[{lo:g}, {hi:g}] does not straddle epsilon={epsilon:g}")
    for _ in range(400):
        if hi - lo <= width * max(1.0, abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if cost_fn(mid) > epsilon:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def eta_logit_bisection(u_values, params: HjbParams, grid: Grid, u_max: float | None = None) -> float:
    """Logit multiplier by bisection on the entropic cost (independent of the fixed-point iteration)."""
    u = np.asarray(u_values, dtype=np.float64)
    _check_logit_solvable(u, params, grid)
    ubar = float(u.max()) if u_max is None else float(u_max)

    def cost(eta):
        return entropic_cost(u, eta, params.delta, grid)

    lo, hi = 1e-6, 10.0 * ubar * ubar / params.epsilon
    for _ in range(60):
        if cost(lo) > params.epsilon:
            break
        lo *= 0.1
    for _ in range(60):
        if cost(hi) < params.epsilon:
            break
        hi *= 10.0
    return eta_bisection_oracle(cost, params.epsilon, lo, hi)
