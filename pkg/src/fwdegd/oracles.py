"""Independent reference solvers used to cross-check the production iterations.

Nothing here shares code with the fixed-point kernels in ``_kernels``.

Quadratic cost: for a fixed multiplier the value function preserves the
ordering of the utility (if U_i >= U_k then phi_i >= phi_k), so it can be
computed exactly by visiting cells from the largest utility downwards and
solving one increasing, concave scalar equation per cell.  The multiplier
then follows by bisection on the (decreasing) constraint residual.
"""
from __future__ import annotations

import math

import numpy as np

from .grid import Grid1D
from .hjb import (HjbParams, LambdaWeights, entropic_cost, eta_bisection_oracle,
                  eta_bounds_quadratic, eta_logit_bisection)


def _solve_cell(u_i, above_phi, above_lam, c, tol):
    # F(p) = p - u_i - c sum (above_phi - p)_+^2 above_lam; increasing and concave,
    # so Newton from p = u_i (where F <= 0) climbs monotonically to the root.
    p = u_i
    for _ in range(200):
        d = np.maximum(above_phi - p, 0.0)
        f = p - u_i - c * float(np.dot(d * d, above_lam))
        fp = 1.0 + 2.0 * c * float(np.dot(d, above_lam))
        step = -f / fp
        p += step
        if abs(step) <= tol * max(1.0, abs(p)):
            break
    return p


def phi_for_eta(u_values, lam, eta: float, delta: float, tol: float = 1e-15) -> np.ndarray:
    """Exact quadratic-cost value function for a given multiplier."""
    u = np.asarray(u_values, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    order = np.argsort(-u, kind="stable")
    phi = np.empty_like(u)
    c = 1.0 / (2.0 * eta * delta)
    done = 0
    while done < u.size:
        # cells tied in utility share one value
        top = u[order[done]]
        group = [order[done]]
        k = done + 1
        while k < u.size and u[order[k]] == top:
            group.append(order[k])
            k += 1
        idx = order[:done]
        val = _solve_cell(top, phi[idx], lam[idx], c, tol) if done else top
        phi[group] = val
        done = k
    return phi


def constraint_residual(u_values, lam, eta: float, params: HjbParams) -> float:
    phi = phi_for_eta(u_values, lam, eta, params.delta)
    d = np.maximum(phi[None, :] - phi[:, None], 0.0)
    s = float(lam @ (d * d) @ lam)
    return s / (2.0 * eta * eta) + params.chi / eta ** (2.0 + params.xi)


def quadratic_reference_solve(u_values, lam: LambdaWeights, params: HjbParams,
                              u_max: float | None = None) -> tuple[np.ndarray, float]:
    """(phi, eta) of the quadratic-cost system by ordered substitution + bisection."""
    u = np.asarray(u_values, dtype=np.float64)
    ubar = float(u.max()) if u_max is None else float(u_max)
    lo, hi = eta_bounds_quadratic(ubar, params.epsilon, params.chi, params.xi)
    w = lam.weights

    def cost(eta):
        return constraint_residual(u, w, eta, params)

    if u.max() - u.min() == 0.0:
        eta = lo
    else:
        lo_b, hi_b = lo * (1.0 - 1e-12), hi * 2.0
        if not cost(lo_b) > params.epsilon:
            eta = lo
        else:
            eta = eta_bisection_oracle(cost, params.epsilon, lo_b, hi_b, width=1e-15)
    return phi_for_eta(u, w, eta, params.delta), eta


def logit_reference_eta(u_values, params: HjbParams, grid, u_max: float | None = None) -> float:
    return eta_logit_bisection(u_values, params, grid, u_max)


# ---------------------------------------------------------------------------
# random instance banks
# ---------------------------------------------------------------------------

LOGIT_ETA_RANGE = (0.05, 2.0)


def random_logit_instance(rng, n: int | None = None, n_max: int = 16):
    """``(u, params, grid, eta_true)`` with U uniform on [0, 1.5].

    The budget is the entropic cost at a log-uniform ``eta_true`` in
    :data:`LOGIT_ETA_RANGE`, so every instance is solvable and the root is
    known up to the rounding of ``epsilon``.
    """
    n = int(rng.integers(2, n_max + 1)) if n is None else n
    grid = Grid1D(n)
    while True:
        u = rng.uniform(0.0, 1.5, n)
        if u.max() - u.min() > 1e-3:
            break
    delta = float(rng.uniform(1.0, 10.0))
    lo, hi = LOGIT_ETA_RANGE
    eta_true = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
    eps = entropic_cost(u, eta_true, delta, grid)
    return u, HjbParams(delta=delta, epsilon=eps), grid, eta_true


def random_quadratic_instance(rng, n: int | None = None, n_max: int = 16):
    """``(u, lam, params)``: U uniform on [0, 1.5], random weights and cost parameters."""
    n = int(rng.integers(2, n_max + 1)) if n is None else n
    u = rng.uniform(0.0, 1.5, n)
    lam = LambdaWeights(rng.dirichlet(np.ones(n)))
    params = HjbParams(delta=float(rng.uniform(1.0, 10.0)), epsilon=float(rng.uniform(0.1, 1.0)),
                       chi=float(10 ** rng.uniform(-5, -2)), xi=float(rng.integers(0, 3)))
    return u, lam, params
