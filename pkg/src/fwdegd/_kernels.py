"""Hot inner loops, each in two flavours.

* ``*_loops``: explicit loops in a fixed ascending summation order, compiled
  with ``numba.njit`` when numba is importable.
* ``*_np``: vectorized numpy equivalents.

The active backend is picked once at import from ``FWDEGD_BACKEND``
(``numba`` or ``numpy``; default ``numba`` when available).  Both flavours
are always importable so tests and the benchmark can compare them.

Status codes returned by the solver kernels: 0 converged, 1 max_iter hit,
2 non-finite iterate.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

CONVERGED, MAX_ITER, NON_FINITE = 0, 1, 2


def _jit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def _select_backend() -> str:
    want = os.environ.get("FWDEGD_BACKEND", "").strip().lower()
    if want == "numpy":
        return "numpy"
    if want == "numba" and not HAVE_NUMBA:
        raise ImportError("FWDEGD_BACKEND=numba but numba is not installed")
    return "numba" if HAVE_NUMBA else "numpy"


BACKEND = _select_backend()


# ---------------------------------------------------------------------------
# Quadratic cost: value function + multiplier fixed point
# ---------------------------------------------------------------------------

def _pos_sq_sums_loops(phi, lam, out):
    # out[i] = sum_j (phi_j - phi_i)_+^2 lam_j ; returns sum_i lam_i out[i]
    n = phi.shape[0]
    total = 0.0
    for i in range(n):
        acc = 0.0
        pi = phi[i]
        for j in range(n):
            d = phi[j] - pi
            if d > 0.0:
                acc += d * d * lam[j]
        out[i] = acc
        total += lam[i] * acc
    return total


_pos_sq_sums_loops = _jit(_pos_sq_sums_loops)
pos_sq_sums_loops = _pos_sq_sums_loops


def pos_sq_sums_np(phi, lam):
    d = np.maximum(phi[None, :] - phi[:, None], 0.0)
    a = (d * d) @ lam
    return a, float(lam @ a)


def _quadratic_solve_loops(u, lam, delta, eps, chi, xi, relax, phi_relax, tol, max_iter, eta0):
    n = u.shape[0]
    phi = u.copy()
    nxt = np.empty(n)
    acc = np.empty(n)
    eta = eta0
    err = math.inf
    for it in range(1, max_iter + 1):
        s = _pos_sq_sums_loops(phi, lam, acc)
        c = 1.0 / (2.0 * eta * delta)
        if err <= tol:
            # small step; accept only once the equations themselves hold to 10 tol
            res = abs(s / (2.0 * eta * eta) + chi / eta ** (2.0 + xi) - eps)
            for i in range(n):
                r = abs(u[i] + c * acc[i] - phi[i])
                if r > res:
                    res = r
            if res <= 10.0 * tol:
                return phi, eta, it - 1, err, CONVERGED
        err = 0.0
        for i in range(n):
            v = phi_relax * phi[i] + (1.0 - phi_relax) * (u[i] + c * acc[i])
            e = abs(v - phi[i])
            if e > err:
                err = e
            nxt[i] = v
        eta_new = relax * eta + (1.0 - relax) * math.sqrt(s / (2.0 * eps) + chi / (eps * eta ** xi))
        e = abs(eta_new - eta)
        if e > err:
            err = e
        for i in range(n):
            phi[i] = nxt[i]
        eta = eta_new
        if not (math.isfinite(err) and math.isfinite(eta)):
            return phi, eta, it, err, NON_FINITE
    return phi, eta, max_iter, err, MAX_ITER


_quadratic_solve_inner = _jit(_quadratic_solve_loops)


def quadratic_solve_loops(u, lam, delta, eps, chi, xi, relax, phi_relax, tol, max_iter, eta0):
    return _quadratic_solve_inner(
        np.ascontiguousarray(u, dtype=np.float64), np.ascontiguousarray(lam, dtype=np.float64),
        float(delta), float(eps), float(chi), float(xi), float(relax), float(phi_relax),
        float(tol), int(max_iter), float(eta0))


def _quadratic_sweep_np(u, lam, delta, eps, chi, xi, relax, phi_relax, phi, eta):
    # one sweep; also returns the equation residual of the incoming (phi, eta)
    a, s = pos_sq_sums_np(phi, lam)
    target = u + a / (2.0 * eta * delta)
    res = max(float(np.max(np.abs(target - phi))),
              abs(s / (2.0 * eta * eta) + chi / eta ** (2.0 + xi) - eps))
    nxt = phi_relax * phi + (1.0 - phi_relax) * target
    eta_new = relax * eta + (1.0 - relax) * math.sqrt(s / (2.0 * eps) + chi / (eps * eta ** xi))
    err = max(float(np.max(np.abs(nxt - phi))), abs(eta_new - eta))
    return nxt, eta_new, err, res


def quadratic_iterates_np(u, lam, delta, eps, chi, xi, relax, phi_relax, eta0):
    """Yield ``(phi, eta, err)`` after every quadratic-cost sweep (numpy path)."""
    phi = np.array(u, dtype=np.float64)
    eta = float(eta0)
    while True:
        phi, eta, err, _ = _quadratic_sweep_np(u, lam, delta, eps, chi, xi, relax, phi_relax, phi, eta)
        yield phi, eta, err


def quadratic_solve_np(u, lam, delta, eps, chi, xi, relax, phi_relax, tol, max_iter, eta0):
    u = np.asarray(u, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    phi, eta, err = u.copy(), float(eta0), math.inf
    for it in range(1, max_iter + 1):
        nxt, eta_new, step, res = _quadratic_sweep_np(u, lam, delta, eps, chi, xi, relax, phi_relax, phi, eta)
        if err <= tol and res <= 10.0 * tol:
            return phi, eta, it - 1, err, CONVERGED
        phi, eta, err = nxt, eta_new, step
        if not (math.isfinite(err) and math.isfinite(eta)):
            return phi, eta, it, err, NON_FINITE
    return phi, eta, max_iter, err, MAX_ITER


# ---------------------------------------------------------------------------
# Entropic cost: logit multiplier fixed point
# ---------------------------------------------------------------------------

# The relaxed map g contracts at r + (1 - r) g' with g' = 1 - Var_q(W) / (eta <W>)
# at the fixed point, which approaches 1 when q has little spread (eta -> 0 on
# coarse grids, or eta large).  There the step |eta_new - eta| understates the
# distance to the root by the factor 1 - g', so convergence is judged by the
# Newton correction of g(eta) = eta, which uses the same closed-form g'.  When
# successive steps shrink by more than ACCEL_RATIO that correction is also
# tried as the step, halved up to BACKTRACKS times until it keeps eta positive
# and lowers |cost - eps|.  A residual at
# the roundoff floor of the cost evaluation counts as a zero correction.
ACCEL_RATIO = 0.9
COST_ROUNDOFF = 8.0 * 2.220446049250313e-16
BACKTRACKS = 40


def _logit_g_loops(w, eta, eps, area):
    # (g, cost, newton): g = <W>_q / (eps + ln Z), Z = sum exp(W/eta) area, cost = <W>_q/eta - ln Z,
    # newton = (g - eta) eta <W>_q / Var_q(W), or 0 when the cost residual is roundoff
    n = w.shape[0]
    amax = w[0] / eta
    for i in range(1, n):
        a = w[i] / eta
        if a > amax:
            amax = a
    s = 0.0
    sw = 0.0
    for i in range(n):
        e = math.exp(w[i] / eta - amax)
        s += e
        sw += w[i] * e
    log_z = amax + math.log(s * area)
    mean_w = sw / s
    var = 0.0
    for i in range(n):
        d = w[i] - mean_w
        var += d * d * math.exp(w[i] / eta - amax)
    var /= s
    g = mean_w / (eps + log_z)
    newton = (g - eta) * eta * mean_w / var if var > 0.0 else math.inf
    if abs(mean_w / eta - log_z - eps) <= COST_ROUNDOFF * (mean_w / eta + abs(log_z)):
        newton = 0.0
    return g, mean_w / eta - log_z, newton


_logit_g_loops = _jit(_logit_g_loops)


def _logit_eta_loops(w, eps, area, relax, tol, max_iter, eta0):
    eta = eta0
    err = math.inf
    prev = 0.0
    for it in range(1, max_iter + 1):
        g, cost, newton = _logit_g_loops(w, eta, eps, area)
        if err <= tol and abs(newton) <= tol and abs(cost - eps) <= 10.0 * tol:
            return eta, it - 1, err, CONVERGED
        step = relax * eta + (1.0 - relax) * g - eta
        slow = prev != 0.0 and ACCEL_RATIO < step / prev < 1.0
        prev = step
        if slow and math.isfinite(newton):
            # backtrack until the correction stays positive and lowers the residual
            t = newton
            for _ in range(BACKTRACKS):
                if eta + t > 0.0:
                    _, c2, _ = _logit_g_loops(w, eta + t, eps, area)
                    if abs(c2 - eps) < abs(cost - eps):
                        step = t
                        prev = 0.0
                        break
                t *= 0.5
        err = abs(step)
        eta = eta + step
        if not (math.isfinite(eta) and eta > 0.0):
            return eta, it, err, NON_FINITE
    return eta, max_iter, err, MAX_ITER


_logit_eta_inner = _jit(_logit_eta_loops)


def logit_eta_loops(w, eps, area, relax, tol, max_iter, eta0):
    return _logit_eta_inner(np.ascontiguousarray(w, dtype=np.float64), float(eps), float(area),
                            float(relax), float(tol), int(max_iter), float(eta0))


def logit_g_np(w, eta, eps, area):
    """``(g, cost, newton)``: the fixed-point map, the entropic cost and the Newton correction at ``eta``."""
    a = w / eta
    amax = a.max()
    e = np.exp(a - amax)
    s = e.sum()
    log_z = amax + math.log(s * area)
    mean_w = float(np.dot(w, e) / s)
    var = float(np.dot((w - mean_w) ** 2, e) / s)
    g = mean_w / (eps + log_z)
    newton = (g - eta) * eta * mean_w / var if var > 0.0 else math.inf
    if abs(mean_w / eta - log_z - eps) <= COST_ROUNDOFF * (mean_w / eta + abs(log_z)):
        newton = 0.0
    return g, mean_w / eta - log_z, newton


def logit_eta_np(w, eps, area, relax, tol, max_iter, eta0):
    w = np.asarray(w, dtype=np.float64)
    eta, err, prev = float(eta0), math.inf, 0.0
    for it in range(1, max_iter + 1):
        g, cost, newton = logit_g_np(w, eta, eps, area)
        if err <= tol and abs(newton) <= tol and abs(cost - eps) <= 10.0 * tol:
            return eta, it - 1, err, CONVERGED
        step = relax * eta + (1.0 - relax) * g - eta
        slow = prev != 0.0 and ACCEL_RATIO < step / prev < 1.0
        prev = step
        if slow and math.isfinite(newton):
            # backtrack until the correction stays positive and lowers the residual
            t = newton
            for _ in range(BACKTRACKS):
                if eta + t > 0.0:
                    _, c2, _ = logit_g_np(w, eta + t, eps, area)
                    if abs(c2 - eps) < abs(cost - eps):
                        step = t
                        prev = 0.0
                        break
                t *= 0.5
        err = abs(step)
        eta = eta + step
        if not (math.isfinite(eta) and eta > 0.0):
            return eta, it, err, NON_FINITE
    return eta, max_iter, err, MAX_ITER


# ---------------------------------------------------------------------------
# Pairwise-protocol Euler step
# ---------------------------------------------------------------------------

def _pairwise_rhs_loops(mu, phi, eta, lam):
    # lam_i sum_j ((phi_i - phi_j)/eta)_+ mu_j - mu_i sum_j ((phi_j - phi_i)/eta)_+ lam_j
    n = mu.shape[0]
    out = np.empty(n)
    inv = 1.0 / eta
    for i in range(n):
        gain = 0.0
        loss = 0.0
        pi = phi[i]
        for j in range(n):
            d = (pi - phi[j]) * inv
            if d > 0.0:
                gain += d * mu[j]
            elif d < 0.0:
                loss -= d * lam[j]
        out[i] = lam[i] * gain - mu[i] * loss
    return out


_pairwise_rhs_inner = _jit(_pairwise_rhs_loops)


def pairwise_rhs_loops(mu, phi, eta, lam):
    return _pairwise_rhs_inner(np.ascontiguousarray(mu, dtype=np.float64),
                               np.ascontiguousarray(phi, dtype=np.float64), float(eta),
                               np.ascontiguousarray(lam, dtype=np.float64))


def pairwise_rhs_np(mu, phi, eta, lam):
    d = (phi[:, None] - phi[None, :]) / eta  # d[i, j] = (phi_i - phi_j)/eta
    gain = np.maximum(d, 0.0) @ mu
    loss = np.maximum(-d, 0.0) @ lam
    return lam * gain - mu * loss


def _impls(backend):
    if backend == "numba":
        return quadratic_solve_loops, logit_eta_loops, pairwise_rhs_loops
    return quadratic_solve_np, logit_eta_np, pairwise_rhs_np


quadratic_solve, logit_eta, pairwise_rhs = _impls(BACKEND)


def use_backend(name: str) -> None:
    """Switch the active backend at runtime (``numba`` or ``numpy``)."""
    global BACKEND, quadratic_solve, logit_eta, pairwise_rhs
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ImportError("numba is not installed")
    BACKEND = name
    quadratic_solve, logit_eta, pairwise_rhs = _impls(name)
