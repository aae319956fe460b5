"""Utility families evaluated at cell centers.

Built-ins:

* ``quadratic``   U(x) = sum_j (x - x_j)^2 mu_j + shift
* ``resource``    U(x) = (f(m) - c) x + shift,          f(v) = 1/sqrt(|v|)
* ``resource2d``  U(x, z) = (z f(m_x) - c) x + shift

where m is the mean action.  Extra families can be registered with
:func:`register_utility`; the dynamics only ever see the evaluated vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateMean, InvalidParams, ShiftTooSmall
from .grid import Density, Grid, Grid1D, Grid2D, mean_action

BOUND_SLACK = 1e-12

# resource2d: None means "use c", the smallest shift keeping U >= 0 at z = 0, x = 1
DEFAULT_SHIFT = {"quadratic": 0.0, "resource": 1.5, "resource2d": None}


@dataclass(frozen=True)
class CustomUtility:
    evaluate: Callable[[Grid, Density], np.ndarray]
    u_max: float
    ndim: int = 1


_REGISTRY: dict[str, CustomUtility] = {}


def register_utility(name: str, evaluate: Callable, u_max: float, ndim: int = 1) -> None:
    """Register ``evaluate(grid, density) -> values`` under ``name``.

    ``u_max`` is the declared upper bound; values are checked against
    ``[0, u_max]`` on every evaluation, exactly like the built-ins.
    """
    if name in DEFAULT_SHIFT:
        raise InvalidParams(f"{name!r} is a built-in utility")
    if not u_max > 0:
        raise InvalidParams("u_max must be positive")
    _REGISTRY[name] = CustomUtility(evaluate, float(u_max), ndim)


def unregister_utility(name: str) -> None:
    _REGISTRY.pop(name, None)


def f_resource(v: float) -> float:
    if v == 0.0:
        raise DegenerateMean("mean action is zero; f(v) = 1/sqrt(|v|) is undefined")
    return 1.0 / math.sqrt(abs(v))


@dataclass(frozen=True)
class UtilitySpec:
    name: str = "resource"
    c: float = 2.0
    shift: Optional[float] = None
    u_max: Optional[float] = None

    def __post_init__(self):
        if self.name not in DEFAULT_SHIFT and self.name not in _REGISTRY:
            raise InvalidParams(f"unknown utility {self.name!r}")
        if self.shift is None:
            default = DEFAULT_SHIFT.get(self.name, 0.0)
            object.__setattr__(self, "shift", float(self.c) if default is None else default)
        if self.name in ("resource", "resource2d") and not self.c > 0:
            raise InvalidParams(f"c must be positive, got {self.c}")

    @property
    def ndim(self) -> int:
        if self.name in _REGISTRY:
            return _REGISTRY[self.name].ndim
        return 2 if self.name == "resource2d" else 1

    def upper_bound(self, grid: Grid) -> float:
        """The bound U-bar of the shifted utility on ``grid``."""
        if self.u_max is not None:
            return float(self.u_max)
        if self.name in _REGISTRY:
            return _REGISTRY[self.name].u_max
        if self.name == "quadratic":
            return 1.0 + self.shift
        # smallest reachable mean is the first x center
        m_min = 0.5 * grid.dx
        return self.shift + abs(f_resource(m_min) - self.c)


def resource_formula(x, mean: float, c: float, shift: float, z=1.0):
    """Pointwise ``(z f(mean) - c) x + shift``; ``z = 1`` gives the 1D family."""
    return (np.asarray(z) * f_resource(mean) - c) * np.asarray(x) + shift


def _validate(spec: UtilitySpec, grid: Grid, u: np.ndarray) -> np.ndarray:
    lo = float(u.min())
    if lo < 0.0:
        raise ShiftTooSmall(f"utility {spec.name!r} reaches {lo:.6g} < 0; increase shift")
    hi = float(u.max())
    bound = spec.upper_bound(grid)
    if hi > bound + BOUND_SLACK:
        raise ShiftTooSmall(f"utility {spec.name!r} reaches {hi:.6g} above its bound {bound:.6g}")
    u.flags.writeable = False
    return u


def eval_utility_1d(spec: UtilitySpec, grid: Grid1D, density: Density) -> np.ndarray:
    if grid.ndim != 1:
        raise InvalidParams("eval_utility_1d needs a 1D grid")
    x = grid.centers
    mu = density.masses
    if spec.name == "quadratic":
        m1 = float(np.dot(x, mu))
        m2 = float(np.dot(x * x, mu))
        u = x * x - 2.0 * m1 * x + m2 + spec.shift
    elif spec.name == "resource":
        u = resource_formula(x, mean_action(density), spec.c, spec.shift)
    elif spec.name in _REGISTRY and spec.ndim == 1:
        u = np.array(_REGISTRY[spec.name].evaluate(grid, density), dtype=np.float64)
    else:
        raise InvalidParams(f"utility {spec.name!r} is not one-dimensional")
    return _validate(spec, grid, np.asarray(u, dtype=np.float64))


def eval_utility_2d(spec: UtilitySpec, grid: Grid2D, density: Density) -> np.ndarray:
    if grid.ndim != 2:
        raise InvalidParams("eval_utility_2d needs a 2D grid")
    if spec.name == "resource2d":
        u = resource_formula(grid.x, mean_action(density), spec.c, spec.shift, grid.z)
    elif spec.name in _REGISTRY and spec.ndim == 2:
        u = np.array(_REGISTRY[spec.name].evaluate(grid, density), dtype=np.float64)
    else:
        raise InvalidParams(f"utility {spec.name!r} is not two-dimensional")
    return _validate(spec, grid, np.asarray(u, dtype=np.float64))


def eval_utility(spec: UtilitySpec, grid: Grid, density: Density) -> np.ndarray:
    if grid.ndim == 1:
        return eval_utility_1d(spec, grid, density)
    return eval_utility_2d(spec, grid, density)


def utility_range(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("utility_range of an empty sequence")
    return float(v.min()), float(v.max())
