"""Market parameters and feedback trading strategies.

A strategy is a trading speed ``v(t, z)`` as a function of time and the
current (reflected) exchange rate. Every built-in variant is vectorized over
``t`` and ``z`` and reports a constant ``C`` with ``|v(t, z)| <= C (1 + |z|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    """Raised when a parameter set violates a model constraint."""


class DomainError(ValueError):
    """Raised when a function is evaluated outside its domain."""


@dataclass(frozen=True)
class ModelParams:
    """Constants of the controlled Bachelier model.

    Attributes:
        sigma: volatility of the unaffected rate.
        gamma: permanent price impact per unit of inventory.
        kappa: slippage coefficient on the squared trading speed.
        c: barrier defended by the central bank.
        s0: initial exchange rate, ``s0 >= c``.
        horizon: trading horizon ``T``.
    """

    sigma: float = 1.0
    gamma: float = 1.0
    kappa: float = 1.0
    c: float = 0.0
    s0: float = 0.5
    horizon: float = 1.0

    @property
    def beta(self) -> float:
        return self.gamma**2 / (2.0 * self.kappa * self.sigma**2)


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged, or raise on the first violated constraint."""
    checks = [
        (params.sigma > 0, f"sigma must be > 0 (got {params.sigma})"),
        (params.gamma > 0, f"gamma must be > 0 (got {params.gamma})"),
        (params.kappa > 0, f"kappa must be > 0 (got {params.kappa})"),
        (params.horizon > 0, f"horizon must be > 0 (got {params.horizon})"),
        (math.isfinite(params.c), f"c must be finite (got {params.c})"),
        (params.s0 >= params.c, f"s0 < c ({params.s0} < {params.c})"),
    ]
    for ok, message in checks:
        if not ok:
            raise ParameterError(message)
    beta = params.beta
    if not (math.isfinite(beta) and beta > 0):
        raise ParameterError(f"beta must be finite and > 0 (got {beta})")
    return params


def check_domain(params: ModelParams, t, z) -> None:
    """Raise DomainError unless every ``(t, z)`` lies in ``[0, T] x [c, inf)``."""
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(~(t >= 0.0)) or np.any(~(t <= params.horizon)):
        raise DomainError(f"t outside [0, {params.horizon}]")
    if np.any(~(z >= params.c)):
        raise DomainError(f"z below the barrier c={params.c}")


class Strategy:
    """Base class for feedback strategies ``v(t, z)``.

    Subclasses implement :meth:`speed` (no domain checks, vectorized) and
    :meth:`growth_bound`.
    """

    name = "strategy"

    def speed(self, params: ModelParams, t, z):
        raise NotImplementedError

    def growth_bound(self, params: ModelParams) -> float:
        """Constant ``C`` such that ``|v(t, z)| <= C (1 + |z|)`` on the domain."""
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(Strategy):
    """Do not trade. ``C = 0``."""

    name = "zero"
    state_free = True

    def speed(self, params, t, z):
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(z)).shape)

    def growth_bound(self, params):
        return 0.0


@dataclass(frozen=True)
class Constant(Strategy):
    """Trade at a fixed speed ``a``. ``C = |a|``."""

    a: float
    state_free = True

    @property
    def name(self):
        return f"constant({self.a:g})"

    def speed(self, params, t, z):
        return np.full(np.broadcast(np.asarray(t), np.asarray(z)).shape, float(self.a))

    def growth_bound(self, params):
        return abs(self.a)


@dataclass(frozen=True)
class ClosedFormOptimal(Strategy):
    """The optimal feedback speed ``(gamma / 2 kappa) dU/dz(T - t, z)``.

    Bounded by ``gamma / (2 kappa)``, so ``C = gamma / (2 kappa)``. At ``t = T``
    the remaining horizon is zero and the speed is set to its limit: ``0`` for
    ``z > c`` and ``-gamma / (2 kappa)`` on the barrier.
    """

    name = "closed_form_optimal"

    def speed(self, params, t, z):
        from targetzone import closed_form

        scale = params.gamma / (2.0 * params.kappa)
        if np.ndim(t) == 0 and params.horizon - t > 0:
            return scale * closed_form.dudz_unchecked(params, params.horizon - t, z)
        t, z = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(z, dtype=float))
        remaining = params.horizon - t
        live = remaining > 0
        out = np.where(z <= params.c, -scale, 0.0)
        if np.any(live):
            out = np.array(out, dtype=float)
            out[live] = scale * closed_form.dudz_unchecked(params, remaining[live], z[live])
        return out

    def growth_bound(self, params):
        return params.gamma / (2.0 * params.kappa)


@dataclass(frozen=True)
class Scaled(Strategy):
    """Multiply another strategy by a constant factor."""

    base: Strategy
    factor: float

    @property
    def name(self):
        return f"{self.factor:g}*{self.base.name}"

    def speed(self, params, t, z):
        return self.factor * self.base.speed(params, t, z)

    def growth_bound(self, params):
        return abs(self.factor) * self.base.growth_bound(params)


@dataclass(frozen=True, eq=False)
class Tabulated(Strategy):
    """Bilinear interpolation of a speed table on a ``(t, z)`` grid.

    Queries are clamped to the grid hull, so ``C = max |table|``.

    Args:
        times: increasing 1-D array of grid times.
        zs: increasing 1-D array of grid prices.
        table: array of shape ``(len(times), len(zs))``.
    """

    times: np.ndarray
    zs: np.ndarray
    table: np.ndarray
    label: str = "tabulated"

    @property
    def name(self):
        return self.label

    @classmethod
    def from_surface(cls, surface, label="tabulated"):
        return cls(surface.grid.times, surface.grid.zs, surface.values, label)

    def speed(self, params, t, z):
        return bilinear(self.times, self.zs, self.table, t, z)

    def growth_bound(self, params):
        return float(np.max(np.abs(self.table)))


@dataclass(frozen=True, eq=False)
class RegularizedOptimal(Strategy):
    """Optimal speed of the smoothed problem, ``(gamma / 2 kappa) dU_eps/dz(T - t, z)``.

    Built from a solved surface of ``U_eps`` (see :func:`targetzone.pde.solve_hopf_cole`);
    the gradient is taken by centered differences on the grid and then
    interpolated bilinearly with clamping. ``C`` is the maximum absolute tabulated
    speed.
    """

    eps: float
    times: np.ndarray
    zs: np.ndarray
    gradient: np.ndarray

    name = "regularized_optimal"

    @classmethod
    def from_surface(cls, params, eps, surface):
        grad = np.gradient(surface.values, surface.grid.zs, axis=1)
        grad[:, 0] = 0.0
        return cls(eps, surface.grid.times, surface.grid.zs, grad)

    def speed(self, params, t, z):
        remaining = params.horizon - np.asarray(t, dtype=float)
        scale = params.gamma / (2.0 * params.kappa)
        return scale * bilinear(self.times, self.zs, self.gradient, remaining, z)

    def growth_bound(self, params):
        return params.gamma / (2.0 * params.kappa) * float(np.max(np.abs(self.gradient)))


def bilinear(xs, ys, table, x, y):
    """Bilinear interpolation of ``table[i, j] = f(xs[i], ys[j])`` with clamping."""
    x = np.clip(np.asarray(x, dtype=float), xs[0], xs[-1])
    y = np.clip(np.asarray(y, dtype=float), ys[0], ys[-1])
    i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
    j = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, len(ys) - 2)
    wx = (x - xs[i]) / (xs[i + 1] - xs[i])
    wy = (y - ys[j]) / (ys[j + 1] - ys[j])
    return (
        (1 - wx) * (1 - wy) * table[i, j]
        + wx * (1 - wy) * table[i + 1, j]
        + (1 - wx) * wy * table[i, j + 1]
        + wx * wy * table[i + 1, j + 1]
    )


def eval_strategy(strategy: Strategy, params: ModelParams, t, z):
    """Trading speed ``v(t, z)``; raises DomainError outside ``[0, T] x [c, inf)``."""
    check_domain(params, t, z)
    out = strategy.speed(params, t, z)
    if np.ndim(out) == 0:
        return float(out)
    return out
