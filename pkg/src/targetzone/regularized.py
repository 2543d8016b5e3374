"""Smoothed control problem: Gaussian kernel payoff and its Feynman-Kac value.

Replacing the local time at ``c`` by ``int G_eps(S_r) dr`` with a Gaussian
kernel of variance ``eps`` gives a value function with the representation

    U_eps(t, z) = log E[exp(beta * int_0^t G_eps(z + sigma W_r) dr)] / beta

over a free Brownian motion ``W``. Everything here estimates that expectation
(and its ``z``-derivative) by Monte Carlo on discretized Brownian paths. The
inner time integral uses the trapezoidal rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Optional, Sequence

import numpy as np

from targetzone import rng
from targetzone.closed_form import ClosedForm
from targetzone.model import ModelParams, validate
from targetzone.sim import McEstimate, SimConfig

MAX_EXPONENT = 700.0


class ResolutionError(ValueError):
    """The time step is too coarse to resolve the kernel."""


def g_eps(eps: float, x, c: float = 0.0):
    """Gaussian density with mean ``c`` and variance ``eps``."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-((x - c) ** 2) / (2.0 * eps)) / math.sqrt(2.0 * math.pi * eps)
    return float(out) if out.ndim == 0 else out


def dg_eps(eps: float, x, c: float = 0.0):
    """Derivative of :func:`g_eps` in ``x``."""
    x = np.asarray(x, dtype=float)
    out = -(x - c) / eps * np.exp(-((x - c) ** 2) / (2.0 * eps)) / math.sqrt(2.0 * math.pi * eps)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RegularizedValue:
    """Smoothed problem at kernel variance ``eps``.

    ``mc.n_steps`` is the number of time steps over ``[0, t]`` for whichever
    ``t`` is being evaluated.
    """

    params: ModelParams
    eps: float
    mc: SimConfig = SimConfig(n_steps=1000, n_paths=20_000)

    def __post_init__(self):
        validate(self.params)
        if not self.eps > 0:
            raise ValueError("eps must be > 0")

    def check_resolution(self, t: float) -> float:
        dt = t / self.mc.n_steps
        limit = self.eps / (4.0 * self.params.sigma**2)
        if dt > limit:
            raise ResolutionError(
                f"dt={dt:.3g} exceeds eps/(4 sigma^2)={limit:.3g}; "
                f"use n_steps >= {math.ceil(t / limit)}"
            )
        return dt


def _brownian_rows(seed, indices, n, dt, sigma):
    """Discretized ``sigma W`` on ``n + 1`` grid points, one row per path."""
    w = np.zeros((len(indices), n + 1))
    rng.normals_rows(seed, indices, n, out=w[:, 1:])
    w[:, 1:] *= sigma * math.sqrt(dt)
    np.cumsum(w, axis=1, out=w)
    return w


def _trapezoid(values, dt):
    return dt * (values.sum(axis=-1) - 0.5 * (values[..., 0] + values[..., -1]))


def _inner_block(params, eps, seed, n, dt, zs, want_grad, indices):
    w = _brownian_rows(seed, indices, n, dt, params.sigma)
    level = np.empty((len(zs), len(indices)))
    slope = np.empty_like(level) if want_grad else None
    for i, z in enumerate(zs):
        x = z + w
        level[i] = _trapezoid(g_eps(eps, x, params.c), dt)
        if want_grad:
            slope[i] = _trapezoid(dg_eps(eps, x, params.c), dt)
    return level, slope


def inner_integrals(rv: RegularizedValue, t: float, zs, want_grad: bool = False):
    """Per-path ``int_0^t G_eps(z + sigma W_r) dr`` for each ``z`` in ``zs``.

    All ``z`` share the same Brownian paths. Returns arrays of shape
    ``(len(zs), n_paths)``: the integrals and, if requested, the integrals of
    ``G_eps'``.
    """
    dt = rv.check_resolution(t)
    zs = np.atleast_1d(np.asarray(zs, dtype=float))
    n = rv.mc.n_steps
    work = partial(_inner_block, rv.params, rv.eps, rv.mc.seed, n, dt, zs, want_grad)
    parts = rng.map_chunks(work, rng.chunks(rv.mc.n_paths, n + 1), rv.mc.n_workers)
    level = np.concatenate([p[0] for p in parts], axis=1)
    slope = np.concatenate([p[1] for p in parts], axis=1) if want_grad else None
    return level, slope


def _weights(rv, level):
    exponent = rv.params.beta * level
    peak = float(np.max(exponent))
    if peak > MAX_EXPONENT:
        raise FloatingPointError(
            f"exponent beta*int G_eps reached {peak:.1f} > {MAX_EXPONENT}; refine the time step"
        )
    return np.exp(exponent)


def _log_mean(rv, weights) -> McEstimate:
    n = weights.size
    mean = math.fsum(weights) / n
    se = float(np.std(weights, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    beta = rv.params.beta
    return McEstimate(math.log(mean) / beta, se / (beta * mean), n)


def u_eps_values(rv: RegularizedValue, t: float, zs) -> list:
    """:func:`u_eps_mc` at several ``z`` with common random numbers."""
    zs = np.atleast_1d(np.asarray(zs, dtype=float))
    if t == 0:
        return [McEstimate(0.0, 0.0, rv.mc.n_paths) for _ in zs]
    level, _ = inner_integrals(rv, t, zs)
    return [_log_mean(rv, _weights(rv, row)) for row in level]


def u_eps_mc(rv: RegularizedValue, t: float, z: float) -> McEstimate:
    """Monte Carlo estimate of ``U_eps(t, z)``; the error bar uses the delta method."""
    return u_eps_values(rv, t, [z])[0]


def _ratio(numerator, weights) -> McEstimate:
    n = weights.size
    mean_w = math.fsum(weights) / n
    ratio = math.fsum(numerator) / n / mean_w
    resid = numerator - ratio * weights
    se = float(np.std(resid, ddof=1)) / (math.sqrt(n) * mean_w) if n > 1 else 0.0
    return McEstimate(ratio, se, n)


def du_eps_dz_values(rv: RegularizedValue, t: float, zs) -> list:
    if not t > 0:
        raise ValueError("t must be > 0")
    level, slope = inner_integrals(rv, t, zs, want_grad=True)
    return [_ratio(s * w, w) for s, w in zip(slope, (_weights(rv, row) for row in level))]


def du_eps_dz_mc(rv: RegularizedValue, t: float, z: float) -> McEstimate:
    """Ratio estimator of ``dU_eps/dz`` sharing paths between numerator and denominator."""
    return du_eps_dz_values(rv, t, [z])[0]


def v_star_eps(rv: RegularizedValue, t: float, z: float, surface=None) -> float:
    """Optimal speed of the smoothed problem at ``(t, z)``.

    With ``surface`` (a solved ``U_eps`` surface from :mod:`targetzone.pde`)
    the gradient is read off the grid; otherwise it is estimated by Monte Carlo.
    """
    p = rv.params
    if not t < p.horizon:
        raise ValueError("v_star_eps needs t < T")
    scale = p.gamma / (2.0 * p.kappa)
    if surface is not None:
        from targetzone.model import RegularizedOptimal

        return float(RegularizedOptimal.from_surface(p, rv.eps, surface).speed(p, t, z))
    return scale * du_eps_dz_mc(rv, p.horizon - t, z).mean


def occupation_identity(path, dt: float, eps: float, z: float, c: float = 0.0, band: float = 1e-2):
    """Both sides of the occupation-time identity for one path of ``sigma W``.

    Returns ``(time_side, space_side)``: the trapezoidal time integral of
    ``G_eps(z + sigma W_r)`` and ``sum_j G_eps(z + x_j) * occupation_j`` where
    ``occupation_j`` is the time the piecewise-linear path spends in the bin of
    width ``band`` centred at ``x_j`` (bins are centred on multiples of ``band``).
    """
    path = np.asarray(path, dtype=float)
    time_side = float(_trapezoid(g_eps(eps, z + path, c), dt))
    lo = np.minimum(path[:-1], path[1:])
    hi = np.maximum(path[:-1], path[1:])
    k_lo = math.floor(lo.min() / band + 0.5)
    k_hi = math.floor(hi.max() / band + 0.5)
    centres = np.arange(k_lo, k_hi + 1) * band
    edges = np.append(centres - 0.5 * band, centres[-1] + 0.5 * band)
    # time each linear segment spends below each edge
    span = hi - lo
    flat = span == 0
    frac = np.where(
        flat[:, None],
        (edges[None, :] > lo[:, None]).astype(float),
        np.clip((edges[None, :] - lo[:, None]) / np.where(flat, 1.0, span)[:, None], 0.0, 1.0),
    )
    below = dt * frac.sum(axis=0)
    occupation = np.diff(below)
    space_side = float(np.dot(g_eps(eps, z + centres, c), occupation))
    return time_side, space_side


def occupation_identity_check(
    rv: RegularizedValue, t: float, z: float, path_count: int = 100, band: float = 1e-2
) -> float:
    """Largest relative gap between the two sides of the identity over ``path_count`` paths."""
    if not t > 0:
        raise ValueError("t must be > 0")
    n = rv.mc.n_steps
    dt = t / n
    worst = 0.0
    for index in range(path_count):
        w = _brownian_rows(rv.mc.seed, [index], n, dt, rv.params.sigma)[0]
        lhs, rhs = occupation_identity(w, dt, rv.eps, z, rv.params.c, band)
        scale = max(abs(lhs), abs(rhs))
        if scale > 1e-300:
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def singular_limit(params: ModelParams, t, z):
    """The ``eps -> 0`` limit of ``U_eps`` for any ``z`` (symmetric about ``c``).

    The kernel integral converges to the occupation density of ``sigma W``
    per unit time, which is ``1 / sigma**2`` times the semimartingale local
    time. The limit is therefore the closed-form value with ``kappa`` replaced
    by ``kappa * sigma**2``, divided by ``sigma**2``; for ``sigma = 1`` it is
    the closed-form value itself.
    """
    s2 = params.sigma**2
    shifted = ModelParams(params.sigma, params.gamma, params.kappa * s2, params.c, params.c, params.horizon)
    z = params.c + np.abs(np.asarray(z, dtype=float) - params.c)
    return np.asarray(ClosedForm(shifted).value_u(t, z)) / s2


@dataclass
class ConvergenceTable:
    """Rows ``(eps, z, U_eps, std_error, U_limit, abs_error)`` and the sup error per ``eps``."""

    rows: list
    sup_errors: dict

    def decreasing(self) -> bool:
        errs = [self.sup_errors[e] for e in sorted(self.sup_errors, reverse=True)]
        return all(b < a for a, b in zip(errs, errs[1:]))


def convergence_study(
    params: ModelParams,
    eps_list: Sequence[float],
    t: float,
    z_grid: Sequence[float],
    mc: SimConfig,
) -> ConvergenceTable:
    """``max_z |U_eps(t, z) - U(t, z)|`` along a decreasing list of ``eps``."""
    eps_list = list(eps_list)
    if any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be positive and strictly decreasing")
    exact = np.atleast_1d(singular_limit(params, t, z_grid))
    rows, sup = [], {}
    for eps in eps_list:
        estimates = u_eps_values(RegularizedValue(params, eps, mc), t, z_grid)
        errs = []
        for z, est, ref in zip(z_grid, estimates, exact):
            err = abs(est.mean - float(ref))
            errs.append(err)
            rows.append((eps, float(z), est.mean, est.std_error, float(ref), err))
        sup[eps] = max(errs)
    return ConvergenceTable(rows, sup)


def _rms_block(params, eps_list, seed, n, dt, z, band, indices):
    w = _brownian_rows(seed, indices, n, dt, params.sigma)
    x = z + w
    near = np.abs(x[:, :-1] - params.c) <= 0.5 * band
    local = dt * np.count_nonzero(near, axis=1) / band
    return np.stack([_trapezoid(g_eps(e, x, params.c), dt) - local for e in eps_list])


def local_time_rms(
    params: ModelParams,
    eps_list: Sequence[float],
    t: float,
    z: float,
    mc: SimConfig,
    band: Optional[float] = None,
) -> np.ndarray:
    """RMS over paths of ``int G_eps(z + sigma W) dr`` minus the band local time at ``c``.

    The band estimate is the time per unit space spent within ``band / 2`` of
    ``c``; ``band`` defaults to ``4 sigma sqrt(dt)``.
    """
    n = mc.n_steps
    dt = t / n
    band = 4.0 * params.sigma * math.sqrt(dt) if band is None else band
    work = partial(_rms_block, params, list(eps_list), mc.seed, n, dt, z, band)
    diffs = np.concatenate(rng.map_chunks(work, rng.chunks(mc.n_paths, n + 1), mc.n_workers), axis=1)
    return np.sqrt(np.mean(diffs**2, axis=1))


def loglog_slopes(eps_list, values) -> np.ndarray:
    """Slopes of ``log(values)`` against ``log(eps)`` between consecutive entries."""
    return np.diff(np.log(values)) / np.diff(np.log(np.asarray(eps_list, dtype=float)))
