"""Monte Carlo for the controlled, reflected exchange rate.

The rate follows ``dS = gamma v(t, S) dt + sigma dW + dR`` with ``R`` the
minimal nondecreasing process keeping ``S >= c``. The Euler scheme projects
onto ``[c, inf)`` after each step; the projection residuals add up to the
pushing process ``R``.

Two inventory proxies are recorded per path:

* ``pushing``: the cumulative reflection ``R_T`` (the default payoff term).
* ``band_local_time``: ``sigma**2 / band`` times the time spent in
  ``[c, c + band]``. For a reflected diffusion this is about ``2 R_T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

import numpy as np
from scipy.special import ndtri

from targetzone import rng
from targetzone.model import ModelParams, Strategy, eval_strategy, validate

CONVENTIONS = ("pushing", "band")


@dataclass(frozen=True)
class SimConfig:
    """Discretization and sampling settings.

    ``band_eps=None`` selects ``2 sigma sqrt(dt)``.
    """

    n_steps: int = 1000
    n_paths: int = 10_000
    seed: int = 20_240_611
    band_eps: Optional[float] = None
    n_workers: int = 1

    def __post_init__(self):
        if self.n_steps < 1 or self.n_paths < 1:
            raise ValueError("n_steps and n_paths must be >= 1")
        if self.band_eps is not None and not self.band_eps > 0:
            raise ValueError("band_eps must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def band(self, params: ModelParams, horizon: Optional[float] = None) -> float:
        if self.band_eps is not None:
            return self.band_eps
        dt = (params.horizon if horizon is None else horizon) / self.n_steps
        return 2.0 * params.sigma * math.sqrt(dt)


@dataclass(frozen=True)
class PathRecord:
    terminal_s: float
    pushing: float
    band_local_time: float
    cost: float
    payoff: float


@dataclass(frozen=True)
class PathBatch:
    """Per-path results, in path-index order."""

    path_index: np.ndarray
    terminal_s: np.ndarray
    pushing: np.ndarray
    band_local_time: np.ndarray
    cost: np.ndarray

    def inventory(self, convention: str = "pushing") -> np.ndarray:
        if convention not in CONVENTIONS:
            raise ValueError(f"unknown inventory convention {convention!r}")
        return self.pushing if convention == "pushing" else self.band_local_time

    def payoff(self, convention: str = "pushing") -> np.ndarray:
        return self.inventory(convention) - self.cost


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_samples(cls, samples, **extra) -> "McEstimate":
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        mean = math.fsum(samples) / n
        std = float(np.std(samples, ddof=1)) if n > 1 else 0.0
        return cls(mean, std / math.sqrt(n), n, dict(extra))

    def z_score(self, target: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.mean == target else math.copysign(math.inf, self.mean - target)
        return (self.mean - target) / self.std_error


def combined_se(*estimates: McEstimate) -> float:
    return math.sqrt(sum(e.std_error**2 for e in estimates))


def _simulate_block(params, strategy, config, indices):
    if getattr(strategy, "state_free", False):
        return _simulate_block_state_free(params, strategy, config, indices)
    n = config.n_steps
    dt = params.horizon / n
    sq = params.sigma * math.sqrt(dt)
    c = params.c
    top = c + config.band(params)
    xi = rng.normals_block(config.seed, indices, n)
    m = len(indices)
    s = np.full(m, float(params.s0))
    pushing = np.zeros(m)
    occupied = np.zeros(m)
    speed_sq = np.zeros(m)
    for k in range(n):
        v = eval_strategy(strategy, params, k * dt, s)
        speed_sq += v * v
        occupied += s <= top
        s = s + params.gamma * dt * v + sq * xi[k]
        push = np.maximum(c - s, 0.0)
        pushing += push
        s = np.maximum(s, c)
    band_lt = params.sigma**2 / config.band(params) * occupied * dt
    return s, pushing, band_lt, params.kappa * speed_sq * dt


def _simulate_block_state_free(params, strategy, config, indices):
    # With a speed that ignores the state, the projected recursion
    # S_{k+1} = max(c, S_k + d_k) is the discrete Skorokhod map of the free
    # walk Y: S_k - c = Y_k - min(0, min_{j<=k} Y_j) and R_k = -min(0, min_{j<=k} Y_j).
    n = config.n_steps
    dt = params.horizon / n
    times = np.arange(n) * dt
    v = np.asarray(eval_strategy(strategy, params, times, np.full(n, params.s0)), dtype=float)
    y = np.empty((len(indices), n + 1))
    rng.normals_rows(config.seed, indices, n, out=y[:, 1:])
    y[:, 0] = params.s0 - params.c
    y[:, 1:] *= params.sigma * math.sqrt(dt)
    y[:, 1:] += params.gamma * dt * v
    np.cumsum(y, axis=1, out=y)
    floor = np.minimum.accumulate(np.minimum(y, 0.0, out=np.empty_like(y)), axis=1)
    top = config.band(params)
    occupied = np.count_nonzero(y[:, :-1] - floor[:, :-1] <= top, axis=1)
    band_lt = params.sigma**2 / top * occupied * dt
    cost = np.full(len(indices), params.kappa * float(np.sum(v * v)) * dt)
    state = y[:, -1] - floor[:, -1]
    return params.c + state, -floor[:, -1], band_lt, cost


def simulate_paths(params: ModelParams, strategy: Strategy, config: SimConfig) -> PathBatch:
    """Simulate all ``config.n_paths`` paths and return per-path results."""
    validate(params)
    blocks = rng.chunks(config.n_paths, config.n_steps)
    work = partial(_simulate_block, params, strategy, config)
    parts = rng.map_chunks(work, blocks, config.n_workers)
    cols = [np.concatenate([p[i] for p in parts]) for i in range(4)]
    return PathBatch(np.arange(config.n_paths), *cols)


def simulate_path(params, strategy, config, path_index: int, convention="pushing") -> PathRecord:
    """Simulate one path; identical to that path's entry in :func:`simulate_paths`."""
    validate(params)
    if not 0 <= path_index < config.n_paths:
        raise IndexError(f"path_index {path_index} outside [0, {config.n_paths})")
    s, push, band_lt, cost = (
        float(a[0]) for a in _simulate_block(params, strategy, config, np.array([path_index]))
    )
    inventory = push if convention == "pushing" else band_lt
    return PathRecord(s, push, band_lt, cost, inventory - cost)


def mc_objective(
    params: ModelParams,
    strategy: Strategy,
    config: SimConfig,
    inventory_convention: str = "pushing",
) -> McEstimate:
    """Estimate ``E[inventory_T - kappa * int v^2 dt]`` under ``strategy``."""
    if inventory_convention not in CONVENTIONS:
        raise ValueError(f"unknown inventory convention {inventory_convention!r}")
    batch = simulate_paths(params, strategy, config)
    return McEstimate.from_samples(
        batch.payoff(inventory_convention),
        pushing=float(np.mean(batch.pushing)),
        band_local_time=float(np.mean(batch.band_local_time)),
        cost=float(np.mean(batch.cost)),
    )


def _local_time_block(t, level, weight, config, exact, indices):
    if exact:
        # Levy: the local time at 0 by time t has the law of |W_t|
        u = rng.uniforms_by_index(config.seed, int(indices[0]), int(indices[-1]) + 1)
        lt = math.sqrt(t) * ndtri(0.5 + 0.5 * u)
    else:
        n = config.n_steps
        dt = t / n
        band = config.band_eps if config.band_eps is not None else 2.0 * math.sqrt(dt)
        w = np.cumsum(rng.normals_block(config.seed, indices, n) * math.sqrt(dt), axis=0)
        # left Riemann sum over the grid points t_0 = 0, ..., t_{n-1}
        inside = (np.abs(w[:-1] - level) <= 0.5 * band).sum(axis=0) + (abs(level) <= 0.5 * band)
        lt = inside * dt / band
    return np.exp(weight * lt)


def brownian_local_time_mc(
    params: ModelParams,
    t: float,
    level: float,
    config: SimConfig,
    exact: bool = False,
    weight: Optional[float] = None,
) -> McEstimate:
    """Estimate ``E[exp(weight * L_t^level(W))]`` for a standard Brownian motion.

    ``weight`` defaults to ``beta * sigma``, which makes
    ``log(mean) / beta`` an estimate of ``U(t, c + sigma * level)``.
    ``exact=True`` samples the local time at level 0 directly from its law.
    """
    validate(params)
    if not t > 0:
        raise ValueError("t must be > 0")
    if exact and level != 0:
        raise ValueError("the exact-law variant is only available at level 0")
    weight = params.beta * params.sigma if weight is None else float(weight)
    blocks = rng.chunks(config.n_paths, 1 if exact else config.n_steps + 1)
    work = partial(_local_time_block, t, level, weight, config, exact)
    samples = np.concatenate(rng.map_chunks(work, blocks, config.n_workers))
    return McEstimate.from_samples(samples)


def log_value(estimate: McEstimate, beta: float) -> McEstimate:
    """Map an estimate of ``E[exp(beta X)]`` to ``log(mean) / beta`` (delta method)."""
    return McEstimate(
        math.log(estimate.mean) / beta,
        estimate.std_error / (beta * estimate.mean),
        estimate.n_paths,
    )
