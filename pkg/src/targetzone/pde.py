"""Finite-difference solvers on ``[z_min, z_max]`` marching forward in time-to-go.

Three problems are solved:

* the smoothed HJB equation
  ``U_t = sigma^2/2 U_zz + G_eps + gamma^2/(4 kappa) U_z^2`` with ``U_z = 0`` at ``c``;
* its Hopf-Cole linearization ``h_t = sigma^2/2 h_zz + beta G_eps h`` with ``h = exp(beta U)``;
* the singular limit (no source, ``U_z = -1`` at ``c``).

Boundary derivatives are imposed with ghost nodes, which keeps the boundary
treatment second order; the far end ``z_max`` carries a homogeneous Neumann
condition. Diffusion is implicit (tridiagonal, Crank-Nicolson after a short
implicit-Euler start) and the gradient-squared term is explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from targetzone.model import ModelParams, validate
from targetzone.regularized import g_eps


class SolverError(RuntimeError):
    """A solve produced non-finite values or broke its stability certificate."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform space-time grid with ``nz`` nodes and ``nt`` time steps."""

    z_min: float
    z_max: float
    nz: int
    nt: int
    t_max: float
    t_min: float = 0.0

    def __post_init__(self):
        if not self.z_max > self.z_min:
            raise ValueError("z_max must exceed z_min")
        if self.nz < 3 or self.nt < 1:
            raise ValueError("need nz >= 3 and nt >= 1")
        if not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")

    @classmethod
    def default(cls, params: ModelParams, nz: int = 601, nt: int = 2000, width: Optional[float] = None):
        """Grid on ``[c, c + width]``; ``width`` defaults to ``6 sigma sqrt(T)``."""
        width = 6.0 * params.sigma * math.sqrt(params.horizon) if width is None else width
        return cls(params.c, params.c + width, nz, nt, params.horizon)

    def refined(self) -> "Grid1D":
        """Same domain with ``dz`` and ``dt`` halved."""
        return Grid1D(self.z_min, self.z_max, 2 * self.nz - 1, 2 * self.nt, self.t_max, self.t_min)

    @property
    def dz(self) -> float:
        return (self.z_max - self.z_min) / (self.nz - 1)

    @property
    def dt(self) -> float:
        return (self.t_max - self.t_min) / self.nt

    @property
    def zs(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.nz)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.nt + 1)


@dataclass(frozen=True, eq=False)
class Surface:
    """Values on a grid; row ``k`` is time ``t_min + k dt``."""

    grid: Grid1D
    values: np.ndarray
    label: str = "U"
    stability: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.grid.nt + 1, self.grid.nz)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != {shape}")
        self.values.setflags(write=False)

    def at(self, t, z):
        """Bilinear interpolation inside the grid."""
        from targetzone.model import bilinear

        return bilinear(self.grid.times, self.grid.zs, self.values, t, z)

    def row(self, t: float) -> np.ndarray:
        k = int(round((t - self.grid.t_min) / self.grid.dt))
        return self.values[k]


def _laplacian_bands(n, h, coef):
    """Banded ``coef * d^2/dz^2`` with ghost-node Neumann rows at both ends."""
    upper = np.full(n, coef / h**2)
    main = np.full(n, -2.0 * coef / h**2)
    lower = np.full(n, coef / h**2)
    upper[1] *= 2.0  # row 0 couples to node 1 twice (ghost = node 1)
    lower[-2] *= 2.0  # row n-1 couples to node n-2 twice
    upper[0] = 0.0
    lower[-1] = 0.0
    return upper, main, lower


def _apply(bands, u):
    upper, main, lower = bands
    out = main * u
    out[:-1] += upper[1:] * u[1:]
    out[1:] += lower[:-1] * u[:-1]
    return out


def _gradient(u, h, left):
    g = np.empty_like(u)
    g[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    g[0] = left
    g[-1] = 0.0
    return g


def _start_steps(dt, substeps, grading):
    """Implicit-Euler substeps covering one startup row.

    With ``grading > 0`` the row is first split geometrically
    (``dt/2^g, dt/2^g, dt/2^(g-1), ..., dt/2``) to resolve the ``sqrt(t)``
    layer that incompatible boundary data creates at ``t = 0``.
    """
    if grading <= 0:
        return [dt / substeps] * substeps
    sizes = [dt * 2.0**-grading] + [dt * 2.0 ** -(grading - j) for j in range(grading)]
    return [x / substeps for x in sizes for _ in range(substeps)]


def _march(
    grid,
    diffusion,
    source,
    potential,
    quad,
    left_flux,
    u0,
    label,
    start_rows=10,
    substeps=8,
    grading=10,
    check=None,
):
    """Solve ``u_t = D u_zz + source + potential*u + quad*u_z^2`` on ``grid``.

    ``left_flux`` is ``u_z(z_min)``; the right end is homogeneous Neumann.
    The first ``start_rows`` rows are covered by implicit-Euler substeps (see
    :func:`_start_steps`); the rest use Crank-Nicolson with the explicit term
    extrapolated from the two previous levels.
    """
    n, h, dt = grid.nz, grid.dz, grid.dt
    lap = _laplacian_bands(n, h, diffusion)
    # ghost node u_{-1} = u_1 - 2 h g contributes -2 h g D / h^2 to row 0
    boundary = np.zeros(n)
    boundary[0] = -2.0 * diffusion * left_flux / h
    forcing = boundary + source
    out = np.empty((grid.nt + 1, n))
    out[0] = u0
    u = np.array(u0, dtype=float)
    prev_nl = None
    worst = 0.0

    def system(theta, step):
        upper, main, lower = lap
        ab = np.vstack([-theta * step * upper, 1.0 - theta * step * (main + potential), -theta * step * lower])
        return ab

    systems = {}

    def solve(theta, step, rhs):
        key = (theta, step)
        if key not in systems:
            systems[key] = system(theta, step)
        return solve_banded((1, 1), systems[key], rhs, check_finite=False)

    for k in range(grid.nt):
        grad = _gradient(u, h, left_flux)
        if check is not None:
            worst = max(worst, check(grad))
        nl = quad * grad**2
        if k < start_rows:
            v = u
            for sub in _start_steps(dt, substeps, grading if k == 0 else 0):
                g = _gradient(v, h, left_flux)
                v = solve(1.0, sub, v + sub * (forcing + quad * g**2))
            u_new = v
        else:
            explicit = nl if prev_nl is None else 1.5 * nl - 0.5 * prev_nl
            rhs = u + 0.5 * dt * (_apply(lap, u) + potential * u) + dt * (forcing + explicit)
            u_new = solve(0.5, dt, rhs)
        prev_nl = nl
        if not np.all(np.isfinite(u_new)):
            raise SolverError(f"{label}: non-finite values at time index {k + 1}")
        u = u_new
        out[k + 1] = u
    return out, worst


def _stability_check(params, grid):
    ratio = grid.dt * params.gamma / (2.0 * params.kappa * grid.dz)

    def check(grad):
        r = ratio * float(np.max(np.abs(grad)))
        if r > 1.0:
            raise SolverError(f"explicit gradient term unstable: dt*gamma*max|U_z|/(2 kappa dz) = {r:.3g} > 1")
        return r

    return check


def _kernel_check(eps, grid):
    if grid.dz > math.sqrt(eps) / 4.0:
        raise SolverError(f"dz={grid.dz:.3g} does not resolve the kernel (need <= sqrt(eps)/4 = {math.sqrt(eps) / 4:.3g})")


def solve_hjb_eps(params: ModelParams, eps: float, grid: Grid1D, with_source: bool = True) -> Surface:
    """Smoothed HJB with ``U(0, .) = 0`` and ``U_z = 0`` at ``grid.z_min``.

    A grid with ``z_min = c`` imposes the Neumann condition at the barrier; a
    grid extending below ``c`` solves the symmetric whole-line problem instead.
    """
    validate(params)
    _kernel_check(eps, grid)
    source = g_eps(eps, grid.zs, params.c) if with_source else np.zeros(grid.nz)
    values, worst = _march(
        grid,
        0.5 * params.sigma**2,
        source,
        0.0,
        params.gamma**2 / (4.0 * params.kappa),
        0.0,
        np.zeros(grid.nz),
        "hjb_eps",
        check=_stability_check(params, grid),
    )
    return Surface(grid, values, "U_eps", worst, {"eps": eps})


def solve_hopf_cole(params: ModelParams, eps: float, grid: Grid1D, coupling: Optional[float] = None):
    """Crank-Nicolson solve of the linear equation for ``h``; returns ``(h, U)`` surfaces.

    ``coupling`` multiplies ``G_eps h`` and defaults to ``beta``.
    """
    validate(params)
    _kernel_check(eps, grid)
    beta = params.beta
    coupling = beta if coupling is None else coupling
    potential = coupling * g_eps(eps, grid.zs, params.c)
    values, _ = _march(
        grid, 0.5 * params.sigma**2, 0.0, potential, 0.0, 0.0, np.ones(grid.nz), "hopf_cole", start_rows=0
    )
    h = Surface(grid, values, "h", 0.0, {"eps": eps})
    u = Surface(grid, np.log(values) / beta, "U_eps", 0.0, {"eps": eps})
    return h, u


def solve_singular(params: ModelParams, grid: Grid1D) -> Surface:
    """Limit equation with ``U_z = -1`` at the barrier and no source."""
    validate(params)
    values, worst = _march(
        grid,
        0.5 * params.sigma**2,
        0.0,
        0.0,
        params.gamma**2 / (4.0 * params.kappa),
        -1.0,
        np.zeros(grid.nz),
        "singular",
        check=_stability_check(params, grid),
    )
    return Surface(grid, values, "U", worst)


def residual(params: ModelParams, surface: Surface, equation: str = "singular", eps: Optional[float] = None) -> float:
    """Max centred-difference residual over interior nodes and interior time rows.

    ``equation`` is ``"singular"`` or ``"hjb_eps"`` (which needs ``eps``).
    """
    u = np.asarray(surface.values)
    g = surface.grid
    if u.shape[0] < 3:
        raise ValueError("need at least three time rows")
    ut = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2.0 * g.dt)
    mid = u[1:-1]
    uz = (mid[:, 2:] - mid[:, :-2]) / (2.0 * g.dz)
    uzz = (mid[:, 2:] - 2.0 * mid[:, 1:-1] + mid[:, :-2]) / g.dz**2
    rhs = 0.5 * params.sigma**2 * uzz + params.gamma**2 / (4.0 * params.kappa) * uz**2
    if equation == "hjb_eps":
        if eps is None:
            raise ValueError("hjb_eps residual needs eps")
        rhs = rhs + g_eps(eps, g.zs[1:-1], params.c)
    elif equation != "singular":
        raise ValueError(f"unknown equation {equation!r}")
    return float(np.max(np.abs(ut - rhs)))


def sample_closed_form(params: ModelParams, grid: Grid1D) -> Surface:
    """Closed-form ``U`` evaluated on every node of ``grid``."""
    from targetzone.closed_form import ClosedForm

    t, z = np.meshgrid(grid.times, grid.zs, indexing="ij")
    return Surface(grid, np.asarray(ClosedForm(params).value_u(t, z), dtype=float), "U_closed")


def boundary_gradient(surface: Surface) -> np.ndarray:
    """One-sided second-order ``U_z`` at ``z_min`` for every time row."""
    u = surface.values
    return (-3.0 * u[:, 0] + 4.0 * u[:, 1] - u[:, 2]) / (2.0 * surface.grid.dz)
