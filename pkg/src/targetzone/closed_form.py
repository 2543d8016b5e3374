"""Exact value function and optimal speed of the target-zone control problem.

With ``x = z - c``, ``a = x / (sigma sqrt(2 t))`` and ``b = beta sigma sqrt(t / 2)``,

    psi(t, x) = erf(a) + exp(-beta x + b**2) erfc(a - b),
    U(t, z) = log(psi(t, z - c)) / beta.

Since ``-beta x + b**2 = (a - b)**2 - a**2`` the second term equals
``exp(-a**2) erfcx(a - b)``, which is how it is evaluated unless ``a - b`` is
very negative; ``log psi`` is then assembled in log space so that neither the
exponential prefactor overflows nor ``psi - 1`` cancels in the far field.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, erfc, erfcx
from scipy.stats import norm

from targetzone.model import DomainError, ModelParams, validate

# below this argument erfcx(y) ~ 2 exp(y**2) is too close to overflow
_ERFCX_FLOOR = -20.0


def _parts(params: ModelParams, t, x):
    """Return ``(log_term2, log_psi, a)`` for ``t > 0`` (no checks, arrays)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    beta, sigma = params.beta, params.sigma
    root = np.sqrt(t)
    a = x / (sigma * math.sqrt(2.0) * root)
    b = beta * sigma * root / math.sqrt(2.0)
    y = a - b
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        safe = y > _ERFCX_FLOOR
        ex_y = erfcx(np.where(safe, y, 0.0))
        log_term2 = np.where(
            safe,
            -a * a + np.log(ex_y),
            -beta * x + b * b + np.log(erfc(np.where(safe, 0.0, y))),
        )
        # psi - 1 = term2 - erfc(a), both carry the factor exp(-a**2)
        excess = np.exp(-a * a) * (ex_y - erfcx(a))
        small = log_term2 < 0.0
        log_psi = np.where(
            small,
            np.log1p(np.where(small, excess, 0.0)),
            log_term2 + np.log1p(erf(a) * np.exp(-np.where(small, 0.0, log_term2))),
        )
    return log_term2, log_psi, a


def _scalar(value):
    return float(value) if np.ndim(value) == 0 else value


def _check_tx(t, x, strict_t=True):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if strict_t and np.any(~(t > 0)):
        raise DomainError("t must be > 0")
    if np.any(~(x >= 0)):
        raise DomainError("x must be >= 0")
    return t, x


def dudz_unchecked(params: ModelParams, t, z):
    """``dU/dz`` without domain checks; ``t > 0`` is assumed."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(z, dtype=float) - params.c
    beta, sigma = params.beta, params.sigma
    b = beta * sigma * np.sqrt(t) / math.sqrt(2.0)
    if np.max(b) < 20.0:
        # direct ratio -term2 / psi; nothing here can overflow for b < 20
        a = x / (sigma * math.sqrt(2.0) * np.sqrt(t))
        damp = np.exp(-a * a)
        ex_y = erfcx(a - b)
        return -damp * ex_y / (1.0 + damp * (ex_y - erfcx(a)))
    log_term2, log_psi, _ = _parts(params, t, x)
    return -np.exp(log_term2 - log_psi)


def log_psi_unchecked(params: ModelParams, t, x):
    """``log psi(t, x)`` for any real ``x`` and ``t > 0``.

    The formula is analytic in ``x`` across the barrier; finite-difference
    diagnostics use this to take centered differences at ``z = c``.
    """
    return _parts(params, t, x)[1]


class ClosedForm:
    """Analytic ``psi``, ``U``, their derivatives and the optimal speed.

    Example:
        >>> cf = ClosedForm(ModelParams())
        >>> round(cf.value_u(1.0, 0.0), 6)
        0.898402
    """

    def __init__(self, params: ModelParams):
        self.params = validate(params)

    # psi and its derivatives, as functions of the distance x = z - c

    def psi(self, t, x):
        t, x = _check_tx(t, x)
        return _scalar(np.exp(_parts(self.params, t, x)[1]))

    def dpsi_dx(self, t, x):
        t, x = _check_tx(t, x)
        log_term2 = _parts(self.params, t, x)[0]
        return _scalar(-self.params.beta * np.exp(log_term2))

    def dpsi_dt(self, t, x):
        t, x = _check_tx(t, x)
        p = self.params
        log_term2, _, a = _parts(p, t, x)
        heat = p.beta * p.sigma / np.sqrt(2.0 * np.pi * t) * np.exp(-a * a)
        return _scalar(heat + 0.5 * (p.beta * p.sigma) ** 2 * np.exp(log_term2))

    # value function and strategy in price coordinates

    def _check_z(self, t, z, strict_t):
        p = self.params
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=float)
        lower_ok = (t > 0) if strict_t else (t >= 0)
        if np.any(~lower_ok) or np.any(~(t <= p.horizon)):
            raise DomainError(f"t outside the allowed range of [0, {p.horizon}]")
        if np.any(~(z >= p.c)):
            raise DomainError(f"z below the barrier c={p.c}")
        return t, z

    def value_u(self, t, z):
        """``U(t, z)``; exactly 0 at ``t = 0``."""
        t, z = self._check_z(t, z, strict_t=False)
        t, z = np.broadcast_arrays(t, z)
        out = np.zeros(t.shape)
        live = t > 0
        if np.any(live):
            out[live] = _parts(self.params, t[live], z[live] - self.params.c)[1] / self.params.beta
        return _scalar(out[()] if out.ndim == 0 else out)

    def du_dz(self, t, z):
        """``dU/dz``; in ``[-1, 0)`` and exactly ``-1`` on the barrier."""
        t, z = self._check_z(t, z, strict_t=True)
        out = dudz_unchecked(self.params, t, z)
        out = np.where(z == self.params.c, -1.0, out)
        return _scalar(out[()] if out.ndim == 0 else out)

    def du_dt(self, t, z):
        t, z = self._check_z(t, z, strict_t=True)
        x = z - self.params.c
        return _scalar(self.dpsi_dt(t, x) / (self.params.beta * self.psi(t, x)))

    def d2u_dz2(self, t, z):
        t, z = self._check_z(t, z, strict_t=True)
        p = self.params
        x = z - p.c
        ratio = np.asarray(self.dpsi_dx(t, x)) / (p.beta * np.asarray(self.psi(t, x)))
        psi_xx = 2.0 / p.sigma**2 * np.asarray(self.dpsi_dt(t, x))
        return _scalar(psi_xx / (p.beta * np.asarray(self.psi(t, x))) - p.beta * ratio**2)

    def v_star(self, t, z):
        """Optimal speed ``(gamma / 2 kappa) dU/dz(T - t, z)`` for ``0 <= t < T``."""
        p = self.params
        t = np.asarray(t, dtype=float)
        if np.any(~(t >= 0)) or np.any(~(t < p.horizon)):
            raise DomainError(f"v_star needs 0 <= t < T={p.horizon}")
        return _scalar(p.gamma / (2.0 * p.kappa) * np.asarray(self.du_dz(p.horizon - t, z)))

    def barrier_value(self, t):
        """``U(t, c) = log(2 exp(b**2) Phi(beta sigma sqrt t)) / beta`` via the normal CDF."""
        p = self.params
        s = p.beta * p.sigma * np.sqrt(np.asarray(t, dtype=float))
        return _scalar((math.log(2.0) + 0.5 * s * s + norm.logcdf(s)) / p.beta)

    def pde_residual(self, t, z):
        """Residual of ``U_t = sigma^2/2 U_zz + gamma^2/(4 kappa) U_z^2`` from analytic derivatives."""
        p = self.params
        ut = np.asarray(self.du_dt(t, z))
        uz = np.asarray(self.du_dz(t, z))
        uzz = np.asarray(self.d2u_dz2(t, z))
        return _scalar(ut - 0.5 * p.sigma**2 * uzz - p.gamma**2 / (4.0 * p.kappa) * uz**2)

    def default_z_max(self) -> float:
        p = self.params
        return p.c + 6.0 * p.sigma * math.sqrt(p.horizon)
