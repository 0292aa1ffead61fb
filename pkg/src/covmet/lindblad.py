"""Conversion between map trajectories and time-local master-equation rates.

The generator has a frequency shift ``h`` and three dissipative rates:
``gamma_plus`` pumps towards ``|0>`` (``kappa`` grows), ``gamma_minus`` decays
towards ``|1>`` and ``gamma_z`` dephases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .qubit_channel import PhaseCovariantMap

CP_RATE_FLOOR = -1e-12
FD_REL_STEP = 1e-6
SINGULAR_ETA = 1e-12

ParamFn = Callable[[np.ndarray], tuple]


class SingularMap(ValueError):
    """The map is not invertible at the requested time, so no rates exist."""


class MapParams(NamedTuple):
    eta_perp: np.ndarray
    eta_par: np.ndarray
    kappa: np.ndarray
    theta: np.ndarray


class RateValues(NamedTuple):
    h: np.ndarray
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    gamma_z: np.ndarray


@dataclass(frozen=True)
class MapTrajectory:
    """Noise trajectory ``t -> (eta_perp, eta_par, kappa, theta)``.

    ``params`` must accept an array of times. ``theta`` is the noise-induced
    rotation only; the encoded ``omega t`` is added by the estimation layer.
    ``dparams`` optionally supplies exact time derivatives in the same layout.
    ``tau_char`` sets the natural time scale used for brackets and steps.
    """

    params: ParamFn
    t_max: float = math.inf
    tau_char: float = 1.0
    dparams: ParamFn | None = None

    @property
    def analytic_derivatives(self) -> bool:
        return self.dparams is not None

    def at(self, t) -> MapParams:
        t = np.asarray(t, dtype=float)
        return MapParams(*(np.broadcast_to(np.asarray(x, dtype=float), t.shape)
                           for x in self.params(t)))

    def derivatives(self, t) -> MapParams:
        t = np.asarray(t, dtype=float)
        if self.dparams is not None:
            return MapParams(*(np.broadcast_to(np.asarray(x, dtype=float), t.shape)
                               for x in self.dparams(t)))
        step = FD_REL_STEP * self.tau_char
        # second-order one-sided stencil where the central one would reach t < 0
        near_zero = t < step
        tc = np.where(near_zero, t + step, t)
        lo, mid, hi = self.at(tc - step), self.at(tc), self.at(tc + step)
        out = []
        for a, b, c in zip(lo, mid, hi):
            central = (c - a) / (2 * step)
            forward = (-3 * a + 4 * b - c) / (2 * step)
            out.append(np.where(near_zero, forward, central))
        return MapParams(*out)

    def __call__(self, t: float, omega: float = 0.0) -> PhaseCovariantMap:
        p = self.at(float(t))
        return PhaseCovariantMap(float(p.eta_perp), float(p.eta_par),
                                 float(p.kappa), omega * t + float(p.theta))


@dataclass(frozen=True)
class TlmeRates:
    """Rate functions of the time-local master equation (vectorized in ``t``)."""

    h: Callable[[np.ndarray], np.ndarray]
    gamma_plus: Callable[[np.ndarray], np.ndarray]
    gamma_minus: Callable[[np.ndarray], np.ndarray]
    gamma_z: Callable[[np.ndarray], np.ndarray]

    def __call__(self, t) -> RateValues:
        t = np.asarray(t, dtype=float)
        return RateValues(*(np.broadcast_to(np.asarray(f(t), dtype=float), t.shape)
                            for f in (self.h, self.gamma_plus, self.gamma_minus, self.gamma_z)))

    @classmethod
    def constant(cls, h=0.0, gamma_plus=0.0, gamma_minus=0.0, gamma_z=0.0) -> TlmeRates:
        def const(c):
            return lambda t: np.full(np.shape(t), float(c))
        return cls(const(h), const(gamma_plus), const(gamma_minus), const(gamma_z))


def rates_from_trajectory(traj: MapTrajectory, t) -> RateValues:
    """Rates generating ``traj`` at time(s) ``t``.

    Raises SingularMap where ``|eta_perp|`` or ``|eta_par|`` is below 1e-12.
    """
    p = traj.at(t)
    if np.any(np.abs(p.eta_perp) <= SINGULAR_ETA) or np.any(np.abs(p.eta_par) <= SINGULAR_ETA):
        raise SingularMap(f"map is not invertible at t={t}")
    d = traj.derivatives(t)
    log_dpar = d.eta_par / p.eta_par
    return RateValues(
        h=d.theta,
        gamma_plus=0.5 * (d.kappa - log_dpar * (p.kappa + 1)),
        gamma_minus=-0.5 * (d.kappa + log_dpar * (1 - p.kappa)),
        gamma_z=0.25 * (log_dpar - 2 * d.eta_perp / p.eta_perp),
    )


@dataclass(frozen=True)
class IntegratedTrajectory:
    """Result of integrating rates: the trajectory and where integration stopped."""

    trajectory: MapTrajectory
    grid: np.ndarray
    values: MapParams
    singular_at: float | None


def trajectory_from_rates(rates: TlmeRates, grid, rtol: float = 1e-10) -> IntegratedTrajectory:
    """Solve the master equation for the map parameters on an ascending grid.

    ``theta``, ``log eta_par`` and ``log eta_perp`` are plain integrals of the
    rates and ``kappa`` obeys ``kappa' = (g+ - g-) - (g+ + g-) kappa``; all four
    are integrated together with a high-order adaptive scheme. Integration stops
    before the first grid point at which a rate is not finite.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("grid must be ascending, non-negative, with at least two points")
    if grid[0] != 0.0:
        grid = np.concatenate([[0.0], grid])

    values = rates(grid)
    finite = np.all(np.isfinite(np.vstack(values)), axis=0)
    singular_at = None
    if not finite.all():
        first_bad = int(np.argmin(finite))
        singular_at = float(grid[first_bad])
        if first_bad < 2:
            raise SingularMap(f"rates diverge at t={singular_at}")
        grid = grid[:first_bad]

    def rhs(t, y):
        h, gp, gm, gz = (float(v) for v in rates(t))
        total = gp + gm
        return [h, -total, -0.5 * (total + 4 * gz), (gp - gm) - total * y[3]]

    sol = solve_ivp(rhs, (grid[0], grid[-1]), [0.0, 0.0, 0.0, 0.0], method="DOP853",
                    t_eval=grid, dense_output=True, rtol=rtol, atol=1e-14)
    if not sol.success:
        raise RuntimeError(f"rate integration failed: {sol.message}")
    t_end = float(grid[-1])
    dense = sol.sol

    def params(t):
        y = dense(np.clip(t, 0.0, t_end))
        return MapParams(np.exp(y[2]), np.exp(y[1]), y[3], y[0])

    def dparams(t):
        p = params(t)
        h, gp, gm, gz = rates(t)
        total = gp + gm
        return MapParams(-0.5 * (total + 4 * gz) * p.eta_perp, -total * p.eta_par,
                         (gp - gm) - total * p.kappa, h)

    tau = _rate_time_scale(values, finite)
    traj = MapTrajectory(params, t_max=t_end, tau_char=tau, dparams=dparams)
    y = sol.y
    return IntegratedTrajectory(traj, grid, MapParams(np.exp(y[2]), np.exp(y[1]), y[3], y[0]),
                                singular_at)


def _rate_time_scale(values: RateValues, finite: np.ndarray) -> float:
    scale = max((np.max(np.abs(v[finite])) for v in values), default=0.0)
    return 1.0 / scale if scale > 0 else 1.0


class DivisibilityReport(NamedTuple):
    cp_divisible: bool
    first_violation: float | None


def is_cp_divisible(rates: TlmeRates, grid) -> DivisibilityReport:
    """All three dissipative rates non-negative (to ``-1e-12``) on the grid."""
    grid = np.asarray(grid, dtype=float)
    r = rates(grid)
    ok = ((r.gamma_plus >= CP_RATE_FLOOR) & (r.gamma_minus >= CP_RATE_FLOOR)
          & (r.gamma_z >= CP_RATE_FLOOR))
    if ok.all():
        return DivisibilityReport(True, None)
    return DivisibilityReport(False, float(grid[np.argmin(ok)]))
