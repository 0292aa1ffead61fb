"""Noise models: trajectories, master-equation rates and short-time expansions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bounds import ShortTimeExpansion
from .lindblad import MapParams, MapTrajectory, TlmeRates

FIT_POINTS = 30
FIT_WINDOW = (1e-6, 1e-3)
MIN_R2 = 0.9999


# ------------------------------------------------------------ SL model

@dataclass(frozen=True)
class SlParams:
    """Post-Markovian model with memory rate ``gamma``, dissipation ``gamma0`` and bath occupation ``n_bath``."""

    gamma: float
    gamma0: float
    n_bath: float

    def __post_init__(self):
        for name in ("gamma", "gamma0", "n_bath"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    @property
    def R(self) -> float:
        return self.gamma0 / self.gamma * (2 * self.n_bath + 1)

    @property
    def tau_char(self) -> float:
        return 1.0 / self.gamma


def _expm1_ratio(eps: float, x):
    """``expm1(eps x) / eps`` with its limit ``x`` at ``eps = 0``."""
    x = np.asarray(x, dtype=float)
    return x if eps == 0 else np.expm1(eps * x) / eps


def sl_f(a: float, x):
    """``f(a, x) = (1 - a) / (1 - a exp(-(1 - a) x))``; ``f(1, x) = 1 / (1 + x)``."""
    x = np.asarray(x, dtype=float)
    eps = 1.0 - a
    if eps == 0:
        return 1.0 / (1.0 + x)
    if eps > 0:
        return eps / (-np.expm1(-eps * x) + eps * np.exp(-eps * x))
    return eps * np.exp(eps * x) / (np.expm1(eps * x) + eps)


def sl_eta(a: float, x):
    """``exp(-a x) / f(a, x) = exp(-x) (1 + expm1((1 - a) x) / (1 - a))``."""
    x = np.asarray(x, dtype=float)
    return np.exp(-x) * (1.0 + _expm1_ratio(1.0 - a, x))


def sl_deta(a: float, x):
    """Derivative of ``sl_eta`` with respect to ``x``."""
    x = np.asarray(x, dtype=float)
    return -a * np.exp(-x) * _expm1_ratio(1.0 - a, x)


def sl_trajectory(p: SlParams) -> MapTrajectory:
    g, R, n = p.gamma, p.R, p.n_bath

    def params(t):
        x = g * np.asarray(t, dtype=float)
        eta_par = sl_eta(R, x)
        return MapParams(sl_eta(R / 2, x), eta_par, -(1 - eta_par) / (2 * n + 1), np.zeros_like(x))

    def dparams(t):
        x = g * np.asarray(t, dtype=float)
        d_par = g * sl_deta(R, x)
        return MapParams(g * sl_deta(R / 2, x), d_par, d_par / (2 * n + 1), np.zeros_like(x))

    return MapTrajectory(params, tau_char=p.tau_char, dparams=dparams)


def sl_rates(p: SlParams) -> TlmeRates:
    g, R, n = p.gamma, p.R, p.n_bath

    def damping(t):
        return 1.0 - sl_f(R, g * np.asarray(t, dtype=float))

    def gamma_z(t):
        x = g * np.asarray(t, dtype=float)
        return g / 4 * (1 - 2 * sl_f(R / 2, x) + sl_f(R, x))

    return TlmeRates(
        h=lambda t: np.zeros(np.shape(t)),
        gamma_plus=lambda t: g * n / (2 * n + 1) * damping(t),
        gamma_minus=lambda t: g * (n + 1) / (2 * n + 1) * damping(t),
        gamma_z=gamma_z,
    )


def sl_expansion(p: SlParams) -> ShortTimeExpansion:
    c = p.gamma * p.gamma0
    return ShortTimeExpansion(c * (2 * p.n_bath + 1) / 4, 2.0, c * (2 * p.n_bath + 1) / 2, 2.0,
                              -c / 2, 2.0)


# ------------------------------------------------------ semigroup family

def semigroup_tau(g_plus: float, g_minus: float, g_z: float) -> float:
    total = g_plus + g_minus + 4 * g_z
    return 1.0 / total if total > 0 else 1.0


def semigroup_trajectory(g_plus: float, g_minus: float, g_z: float) -> MapTrajectory:
    """Constant rates: exponential contractions and a saturating displacement."""
    if min(g_plus, g_minus, g_z) < 0:
        raise ValueError("semigroup rates must be non-negative")
    big = g_plus + g_minus
    perp = 0.5 * (big + 4 * g_z)

    def params(t):
        t = np.asarray(t, dtype=float)
        # (g+ - g-) (1 - e^{-big t}) / big, finite as big -> 0
        kappa = (g_plus - g_minus) * _expm1_ratio(-big, t)
        return MapParams(np.exp(-perp * t), np.exp(-big * t), kappa, np.zeros_like(t))

    def dparams(t):
        t = np.asarray(t, dtype=float)
        return MapParams(-perp * np.exp(-perp * t), -big * np.exp(-big * t),
                         (g_plus - g_minus) * np.exp(-big * t), np.zeros_like(t))

    return MapTrajectory(params, tau_char=semigroup_tau(g_plus, g_minus, g_z), dparams=dparams)


def semigroup_rates(g_plus: float, g_minus: float, g_z: float) -> TlmeRates:
    return TlmeRates.constant(0.0, g_plus, g_minus, g_z)


def semigroup_expansion(g_plus: float, g_minus: float, g_z: float) -> ShortTimeExpansion:
    big = g_plus + g_minus
    perp = 0.5 * (big + 4 * g_z)
    if perp == 0:
        raise ValueError("noiseless semigroup has no short-time expansion")

    def term(alpha):
        return (alpha, 1.0) if alpha != 0 else (0.0, math.inf)

    return ShortTimeExpansion(*term(perp), *term(big), *term(g_plus - g_minus))


def dephasing_semigroup(gamma: float) -> MapTrajectory:
    """``eta_perp = exp(-gamma t)`` with ``eta_par = 1``."""
    return semigroup_trajectory(0.0, 0.0, gamma / 2)


# ----------------------------------------------------------- Zeno family

def zeno_dephasing_trajectory(a: float) -> MapTrajectory:
    """Gaussian dephasing ``eta_perp = exp(-(a t)^2)``, quadratic at short times."""
    if not (math.isfinite(a) and a > 0):
        raise ValueError("a must be positive")

    def params(t):
        t = np.asarray(t, dtype=float)
        return MapParams(np.exp(-(a * t) ** 2), np.ones_like(t), np.zeros_like(t), np.zeros_like(t))

    def dparams(t):
        t = np.asarray(t, dtype=float)
        z = np.zeros_like(t)
        return MapParams(-2 * a * a * t * np.exp(-(a * t) ** 2), z, z, z)

    return MapTrajectory(params, tau_char=1.0 / a, dparams=dparams)


def zeno_dephasing_expansion(a: float) -> ShortTimeExpansion:
    return ShortTimeExpansion(a * a, 2.0)


def noiseless_trajectory() -> MapTrajectory:
    def params(t):
        t = np.asarray(t, dtype=float)
        one, zero = np.ones_like(t), np.zeros_like(t)
        return MapParams(one, one, zero, zero)

    def dparams(t):
        zero = np.zeros_like(np.asarray(t, dtype=float))
        return MapParams(zero, zero, zero, zero)

    return MapTrajectory(params, tau_char=1.0, dparams=dparams)


# ---------------------------------------------------- exponent extraction

class PowerFit(NamedTuple):
    alpha: float
    beta: float
    r2: float


class ExponentFit(NamedTuple):
    expansion: ShortTimeExpansion
    fits: tuple[PowerFit, PowerFit, PowerFit]
    ok: bool


def _power_fit(t: np.ndarray, y: np.ndarray) -> PowerFit:
    if np.all(y == 0):
        return PowerFit(0.0, math.inf, 1.0)
    if np.any(y == 0):
        return PowerFit(math.nan, math.nan, 0.0)
    sign = np.sign(y[-1])
    lx, ly = np.log(t), np.log(np.abs(y))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 0.0
    return PowerFit(float(sign * math.exp(intercept)), float(slope), float(r2))


def extract_exponents(traj: MapTrajectory, window=FIT_WINDOW, n_points: int = FIT_POINTS) -> ExponentFit:
    """Log-log regression of ``1 - eta_perp``, ``1 - eta_par`` and ``|kappa|`` at short times.

    Powers are rounded to three decimals. ``ok`` is False when any fit has
    ``R^2 < 0.9999`` (not a clean power law in the window).
    """
    t = np.geomspace(window[0] * traj.tau_char, window[1] * traj.tau_char, n_points)
    p = traj.at(t)
    fits = (_power_fit(t, 1 - p.eta_perp), _power_fit(t, 1 - p.eta_par), _power_fit(t, p.kappa))
    ok = all(f.r2 >= MIN_R2 for f in fits)
    betas = [round(f.beta, 3) if math.isfinite(f.beta) else f.beta for f in fits]
    exp = ShortTimeExpansion(fits[0].alpha, betas[0], fits[1].alpha, betas[1], fits[2].alpha, betas[2])
    return ExponentFit(exp, fits, ok)
