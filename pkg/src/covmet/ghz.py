"""GHZ-state performance under independent phase-covariant noise."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp

from ._optimize import minimize_on_log_grid
from .bounds import ShortTimeExpansion, default_bracket, rescale_power
from .lindblad import MapTrajectory
from .qubit_channel import PhaseCovariantMap


def _ghz_qfi_arrays(eta_perp, eta_par, kappa, N, t):
    eta_perp, eta_par, kappa, t = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (eta_perp, eta_par, kappa, t)))
    a = np.stack([1 + s1 * eta_par + s2 * kappa for s1 in (1, -1) for s2 in (1, -1)])
    signs = np.where(a < 0, -1.0, 1.0) ** (N % 2)
    with np.errstate(divide="ignore"):
        log_a = N * np.log(np.abs(a))
        log_den, sign = logsumexp(log_a, axis=0, b=signs, return_sign=True)
        log_den = log_den - (N + 1) * math.log(2)
        log_num = 2 * np.log(np.abs(t)) + 2 * math.log(N) + 2 * N * np.log(eta_perp)
    if np.any(sign <= 0):
        raise ValueError("degenerate GHZ denominator")
    return np.where(eta_perp > 0, np.exp(log_num - log_den), 0.0)


def ghz_qfi(m: PhaseCovariantMap, N: int, t: float) -> float:
    """QFI of the N-qubit GHZ state after ``m`` on every qubit.

    ``F = t^2 N^2 eta_perp^(2N) / (2^(-1-N) sum A^N)`` with
    ``A = 1 +- eta_par +- kappa``, evaluated through logarithms.
    """
    if N < 1:
        raise ValueError("N must be positive")
    return float(_ghz_qfi_arrays(m.eta_perp, m.eta_par, m.kappa, N, t))


@dataclass(frozen=True)
class GhzRecord:
    N: int
    t_opt: float
    qfi: float
    mse_T: float
    rescaled_const: float
    converged: bool = True


def ghz_optimize_time(traj: MapTrajectory, N: int, bracket=None,
                      beta_perp: float | None = None) -> GhzRecord:
    """Interrogation time minimizing ``t / F_GHZ(t)``."""
    lo, hi = bracket if bracket is not None else default_bracket(traj)

    def cost(t):
        p = traj.at(t)
        f = _ghz_qfi_arrays(p.eta_perp, p.eta_par, p.kappa, N, t)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(f > 0, t / np.where(f > 0, f, 1.0), math.inf)

    res = minimize_on_log_grid(cost, lo, hi)
    qfi = res.x / res.fun
    rescaled = res.fun * float(rescale_power(N, beta_perp)) if beta_perp else math.nan
    return GhzRecord(N, res.x, qfi, res.fun, rescaled, res.converged)


class GhzConstant(NamedTuple):
    alpha_t: float
    const: float
    residual: float
    bracket: tuple[float, float]


def _effective(exp: ShortTimeExpansion):
    """Coefficients that survive at the leading order (the rest set to zero)."""
    beta = exp.beta_perp
    a_par = exp.alpha_par if exp.beta_par <= beta + 1e-9 else 0.0
    a_k = exp.alpha_kappa if exp.beta_kappa <= beta + 1e-9 else 0.0
    return exp.alpha_perp, a_par, a_k, beta


def ghz_residual(alpha_t: float, exp: ShortTimeExpansion) -> float:
    """Stationarity condition for the asymptotic GHZ time constant."""
    a_perp, a_par, a_k, beta = _effective(exp)
    tanh = math.tanh(a_k / (2 * alpha_t)) if a_k else 0.0
    return alpha_t / beta - (a_k / 2) * tanh - (2 * a_perp - a_par / 2)


def ghz_asymptotic_constant(exp: ShortTimeExpansion) -> GhzConstant:
    """Optimal ``alpha_t`` (with ``t ~ (alpha_t N)^(-1/beta_perp)``) and the limit of ``mse_T * N^((2b-1)/b)``."""
    exp.validate()
    a_perp, a_par, a_k, beta = _effective(exp)
    level = 2 * a_perp - a_par / 2
    lo, hi = beta * level, beta * (level + abs(a_k) / 2)
    if lo <= 0:
        raise ValueError("empty bracket for alpha_t (noise vanishes at leading order)")
    if hi == lo:
        alpha_t = lo
    else:
        alpha_t = bisect(ghz_residual, lo, hi, args=(exp,), xtol=1e-15, rtol=4 * np.finfo(float).eps,
                         maxiter=200)
    const = (alpha_t ** (1 / beta) * math.exp(level / alpha_t)
             * math.cosh(a_k / (2 * alpha_t)))
    return GhzConstant(alpha_t, const, ghz_residual(alpha_t, exp), (lo, hi))


def ghz_time_estimate(alpha_t: float, beta_perp: float, N) -> np.ndarray:
    """Asymptotic optimal GHZ interrogation time ``(alpha_t N)^(-1/beta_perp)``."""
    return (alpha_t * np.asarray(N, dtype=float)) ** (-1 / beta_perp)
