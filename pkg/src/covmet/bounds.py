"""Channel-extension precision bounds for phase-covariant qubit noise.

All ``f_upper_*`` functions return upper bounds on the quantum Fisher
information of ``N`` probes (with ancillas) about the frequency after an
interrogation time ``t``. The time-optimized mean squared error times total
time is ``mse_T = min_t t / F(t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from ._optimize import minimize_on_log_grid
from .lindblad import MapTrajectory
from .qubit_channel import PhaseCovariantMap, validate_cptp

P_SCAN_POINTS = 33
BETA_TOL = 1e-9


# ---------------------------------------------------------------- expansions

@dataclass(frozen=True)
class ShortTimeExpansion:
    """Leading short-time behaviour of the noise parameters.

    ``1 - eta_perp ~ alpha_perp t**beta_perp``, ``1 - eta_par ~ alpha_par
    t**beta_par`` and ``kappa ~ alpha_kappa t**beta_kappa``. A parameter that
    stays exactly at its initial value has ``alpha = 0`` and ``beta = inf``.
    """

    alpha_perp: float
    beta_perp: float
    alpha_par: float = 0.0
    beta_par: float = math.inf
    alpha_kappa: float = 0.0
    beta_kappa: float = math.inf

    def constraint_violations(self) -> list[str]:
        out = []
        if self.alpha_perp <= 0 or self.beta_perp < 1:
            out.append("need alpha_perp > 0 and beta_perp >= 1")
        if self.alpha_par < 0 or self.beta_par < 1:
            out.append("need alpha_par >= 0 and beta_par >= 1")
        if self.beta_kappa < 1:
            out.append("need beta_kappa >= 1")
        if self.beta_perp > self.beta_par + BETA_TOL:
            out.append("beta_perp > beta_par")
        elif _same(self.beta_perp, self.beta_par) and self.alpha_par > 2 * self.alpha_perp * (1 + 1e-12):
            out.append("alpha_par > 2 alpha_perp at equal powers")
        if self.beta_par > self.beta_kappa + BETA_TOL:
            out.append("beta_par > beta_kappa")
        elif _same(self.beta_par, self.beta_kappa) and abs(self.alpha_kappa) > self.alpha_par * (1 + 1e-12):
            out.append("|alpha_kappa| > alpha_par at equal powers")
        return out

    def validate(self) -> ShortTimeExpansion:
        bad = self.constraint_violations()
        if bad:
            raise ValueError("expansion violates complete positivity: " + "; ".join(bad))
        return self

    @property
    def scaling_exponent(self) -> float:
        """Power of ``N`` in the asymptotic ``mse_T ~ N**-exponent``."""
        return (2 * self.beta_perp - 1) / self.beta_perp


def _same(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= BETA_TOL


class AsymptoticConstant(NamedTuple):
    alpha: float
    D: float
    scaling_exponent: float


def asymptotic_constant(exp: ShortTimeExpansion) -> AsymptoticConstant:
    """Limit of ``mse_T * N**((2 beta_perp - 1)/beta_perp)`` from below.

    For ``beta_perp = 1`` this is only the short-time branch; a finite-time
    minimum can be lower and is found by ``optimize_time``.
    """
    exp.validate()
    a_perp, a_par, a_k = exp.alpha_perp, exp.alpha_par, abs(exp.alpha_kappa)
    if exp.beta_perp < exp.beta_par and not _same(exp.beta_perp, exp.beta_par):
        alpha = 2 * a_perp
    elif not _same(exp.beta_par, exp.beta_kappa):
        alpha = 2 * a_perp - a_par / 2
    else:
        alpha = max(2 * a_perp - a_par / 2 - a_k / 2, a_k / 4)
    beta = exp.beta_perp
    D = alpha ** (1 / beta) * beta / (beta - 1) ** ((beta - 1) / beta)
    return AsymptoticConstant(alpha, D, exp.scaling_exponent)


def t_bar(exp: ShortTimeExpansion, N) -> np.ndarray:
    """Asymptotically optimal interrogation time of the bound (infinite for beta_perp = 1)."""
    alpha = asymptotic_constant(exp).alpha
    beta = exp.beta_perp
    N = np.asarray(N, dtype=float)
    if beta == 1:
        return np.full(N.shape, math.inf)
    return 1.0 / (alpha * N * (beta - 1)) ** (1 / beta)


# ------------------------------------------------------------ closed forms

def f_upper_unital(eta_perp, eta_par, N, t):
    """Bound for a unital channel: ``N^2 t^2 / (1 + N l)``, ``l = (1 + eta_par - 2 eta_perp^2) / (2 eta_perp^2)``."""
    eta_perp = np.asarray(eta_perp, dtype=float)
    if np.any(eta_perp == 0):
        raise ValueError("eta_perp = 0 leaves no information; handle upstream")
    e2 = eta_perp * eta_perp
    ell = (1 + np.asarray(eta_par, dtype=float) - 2 * e2) / (2 * e2)
    return _squeeze(N * N * np.square(t) / (1 + N * ell))


def f_upper_ad(kappa, N, t):
    """Bound for amplitude damping with displacement ``kappa``.

    For ``N >= 2`` this is ``N^2 t^2 / (1 + N r)`` with ``r = kappa / (4 (1 - kappa))``.
    For ``N = 1`` the optimum of the same extension ansatz is
    ``4 t^2 (1 - kappa) / (1 + sqrt(1 - kappa))^2``.
    """
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa >= 1) or np.any(kappa < 0):
        raise ValueError("kappa must lie in [0, 1)")
    if N < 1:
        raise ValueError("N must be positive")
    if N == 1:
        return _squeeze(4 * np.square(t) * (1 - kappa) / np.square(1 + np.sqrt(1 - kappa)))
    r = kappa / (4 * (1 - kappa))
    return _squeeze(N * N * np.square(t) / (1 + N * r))


def _squeeze(x):
    return float(x) if np.ndim(x) == 0 else x


# ---------------------------------------------------- mixture decomposition

@dataclass(frozen=True)
class MixtureDecomposition:
    """``map = p * unital(eta_perp_u, eta_par_u) + (1 - p) * amplitude_damping(kappa_ad)``."""

    p: float
    eta_perp_u: float
    eta_par_u: float
    kappa_ad: float

    def recombine(self) -> PhaseCovariantMap:
        p, k = self.p, self.kappa_ad
        return PhaseCovariantMap(
            abs(p * self.eta_perp_u + (1 - p) * math.sqrt(1 - k)),
            p * self.eta_par_u + (1 - p) * (1 - k),
            (1 - p) * k,
        )

    def parts_cptp(self, tol: float = 1e-9) -> bool:
        unital = (abs(self.eta_par_u) <= 1 + tol
                  and 2 * abs(self.eta_perp_u) <= 1 + self.eta_par_u + tol)
        return unital and -tol <= self.kappa_ad <= 1 + tol


def p_range(m: PhaseCovariantMap) -> tuple[float, float]:
    """Interval of admissible mixing probabilities (after ``kappa -> |kappa|``)."""
    ep, epar, k = m.eta_perp, m.eta_par, abs(m.kappa)
    lo = max(_b_plus(ep, epar, k), 0.0)
    if k == 0:
        hi = 1.0
    elif ep < (1 + epar - k) / 2:
        hi = 1.0 - k
    else:
        hi = _b_minus(ep, epar, k)
    hi = min(max(hi, 0.0), 1.0 - k if k > 0 else 1.0)
    return min(lo, hi), hi


def p_opt(m: PhaseCovariantMap) -> float:
    """Heuristic mixing probability: the upper end of the admissible interval."""
    return p_range(m)[1]


def _b_plus(ep, epar, k):
    return _b(ep, epar, k, 1.0)


def _b_minus(ep, epar, k):
    return _b(ep, epar, k, -1.0)


def _b(ep, epar, k, s):
    den = 4 * (1 + epar + s * 2 * ep)
    if den <= 0:
        return 0.0
    num = 2 * (1 - k) * (2 + epar + s * 2 * ep) - (2 * ep + s * epar) ** 2 - (1 - k) ** 2
    return num / den


def decompose_mixture(m: PhaseCovariantMap, p: float, tol: float = 1e-12) -> MixtureDecomposition:
    """Split ``m`` into a unital part with weight ``p`` and amplitude damping."""
    lo, hi = p_range(m)
    if not lo - tol <= p <= hi + tol:
        raise ValueError(f"p={p} outside the admissible interval [{lo}, {hi}]")
    p = min(max(p, lo), hi)
    return _decompose(m.eta_perp, m.eta_par, abs(m.kappa), p)


def _decompose(ep, epar, k, p) -> MixtureDecomposition:
    if p <= 0:
        return MixtureDecomposition(0.0, 1.0, 1.0, k)
    q = 1 - p
    kappa_ad = k / q if q > 0 else 0.0
    amp = math.sqrt(max(q * (q - k), 0.0))
    return MixtureDecomposition(p, (ep - amp) / p, (p - 1 + epar + k) / p, kappa_ad)


# ------------------------------------------------------------ general bound

def _p_candidates(ep, epar, k, n_scan):
    """Scan points of the admissible interval plus the heuristic optimum, shape (n, ...)."""
    shape = np.shape(ep)
    lo = np.empty(shape)
    hi = np.empty(shape)
    for idx in np.ndindex(shape):
        lo[idx], hi[idx] = p_range(PhaseCovariantMap(ep[idx], epar[idx], k[idx]))
    frac = np.linspace(0.0, 1.0, n_scan).reshape((n_scan,) + (1,) * len(shape))
    return lo + frac * (hi - lo)


def _mixture_values(ep, epar, k, p, N, t):
    """``p F_unital + (1 - p) F_ad`` for broadcast arrays, degenerate parts contribute 0."""
    q = 1 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa_ad = np.where(q > 0, k / np.where(q > 0, q, 1.0), 0.0)
        amp = np.sqrt(np.maximum(q * (q - k), 0.0))
        ep_u = np.where(p > 0, (ep - amp) / np.where(p > 0, p, 1.0), 0.0)
        epar_u = np.where(p > 0, (p - 1 + epar + k) / np.where(p > 0, p, 1.0), 1.0)
        e2 = ep_u * ep_u
        ell = (1 + epar_u - 2 * e2) / (2 * e2)
        f_u = np.where(e2 > 0, N * N * t * t / (1 + N * ell), 0.0)
        if N == 1:
            f_ad = 4 * t * t * (1 - kappa_ad) / np.square(1 + np.sqrt(np.maximum(1 - kappa_ad, 0.0)))
        else:
            r = kappa_ad / (4 * (1 - kappa_ad))
            f_ad = np.where(kappa_ad < 1, N * N * t * t / (1 + N * r), 0.0)
    return np.where(p > 0, p * f_u, 0.0) + np.where(q > 0, q * f_ad, 0.0)


def f_upper_general(m: PhaseCovariantMap, N: int, t: float, n_scan: int = P_SCAN_POINTS) -> float:
    """Bound for an arbitrary phase-covariant map via its unital/damping mixtures.

    The minimum is taken over ``n_scan`` evenly spaced admissible mixing
    probabilities, which include both interval ends (and hence the heuristic
    optimum).
    """
    if not validate_cptp(m).is_cptp:
        raise ValueError("map is not CPTP")
    return float(f_upper_general_vec(m.eta_perp, m.eta_par, m.kappa, N, t, n_scan))


def f_upper_general_vec(eta_perp, eta_par, kappa, N, t, n_scan: int = P_SCAN_POINTS):
    """Array version of ``f_upper_general`` (no CPTP check)."""
    ep, epar, k, t = np.broadcast_arrays(*(np.asarray(x, dtype=float)
                                           for x in (eta_perp, eta_par, np.abs(kappa), t)))
    p = _p_candidates(ep, epar, k, n_scan)
    values = _mixture_values(ep, epar, k, p, N, t)
    return _squeeze(values.min(axis=0))


# ------------------------------------------------------- time optimization

@dataclass(frozen=True)
class TimeOptimum:
    t_opt: float
    mse_T: float
    converged: bool
    # large-N limit of F / (N t^2) at t_opt (mixture bound only)
    c_asymptotic: float = math.nan


@dataclass(frozen=True)
class BoundRecord:
    N: int
    t_opt: float
    mse_T: float
    rescaled_const: float
    converged: bool = True


@dataclass(frozen=True)
class BoundCurve:
    method: str
    records: tuple[BoundRecord, ...] = field(default_factory=tuple)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def default_bracket(traj: MapTrajectory) -> tuple[float, float]:
    hi = 10.0 * traj.tau_char
    return 1e-8 * traj.tau_char, min(hi, traj.t_max)


def bound_qfi(traj: MapTrajectory, N: int) -> Callable[[np.ndarray], np.ndarray]:
    """``t -> f_upper_general`` along a trajectory, vectorized in ``t``."""
    def qfi(t):
        p = traj.at(t)
        return f_upper_general_vec(p.eta_perp, p.eta_par, p.kappa, N, t)
    return qfi


def optimize_time(traj: MapTrajectory, N: int, bracket: tuple[float, float] | None = None,
                  qfi: Callable | None = None) -> TimeOptimum:
    """Minimize ``t / F(t)`` over the bracket (default: the mixture bound).

    A minimum sitting on a bracket edge is reported with ``converged=False``.
    """
    lo, hi = bracket if bracket is not None else default_bracket(traj)
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < t_lo < t_hi")
    fun = qfi if qfi is not None else bound_qfi(traj, N)

    def cost(t):
        f = np.asarray(fun(t), dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(f > 0, t / np.where(f > 0, f, 1.0), math.inf)

    res = minimize_on_log_grid(cost, lo, hi)
    c_asym = math.nan
    if qfi is None:
        n_big = 1e12
        c_asym = float(bound_qfi(traj, n_big)(res.x)) / (n_big * res.x * res.x)
    return TimeOptimum(res.x, res.fun, res.converged, c_asym)


def bound_curve(traj: MapTrajectory, Ns, beta_perp: float, bracket=None,
                method: str = "bound-analytic") -> BoundCurve:
    records = []
    for N in Ns:
        opt = optimize_time(traj, int(N), bracket)
        records.append(BoundRecord(int(N), opt.t_opt, opt.mse_T,
                                   opt.mse_T * rescale_power(N, beta_perp), opt.converged))
    return BoundCurve(method, tuple(records))


def rescale_power(N, beta_perp: float):
    """``N**((2 beta - 1)/beta)``; turns ``mse_T`` into its asymptotically constant form."""
    return np.asarray(N, dtype=float) ** ((2 * beta_perp - 1) / beta_perp)
