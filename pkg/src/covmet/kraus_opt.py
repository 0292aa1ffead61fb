"""Channel-extension bound minimized over Kraus representations.

Equivalent Kraus sets are generated by a 4x4 Hermitian ``gen``: the shifted
derivatives are ``dK'_i = dK_i - i t sum_j gen_ij K_j``. The objective is

    4 N (||A|| + (N - 1) ||B||^2),  A = sum dK'^+ dK',  B = sum dK'^+ K.

For canonical Kraus operators of a phase-covariant map the objective is
invariant under ``gen -> u^+ gen u`` with ``u = diag(e^{-ia}, e^{ia}, 1, 1)``.
It is also convex, so an optimum exists among generators with real
``gen[0,0]``, ``gen[1,1]`` and a real symmetric lower-right block. There ``A``
and ``B`` are diagonal and the problem is a small convex quadratic min-max,
solved here exactly through its two-multiplier dual. A Nelder-Mead search
over all 16 real generator parameters then tries to improve on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize as _scipy_minimize
from scipy.optimize import brentq

from .qubit_channel import KrausSet, PhaseCovariantMap, canonical_kraus

STALL_ITERS = 50
STALL_RTOL = 1e-10
MAX_EVALS = 100_000
N_RESTARTS = 8
RESTART_SCALE = 0.1
CERTIFY_RTOL = 1e-9


@dataclass(frozen=True)
class KrausObjective:
    kraus: KrausSet
    N: int
    t: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        dev = np.abs(self.kraus.completeness() - np.eye(2)).max()
        if dev > 1e-10:
            raise ValueError(f"Kraus set is not complete (deviation {dev:.2e})")

    @classmethod
    def from_map(cls, m: PhaseCovariantMap, N: int, t: float) -> KrausObjective:
        return cls(canonical_kraus(m, t), N, t)


def _norm2x2_sq(m: np.ndarray) -> float:
    """Squared largest singular value of a 2x2 matrix."""
    g = m.conj().T @ m
    a, d = g[0, 0].real, g[1, 1].real
    half = 0.5 * (a - d)
    return 0.5 * (a + d) + math.sqrt(half * half + abs(g[0, 1]) ** 2)


def shifted_derivatives(gen: np.ndarray, obj: KrausObjective) -> np.ndarray:
    ops = obj.kraus.ops
    return obj.kraus.dops - 1j * obj.t * np.einsum("ij,jab->iab", gen, ops)


def objective(gen: np.ndarray, obj: KrausObjective) -> float:
    """Channel-extension QFI bound for the Kraus set generated by ``gen``."""
    gen = np.asarray(gen, dtype=complex)
    x = shifted_derivatives(gen, obj)
    ops = obj.kraus.ops
    a = np.einsum("kba,kbc->ac", x.conj(), x)
    b = np.einsum("kba,kbc->ac", x.conj(), ops)
    return 4 * obj.N * (_hermitian_max_eig(a) + (obj.N - 1) * _norm2x2_sq(b))


def _hermitian_max_eig(a: np.ndarray) -> float:
    p, d = a[0, 0].real, a[1, 1].real
    half = 0.5 * (p - d)
    return 0.5 * (p + d) + math.sqrt(half * half + abs(a[0, 1]) ** 2)


# ------------------------------------------------------ parametrization

_IU = np.triu_indices(4, 1)


def gen_to_params(gen: np.ndarray) -> np.ndarray:
    gen = np.asarray(gen, dtype=complex)
    off = gen[_IU]
    return np.concatenate([gen.diagonal().real, off.real, off.imag])


def params_to_gen(x: np.ndarray) -> np.ndarray:
    gen = np.diag(np.asarray(x[:4], dtype=complex))
    off = x[4:10] + 1j * x[10:16]
    gen[_IU] = off
    gen[(_IU[1], _IU[0])] = off.conj()
    return gen


# ------------------------------------------------------ analytic seeds

def unital_ansatz(m: PhaseCovariantMap, N: int) -> np.ndarray:
    """Optimal generator for a unital map (canonical Kraus operators)."""
    if m.kappa != 0:
        raise ValueError("unital ansatz needs kappa = 0")
    e2, epar = m.eta_perp ** 2, m.eta_par
    den = 1 + epar - 2 * e2
    if den <= 0:
        return np.diag([0.0, 0.0, 0.5, 0.5]).astype(complex)
    b = e2 / (N * (1 + epar) - 2 * e2 * (N - 1))
    h = (e2 - b * (1 + epar)) / den
    g = math.sqrt(max((1 + epar) ** 2 / 4 - e2, 0.0)) * (1 - 2 * b) / den
    gen = np.diag([h, -h, 0.5, 0.5]).astype(complex)
    gen[2, 3] = gen[3, 2] = g
    return gen


def ad_ansatz(kappa: float, N: int) -> np.ndarray:
    """Optimal generator for amplitude damping towards ``|0>`` (``0 <= kappa < 1``)."""
    if not 0 <= kappa < 1:
        raise ValueError("kappa must lie in [0, 1)")
    if N == 1:
        s = math.sqrt(1 - kappa)
        return np.diag([0.0, 0.0, s / (1 + s), 0.0]).astype(complex)
    b = min(2 * (1 - kappa) / ((N - 1) * kappa + 4 - 3 * kappa), (1 - kappa) / (2 - kappa))
    x = (1 - kappa - b * (2 - kappa)) / kappa if kappa > 0 else 0.0
    return np.diag([x, 0.0, b, 0.0]).astype(complex)


# ------------------------------------------------ covariant exact solve

@dataclass(frozen=True)
class _Reduced:
    a1: float
    a2: float
    p: np.ndarray
    q: np.ndarray


def _reduce(kraus: KrausSet) -> _Reduced | None:
    """Read the real coefficients of a canonical phase-covariant Kraus set."""
    ops = kraus.ops
    mask = np.zeros((4, 2, 2), dtype=bool)
    mask[0, 0, 1] = mask[1, 1, 0] = True
    mask[2:, 0, 0] = mask[2:, 1, 1] = True
    if np.abs(ops[~mask]).max() > 0:
        return None
    lower = ops[2:, 1, 1]
    ref = lower[np.argmax(np.abs(lower))]
    phase = ref / abs(ref) if ref != 0 else 1.0
    q = lower * np.conj(phase)
    vals = (ops[0, 0, 1], ops[1, 1, 0], ops[2, 0, 0], ops[3, 0, 0], q[0], q[1])
    if max(abs(v.imag) for v in vals) > 1e-12:
        return None
    return _Reduced(ops[0, 0, 1].real, ops[1, 1, 0].real,
                    ops[2:, 0, 0].real.copy(), q.real.copy())


def _reduced_rows(r: _Reduced):
    """Affine residual rows (matrix, offset) of the four blocks; x = (u, v, c, y1, y2)."""
    (p3, p4), (q3, q4) = r.p, r.q
    a0_rows = [[p3, 0, p4, 0, 0], [0, p4, p3, 0, 0]]
    a0_off = [0.0, 0.0]
    a1_rows = [[-q3, 0, -q4, 0, 0], [0, -q4, -q3, 0, 0]]
    a1_off = [q3, q4]
    if r.a2 > 0:
        a0_rows.append([0, 0, 0, 0, 1 / r.a2])
        a0_off.append(0.0)
    if r.a1 > 0:
        a1_rows.append([0, 0, 0, 1 / r.a1, 0])
        a1_off.append(0.0)
    b0 = (np.array([p3 * p3, p4 * p4, 2 * p3 * p4, 0, 1.0]), 0.0)
    b1 = (np.array([q3 * q3, q4 * q4, 2 * q3 * q4, 1.0, 0]), -(q3 * q3 + q4 * q4))
    return ((np.array(a0_rows, float), np.array(a0_off)),
            (np.array(a1_rows, float), np.array(a1_off)), b0, b1)


def _reduced_value(x, blocks, N):
    (m0, o0), (m1, o1), (l0, d0), (l1, d1) = blocks
    a0 = np.sum((m0 @ x + o0) ** 2)
    a1 = np.sum((m1 @ x + o1) ** 2)
    b0, b1 = l0 @ x + d0, l1 @ x + d1
    return max(a0, a1) + (N - 1) * max(b0 * b0, b1 * b1)


def _lagrangian_min(lam, mu, blocks, N, active):
    (m0, o0), (m1, o1), (l0, d0), (l1, d1) = blocks
    w = [math.sqrt(lam) * m0, math.sqrt(1 - lam) * m1]
    z = [math.sqrt(lam) * o0, math.sqrt(1 - lam) * o1]
    if N > 1:
        s0, s1 = math.sqrt((N - 1) * mu), math.sqrt((N - 1) * (1 - mu))
        w += [s0 * l0[None, :], s1 * l1[None, :]]
        z += [[s0 * d0], [s1 * d1]]
    w = np.vstack(w)[:, active]
    z = np.concatenate([np.ravel(v) for v in z])
    xa = np.linalg.lstsq(w, -z, rcond=None)[0]
    x = np.zeros(5)
    x[active] = xa
    return float(np.sum((w @ xa + z) ** 2)), x


def _monotone_root(fun, lo: float = 0.0, hi: float = 1.0) -> float:
    """Root of a non-increasing function on [lo, hi], or the end point it is pinned to."""
    f_lo = fun(lo)
    if f_lo <= 0:
        return lo
    if fun(hi) >= 0:
        return hi
    return brentq(fun, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)


def _covariant_solve(r: _Reduced, N: int):
    """Dual of the reduced problem; returns (dual value, primal point) in units of 4 N t^2.

    The dual is concave in the two multipliers and its partial derivatives are
    ``A0 - A1`` and ``(N - 1)(B0^2 - B1^2)`` at the Lagrangian minimizer, so the
    optimum is located by nested monotone root finding.
    """
    blocks = _reduced_rows(r)
    (m0, o0), (m1, o1), (l0, d0), (l1, d1) = blocks
    active = [0, 1, 2] + ([3] if r.a1 > 0 else []) + ([4] if r.a2 > 0 else [])

    def a_gap(x):
        return np.sum((m0 @ x + o0) ** 2) - np.sum((m1 @ x + o1) ** 2)

    def b_gap(x):
        return (l0 @ x + d0) ** 2 - (l1 @ x + d1) ** 2

    def best_mu(lam):
        if N == 1:
            return 0.5
        return _monotone_root(lambda mu: b_gap(_lagrangian_min(lam, mu, blocks, N, active)[1]))

    lam = _monotone_root(lambda lam: a_gap(_lagrangian_min(lam, best_mu(lam), blocks, N, active)[1]))
    dual, x = _lagrangian_min(lam, best_mu(lam), blocks, N, active)
    return dual, x, blocks


def _reduced_to_gen(x, r: _Reduced) -> np.ndarray:
    u, v, c, y1, y2 = x
    gen = np.zeros((4, 4), dtype=complex)
    gen[0, 0] = y1 / r.a1 ** 2 if r.a1 > 0 else 0.0
    gen[1, 1] = y2 / r.a2 ** 2 if r.a2 > 0 else 0.0
    gen[2, 2], gen[3, 3] = u, v
    gen[2, 3] = gen[3, 2] = c
    return gen


@dataclass(frozen=True)
class CovariantOptimum:
    value: float
    lower_bound: float
    gen: np.ndarray


def covariant_optimum(obj: KrausObjective) -> CovariantOptimum:
    """Exact minimum over covariant generators, with a dual certificate.

    ``value`` is the objective at the returned generator (a valid bound);
    ``lower_bound`` is the dual value, below which no generator can go.
    """
    r = _reduce(obj.kraus)
    if r is None:
        raise ValueError("Kraus set is not in canonical phase-covariant form")
    dual, x, blocks = _covariant_solve(r, obj.N)
    gen = _reduced_to_gen(x, r)
    scale = 4 * obj.N * obj.t ** 2
    return CovariantOptimum(objective(gen, obj), scale * dual, gen)


# ------------------------------------------------------------ minimize

@dataclass(frozen=True)
class KrausOptResult:
    F_num: float
    gen_opt: np.ndarray
    converged: bool
    n_evals: int
    lower_bound: float = math.nan


class _Stall(Exception):
    pass


def _nelder_mead(obj: KrausObjective, x0: np.ndarray, max_evals: int):
    """Adaptive simplex search; stops when the best value stalls for STALL_ITERS iterations."""
    n_evals = 0
    history = []

    def f(x):
        nonlocal n_evals
        n_evals += 1
        return objective(params_to_gen(x), obj)

    def callback(intermediate_result):
        history.append(intermediate_result.fun)
        if len(history) > STALL_ITERS:
            old, new = history[-STALL_ITERS - 1], history[-1]
            if old - new <= STALL_RTOL * abs(new):
                raise StopIteration

    res = _scipy_minimize(f, x0, method="Nelder-Mead", callback=callback,
                          options=dict(maxfev=max_evals, xatol=0.0, fatol=0.0, adaptive=True))
    stalled = len(history) > STALL_ITERS and res.nfev < max_evals
    return res.x, float(res.fun), n_evals, stalled or res.success


def minimize(obj: KrausObjective, restarts: int = N_RESTARTS, rng: np.random.Generator | None = None,
             seed_gen: np.ndarray | None = None, max_evals: int = MAX_EVALS) -> KrausOptResult:
    """Minimize the objective over Kraus representations.

    The first start is ``seed_gen`` if given, else the exact covariant optimum
    (when the Kraus set has the canonical structure). The remaining
    ``restarts - 1`` starts perturb it with Gaussian noise of scale 0.1. With
    ``restarts=0`` the seed is returned without a simplex search. The
    evaluation budget is shared among the restarts.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    lower = math.nan
    if seed_gen is None:
        try:
            cov = covariant_optimum(obj)
            seed_gen, lower = cov.gen, cov.lower_bound
        except ValueError:
            seed_gen = np.zeros((4, 4), dtype=complex)
    seed_gen = np.asarray(seed_gen, dtype=complex)
    best_gen, best = seed_gen, objective(seed_gen, obj)
    zero = objective(np.zeros((4, 4)), obj)
    if zero < best:
        best_gen, best = np.zeros((4, 4), dtype=complex), zero
    if restarts <= 0:
        return KrausOptResult(best, best_gen, True, 2, lower)

    x_seed = gen_to_params(seed_gen)
    budget = max(max_evals // restarts, 1)
    total, all_converged = 0, True
    for k in range(restarts):
        x0 = x_seed if k == 0 else x_seed + RESTART_SCALE * rng.standard_normal(16)
        x, fx, n, conv = _nelder_mead(obj, x0, budget)
        total += n
        all_converged &= conv
        if fx < best:
            best, best_gen = fx, params_to_gen(x)
    # phase averaging cannot raise a convex objective, so the covariant dual bound is global
    certified = math.isfinite(lower) and best <= lower * (1 + CERTIFY_RTOL) + 1e-300
    return KrausOptResult(best, best_gen, all_converged or certified, total + 2, lower)


def f_numeric(m: PhaseCovariantMap, N: int, t: float, restarts: int = 0,
              rng: np.random.Generator | None = None) -> float:
    """Numerically minimized bound for a map (covariant exact solve by default)."""
    return minimize(KrausObjective.from_map(m, N, t), restarts=restarts, rng=rng).F_num
