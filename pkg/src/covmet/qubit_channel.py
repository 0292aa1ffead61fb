"""Phase-covariant qubit maps.

A phase-covariant map acts on the Bloch vector ``v`` as ``v -> m + M v`` where
``M`` rotates the xy-plane by ``phi`` while contracting it by ``eta_perp``,
contracts the z-axis by ``eta_par`` and ``m = (0, 0, kappa)``.

Basis convention: ``|0>`` is the north pole (Bloch ``z = +1``), so ``kappa > 0``
pushes states towards ``|0>``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

CPTP_TOL = 1e-9
CHOI_EIG_FLOOR = -1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)
PAULIS = (IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z)


@dataclass(frozen=True)
class PhaseCovariantMap:
    """Snapshot of a phase-covariant qubit channel at one time.

    ``phi`` is the total rotation angle (``omega * t + theta``).
    """

    eta_perp: float = 1.0
    eta_par: float = 1.0
    kappa: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        for name in ("eta_perp", "eta_par", "kappa", "phi"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.eta_perp < 0:
            raise ValueError(
                "eta_perp must be non-negative (absorb the sign into phi + pi)")

    @classmethod
    def identity(cls) -> PhaseCovariantMap:
        return cls()

    @classmethod
    def dephasing(cls, eta_perp: float, phi: float = 0.0) -> PhaseCovariantMap:
        return cls(eta_perp, 1.0, 0.0, phi)

    @classmethod
    def amplitude_damping(cls, kappa: float, phi: float = 0.0) -> PhaseCovariantMap:
        """Amplitude damping towards ``|0>`` with displacement ``kappa`` in [0, 1]."""
        return cls(math.sqrt(1.0 - kappa), 1.0 - kappa, kappa, phi)

    @property
    def is_unital(self) -> bool:
        return self.kappa == 0.0

    def with_phi(self, phi: float) -> PhaseCovariantMap:
        return replace(self, phi=phi)

    def normalized(self) -> PhaseCovariantMap:
        """Flip the z-axis if needed so that ``kappa >= 0`` and drop the rotation.

        Neither operation changes the quantum Fisher information about the
        encoded frequency.
        """
        return PhaseCovariantMap(self.eta_perp, self.eta_par, abs(self.kappa), 0.0)

    def to_text(self) -> str:
        return "".join(f"{k}={getattr(self, k)!r}\n"
                       for k in ("eta_perp", "eta_par", "kappa", "phi"))

    @classmethod
    def from_text(cls, text: str) -> PhaseCovariantMap:
        """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in ("eta_perp", "eta_par", "kappa", "phi"):
                raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
            values[key] = float(value)
        return cls(**values)


class ValidationReport(NamedTuple):
    is_cptp: bool
    margins: tuple[float, float, float]


def validate_cptp(m: PhaseCovariantMap, tol: float = CPTP_TOL) -> ValidationReport:
    """Check the complete-positivity inequalities of a phase-covariant map.

    The three margins are ``1 - (eta_par + kappa)``, ``1 - (eta_par - kappa)``
    and ``1 + eta_par - sqrt(4 eta_perp^2 + kappa^2)``; each must be non-negative.
    """
    margins = (
        1.0 - (m.eta_par + m.kappa),
        1.0 - (m.eta_par - m.kappa),
        1.0 + m.eta_par - math.hypot(2.0 * m.eta_perp, m.kappa),
    )
    return ValidationReport(all(x >= -tol for x in margins), margins)


def to_affine_matrix(m: PhaseCovariantMap) -> np.ndarray:
    """4x4 real matrix acting on ``(1, x, y, z)``."""
    c, s = math.cos(m.phi), math.sin(m.phi)
    return np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, m.eta_perp * c, -m.eta_perp * s, 0.0],
        [0.0, m.eta_perp * s, m.eta_perp * c, 0.0],
        [m.kappa, 0.0, 0.0, m.eta_par],
    ])


def apply(m: PhaseCovariantMap, v) -> np.ndarray:
    """Map a Bloch vector (or an ``(..., 3)`` stack of them)."""
    v = np.asarray(v, dtype=float)
    c, s = math.cos(m.phi), math.sin(m.phi)
    out = np.empty_like(v)
    out[..., 0] = m.eta_perp * (c * v[..., 0] - s * v[..., 1])
    out[..., 1] = m.eta_perp * (s * v[..., 0] + c * v[..., 1])
    out[..., 2] = m.kappa + m.eta_par * v[..., 2]
    return out


def rotate_z(v, angle: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    c, s = math.cos(angle), math.sin(angle)
    out = v.copy()
    out[..., 0] = c * v[..., 0] - s * v[..., 1]
    out[..., 1] = s * v[..., 0] + c * v[..., 1]
    return out


def bloch_to_density(v) -> np.ndarray:
    x, y, z = v
    return 0.5 * (IDENTITY + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z)


def density_to_bloch(rho: np.ndarray) -> np.ndarray:
    return np.real([np.trace(p @ rho) for p in PAULIS[1:]])


def choi(m: PhaseCovariantMap) -> np.ndarray:
    """Choi matrix ``sum_jk Lambda(|j><k|) (x) |j><k|`` (trace 2)."""
    e = m.eta_perp * np.exp(-1j * m.phi)
    out = np.zeros((4, 4), dtype=complex)
    out[0, 0] = (1 + m.eta_par + m.kappa) / 2
    out[1, 1] = (1 - m.eta_par + m.kappa) / 2
    out[2, 2] = (1 - m.eta_par - m.kappa) / 2
    out[3, 3] = (1 + m.eta_par - m.kappa) / 2
    out[0, 3] = e
    out[3, 0] = np.conj(e)
    return out


def choi_min_eigenvalue(m: PhaseCovariantMap) -> float:
    return float(np.linalg.eigvalsh(choi(m))[0])


def is_choi_psd(m: PhaseCovariantMap, floor: float = CHOI_EIG_FLOOR) -> bool:
    return choi_min_eigenvalue(m) >= floor


@dataclass(frozen=True)
class KrausSet:
    """Canonical Kraus operators and their derivatives w.r.t. the frequency.

    ``ops`` and ``dops`` have shape ``(4, 2, 2)``.
    """

    ops: np.ndarray
    dops: np.ndarray

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return np.einsum("kab,bc,kdc->ad", self.ops, rho, self.ops.conj())

    def completeness(self) -> np.ndarray:
        return np.einsum("kba,kbc->ac", self.ops.conj(), self.ops)


def _mixing_angle(eta_perp: float, kappa: float) -> float:
    # cot(angle) = (kappa + s) / (2 eta_perp); both branches avoid cancellation
    s = math.hypot(kappa, 2.0 * eta_perp)
    if kappa >= 0:
        return math.atan2(2.0 * eta_perp, kappa + s)
    return math.atan2(s - kappa, 2.0 * eta_perp)


def canonical_kraus(m: PhaseCovariantMap, t: float) -> KrausSet:
    """Eigen-decomposition Kraus operators of the Choi matrix.

    Only ``phi`` depends on the frequency (``d phi / d omega = t``), so the
    derivatives of the two diagonal operators carry a factor ``i t`` on their
    ``e^{i phi}`` entry and the two off-diagonal operators are constant.
    """
    report = validate_cptp(m)
    if not report.is_cptp:
        raise ValueError(f"map is not CPTP (margins {report.margins})")
    w1, w2, w3 = (max(x, 0.0) for x in report.margins)
    s = math.hypot(m.kappa, 2.0 * m.eta_perp)
    lam_plus = (1.0 + m.eta_par + s) / 2
    lam_minus = w3 / 2
    angle = _mixing_angle(m.eta_perp, m.kappa)
    c, sn = math.cos(angle), math.sin(angle)
    phase = np.exp(1j * m.phi)

    ops = np.zeros((4, 2, 2), dtype=complex)
    ops[0, 0, 1] = math.sqrt(w2 / 2)
    ops[1, 1, 0] = math.sqrt(w1 / 2)
    ops[2, 0, 0] = math.sqrt(lam_plus) * c
    ops[2, 1, 1] = math.sqrt(lam_plus) * sn * phase
    ops[3, 0, 0] = -math.sqrt(lam_minus) * sn
    ops[3, 1, 1] = math.sqrt(lam_minus) * c * phase

    dops = np.zeros_like(ops)
    dops[2, 1, 1] = 1j * t * ops[2, 1, 1]
    dops[3, 1, 1] = 1j * t * ops[3, 1, 1]
    return KrausSet(ops, dops)


def compose(a: PhaseCovariantMap, b: PhaseCovariantMap) -> PhaseCovariantMap:
    """The map ``a o b`` (apply ``b`` first)."""
    return PhaseCovariantMap(
        a.eta_perp * b.eta_perp,
        a.eta_par * b.eta_par,
        a.kappa + a.eta_par * b.kappa,
        a.phi + b.phi,
    )


def mix(p: float, a: PhaseCovariantMap, b: PhaseCovariantMap) -> PhaseCovariantMap:
    """Convex combination ``p a + (1 - p) b`` of two maps sharing the same rotation."""
    if not math.isclose(a.phi, b.phi, abs_tol=1e-12):
        raise ValueError("mixing maps with different rotations leaves the family")
    return PhaseCovariantMap(
        p * a.eta_perp + (1 - p) * b.eta_perp,
        p * a.eta_par + (1 - p) * b.eta_par,
        p * a.kappa + (1 - p) * b.kappa,
        a.phi,
    )


def random_cptp_map(rng: np.random.Generator, phi: float | None = None) -> PhaseCovariantMap:
    """Draw a CPTP map uniformly from the (eta_par, kappa) triangle, then eta_perp."""
    while True:
        eta_par = rng.uniform(-1, 1)
        kappa = rng.uniform(-1, 1)
        if abs(eta_par) + abs(kappa) <= 1:
            break
    eta_perp_max = 0.5 * math.sqrt(max((1 + eta_par) ** 2 - kappa ** 2, 0.0))
    eta_perp = rng.uniform(0, eta_perp_max)
    if phi is None:
        phi = rng.uniform(-math.pi, math.pi)
    return PhaseCovariantMap(eta_perp, eta_par, kappa, phi)
