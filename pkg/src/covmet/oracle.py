"""Brute-force QFI of small multi-qubit states under independent noise.

Qubit 0 is the most significant bit of the basis index; probes come first and
ancillas (left untouched) after them.
"""
from __future__ import annotations

import math

import numpy as np

from .qubit_channel import PhaseCovariantMap, canonical_kraus

MAX_QUBITS = 12
EIG_CUTOFF = 1e-12


def _n_qubits(rho: np.ndarray) -> int:
    dim = rho.shape[0]
    n = int(round(math.log2(dim)))
    if rho.shape != (dim, dim) or 2 ** n != dim:
        raise ValueError(f"expected a 2^M x 2^M matrix, got shape {rho.shape}")
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceed the oracle cap of {MAX_QUBITS}")
    return n


def apply_single_qubit_kraus(rho: np.ndarray, ops: np.ndarray, qubit: int) -> np.ndarray:
    n = _n_qubits(rho)
    tensor = rho.reshape((2,) * (2 * n))
    row, col = qubit, n + qubit
    out = np.zeros_like(tensor)
    for k in ops:
        if not np.any(k):
            continue
        tmp = np.moveaxis(np.tensordot(k, tensor, axes=([1], [row])), 0, row)
        out += np.moveaxis(np.tensordot(k.conj(), tmp, axes=([1], [col])), 0, col)
    return out.reshape(rho.shape)


def evolve(state: np.ndarray, m: PhaseCovariantMap, t: float, probe_indices) -> np.ndarray:
    """Apply ``m`` to each probe qubit; other qubits are left untouched."""
    probes = list(probe_indices)
    n = _n_qubits(state)
    if len(set(probes)) != len(probes) or any(not 0 <= q < n for q in probes):
        raise ValueError("probe indices must be distinct and inside the register")
    ops = canonical_kraus(m, t).ops
    rho = np.asarray(state, dtype=complex)
    for q in probes:
        rho = apply_single_qubit_kraus(rho, ops, q)
    return rho


def jz_diagonal(n_qubits: int, probe_indices) -> np.ndarray:
    """Diagonal of ``sum_probes sigma_z`` in the computational basis."""
    idx = np.arange(2 ** n_qubits)
    out = np.zeros(2 ** n_qubits)
    for q in probe_indices:
        bit = (idx >> (n_qubits - 1 - q)) & 1
        out += 1 - 2 * bit
    return out


def omega_derivative(state_out: np.ndarray, t: float, probe_indices) -> np.ndarray:
    """``d rho / d omega = -i (t/2) [J_z, rho]`` for the rotation-encoded output."""
    d = jz_diagonal(_n_qubits(state_out), probe_indices)
    return -0.5j * t * (d[:, None] - d[None, :]) * state_out


def qfi(state: np.ndarray, dstate: np.ndarray) -> float:
    """Quantum Fisher information from the eigen-decomposition of ``state``."""
    lam, vec = np.linalg.eigh(state)
    lam = np.clip(lam, 0.0, None)
    d = vec.conj().T @ dstate @ vec
    denom = lam[:, None] + lam[None, :]
    keep = denom > EIG_CUTOFF * max(lam.sum(), 1.0)
    return float(2 * np.sum(np.abs(d[keep]) ** 2 / denom[keep]))


def ghz_state(n_qubits: int) -> np.ndarray:
    psi = np.zeros(2 ** n_qubits, dtype=complex)
    psi[0] = psi[-1] = 1 / math.sqrt(2)
    return np.outer(psi, psi.conj())


def plus_state() -> np.ndarray:
    return np.full((2, 2), 0.5, dtype=complex)


def random_pure_state(rng: np.random.Generator, n_qubits: int) -> np.ndarray:
    psi = rng.standard_normal(2 ** n_qubits) + 1j * rng.standard_normal(2 ** n_qubits)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def output_qfi(state: np.ndarray, m: PhaseCovariantMap, t: float, n_probes: int) -> float:
    """QFI about the frequency when the first ``n_probes`` qubits pass through ``m``."""
    probes = range(n_probes)
    out = evolve(state, m, t, probes)
    return qfi(out, omega_derivative(out, t, probes))
