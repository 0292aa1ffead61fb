import math

import numpy as np
import pytest

from covmet import bounds, kraus_opt, oracle
from covmet.qubit_channel import PhaseCovariantMap, random_cptp_map


def _valid(rho):
    np.testing.assert_allclose(np.trace(rho).real, 1.0, atol=1e-12)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(rho).min() >= -1e-10


def test_identity_leaves_state_unchanged(rng):
    rho = oracle.random_pure_state(rng, 3)
    np.testing.assert_allclose(oracle.evolve(rho, PhaseCovariantMap(), 1.0, [0, 2]), rho, atol=1e-15)


def test_full_damping_reaches_north_pole(rng):
    rho = oracle.random_pure_state(rng, 3)
    out = oracle.evolve(rho, PhaseCovariantMap(0, 0, 1), 1.0, range(3))
    target = np.zeros((8, 8))
    target[0, 0] = 1
    np.testing.assert_allclose(out, target, atol=1e-14)


def test_two_qubit_ghz_coherence_under_dephasing():
    g, t = 0.3, 1.4
    out = oracle.evolve(oracle.ghz_state(2), PhaseCovariantMap.dephasing(math.exp(-g * t)), t, [0, 1])
    assert out[0, 3] == pytest.approx(0.5 * math.exp(-2 * g * t))
    assert out[0, 0] == pytest.approx(0.5)


def test_outputs_are_valid_states(rng):
    for _ in range(20):
        m = random_cptp_map(rng)
        _valid(oracle.evolve(oracle.random_pure_state(rng, 4), m, rng.uniform(0, 2), [0, 1]))


def test_ancilla_untouched():
    # full damping on the probe only; the ancilla's reduced state stays |+><+|
    rho = np.kron(oracle.plus_state(), oracle.plus_state())
    out = oracle.evolve(rho, PhaseCovariantMap(0, 0, 1), 1.0, [0]).reshape(2, 2, 2, 2)
    np.testing.assert_allclose(np.einsum("ijik->jk", out), oracle.plus_state(), atol=1e-15)


def test_rejects_bad_indices_and_sizes():
    rho = oracle.ghz_state(2)
    with pytest.raises(ValueError):
        oracle.evolve(rho, PhaseCovariantMap(), 1.0, [0, 0])
    with pytest.raises(ValueError):
        oracle.evolve(rho, PhaseCovariantMap(), 1.0, [2])
    with pytest.raises(ValueError):
        oracle.evolve(np.eye(3) / 3, PhaseCovariantMap(), 1.0, [0])


def test_derivative_examples():
    rho = oracle.plus_state()
    np.testing.assert_array_equal(oracle.omega_derivative(rho, 0.0, [0]), 0)
    d = oracle.omega_derivative(rho, 0.8, [0])
    assert np.linalg.norm(d, 2) == pytest.approx(0.4)
    np.testing.assert_allclose(d, d.conj().T)


def test_derivative_traceless_and_matches_finite_difference(rng):
    for _ in range(10):
        m, t, h = random_cptp_map(rng), rng.uniform(0.2, 2), 1e-6
        rho = oracle.random_pure_state(rng, 3)
        probes = [0, 1]
        d = oracle.omega_derivative(oracle.evolve(rho, m, t, probes), t, probes)
        assert abs(np.trace(d)) < 1e-14
        up = oracle.evolve(rho, m.with_phi(m.phi + h * t), t, probes)
        down = oracle.evolve(rho, m.with_phi(m.phi - h * t), t, probes)
        assert np.abs(d - (up - down) / (2 * h)).max() < 1e-8


def test_noiseless_qfi_examples():
    t = 0.9
    assert oracle.output_qfi(oracle.plus_state(), PhaseCovariantMap(), t, 1) == pytest.approx(t * t)
    for N in range(1, 6):
        assert oracle.output_qfi(oracle.ghz_state(N), PhaseCovariantMap(), t, N) == pytest.approx(
            N * N * t * t, rel=1e-12)


def test_qfi_is_convex(rng):
    for _ in range(20):
        m, t = random_cptp_map(rng), rng.uniform(0.2, 2)
        a, b = (oracle.evolve(oracle.random_pure_state(rng, 2), m, t, [0, 1]) for _ in range(2))
        p = rng.uniform()
        mixed = p * a + (1 - p) * b

        def f(r):
            return oracle.qfi(r, oracle.omega_derivative(r, t, [0, 1]))
        assert f(mixed) <= p * f(a) + (1 - p) * f(b) + 1e-10


def test_oracle_below_bounds(rng):
    for N in (1, 2):
        for _ in range(20):
            m, t = random_cptp_map(rng), rng.uniform(0.1, 2)
            q = oracle.output_qfi(oracle.random_pure_state(rng, 2 * N), m, t, N)
            assert q <= bounds.f_upper_general(m, N, t) + 1e-9
            assert q <= kraus_opt.f_numeric(m, N, t) + 1e-9


def test_register_cap():
    n = oracle.MAX_QUBITS + 1
    with pytest.raises(ValueError, match="cap"):
        oracle.apply_single_qubit_kraus(np.zeros((2 ** n, 2 ** n)), np.zeros((4, 2, 2)), 0)
