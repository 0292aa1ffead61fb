import math

import numpy as np
import pytest

from covmet import bounds, ghz, kraus_opt, models, oracle
from covmet.bounds import ShortTimeExpansion
from covmet.lindblad import MapTrajectory
from covmet.qubit_channel import PhaseCovariantMap, random_cptp_map

SL = models.SlParams(0.2, 0.1, 10.0)


def test_noiseless_is_heisenberg():
    for N in (1, 2, 7, 1000):
        assert ghz.ghz_qfi(PhaseCovariantMap(), N, 0.3) == pytest.approx(N * N * 0.09, rel=1e-12)


def test_dephasing_closed_form_and_log_space():
    g = 0.5
    for N in (3, 10**6):
        t = 1 / (2 * g * N)
        eta = math.exp(-g * t)
        m = PhaseCovariantMap.dephasing(eta)
        # exact for the stored eta: the log-space evaluation adds no error of its own
        stored = N * N * t * t * math.exp(2 * N * math.log1p(eta - 1))
        assert ghz.ghz_qfi(m, N, t) == pytest.approx(stored, rel=1e-12)
        # rounding eta to a double alone shifts eta^(2N) by up to 2N ulp
        assert ghz.ghz_qfi(m, N, t) == pytest.approx(N * N * t * t / math.e, rel=2 * N * 2.0 ** -52)


def test_two_qubit_reference_point():
    m = PhaseCovariantMap(0.9, 0.8, 0.1)
    A = [1 + s1 * 0.8 + s2 * 0.1 for s1 in (1, -1) for s2 in (1, -1)]
    assert sorted(A) == pytest.approx([0.1, 0.3, 1.7, 1.9])
    den = sum(a * a for a in A) / 8
    expected = 4 * 0.9 ** 4 / den
    assert ghz.ghz_qfi(m, 2, 1.0) == pytest.approx(expected, rel=1e-14)
    # this point lies just outside the CPTP set, so the oracle runs at a nearby valid map
    near = PhaseCovariantMap(0.89, 0.8, 0.1)
    exact = oracle.output_qfi(oracle.ghz_state(2), near, 1.0, 2)
    assert ghz.ghz_qfi(near, 2, 1.0) == pytest.approx(exact, rel=1e-10)


def test_reflective_channels_in_log_space(rng):
    # eta_par < 0 makes some A negative; odd N exercises the signed sum
    for _ in range(30):
        m = random_cptp_map(rng)
        if m.eta_par > -0.2:
            continue
        for N in (3, 5):
            exact = oracle.output_qfi(oracle.ghz_state(N), m, 0.7, N)
            assert ghz.ghz_qfi(m, N, 0.7) == pytest.approx(exact, rel=1e-9, abs=1e-300)


def test_ghz_below_both_bounds(rng):
    for _ in range(40):
        m, N, t = random_cptp_map(rng), int(rng.integers(1, 40)), rng.uniform(0.05, 3)
        f = ghz.ghz_qfi(m, N, t)
        assert f <= bounds.f_upper_general(m, N, t) * (1 + 1e-9) + 1e-12
        assert f <= kraus_opt.f_numeric(m, N, t) * (1 + 1e-9) + 1e-12


def test_rejects_zero_probes():
    with pytest.raises(ValueError):
        ghz.ghz_qfi(PhaseCovariantMap(), 0, 1.0)


def test_dephasing_time_optimum():
    g, N = 0.3, 1000
    rec = ghz.ghz_optimize_time(models.dephasing_semigroup(g), N)
    assert rec.converged
    assert rec.t_opt == pytest.approx(1 / (2 * g * N), rel=1e-3)
    assert rec.mse_T * N == pytest.approx(2 * g * math.e, rel=1e-3)
    assert rec.mse_T == pytest.approx(rec.t_opt / rec.qfi)
    assert rec.qfi <= N * N * rec.t_opt ** 2


def test_unital_zeno_asymptote():
    a = 0.6

    def params(t):
        e = np.exp(-(a * np.asarray(t)) ** 2)
        return e, e, np.zeros_like(e), np.zeros_like(e)

    traj = MapTrajectory(params, tau_char=1 / a)
    exp = ShortTimeExpansion(a * a, 2, a * a, 2)
    const = ghz.ghz_asymptotic_constant(exp)
    assert const.alpha_t == pytest.approx(3 * a * a)
    assert const.const == pytest.approx(math.sqrt(3 * a * a * math.e), rel=1e-12)
    rec = ghz.ghz_optimize_time(traj, 10**6, beta_perp=2.0)
    assert rec.rescaled_const == pytest.approx(const.const, rel=0.01)


def test_asymptotic_constant_examples():
    a, b = 0.4, 3.0
    assert ghz.ghz_asymptotic_constant(ShortTimeExpansion(a, b)).const == pytest.approx(
        (2 * a * b * math.e) ** (1 / b), rel=1e-12)
    g = 0.7
    assert ghz.ghz_asymptotic_constant(ShortTimeExpansion(g, 1)).const == pytest.approx(2 * g * math.e)
    sl = ghz.ghz_asymptotic_constant(models.sl_expansion(SL))
    assert sl.bracket == pytest.approx((0.21, 0.22))
    assert sl.bracket[0] <= sl.alpha_t <= sl.bracket[1]
    assert abs(sl.residual) < 1e-12


def test_kappa_of_higher_order_is_dropped():
    with_kappa = ShortTimeExpansion(0.3, 2, 0.2, 2, 0.19, 3)
    without = ShortTimeExpansion(0.3, 2, 0.2, 2)
    assert ghz.ghz_asymptotic_constant(with_kappa).const == ghz.ghz_asymptotic_constant(without).const


def test_time_estimate_tracks_sl_optimum():
    traj = models.sl_trajectory(SL)
    const = ghz.ghz_asymptotic_constant(models.sl_expansion(SL))
    for N in (10**4, 10**5, 10**6):
        rec = ghz.ghz_optimize_time(traj, N, beta_perp=2.0)
        assert rec.t_opt == pytest.approx(float(ghz.ghz_time_estimate(const.alpha_t, 2.0, N)), rel=0.05)
