import math

import numpy as np
import pytest

from covmet import bounds, lindblad, models
from covmet.qubit_channel import validate_cptp

SL = models.SlParams(0.2, 0.1, 10.0)


def _all_cptp(traj):
    t = np.concatenate([[0.0], np.geomspace(1e-6, 20, 999) * traj.tau_char])
    p = traj.at(t)
    for i in range(t.size):
        m = traj(t[i])
        assert validate_cptp(m).is_cptp, (t[i], p.eta_perp[i], p.eta_par[i], p.kappa[i])


def test_sl_params():
    assert SL.R == pytest.approx(10.5)
    assert SL.tau_char == pytest.approx(5.0)
    with pytest.raises(ValueError):
        models.SlParams(0.2, -0.1, 10)


def test_sl_f_removable_singularity():
    x = np.linspace(0, 5, 11)
    np.testing.assert_allclose(models.sl_f(1.0, x), 1 / (1 + x))
    for a in (1 - 1e-9, 1 + 1e-9):
        np.testing.assert_allclose(models.sl_f(a, x), 1 / (1 + x), rtol=1e-7)
    for a in (0.3, 2.0, 10.5):
        ref = (1 - a) / (1 - a * np.exp(-(1 - a) * x))
        np.testing.assert_allclose(models.sl_f(a, x), ref, rtol=1e-12)


def test_sl_eta_is_exp_over_f():
    x = np.linspace(0, 8, 33)
    for a in (0.5, 1.0, 2.0, 5.25, 10.5):
        np.testing.assert_allclose(models.sl_eta(a, x), np.exp(-a * x) / models.sl_f(a, x), rtol=1e-12)


def test_sl_derivatives_match_finite_difference():
    traj = models.sl_trajectory(SL)
    t, h = np.linspace(0.1, 30, 40), 1e-5
    up, down = traj.at(t + h), traj.at(t - h)
    for d, a, b in zip(traj.derivatives(t), up, down):
        np.testing.assert_allclose(d, (a - b) / (2 * h), atol=1e-9)


def test_sl_is_cptp_and_starts_at_identity():
    traj = models.sl_trajectory(SL)
    assert tuple(float(v) for v in traj.at(0.0)) == (1.0, 1.0, 0.0, 0.0)
    _all_cptp(traj)
    for R_case in (models.SlParams(1.0, 1.0, 0.0001), models.SlParams(0.5, 0.5, 0.5)):
        _all_cptp(models.sl_trajectory(R_case))


def test_sl_short_time_expansion():
    exp = models.sl_expansion(SL)
    assert (exp.alpha_perp, exp.alpha_par, exp.alpha_kappa) == pytest.approx((0.105, 0.21, -0.01))
    assert exp.beta_perp == exp.beta_par == exp.beta_kappa == 2.0
    assert exp.constraint_violations() == []
    t = 1e-4
    assert 1 - models.sl_trajectory(SL).at(t).eta_perp == pytest.approx(0.105 * t * t, rel=1e-4)
    assert bounds.asymptotic_constant(exp).D == pytest.approx(math.sqrt(0.4), rel=1e-12)


def test_sl_rates_match_trajectory_generator():
    t = np.linspace(0, 40, 81)
    got = lindblad.rates_from_trajectory(models.sl_trajectory(SL), t)
    for a, b in zip(got, models.sl_rates(SL)(t)):
        np.testing.assert_allclose(a, b, atol=1e-8)


def test_semigroup_examples():
    g = 0.3
    p = models.semigroup_trajectory(0, 0, g / 2).at(np.linspace(0, 5, 6))
    np.testing.assert_allclose(p.eta_perp, np.exp(-g * np.linspace(0, 5, 6)))
    np.testing.assert_allclose(p.eta_par, 1.0)
    np.testing.assert_allclose(p.kappa, 0.0)
    t = np.linspace(0, 5, 6)
    p = models.semigroup_trajectory(g / 2, g / 2, 0).at(t)
    np.testing.assert_allclose(p.eta_par, np.exp(-g * t))
    np.testing.assert_allclose(p.eta_perp, np.exp(-g * t / 2))
    np.testing.assert_allclose(p.kappa, 0.0)


def test_semigroup_displacement_and_rates(rng):
    for _ in range(10):
        gp, gm, gz = rng.uniform(0, 1, 3)
        traj = models.semigroup_trajectory(gp, gm, gz)
        t = np.linspace(0.01, 5, 25)
        ref = (gp - gm) / (gp + gm) * (1 - np.exp(-(gp + gm) * t))
        np.testing.assert_allclose(traj.at(t).kappa, ref, rtol=1e-12, atol=1e-15)
        r = lindblad.rates_from_trajectory(traj, t)
        np.testing.assert_allclose(r.gamma_plus, gp, atol=1e-12)
        np.testing.assert_allclose(r.gamma_minus, gm, atol=1e-12)
        np.testing.assert_allclose(r.gamma_z, gz, atol=1e-12)
        _all_cptp(traj)


def test_semigroup_rejects_negative_rates():
    with pytest.raises(ValueError):
        models.semigroup_trajectory(-0.1, 0, 0)


def test_zeno_family():
    a = 1.7
    traj = models.zeno_dephasing_trajectory(a)
    assert traj.tau_char == pytest.approx(1 / a)
    _all_cptp(traj)
    exp = models.zeno_dephasing_expansion(a)
    assert exp.scaling_exponent == pytest.approx(1.5)
    assert bounds.asymptotic_constant(exp).D == pytest.approx(2 * math.sqrt(2) * a)
    with pytest.raises(ValueError):
        models.zeno_dephasing_trajectory(0.0)


def test_extract_exponents_reproduces_declared_expansions(rng):
    cases = [(models.sl_trajectory(SL), models.sl_expansion(SL)),
             (models.zeno_dephasing_trajectory(0.8), models.zeno_dephasing_expansion(0.8))]
    for _ in range(5):
        gp, gm, gz = rng.uniform(0.05, 1, 3)
        cases.append((models.semigroup_trajectory(gp, gm, gz), models.semigroup_expansion(gp, gm, gz)))
    for traj, exp in cases:
        fit = models.extract_exponents(traj)
        assert fit.ok
        got = fit.expansion
        for name in ("perp", "par", "kappa"):
            beta, ref_beta = getattr(got, "beta_" + name), getattr(exp, "beta_" + name)
            if math.isinf(ref_beta):
                assert math.isinf(beta)
                continue
            assert beta == pytest.approx(ref_beta, abs=0.01)
            assert getattr(got, "alpha_" + name) == pytest.approx(getattr(exp, "alpha_" + name), rel=0.01)


def test_extract_exponents_flags_non_power_law():
    # 1 - eta_perp switches from t^1 to t^2 behaviour inside the fit window
    traj = lindblad.MapTrajectory(
        lambda t: (1 - 1e-3 * t - 1e3 * t * t, np.ones_like(t), np.zeros_like(t), np.zeros_like(t)))
    assert not models.extract_exponents(traj).ok


def test_noiseless_trajectory():
    p = models.noiseless_trajectory().at(np.array([0.0, 3.0]))
    assert p.eta_perp.tolist() == [1.0, 1.0] and p.kappa.tolist() == [0.0, 0.0]
