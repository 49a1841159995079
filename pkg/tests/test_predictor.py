import warnings

import numpy as np
import pytest

from ntkspectra.errors import ConfigError
from ntkspectra.nets import TrainingTrace
from ntkspectra.predictor import (UNREACHABLE, Comparison, StepSizeWarning, compare, linear_dynamics,
                                  predict_residual, predicted_time, single_mode_time)
from ntkspectra.spectral import GramSpectrum, eig_sym


def _spd(rng, n=12):
    A = rng.standard_normal((n, n))
    return A @ A.T / n + 0.1 * np.eye(n)


def test_residual_at_zero_is_norm(rng):
    sp = eig_sym(_spd(rng))
    y = rng.standard_normal(12)
    assert predict_residual(sp, y, 0.1, 0) == pytest.approx(np.linalg.norm(y), rel=1e-14)


def test_single_eigenvector_target(rng):
    sp = eig_sym(_spd(rng))
    eta = 0.5 / sp.eigenvalues[0]
    y = 3.0 * sp.eigenvectors[:, 0]
    for t in (1, 7, 40):
        assert predict_residual(sp, y, eta, t) == pytest.approx((1 - eta * sp.eigenvalues[0]) ** t * 3.0, rel=1e-10)


def test_residual_vanishes(rng):
    sp = eig_sym(_spd(rng))
    y = rng.standard_normal(12)
    assert predict_residual(sp, y, 0.5 / sp.eigenvalues[0], 10 ** 5) < 1e-12


def test_linear_dynamics_telescoping(rng):
    for _ in range(5):
        H = _spd(rng)
        sp = eig_sym(H)
        y = rng.standard_normal(12)
        eta = 0.9 / sp.eigenvalues[0]
        sim = linear_dynamics(H, y, eta, 60)
        law = predict_residual(sp, y, eta, np.arange(61))
        np.testing.assert_allclose(sim, law, rtol=0, atol=1e-10)


def test_predicted_time_single_mode_closed_form(rng):
    sp = eig_sym(_spd(rng))
    lam, eta = sp.eigenvalues[0], 0.2 / sp.eigenvalues[0]
    y = 5.0 * sp.eigenvectors[:, 0]
    t = predicted_time(sp, y, eta, 1e-3)
    assert t == single_mode_time(lam, eta, 5.0, 1e-3)
    assert t == int(np.ceil(np.log(1e-3 / 5.0) / np.log(1 - eta * lam)))


def test_predicted_time_already_below():
    sp = GramSpectrum(np.array([1.0]), np.eye(1), 1)
    assert predicted_time(sp, np.array([0.01]), 0.1, 0.1) == 0


def test_predicted_time_unreachable():
    sp = GramSpectrum(np.array([1e-12, 1.0]), np.eye(2), 2)
    assert predicted_time(sp, np.array([1.0, 0.0]), 0.1, 1e-3, t_max=10 ** 6) == UNREACHABLE


def test_monotone_in_eigenvalues(rng):
    sp = eig_sym(_spd(rng))
    y = rng.standard_normal(12)
    eta = 0.3 / sp.eigenvalues[0]
    base = predicted_time(sp, y, eta, 0.05)
    for i in range(12):
        lam = sp.eigenvalues.copy()
        lam[i] *= 1.5
        bumped = GramSpectrum(lam, sp.eigenvectors, sp.n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StepSizeWarning)
            assert predicted_time(bumped, y, eta, 0.05) <= base


def test_step_size_warning(rng):
    sp = eig_sym(_spd(rng))
    with pytest.warns(StepSizeWarning):
        predict_residual(sp, np.ones(12), 3.0 / sp.eigenvalues[0], 5)


def test_dimension_mismatch(rng):
    sp = eig_sym(_spd(rng))
    with pytest.raises(ConfigError):
        predict_residual(sp, np.ones(5), 0.1, 1)


def test_compare_with_itself_is_zero(rng):
    H = _spd(rng)
    sp = eig_sym(H)
    y = rng.standard_normal(12)
    eta = 0.5 / sp.eigenvalues[0]
    rn = linear_dynamics(H, y, eta, 30)
    tr = TrainingTrace(np.arange(31), 0.5 * rn ** 2, (rn ** 2 / 12)[:, None], rn, np.array([12]), 12)
    cmp_ = compare(tr, sp, y, eta)
    assert cmp_.max_rel_dev < 1e-10
    assert cmp_.iteration_ratio(0.5 * np.linalg.norm(y)) == pytest.approx(1.0)


def test_comparison_csv(tmp_path):
    c = Comparison(np.array([0, 1]), np.array([1.0, 0.5]), np.array([1.0, 0.4]))
    c.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "t,measured_residual,predicted_residual,rel_dev"
    assert c.max_rel_dev == pytest.approx(0.25)
