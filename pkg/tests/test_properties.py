"""Randomized property checks."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from ntkspectra.analytic import boundary_mismatch, periodic_modes, winding_phase, z_const
from ntkspectra.geometry import PiecewiseDensity1D, sample
from ntkspectra.kernels import KernelSpec, ntk2_angle, ntk2_eval, ntk_deep_eval
from ntkspectra.predictor import linear_dynamics, predict_residual
from ntkspectra.spectral import assemble_gram, eig_sym

weights = st.lists(st.floats(0.2, 10.0), min_size=1, max_size=4)
rhos = st.floats(-1.0, 1.0)


@given(rhos)
def test_two_layer_kernel_bounds(rho):
    v = ntk2_eval(rho)
    assert 0.0 <= v <= 0.5
    assert abs(v - ntk2_angle(np.arccos(rho))) < 1e-12


@given(rhos, st.integers(1, 20))
def test_deep_kernel_bounded_by_diagonal(rho, depth):
    # a PSD dot-product kernel obeys |k(x, y)| <= k(x, x) = L + 1
    assert abs(ntk_deep_eval(rho, depth)) <= depth + 1 + 1e-12


@settings(max_examples=25, deadline=None)
@given(weights)
def test_density_normalized_and_z_bounds(w):
    d = PiecewiseDensity1D.from_weights(w)
    assert abs(d.masses.sum() - 1.0) < 1e-12
    # Cauchy-Schwarz: Z <= 1/sqrt(2 pi), equality for the uniform density
    assert z_const(d) <= 1 / np.sqrt(2 * np.pi) + 1e-12


@settings(max_examples=15, deadline=None)
@given(weights)
def test_modes_are_smooth_and_wind(w):
    d = PiecewiseDensity1D.from_weights(w)
    for m in periodic_modes(d, 7):
        assert boundary_mismatch(m) < 1e-8
        assert abs(winding_phase(m) - 2 * np.pi * m.q) < 1e-8


@settings(max_examples=20, deadline=None)
@given(weights, st.integers(0, 2 ** 31 - 1))
def test_samples_fall_in_circle(w, seed):
    smp = sample(PiecewiseDensity1D.from_weights(w), 64, seed)
    assert np.all((smp.angles >= -np.pi) & (smp.angles < np.pi))
    np.testing.assert_allclose(np.linalg.norm(smp.points, axis=1), 1.0, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 40), st.integers(0, 10 ** 6), st.sampled_from([2, 3]))
def test_gram_psd_property(n, seed, d):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    w = np.linalg.eigvalsh(assemble_gram(x, KernelSpec("deep", 3)))
    assert w.min() >= -1e-9 * w.max()


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 10), st.integers(0, 10 ** 6), st.floats(0.05, 1.0))
def test_residual_law_matches_linear_dynamics(n, seed, frac):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    H = A @ A.T + 0.01 * np.eye(n)
    sp = eig_sym(H)
    y = rng.standard_normal(n)
    eta = frac / sp.eigenvalues[0]
    law = predict_residual(sp, y, eta, np.arange(21))
    np.testing.assert_allclose(linear_dynamics(H, y, eta, 20), law, rtol=0, atol=1e-10 * max(1.0, np.linalg.norm(y)))
    assert np.all(np.diff(law) <= 1e-12)
