import numpy as np
import pytest

from ntkspectra.errors import BudgetExceeded, ConfigError
from ntkspectra.geometry import PiecewiseDensity1D, sample
from ntkspectra.kernels import KernelSpec
from ntkspectra.spectral import (assemble_gram, eig_sym, fourier_eigenvalues, frequency_labels, gram_bytes,
                                 group_by_multiplicity, local_frequency, multiplicity, slope_fit,
                                 symmetrized_grid_gram)

from conftest import random_unit

# uniform-density eigenvalues of the two-layer kernel (closed form, q = 0..5)
UNIFORM_TWO_LAYER = [0.1756605918211689, 0.1131605918211689, 0.028144773233982713,
                     0.005628954646796544, 0.00382768915982165, 0.002026423672846755]


def test_eig_sym_matches_reference_8x8(rng):
    A = rng.standard_normal((8, 8))
    H = A @ A.T
    sp = eig_sym(H)
    np.testing.assert_allclose(sp.eigenvalues, np.sort(np.linalg.eigvalsh(H))[::-1], atol=1e-8)
    np.testing.assert_allclose(H @ sp.eigenvectors, sp.eigenvectors * sp.eigenvalues, atol=1e-8)


def test_eig_sym_top_k_matches_full(rng):
    x = random_unit(rng, 300, 2)
    H = assemble_gram(x, KernelSpec())
    full, top = eig_sym(H), eig_sym(H, 10)
    np.testing.assert_allclose(top.eigenvalues, full.eigenvalues[:10], rtol=1e-10)
    overlap = np.abs(np.sum(top.eigenvectors * full.eigenvectors[:, :10], axis=0))
    # pairs of nearly equal eigenvalues may rotate within their block
    assert np.all(overlap[[0]] > 1 - 1e-8)


def test_eig_sym_rejects_asymmetric():
    with pytest.raises(ConfigError):
        eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eig_sym_is_deterministic(rng):
    x = random_unit(rng, 200, 2)
    H = assemble_gram(x, KernelSpec())
    a, b = eig_sym(H, 5), eig_sym(H, 5)
    assert a.eigenvectors.tobytes() == b.eigenvectors.tobytes()


def test_gram_symmetric_with_exact_diagonal(rng):
    x = random_unit(rng, 50, 3)
    H = assemble_gram(x, KernelSpec("deep", 3))
    assert np.array_equal(H, H.T)
    np.testing.assert_array_equal(np.diag(H), 4.0)


def test_gram_budget_rejected_with_estimate():
    with pytest.raises(BudgetExceeded, match="8000000000000 bytes"):
        assemble_gram(np.zeros((10 ** 6, 2)), KernelSpec())
    assert gram_bytes(10 ** 6) == 8 * 10 ** 12


def test_gram_block_size_invariance(rng):
    x = random_unit(rng, 100, 2)
    a = assemble_gram(x, KernelSpec(), block=7)
    b = assemble_gram(x, KernelSpec(), block=2048)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


def test_multiplicity_and_labels():
    assert [multiplicity(k, 2) for k in range(4)] == [1, 2, 2, 2]
    assert [multiplicity(k, 3) for k in range(4)] == [1, 3, 5, 7]
    assert list(frequency_labels(6, 2)) == [0, 1, 1, 2, 2, 3]
    assert list(frequency_labels(9, 3)) == [0, 1, 1, 1, 2, 2, 2, 2, 2]


def test_group_by_multiplicity():
    lam = np.array([5.0, 3.0, 3.0, 2.0, 1.0])
    k, m = group_by_multiplicity(lam, 2)
    np.testing.assert_array_equal(k, [0, 1, 2])
    np.testing.assert_allclose(m, [5.0, 3.0, 1.5])


def test_fourier_eigenvalues_two_layer_closed_form():
    lam = fourier_eigenvalues(KernelSpec("two_layer"), 65536)
    np.testing.assert_allclose(lam[:6], UNIFORM_TWO_LAYER, rtol=1e-7)
    assert lam[3] == pytest.approx(1 / (18 * np.pi ** 2), rel=1e-7)


def test_fourier_matches_gram_operator_eigenvalues():
    smp = sample(PiecewiseDensity1D.uniform(), 3000, 0)
    sp = eig_sym(assemble_gram(smp.points, KernelSpec("two_layer")), 5)
    lam = fourier_eigenvalues(KernelSpec("two_layer"), 4096)
    expected = [lam[0], lam[1], lam[1], lam[2], lam[2]]
    np.testing.assert_allclose(sp.operator_eigenvalues, expected, rtol=0.05)


def test_operator_eigenvalues_stable_under_doubling():
    d = PiecewiseDensity1D.uniform()
    a = eig_sym(assemble_gram(sample(d, 4000, 0).points, KernelSpec()), 20).operator_eigenvalues
    b = eig_sym(assemble_gram(sample(d, 8000, 0).points, KernelSpec()), 20).operator_eigenvalues
    assert np.max(np.abs(a - b) / b) < 0.02


def test_symmetrized_grid_matches_sampled():
    d = PiecewiseDensity1D.from_weights([1, 2, 4])
    grid = np.sort(np.linalg.eigvalsh(symmetrized_grid_gram(d, KernelSpec(), 2000)))[::-1][:7]
    smp = sample(d, 4000, 2)
    emp = eig_sym(assemble_gram(smp.points, KernelSpec()), 7).operator_eigenvalues
    np.testing.assert_allclose(emp, grid, rtol=0.06)


def test_slope_fit_exact_power_law():
    k = np.arange(1, 200, dtype=float)
    assert slope_fit(k, k ** -2.0, 10) == pytest.approx(-2.0, abs=1e-12)


def test_slope_fit_needs_points():
    with pytest.raises(ConfigError):
        slope_fit(np.arange(5), np.ones(5), 1)


def test_slope_fit_drops_nonpositive():
    k = np.arange(1, 100, dtype=float)
    lam = k ** -3.0
    lam[50] = 0.0
    with pytest.warns(UserWarning):
        assert slope_fit(k, lam, 10) == pytest.approx(-3.0, abs=1e-12)


@pytest.mark.parametrize("method", ["periodogram", "fit"])
def test_local_frequency_cosine(method, rng):
    th = np.sort(rng.uniform(-np.pi, np.pi, 2000))
    lf = local_frequency(np.cos(8 * th + 0.3), th, -np.pi, np.pi / 3, method=method)
    assert abs(lf.frequency - 8) < lf.bin_width / 4
    assert lf.bin_width == pytest.approx(2 * np.pi / (4 * np.pi / 3))
    assert lf.confident


@pytest.mark.parametrize("method", ["periodogram", "fit"])
def test_local_frequency_constant(method, rng):
    th = np.sort(rng.uniform(-np.pi, np.pi, 500))
    lf = local_frequency(np.ones_like(th), th, -np.pi, np.pi, method=method)
    assert lf.frequency == 0.0
    assert not lf.confident


def test_local_frequency_wrapping_arc(rng):
    th = np.sort(rng.uniform(-np.pi, np.pi, 3000))
    lf = local_frequency(np.cos(5 * th), th, np.pi / 2, 3 * np.pi / 2, method="fit")
    assert abs(lf.frequency - 5) < 0.1


def test_local_frequency_too_few_points():
    th = np.linspace(-np.pi, np.pi, 10)
    with pytest.raises(ConfigError):
        local_frequency(np.cos(th), th, -np.pi, 0.0)


def test_grid_residual_matches_least_squares(rng):
    from ntkspectra.spectral import _grid_rss

    t = np.sort(rng.uniform(0, 2.0, 300))
    v = np.cos(4.3 * t + 0.2) + 0.1 * rng.standard_normal(300)
    step, count = 0.05, 700
    fast = _grid_rss(t, v, step, count, chunk=64)
    for i in (0, 85, 300, 699):
        w = step * (i + 1)
        M = np.stack([np.cos(w * t), np.sin(w * t)], axis=1)
        r = v - M @ np.linalg.lstsq(M, v, rcond=None)[0]
        assert fast[i] == pytest.approx(r @ r, rel=1e-9, abs=1e-9)
