import numpy as np
import pytest
from scipy import stats

from ntkspectra.errors import ConfigError
from ntkspectra.geometry import (Composite, ContinuousDensity1D, Cosine, HemisphereDensity2Sphere,
                                 PiecewiseDensity1D, Sine, UniformSphere, Zonal, angles_to_points,
                                 density_from_config, ks_distance, legendre, points_to_angles, region_arcs,
                                 sample, stratified_sample, target_eval, target_from_config)


def test_from_weights_normalizes():
    d = PiecewiseDensity1D.from_weights([1, 2, 4])
    np.testing.assert_allclose(d.values, np.array([1, 2, 4]) * 3 / (2 * np.pi * 7))
    np.testing.assert_allclose(d.masses, [1 / 7, 2 / 7, 4 / 7])
    np.testing.assert_allclose(d.boundaries, [-np.pi, -np.pi / 3, np.pi / 3])
    assert d.p_min == pytest.approx(3 / (14 * np.pi))


def test_uniform_density():
    d = PiecewiseDensity1D.uniform()
    assert d.n_regions == 1
    assert d.values[0] == pytest.approx(1 / (2 * np.pi))


def test_region_arcs_cover_circle():
    d = PiecewiseDensity1D.from_weights([1, 2, 4])
    arcs = region_arcs(d)
    assert arcs[0][0] == -np.pi
    assert arcs[-1][1] == pytest.approx(np.pi)
    assert sum(e - s for s, e in arcs) == pytest.approx(2 * np.pi)


def test_invalid_density():
    with pytest.raises(ConfigError):
        PiecewiseDensity1D.from_weights([1, -1])
    with pytest.raises(ConfigError):
        density_from_config({"kind": "triangle"})


@pytest.mark.parametrize("weights", [[1], [1, 2, 4], [1, 40], [3, 1, 2, 5]])
def test_sampler_ks(weights):
    d = PiecewiseDensity1D.from_weights(weights)
    smp = sample(d, 20000, 7)
    stat = ks_distance(smp.angles, d.cdf)
    # 1% critical value of the one-sample KS statistic
    assert stat < 1.63 / np.sqrt(20000)
    ref = stats.kstest(smp.angles, d.cdf)
    assert ref.statistic == pytest.approx(stat, abs=1e-12)


def test_continuous_sampler_ks():
    d = ContinuousDensity1D.cosine_bump()
    smp = sample(d, 20000, 3)
    assert ks_distance(smp.angles, d.cdf) < 1.63 / np.sqrt(20000)


def test_sample_regions_and_points():
    d = PiecewiseDensity1D.from_weights([1, 2, 4])
    smp = sample(d, 5000, 1)
    np.testing.assert_allclose(np.linalg.norm(smp.points, axis=1), 1.0, atol=1e-14)
    np.testing.assert_array_equal(smp.regions, d.region_of(smp.angles))
    frac = np.bincount(smp.regions) / smp.n
    np.testing.assert_allclose(frac, d.masses, atol=0.02)


def test_sample_is_deterministic():
    d = PiecewiseDensity1D.from_weights([1, 2, 4])
    a, b = sample(d, 100, 11), sample(d, 100, 11)
    assert a.points.tobytes() == b.points.tobytes()
    assert sample(d, 100, 12).points.tobytes() != a.points.tobytes()


def test_hemisphere_sample():
    d = HemisphereDensity2Sphere.from_ratio(12.0)
    smp = sample(d, 13000, 0)
    frac_dense = np.mean(smp.regions == 1)
    assert frac_dense == pytest.approx(12 / 13, abs=0.01)
    assert np.all((smp.points[:, 0] > 0) == (smp.regions == 1))


def test_stratified_counts():
    d = HemisphereDensity2Sphere.from_ratio(3.0)
    smp = stratified_sample(d, [300, 900], 0)
    np.testing.assert_array_equal(np.bincount(smp.regions), [300, 900])
    c = stratified_sample(PiecewiseDensity1D.from_weights([1, 2]), [10, 20], 0)
    np.testing.assert_array_equal(np.bincount(c.regions), [10, 20])


def test_uniform_sphere_mean_near_zero():
    smp = sample(UniformSphere(3), 20000, 5)
    assert np.abs(smp.points.mean(axis=0)).max() < 0.03


def test_angles_roundtrip(rng):
    th = rng.uniform(-np.pi, np.pi, 100)
    np.testing.assert_allclose(points_to_angles(angles_to_points(th)), th, atol=1e-14)


def test_legendre_values():
    assert legendre(0, 0.3) == 1.0
    assert legendre(2, 0.5) == pytest.approx(-0.125)
    assert legendre(5, 0.3) == pytest.approx(0.34538625)
    assert legendre(7, 1.0) == pytest.approx(1.0)


def test_targets():
    th = np.linspace(-np.pi, np.pi, 9)
    np.testing.assert_allclose(target_eval(Sine(3), th), np.sin(3 * th), atol=1e-15)
    np.testing.assert_allclose(target_eval(Cosine(2), th), np.cos(2 * th))
    comp = Composite(((0.4, 16, 0.0), (1.0, 1, 0.0)))
    np.testing.assert_allclose(target_eval(comp, th), 0.4 * np.cos(16 * th) + np.cos(th))
    x = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(target_eval(Zonal(2), x), [1.0, -0.5])
    assert target_from_config({"kind": "zonal", "ell": 3}) == Zonal(3)
