import numpy as np
import pytest

from ntkspectra.analytic import (QuantizationWarning, amplitude_ratio_check, boundary_mismatch,
                                 build_eigenfunctions, eigenvalue, modes_to_csv, nk_bound, ode_residual, p_inner,
                                 periodic_modes, project_target, psi, smooth_phase, tail_index,
                                 target_p_norm2, winding_phase, z_const)
from ntkspectra.errors import ConfigError
from ntkspectra.geometry import Cosine, PiecewiseDensity1D, Sine

D124 = PiecewiseDensity1D.from_weights([1, 2, 4])
Z124 = 0.3842852888803236


def test_z_const():
    assert z_const(PiecewiseDensity1D.uniform()) == pytest.approx(1 / np.sqrt(2 * np.pi), rel=1e-14)
    assert z_const(D124) == pytest.approx(Z124, rel=1e-14)
    assert psi(np.pi, D124) == pytest.approx(2 * np.pi * Z124)


def test_eigenvalue_uniform_values():
    Z = 1 / np.sqrt(2 * np.pi)
    expected = [0.1756605918211689, 0.1131605918211689, 0.028144773233982713, 0.005628954646796544]
    np.testing.assert_allclose([eigenvalue(q, Z) for q in range(4)], expected, rtol=1e-13)
    assert eigenvalue(3, Z) == pytest.approx(1 / (18 * np.pi ** 2))


def test_eigenvalue_printed_convention():
    Z = 0.4
    assert eigenvalue(0, Z, "exact") == pytest.approx(2 * np.pi * eigenvalue(0, Z, "printed"))
    for q in (1, 2, 5):
        assert eigenvalue(q, Z, "exact") == pytest.approx(np.pi * eigenvalue(q, Z, "printed"))
    with pytest.raises(ConfigError):
        eigenvalue(-1, Z)


def test_uniform_modes_are_fourier():
    modes = periodic_modes(PiecewiseDensity1D.uniform(), 7)
    assert [m.q for m in modes] == [0, 1, 1, 2, 2, 3, 3]
    for m in modes[1:]:
        assert m.s == pytest.approx(m.q * np.sqrt(2 * np.pi), rel=1e-9)


@pytest.fixture(scope="module")
def modes124():
    return periodic_modes(D124, 41)


def test_modes_boundary_continuity(modes124):
    assert max(boundary_mismatch(m) for m in modes124) < 1e-8


def test_modes_ode_residual(modes124):
    assert max(ode_residual(m) for m in modes124) < 1e-8


def test_modes_winding_phase(modes124):
    for m in modes124:
        assert abs(winding_phase(m) - 2 * np.pi * m.q) < 1e-10


def test_modes_amplitude_ratios(modes124):
    for m in modes124:
        assert all(r.ok for r in amplitude_ratio_check(m, slack=0.02))


def test_modes_p_orthogonal(modes124):
    # modes carry unit norm in L2(dx); the Sturm-Liouville weight p makes them orthogonal
    G = np.array([[p_inner(a, b) for b in modes124[:9]] for a in modes124[:9]])
    np.testing.assert_allclose(G - np.diag(np.diag(G)), 0.0, atol=1e-9)
    assert np.all(np.diag(G) > 0)


def test_smooth_phase_uniform_quantized():
    m = build_eigenfunctions(PiecewiseDensity1D.uniform(), 3)[0]
    assert smooth_phase(m) == pytest.approx(6 * np.pi)


def test_unquantized_q_warns():
    with pytest.warns(QuantizationWarning):
        assert build_eigenfunctions(D124, 3) == []


def test_projection_parseval(modes124):
    modes = periodic_modes(D124, 121)
    g = project_target(Sine(4), modes, D124)
    pn = np.array([p_inner(m, m) for m in modes])
    assert np.sum(g ** 2 / pn) == pytest.approx(target_p_norm2(Sine(4), D124), rel=1e-6)


def test_tail_index_small_tail():
    modes = periodic_modes(D124, 270)
    rep = tail_index(8, 0.1, D124, modes)
    first, second = nk_bound(8, 0.1, rep.Z, rep.B, rep.p_star)
    assert rep.n_k == int(np.floor(max(first, second))) + 1
    assert rep.tail_mass < 0.01
    assert rep.tail_bound < 0.01


def test_tail_index_needs_enough_modes():
    with pytest.raises(ConfigError):
        tail_index(8, 0.1, D124, periodic_modes(D124, 20), Cosine(8))


def test_modes_csv(tmp_path, modes124):
    path = tmp_path / "modes.csv"
    modes_to_csv(path, modes124[:3])
    lines = path.read_text().splitlines()
    assert lines[0] == "q,lambda,region,amplitude,phase"
    assert len(lines) == 1 + 3 * 3
