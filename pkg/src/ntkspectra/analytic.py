"""Closed-form eigensystem of the two-layer kernel for piecewise-constant
densities on the circle.

Inside region ``R_j`` an eigenfunction is a sinusoid whose angular
frequency is ``s * sqrt(p_j)``; for the quantized family ``s = q / Z``.
Amplitudes and phases follow from continuity of the value and the
derivative at every boundary, which is computed here by propagating the
state ``(f, f')`` with the transfer map of a harmonic oscillator.  Going
once around the circle gives the 2x2 monodromy matrix ``M(s)``; periodic
eigenfunctions are its fixed directions.

Two constructions are offered:

* :func:`build_eigenfunctions` tests the integer-``q`` ansatz
  ``s = q / Z`` and returns modes only when ``M(q / Z)`` has eigenvalue 1.
  This happens for the uniform density, for densities whose regions have
  equal optical length ``sqrt(p_j) L_j``, and for special ``q``.
* :func:`periodic_modes` solves the periodic Sturm-Liouville problem
  ``f'' = -s^2 p f`` for any piecewise density.  Its eigenvalues are the
  roots of ``tr M(s) = 2`` and coincide with the first family whenever
  that one exists.

Eigenfunctions are normalized to unit ``L^2(dx)`` norm and the sign is
fixed by ``f(-pi) >= 0`` (or ``f'(-pi) > 0`` when ``f(-pi) = 0``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ConfigError
from .geometry import PiecewiseDensity1D, as_terms

TWO_PI = 2.0 * np.pi


class QuantizationWarning(UserWarning):
    """The integer-q ansatz has no periodic solution for this density."""


# ---------------------------------------------------------------------------
# Psi, Z and the eigenvalue formula
# ---------------------------------------------------------------------------

def psi(x, density: PiecewiseDensity1D):
    """Cumulative root density ``Psi(x) = int_{-pi}^x sqrt(p)``."""
    edges, vals = density.cartesian_pieces()
    root = np.sqrt(vals)
    cum = np.concatenate([[0.0], np.cumsum(root * np.diff(edges))])
    x = np.asarray(x, dtype=float)
    k = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, vals.size - 1)
    out = cum[k] + root[k] * (x - edges[k])
    return float(out) if out.ndim == 0 else out


def z_const(density: PiecewiseDensity1D):
    """``Z = Psi(pi) / (2 pi)``."""
    return float(np.sum(np.sqrt(density.values) * density.lengths) / TWO_PI)


def eigenvalue(q, Z, convention="exact"):
    """Eigenvalue of the quantized mode ``q``.

    Parameters
    ----------
    q : int
    Z : float
    convention : {"exact", "printed"}
        ``"exact"`` is normalized so that it reproduces the true operator
        eigenvalues for the uniform density::

            q = 0       2 pi Z^2 (1/(2 pi^2) + 1/8)
            q = 1         pi Z^2 (1/pi^2 + 1/8)
            q even >= 2  Z^2 (q^2 + 1) / (pi (q^2 - 1)^2)
            q odd  >= 3  Z^2 / (pi q^2)

        ``"printed"`` is the historical form that is smaller by ``2 pi``
        at ``q = 0`` and by ``pi`` otherwise.
    """
    q = int(q)
    if q < 0:
        raise ConfigError("q must be non-negative")
    Z2 = float(Z) ** 2
    if q == 0:
        base = Z2 * (1.0 / (2 * np.pi ** 2) + 0.125)
        factor = 2 * np.pi
    elif q == 1:
        base = Z2 * (1.0 / np.pi ** 2 + 0.125)
        factor = np.pi
    elif q % 2 == 0:
        base = Z2 * (q * q + 1) / (np.pi ** 2 * (q * q - 1) ** 2)
        factor = np.pi
    else:
        base = Z2 / (np.pi ** 2 * q * q)
        factor = np.pi
    if convention == "printed":
        return base
    if convention == "exact":
        return base * factor
    raise ConfigError("unknown eigenvalue convention %r" % (convention,))


# ---------------------------------------------------------------------------
# Transfer maps
# ---------------------------------------------------------------------------

def _transfer(omega, length):
    if omega == 0.0:
        return np.array([[1.0, length], [0.0, 1.0]])
    c, s = math.cos(omega * length), math.sin(omega * length)
    return np.array([[c, s / omega], [-omega * s, c]])


def monodromy(density: PiecewiseDensity1D, s):
    """Map of ``(f, f')`` once around the circle from ``boundaries[0]``.

    ``det M = 1`` for every ``s``.
    """
    M = np.eye(2)
    for p, L in zip(density.values, density.lengths):
        M = _transfer(s * math.sqrt(p), L) @ M
    return M


def discriminant(density: PiecewiseDensity1D, s):
    """``tr M(s)`` evaluated for an array of wave numbers."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    a = np.ones_like(s)
    b = np.zeros_like(s)
    c = np.zeros_like(s)
    d = np.ones_like(s)
    for p, L in zip(density.values, density.lengths):
        w = s * math.sqrt(p)
        cs, sn = np.cos(w * L), np.sin(w * L)
        with np.errstate(divide="ignore", invalid="ignore"):
            t12 = np.where(w == 0, L, sn / np.where(w == 0, 1.0, w))
        t21 = -w * sn
        a, b, c, d = cs * a + t12 * c, cs * b + t12 * d, t21 * a + cs * c, t21 * b + cs * d
    return a + d


# ---------------------------------------------------------------------------
# Modes
# ---------------------------------------------------------------------------

@dataclass
class EigenMode1D:
    """One eigenfunction on the circle.

    In region ``j`` the function is ``a_j cos(omega_j x + b_j)`` with
    ``omega_j = s sqrt(p_j)``, where ``x`` is measured in the unrolled
    coordinate ``[boundaries[0], boundaries[0] + 2 pi)``.  For ``s = 0`` the
    function is the constant ``a_0 cos(b_0)``.

    Attributes
    ----------
    q : int
        Mode index (number of oscillation pairs).
    s : float
        Wave number.  ``s = q / Z`` for quantized modes.
    lam : float
        Eigenvalue attached to the mode: the closed-form value for
        quantized modes, ``1 / (pi s^2)`` for Sturm-Liouville modes with
        ``s > 0``.
    amplitudes, phases : ndarray
        ``a_j >= 0`` and ``b_j`` in ``[-pi, pi)``.
    """

    q: int
    s: float
    lam: float
    amplitudes: np.ndarray
    phases: np.ndarray
    density: PiecewiseDensity1D = field(repr=False)
    Z: float = 0.0
    kind: str = "quantized"

    @property
    def omegas(self):
        return self.s * np.sqrt(self.density.values)

    @property
    def local_frequencies(self):
        """Cycles per ``2 pi`` in every region."""
        return self.omegas

    def _locate(self, x):
        d = self.density
        u = d._unroll(np.asarray(x, dtype=float))
        j = np.clip(np.searchsorted(d.boundaries, u, side="right") - 1, 0, d.n_regions - 1)
        return u, j

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order=1):
        """Exact derivative of the closed form (``order`` in 0..2)."""
        u, j = self._locate(x)
        w = self.omegas[j]
        a = self.amplitudes[j]
        ph = w * u + self.phases[j]
        if order == 0:
            out = a * np.cos(ph)
        elif order == 1:
            out = -a * w * np.sin(ph)
        elif order == 2:
            out = -a * w * w * np.cos(ph)
        else:
            raise ValueError("order must be 0, 1 or 2")
        return float(out) if np.ndim(out) == 0 else out

    def edge_states(self):
        """``(f, f')`` at the left and right edge of every region."""
        d = self.density
        w, a, b = self.omegas, self.amplitudes, self.phases
        left = np.stack([a * np.cos(w * d.boundaries + b), -a * w * np.sin(w * d.boundaries + b)], 1)
        right = np.stack([a * np.cos(w * d.ends + b), -a * w * np.sin(w * d.ends + b)], 1)
        return left, right

    def to_rows(self):
        return [(self.q, self.lam, j, float(self.amplitudes[j]), float(self.phases[j]))
                for j in range(self.amplitudes.size)]


def _mode_from_state(density, s, state):
    """Amplitudes and phases of the solution started from ``state`` at the
    first boundary, plus the state returned after one turn."""
    f, g = float(state[0]), float(state[1])
    amps, phases = [], []
    for x0, p, L in zip(density.boundaries, density.values, density.lengths):
        w = s * math.sqrt(p)
        if w == 0.0:
            amps.append(abs(f))
            phases.append(0.0 if f >= 0 else -np.pi)
            f, g = f + g * L, g
            continue
        a = math.hypot(f, g / w)
        phi = math.atan2(-g / w, f)  # f = a cos(phi), f' = -a w sin(phi)
        amps.append(a)
        phases.append(phi - w * x0)
        f, g = _transfer(w, L) @ np.array([f, g])
    phases = np.mod(np.asarray(phases) + np.pi, TWO_PI) - np.pi
    return np.asarray(amps), phases, np.array([f, g])


def _sq_integrals(density, s, amps, phases, weights=None):
    """``int f^2 w dx`` of a closed-form mode, region by region, exact."""
    total = 0.0
    wts = np.ones(density.n_regions) if weights is None else weights
    for j, (x0, x1, p) in enumerate(zip(density.boundaries, density.ends, density.values)):
        w = s * math.sqrt(p)
        a, b = amps[j], phases[j]
        if w == 0.0:
            val = (a * math.cos(b)) ** 2 * (x1 - x0)
        else:
            val = a * a * (0.5 * (x1 - x0) + (math.sin(2 * (w * x1 + b)) - math.sin(2 * (w * x0 + b))) / (4 * w))
        total += wts[j] * val
    return total


def _cross_integral(density, s1, m1, s2, m2, weights):
    """``int f1 f2 w dx`` of two closed-form modes, exact."""
    total = 0.0
    for j, (x0, x1, p) in enumerate(zip(density.boundaries, density.ends, density.values)):
        r = math.sqrt(p)
        total += weights[j] * _int_cos_cos(m1[0][j], s1 * r, m1[1][j], m2[0][j], s2 * r, m2[1][j], x0, x1)
    return total


def _int_cos(c, d, x0, x1):
    """``int_{x0}^{x1} cos(c x + d) dx`` stable for small ``c``."""
    L = x1 - x0
    mid = 0.5 * (x0 + x1)
    return L * np.cos(c * mid + d) * np.sinc(c * L / TWO_PI)


def _int_cos_cos(a1, w1, b1, a2, w2, b2, x0, x1):
    return 0.5 * a1 * a2 * (_int_cos(w1 + w2, b1 + b2, x0, x1) + _int_cos(w1 - w2, b1 - b2, x0, x1))


def _finish_mode(density, q, s, lam, amps, phases, kind):
    # unit L2(dx) norm and sign gauge at -pi
    norm = math.sqrt(_sq_integrals(density, s, amps, phases))
    amps = amps / norm
    mode = EigenMode1D(q, s, lam, amps, phases, density, z_const(density), kind)
    f0 = mode(-np.pi)
    flip = f0 < 0 or (abs(f0) < 1e-14 and mode.derivative(-np.pi, 1) < 0)
    if flip:
        mode.phases = np.mod(phases, TWO_PI) - np.pi  # shift by pi flips the sign
    return mode


def _modes_from_monodromy(density, q, s, lam, kind, tol, pair=None):
    M = monodromy(density, s)
    if pair is None:
        pair = np.max(np.abs(M - np.eye(2))) < tol
    if pair:
        # coexistence: every start state is periodic; orthogonalize the
        # two basis solutions in the p-weighted product
        m1 = _mode_from_state(density, s, (1.0, 0.0))[:2]
        m2 = _mode_from_state(density, s, (0.0, 1.0))[:2]
        p = density.values
        n11 = _sq_integrals(density, s, *m1, weights=p)
        c12 = _cross_integral(density, s, m1, s, m2, p)
        # by linearity the start state (-c12/n11, 1) gives m2 - (c12/n11) m1
        m2 = _mode_from_state(density, s, (-c12 / n11, 1.0))[:2]
        return [_finish_mode(density, q, s, lam, *m1, kind),
                _finish_mode(density, q, s, lam, *m2, kind)]
    _, _, vt = np.linalg.svd(M - np.eye(2))
    amps, phases, _ = _mode_from_state(density, s, vt[-1])
    return [_finish_mode(density, q, s, lam, amps, phases, kind)]


def period_pi_transform(density: PiecewiseDensity1D):
    """Two compressed copies of the density on ``[-pi, pi)``.

    The result has period ``pi``: each region keeps its value and its
    length is halved, so the total mass is still 1.
    """
    starts = -np.pi + (density.boundaries - density.boundaries[0]) / 2.0
    bounds = np.concatenate([starts, starts + np.pi])
    values = np.concatenate([density.values, density.values])
    return PiecewiseDensity1D(bounds, values)


def build_eigenfunctions(density: PiecewiseDensity1D, q, tol=1e-6, preprocess=False):
    """Quantized eigenfunctions with local frequencies ``q sqrt(p_j) / Z``.

    Parameters
    ----------
    density : PiecewiseDensity1D
    q : int
    tol : float
        Acceptance threshold on ``|tr M - 2|``.
    preprocess : bool
        Retry on :func:`period_pi_transform` of the density when the raw
        density fails the quantization test.

    Returns
    -------
    list of EigenMode1D
        Two modes when the monodromy is the identity, one when it has a
        single fixed direction, none (with a :class:`QuantizationWarning`
        carrying the trace) when ``q`` is not an eigen-index.
    """
    q = int(q)
    if q < 0:
        raise ConfigError("q must be non-negative")
    if np.any(density.values <= 0):
        raise ConfigError("all region densities must be positive")
    Z = z_const(density)
    s = q / Z
    lam = eigenvalue(q, Z)
    trace = float(np.trace(monodromy(density, s)))
    if abs(trace - 2.0) < tol:
        return _modes_from_monodromy(density, q, s, lam, "quantized", tol)
    if preprocess:
        alt = period_pi_transform(density)
        Za = z_const(alt)
        ta = float(np.trace(monodromy(alt, q / Za)))
        if abs(ta - 2.0) < tol:
            return _modes_from_monodromy(alt, q, q / Za, eigenvalue(q, Za), "quantized", tol)
    warnings.warn("q=%d is not quantized for this density (tr M = %.12g)" % (q, trace),
                  QuantizationWarning, stacklevel=2)
    return []


def _refine_coexistence(density, peak, width):
    """Sharpen a double root of ``tr M = 2``.

    There ``M = I`` and the off-diagonal entries cross zero linearly, which
    locates the root to machine precision where the quadratic peak of the
    trace cannot.
    """
    best, best_err = peak, np.max(np.abs(monodromy(density, peak) - np.eye(2)))
    for (r, c) in ((0, 1), (1, 0)):
        g = lambda x: monodromy(density, x)[r, c]
        lo, hi = peak - width, peak + width
        if g(lo) * g(hi) < 0:
            cand = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
            err = np.max(np.abs(monodromy(density, cand) - np.eye(2)))
            if err < best_err:
                best, best_err = cand, err
    return best


def _roots_of_discriminant(density, s_max, grid_per_cycle=256, tangent_tol=1e-12):
    """Positive wave numbers where ``tr M(s) = 2``, ascending.

    Returns ``(roots, double)`` where ``double[i]`` marks a root at which
    the monodromy is the identity (two independent periodic solutions).

    Every local maximum of ``tr M`` is at least 2 for this equation, so the
    periodic roots come in pairs around each maximum.  A maximum equal to 2
    is a double root; one slightly above 2 can hide both crossings between
    two grid points, so maxima are refined before the sign scan.
    """
    Z = z_const(density)
    n_grid = int(grid_per_cycle * s_max * Z) + 64
    s = np.linspace(0.0, s_max, n_grid)
    D = discriminant(density, s) - 2.0

    def f(x):
        return float(discriminant(density, x)[0]) - 2.0

    roots, double = [], []
    consumed = np.zeros(n_grid - 1, dtype=bool)  # grid intervals already handled
    for i in range(1, n_grid - 1):
        if not (D[i] > D[i - 1] and D[i] >= D[i + 1]) or D[i] < -1e-2:
            continue
        res = optimize.minimize_scalar(lambda x: -f(x), bounds=(s[i - 1], s[i + 1]),
                                       method="bounded", options={"xatol": 1e-15})
        peak, val = float(res.x), -float(res.fun)
        if abs(val) < tangent_tol:
            roots.append(_refine_coexistence(density, peak, s[i + 1] - s[i]))
            double.append(True)
            consumed[i - 1:i + 1] = True
        elif val > 0 and D[i - 1] <= 0 and D[i + 1] <= 0:
            roots.append(optimize.brentq(f, s[i - 1], peak, xtol=1e-15, rtol=1e-15, maxiter=500))
            roots.append(optimize.brentq(f, peak, s[i + 1], xtol=1e-15, rtol=1e-15, maxiter=500))
            double.extend([False, False])
            consumed[i - 1:i + 1] = True
    for i in range(1, n_grid - 1):
        if consumed[i] or D[i] == 0.0 and consumed[i - 1]:
            continue
        if D[i] * D[i + 1] < 0 or (D[i] == 0.0 and not consumed[i - 1]):
            hi = s[i + 1] if D[i] != 0.0 else s[i]
            root = s[i] if D[i] == 0.0 else optimize.brentq(f, s[i], hi, xtol=1e-15, rtol=1e-15, maxiter=500)
            roots.append(root)
            double.append(False)
    order = np.argsort(roots)
    return np.asarray(roots)[order], np.asarray(double, dtype=bool)[order]


def periodic_modes(density: PiecewiseDensity1D, count, tol=1e-7):
    """First ``count`` eigenfunctions of ``f'' = -s^2 p f`` on the circle.

    Modes come in the order of increasing ``s`` (decreasing eigenvalue
    ``1 / (pi s^2)``); mode ``i`` has index ``q = (i + 1) // 2``.  The
    constant mode comes first and carries the closed-form ``q = 0``
    eigenvalue.
    """
    count = int(count)
    if np.any(density.values <= 0):
        raise ConfigError("all region densities must be positive")
    Z = z_const(density)
    modes = []
    const = _mode_from_state(density, 0.0, (1.0, 0.0))[:2]
    modes.append(_finish_mode(density, 0, 0.0, eigenvalue(0, Z), *const, "periodic_sl"))
    if count <= 1:
        return modes[:count]
    s_max = (count // 2 + 3) / Z
    while True:
        roots, double = _roots_of_discriminant(density, s_max)
        if roots.size + double.sum() >= count - 1:
            break
        s_max *= 1.5
    for r, dbl in zip(roots, double):
        if len(modes) >= count:
            break
        q = (len(modes) + 1) // 2
        modes.extend(_modes_from_monodromy(density, q, r, 1.0 / (np.pi * r * r), "periodic_sl", 0.0, pair=bool(dbl)))
    return modes[:count]


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def boundary_mismatch(mode: EigenMode1D):
    """Largest relative jump of ``f`` or ``f'`` across any boundary,
    including the wrap from the last region back to the first."""
    left, right = mode.edge_states()
    nxt = np.roll(left, -1, axis=0)
    scale = max(np.max(np.abs(left)), 1e-300)
    return float(np.max(np.abs(right - nxt)) / scale)


def ode_residual(mode: EigenMode1D, n_points=2000, margin=1e-6):
    """``max |f'' + s^2 p f|`` on an interior grid.

    For ``s > 0`` the coefficient ``s^2 p`` equals ``p / (pi lambda)`` with
    ``lambda = 1 / (pi s^2)``.  The constant mode has ``s = 0`` and solves
    ``f'' = 0``; its closed-form eigenvalue does not enter the equation.
    Points within ``margin`` of a region boundary are skipped.
    """
    d = mode.density
    res = 0.0
    for x0, x1, p in zip(d.boundaries, d.ends, d.values):
        x = np.linspace(x0 + margin, x1 - margin, n_points)
        f = mode(x)
        f2 = mode.derivative(x, 2)
        res = max(res, float(np.max(np.abs(f2 + mode.s * mode.s * p * f))))
    return res


def smooth_phase(mode: EigenMode1D):
    """``sum_j omega_j L_j = s Psi(pi)``, equal to ``2 pi q`` for quantized
    modes."""
    return float(np.sum(mode.omegas * mode.density.lengths))


def winding_phase(mode: EigenMode1D):
    """Total continuous phase of the mode around the circle.

    The phase is ``theta`` in ``f = A cos(theta)``, ``f' = -A omega
    sin(theta)``.  It advances by ``omega_j L_j`` inside each region and
    jumps at a boundary where ``omega`` changes.  For a periodic solution
    the total is ``2 pi`` times the number of oscillation pairs.
    """
    if mode.s == 0:
        return 0.0
    d = mode.density
    w, b = mode.omegas, mode.phases
    start = w * d.boundaries + b
    end = w * d.ends + b
    # the next region starts where this one ends; phases of region 0 are
    # written in the unrolled coordinate, so its start is at boundaries[0]
    nxt = np.roll(start, -1)
    jumps = np.mod(nxt - end + np.pi, TWO_PI) - np.pi
    return float(np.sum(end - start) + np.sum(jumps))


@dataclass
class RatioReport:
    boundary: int
    ratio: float  # a_sparse / a_dense
    upper: float  # sqrt(p_dense / p_sparse)
    ok: bool


def amplitude_ratio_check(mode: EigenMode1D, slack=0.02):
    """Test ``1 <= a_sparse / a_dense <= sqrt(p_dense / p_sparse)`` at every
    boundary (the wrap boundary included)."""
    d = mode.density
    out = []
    for j in range(d.n_regions):
        k = (j + 1) % d.n_regions
        pj, pk = d.values[j], d.values[k]
        aj, ak = mode.amplitudes[j], mode.amplitudes[k]
        if pj <= pk:
            ratio, upper = aj / ak, math.sqrt(pk / pj)
        else:
            ratio, upper = ak / aj, math.sqrt(pj / pk)
        ok = (1.0 - slack) <= ratio <= upper * (1.0 + slack)
        out.append(RatioReport(j, float(ratio), float(upper), bool(ok)))
    return out


def p_inner(mode_a: EigenMode1D, mode_b: EigenMode1D):
    """``int f_a f_b p dx`` for two modes on the same density."""
    d = mode_a.density
    return _cross_integral(d, mode_a.s, (mode_a.amplitudes, mode_a.phases),
                           mode_b.s, (mode_b.amplitudes, mode_b.phases), d.values)


# ---------------------------------------------------------------------------
# Projections and the tail index
# ---------------------------------------------------------------------------

def _target_pieces(target, density):
    """Split each region at ``pi`` so that periodic targets can be written
    in the unrolled coordinate."""
    for j, (x0, x1) in enumerate(zip(density.boundaries, density.ends)):
        if x1 <= np.pi:
            yield j, x0, x1, 0.0
        else:
            if x0 < np.pi:
                yield j, x0, np.pi, 0.0
            yield j, max(x0, np.pi), x1, -TWO_PI


def project_target(target, modes, density=None):
    """Coefficients ``g_i = int v_i(x) g(x) p(x) dx``, in closed form."""
    if not modes:
        return np.zeros(0)
    density = modes[0].density if density is None else density
    terms = as_terms(target)
    out = np.zeros(len(modes))
    for i, m in enumerate(modes):
        acc = 0.0
        for j, x0, x1, shift in _target_pieces(target, density):
            w = m.omegas[j]
            for amp, k, ph in terms:
                acc += density.values[j] * _int_cos_cos(m.amplitudes[j], w, m.phases[j],
                                                        amp, k, ph + k * shift, x0, x1)
        out[i] = acc
    return out


def target_p_norm2(target, density):
    """``int g^2 p dx`` in closed form."""
    terms = as_terms(target)
    acc = 0.0
    for j, x0, x1, shift in _target_pieces(target, density):
        for a1, k1, p1 in terms:
            for a2, k2, p2 in terms:
                acc += density.values[j] * _int_cos_cos(a1, k1, p1 + k1 * shift, a2, k2, p2 + k2 * shift, x0, x1)
    return float(acc)


@dataclass
class TailBoundReport:
    """Result of :func:`tail_index`.

    ``tail_mass`` sums ``g_i^2`` over built modes past ``n_k``;
    ``tail_bound`` is an upper bound on the full infinite tail obtained from
    Parseval's identity in ``L^2(p)``.
    """

    kappa: float
    eps: float
    n_k: int
    tail_mass: float
    tail_bound: float
    B: float
    Z: float
    p_star: float
    first_branch: float
    second_branch: float


def nk_bound(kappa, eps, Z, B, p_star):
    """Both branches of ``n_k > max{4 Z k / sqrt(p*), 128 B^2 Z^2 / (9 eps^2 p*)}``."""
    first = 4.0 * Z * kappa / math.sqrt(p_star)
    second = 128.0 * B * B * Z * Z / (9.0 * eps * eps * p_star)
    return first, second


def tail_index(kappa, eps, density, modes, target=None):
    """Evaluate the tail-index lemma for the target ``cos(kappa x)``.

    Parameters
    ----------
    kappa, eps : float
    density : PiecewiseDensity1D
    modes : list of EigenMode1D
        Ordered eigenfunctions (as returned by :func:`periodic_modes`);
        must extend past ``n_k``.
    target : optional
        Defaults to ``Cosine(kappa)``.
    """
    from .geometry import Cosine

    target = Cosine(kappa) if target is None else target
    Z = z_const(density)
    p_star = density.p_min
    B = max(float(np.sum(m.amplitudes * density.values)) for m in modes)
    first, second = nk_bound(kappa, eps, Z, B, p_star)
    n_k = int(math.floor(max(first, second))) + 1
    if len(modes) <= n_k:
        raise ConfigError("need more than %d modes for the tail index, got %d" % (n_k, len(modes)))
    g = project_target(target, modes, density)
    # mode i is v_i with rank i + 1 in one-based counting, so the tail is
    # the zero-based slice starting at n_k
    tail_mass = float(np.sum(g[n_k:] ** 2))
    pn = np.array([_sq_integrals(density, m.s, m.amplitudes, m.phases, density.values) for m in modes])
    head = float(np.sum(g[:n_k] ** 2 / pn[:n_k]))
    closure = max(target_p_norm2(target, density) - head, 0.0)
    tail_bound = float(density.values.max() * closure)
    return TailBoundReport(float(kappa), float(eps), n_k, tail_mass, tail_bound, B, Z, p_star, first, second)


def modes_to_csv(path, modes):
    with open(path, "w") as fh:
        fh.write("q,lambda,region,amplitude,phase\n")
        for m in modes:
            for row in m.to_rows():
                fh.write("%d,%.17g,%d,%.17g,%.17g\n" % row)
