"""Points on the circle and the 2-sphere, densities with region structure,
seeded samplers and target functions.

Angles on the circle are stored in ``[-pi, pi)``.  Region boundaries are
half-open intervals ``[left, right)`` so that every angle belongs to exactly
one region.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigError

TWO_PI = 2.0 * np.pi


def make_rng(seed):
    """Counter-based generator (Philox) so that independent draws are
    reproducible and can be split by key."""
    return np.random.Generator(np.random.Philox(int(seed)))


def wrap_angle(theta):
    """Map angles into ``[-pi, pi)``."""
    theta = np.asarray(theta, dtype=float)
    out = np.mod(theta + np.pi, TWO_PI) - np.pi
    # mod can return exactly 2*pi - pi = pi for tiny negative inputs
    return np.where(out >= np.pi, out - TWO_PI, out)


def angles_to_points(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def points_to_angles(x):
    x = np.asarray(x, dtype=float)
    return wrap_angle(np.arctan2(x[..., 1], x[..., 0]))


def check_unit_norm(x, tol=1e-12):
    """Raise ``ValueError`` if any row of ``x`` is not on the unit sphere."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    err = np.abs(np.linalg.norm(x, axis=1) - 1.0)
    if err.size and err.max() > tol:
        raise ValueError("input points are not unit norm (max deviation %.3g)" % err.max())
    return x


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseDensity1D:
    """Piecewise-constant probability density on the circle.

    Parameters
    ----------
    boundaries : array_like
        Strictly increasing region start angles in ``[-pi, pi)``.  The last
        region closes cyclically onto ``boundaries[0] + 2*pi``.
    values : array_like
        Probability per radian on each region.

    Notes
    -----
    ``sum(values * lengths)`` must equal 1 within 1e-10.  Use
    :meth:`from_weights` to build a normalized density from relative
    weights.
    """

    boundaries: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        if b.size < 1 or b.size != v.size:
            raise ConfigError("boundaries and values must be non-empty and of equal length")
        if np.any(b < -np.pi) or np.any(b >= np.pi):
            raise ConfigError("boundaries must lie in [-pi, pi)")
        if np.any(np.diff(b) <= 0):
            raise ConfigError("boundaries must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ConfigError("density values must be finite and non-negative")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "values", v)
        mass = float(np.sum(v * self.lengths))
        if abs(mass - 1.0) > 1e-10:
            raise ConfigError("density integrates to %.12g, not 1" % mass)

    @classmethod
    def from_weights(cls, weights, boundaries=None):
        """Normalize relative weights into a density.

        With ``boundaries=None`` the circle is split into equal arcs starting
        at ``-pi``.
        """
        w = np.asarray(weights, dtype=float).ravel()
        if boundaries is None:
            boundaries = -np.pi + TWO_PI * np.arange(w.size) / w.size
        b = np.asarray(boundaries, dtype=float)
        lengths = np.diff(np.append(b, b[0] + TWO_PI))
        total = np.sum(w * lengths)
        if total <= 0:
            raise ConfigError("weights give zero total mass")
        return cls(b, w / total)

    @classmethod
    def uniform(cls):
        return cls(np.array([-np.pi]), np.array([1.0 / TWO_PI]))

    @property
    def n_regions(self):
        return self.values.size

    @property
    def ends(self):
        return np.append(self.boundaries[1:], self.boundaries[0] + TWO_PI)

    @property
    def lengths(self):
        return self.ends - self.boundaries

    @property
    def masses(self):
        return self.values * self.lengths

    @property
    def p_min(self):
        return float(self.values.min())

    def _unroll(self, theta):
        # angle measured from the first boundary, in [b0, b0 + 2pi)
        theta = np.asarray(theta, dtype=float)
        return self.boundaries[0] + np.mod(theta - self.boundaries[0], TWO_PI)

    def region_of(self, theta):
        t = self._unroll(theta)
        idx = np.searchsorted(self.boundaries, t, side="right") - 1
        return np.clip(idx, 0, self.n_regions - 1)

    def pdf(self, theta):
        return self.values[self.region_of(theta)]

    def cdf(self, theta):
        """Cumulative mass from ``-pi`` to ``theta`` for ``theta`` in [-pi, pi]."""
        theta = np.asarray(theta, dtype=float)
        edges, vals = self.cartesian_pieces()
        cum = np.concatenate([[0.0], np.cumsum(vals * np.diff(edges))])
        k = np.clip(np.searchsorted(edges, theta, side="right") - 1, 0, vals.size - 1)
        return cum[k] + vals[k] * (theta - edges[k])

    def cartesian_pieces(self):
        """Pieces of the density on ``[-pi, pi)`` in ascending order.

        Returns ``(edges, values)`` with ``len(edges) == len(values) + 1``,
        ``edges[0] == -pi`` and ``edges[-1] == pi``.  A region that wraps
        across ``pi`` is split in two.
        """
        starts = list(self.boundaries)
        vals = list(self.values)
        if starts[0] > -np.pi:
            # the last region wraps around to cover [-pi, b0)
            starts.insert(0, -np.pi)
            vals.insert(0, self.values[-1])
        edges = np.array(starts + [np.pi])
        return edges, np.array(vals)

    def to_config(self):
        return {"kind": "piecewise", "boundaries": self.boundaries.tolist(),
                "values": self.values.tolist()}


@dataclass(frozen=True)
class ContinuousDensity1D:
    """Smooth density on the circle given by an arbitrary profile.

    The profile is normalized numerically; sampling uses an inverse-CDF
    table with ``2**16`` points and linear interpolation.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    table_size: int = 2 ** 16
    normalization: float = field(init=False)

    def __post_init__(self):
        total, _ = integrate.quad(lambda t: float(self.profile(np.array(t))), -np.pi, np.pi,
                                  limit=200, epsabs=1e-13, epsrel=1e-12)
        if not total > 0:
            raise ConfigError("density profile has non-positive mass")
        object.__setattr__(self, "normalization", 1.0 / total)

    @classmethod
    def cosine_bump(cls):
        """The profile ``(3 cos(2x + pi) + 4.5) / (9 pi)``."""
        return cls(lambda t: (3.0 * np.cos(2.0 * np.asarray(t) + np.pi) + 4.5) / (9.0 * np.pi))

    def pdf(self, theta):
        return self.normalization * np.asarray(self.profile(np.asarray(theta, dtype=float)), dtype=float)

    def _table(self):
        t = np.linspace(-np.pi, np.pi, self.table_size + 1)
        f = self.pdf(t)
        c = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))])
        return t, c / c[-1]

    def cdf(self, theta):
        t, c = self._table()
        return np.interp(theta, t, c)

    def to_config(self):
        return {"kind": "continuous"}


@dataclass(frozen=True)
class HemisphereDensity2Sphere:
    """Density on the 2-sphere, constant on each hemisphere about ``axis``.

    ``p_left`` applies where ``axis . x < 0`` and ``p_right`` where
    ``axis . x >= 0`` (probability per steradian).
    """

    axis: np.ndarray
    p_left: float
    p_right: float

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float).ravel()
        if a.size != 3:
            raise ConfigError("hemisphere axis must be a 3-vector")
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ConfigError("hemisphere axis must be unit norm")
        object.__setattr__(self, "axis", a)
        if self.p_left < 0 or self.p_right < 0:
            raise ConfigError("hemisphere densities must be non-negative")
        if abs(TWO_PI * (self.p_left + self.p_right) - 1.0) > 1e-10:
            raise ConfigError("hemisphere densities do not integrate to 1")

    @classmethod
    def from_ratio(cls, ratio, axis=(1.0, 0.0, 0.0)):
        """Density with ``p_right / p_left == ratio``."""
        if ratio <= 0:
            raise ConfigError("ratio must be positive")
        p_left = 1.0 / (TWO_PI * (1.0 + ratio))
        return cls(np.asarray(axis, dtype=float), p_left, ratio * p_left)

    @property
    def values(self):
        return np.array([self.p_left, self.p_right])

    @property
    def masses(self):
        return TWO_PI * self.values

    def region_of(self, x):
        return (np.atleast_2d(x) @ self.axis >= 0).astype(int)

    def pdf(self, x):
        return self.values[self.region_of(x)]

    def to_config(self):
        return {"kind": "hemisphere", "axis": self.axis.tolist(),
                "ratio": self.p_right / self.p_left}


@dataclass(frozen=True)
class UniformSphere:
    """Uniform density on S^{d-1}."""

    d: int = 2

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ConfigError("only d in {2, 3} is supported")

    def to_config(self):
        return {"kind": "uniform", "d": self.d}


def density_from_config(cfg):
    """Build a density from a mapping as produced by ``to_config``."""
    kind = cfg.get("kind")
    if kind == "piecewise":
        if "weights" in cfg:
            return PiecewiseDensity1D.from_weights(cfg["weights"], cfg.get("boundaries"))
        return PiecewiseDensity1D(cfg["boundaries"], cfg["values"])
    if kind == "uniform":
        d = int(cfg.get("d", 2))
        return PiecewiseDensity1D.uniform() if d == 2 else UniformSphere(d)
    if kind == "hemisphere":
        return HemisphereDensity2Sphere.from_ratio(float(cfg["ratio"]), cfg.get("axis", (1.0, 0.0, 0.0)))
    if kind == "continuous":
        return ContinuousDensity1D.cosine_bump()
    raise ConfigError("unknown density kind %r" % (kind,))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

@dataclass
class Sample:
    """A sampled dataset.

    ``points`` has shape ``(n, d)``.  ``angles`` is set on the circle and
    ``regions`` holds a region label per point (``-1`` when the density has
    no region structure).
    """

    points: np.ndarray
    regions: np.ndarray
    angles: np.ndarray | None = None
    weights: np.ndarray | None = None

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def sorted_by_angle(self):
        """Copy with points ordered by increasing angle (circle only)."""
        if self.angles is None:
            raise ValueError("sorting by angle needs circle data")
        order = np.argsort(self.angles, kind="stable")
        return Sample(self.points[order], self.regions[order], self.angles[order],
                      None if self.weights is None else self.weights[order])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["angle_or_xyz", "region", "weight"])
            coords = self.angles if self.angles is not None else self.points
            wts = self.weights if self.weights is not None else np.ones(self.n)
            for c, r, wt in zip(coords, self.regions, wts):
                c = " ".join("%.17g" % v for v in np.atleast_1d(c))
                w.writerow([c, int(r), "%.17g" % wt])


def _uniform_sphere(rng, n, d):
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _uniform_hemisphere(rng, n, axis, sign):
    # reflect a uniform draw through the equatorial plane when it lands on
    # the wrong side; the equator itself has measure zero
    x = _uniform_sphere(rng, n, 3)
    h = x @ axis
    wrong = h * sign < 0
    x[wrong] -= 2.0 * np.outer(h[wrong], axis)
    return x


def sample(density, n, seed):
    """Draw ``n`` i.i.d. points from ``density``.

    Parameters
    ----------
    density : PiecewiseDensity1D, ContinuousDensity1D, HemisphereDensity2Sphere or UniformSphere
    n : int
    seed : int

    Returns
    -------
    Sample
    """
    n = int(n)
    if n < 1:
        raise ConfigError("n must be at least 1")
    rng = make_rng(seed)
    if isinstance(density, PiecewiseDensity1D):
        masses = density.masses
        if np.any(masses <= 0):
            raise ConfigError("density has a zero-measure region")
        # inverse CDF of the piecewise-linear cumulative mass
        cum = np.concatenate([[0.0], np.cumsum(masses)])
        u = rng.random(n) * cum[-1]
        reg = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, density.n_regions - 1)
        theta = density.boundaries[reg] + (u - cum[reg]) / density.values[reg]
        theta = wrap_angle(theta)
        # a draw can land exactly on a right edge after rounding
        reg = density.region_of(theta)
        return Sample(angles_to_points(theta), reg, theta, density.values[reg])
    if isinstance(density, ContinuousDensity1D):
        t, c = density._table()
        theta = wrap_angle(np.interp(rng.random(n), c, t))
        return Sample(angles_to_points(theta), np.full(n, -1), theta, density.pdf(theta))
    if isinstance(density, HemisphereDensity2Sphere):
        masses = density.masses
        n_right = rng.binomial(n, masses[1] / masses.sum())
        right = _uniform_hemisphere(rng, n_right, density.axis, +1)
        left = _uniform_hemisphere(rng, n - n_right, density.axis, -1)
        x = np.vstack([left, right])
        reg = density.region_of(x)
        return Sample(x, reg, None, density.values[reg])
    if isinstance(density, UniformSphere):
        x = _uniform_sphere(rng, n, density.d)
        theta = points_to_angles(x) if density.d == 2 else None
        return Sample(x, np.full(n, -1), theta, np.full(n, 1.0 / (TWO_PI if density.d == 2 else 4 * np.pi)))
    raise ConfigError("unsupported density type %s" % type(density).__name__)


def stratified_sample(density, counts, seed):
    """Fixed number of points per region, uniform within each region.

    Used where an experiment fixes per-region counts (for example 300 and
    ``300 * ratio`` points on two hemispheres).
    """
    rng = make_rng(seed)
    counts = [int(c) for c in counts]
    if isinstance(density, HemisphereDensity2Sphere):
        left = _uniform_hemisphere(rng, counts[0], density.axis, -1)
        right = _uniform_hemisphere(rng, counts[1], density.axis, +1)
        x = np.vstack([left, right])
        reg = density.region_of(x)
        return Sample(x, reg, None, density.values[reg])
    if isinstance(density, PiecewiseDensity1D):
        parts = []
        for j, c in enumerate(counts):
            parts.append(density.boundaries[j] + rng.random(c) * density.lengths[j])
        theta = wrap_angle(np.concatenate(parts))
        reg = density.region_of(theta)
        return Sample(angles_to_points(theta), reg, theta, density.values[reg])
    raise ConfigError("stratified sampling needs a density with regions")


def ks_distance(angles, cdf):
    """Kolmogorov-Smirnov distance between samples on [-pi, pi) and an
    analytic CDF."""
    x = np.sort(np.asarray(angles, dtype=float))
    n = x.size
    f = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


# ---------------------------------------------------------------------------
# Legendre polynomials and targets
# ---------------------------------------------------------------------------

def legendre(ell, t):
    """Legendre polynomial ``P_ell(t)`` by the three-term recurrence.

    Parameters
    ----------
    ell : int
        Degree, ``0 <= ell <= 64``.
    t : float or ndarray
        Arguments in ``[-1, 1]`` (a slack of 1e-12 is clamped).
    """
    ell = int(ell)
    if ell < 0 or ell > 64:
        raise ValueError("degree must satisfy 0 <= ell <= 64")
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0 + 1e-12):
        raise ValueError("legendre argument outside [-1, 1]")
    t = np.clip(t, -1.0, 1.0)
    p_prev, p = np.ones_like(t), t.copy()
    if ell == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    for k in range(1, ell):
        p_prev, p = p, ((2 * k + 1) * t * p - k * p_prev) / (k + 1)
    return p if p.ndim else float(p)


@dataclass(frozen=True)
class Cosine:
    kappa: float


@dataclass(frozen=True)
class Sine:
    kappa: float


@dataclass(frozen=True)
class Composite:
    """Sum of ``amplitude * cos(kappa * x + phase)`` terms."""

    terms: tuple  # of (amplitude, kappa, phase)


@dataclass(frozen=True)
class Zonal:
    """Zonal harmonic ``P_ell(axis . x)`` on the 2-sphere (unit sup-norm)."""

    ell: int
    axis: tuple = (1.0, 0.0, 0.0)


def as_terms(target):
    """Express a circle target as ``(amplitude, kappa, phase)`` cosine terms."""
    if isinstance(target, Cosine):
        return ((1.0, float(target.kappa), 0.0),)
    if isinstance(target, Sine):
        return ((1.0, float(target.kappa), -np.pi / 2),)
    if isinstance(target, Composite):
        return tuple((float(a), float(k), float(ph)) for a, k, ph in target.terms)
    raise TypeError("target %r has no cosine expansion" % (target,))


def target_eval(target, x):
    """Evaluate a target at angles (circle) or points of shape ``(n, 3)``."""
    if isinstance(target, Zonal):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        axis = np.asarray(target.axis, dtype=float)
        return legendre(target.ell, np.clip(x @ axis, -1.0, 1.0))
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = points_to_angles(x)
    out = np.zeros_like(x)
    for a, k, ph in as_terms(target):
        out = out + a * np.cos(k * x + ph)
    return out


def target_from_config(cfg):
    kind = cfg["kind"]
    if kind == "cosine":
        return Cosine(float(cfg["kappa"]))
    if kind == "sine":
        return Sine(float(cfg["kappa"]))
    if kind == "composite":
        return Composite(tuple(tuple(t) for t in cfg["terms"]))
    if kind == "zonal":
        return Zonal(int(cfg["ell"]), tuple(cfg.get("axis", (1.0, 0.0, 0.0))))
    raise ConfigError("unknown target kind %r" % (kind,))


def region_arcs(density: PiecewiseDensity1D) -> Sequence[tuple]:
    """``(start, end)`` of every region, ends possibly beyond ``pi``."""
    return list(zip(density.boundaries, density.ends))
