"""Gram matrices of sampled kernels, their eigen-systems and eigenvector
analysis: per-region local frequency, multiplicity grouping and log-log
slope fits."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import optimize
from scipy.sparse import linalg as spla

from .errors import BudgetExceeded, ConfigError, NumericalFault
from .kernels import KernelSpec, kernel_eval, kernel_profile

DEFAULT_MEMORY_BUDGET = 4 * 1024 ** 3


def gram_bytes(n):
    return 8 * int(n) ** 2


def assemble_gram(points, spec: KernelSpec, memory_budget=DEFAULT_MEMORY_BUDGET, block=2048):
    """Kernel Gram matrix ``H[i, j] = k(x_i . x_j)``.

    Assembled in row blocks.  For a fixed block size the result is
    bit-reproducible; other block sizes agree up to rounding in the inner
    products.

    Parameters
    ----------
    points : ndarray, shape (n, d)
        Unit-norm inputs.
    spec : KernelSpec
    memory_budget : int
        Bytes allowed for the ``n x n`` float64 result.

    Raises
    ------
    BudgetExceeded
        When ``8 n^2`` bytes exceed ``memory_budget``.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    n = x.shape[0]
    need = gram_bytes(n)
    if n > 50000 or need > memory_budget:
        raise BudgetExceeded("Gram matrix for n=%d needs %d bytes (budget %d)" % (n, need, memory_budget))
    H = np.empty((n, n))
    for s in range(0, n, block):
        rho = np.clip(x[s:s + block] @ x.T, -1.0, 1.0)
        H[s:s + block] = kernel_eval(spec, rho)
    # exact symmetry and exact diagonal
    H = 0.5 * (H + H.T)
    np.fill_diagonal(H, kernel_eval(spec, 1.0))
    return H


@dataclass
class GramSpectrum:
    """Eigen-system of a Gram matrix, eigenvalues in descending order.

    ``eigenvectors[:, i]`` belongs to ``eigenvalues[i]``; ``n`` is the size
    of the generating sample, so ``operator_eigenvalues = eigenvalues / n``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n: int

    @property
    def operator_eigenvalues(self):
        return self.eigenvalues / self.n

    def to_csv(self, path, labels=None):
        k = self.eigenvalues.size
        labels = frequency_labels(k, 2) if labels is None else labels
        with open(path, "w") as fh:
            fh.write("rank,eigenvalue,operator_eigenvalue,freq_label\n")
            for i in range(k):
                fh.write("%d,%.17g,%.17g,%d\n" % (i, self.eigenvalues[i], self.eigenvalues[i] / self.n, labels[i]))

    def vectors_to_csv(self, path, angles, k):
        data = np.column_stack([angles, self.eigenvectors[:, :k]])
        header = "angle," + ",".join("v%d" % (i + 1) for i in range(k))
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def _start_vector(n):
    # fixed, generic start vector so Lanczos runs are reproducible
    j = np.arange(n, dtype=float)
    return 1.0 + 0.5 * np.sin(1.2345 * j) + 0.25 * np.cos(0.7071 * j * j / max(n, 1))


def eig_sym(H, k=None, tol=0.0):
    """Symmetric eigendecomposition, eigenvalues sorted descending.

    Parameters
    ----------
    H : ndarray, shape (n, n)
        Symmetric matrix.
    k : int, optional
        Compute only the ``k`` largest eigenpairs.  Full decomposition
        (LAPACK tridiagonal reduction plus implicit-shift iteration) when
        ``None``; implicitly restarted Lanczos with a fixed start vector
        otherwise.

    Returns
    -------
    GramSpectrum
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    if H.ndim != 2 or H.shape[1] != n:
        raise ConfigError("eig_sym needs a square matrix")
    scale = np.max(np.abs(H)) if n else 1.0
    if n and np.max(np.abs(H - H.T)) > 1e-12 * max(scale, 1.0):
        raise ConfigError("eig_sym needs a symmetric matrix")
    if k is None or k >= n - 1 or n <= 64:
        try:
            w, V = sla.eigh(H)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
            raise NumericalFault("eigensolver did not converge: %s" % exc) from exc
        order = np.argsort(w)[::-1]
        w, V = w[order], V[:, order]
        if k is not None:
            w, V = w[:k], V[:, :k]
        return GramSpectrum(w, V, n)
    try:
        w, V = spla.eigsh(H, k=int(k), which="LA", v0=_start_vector(n), tol=tol,
                          ncv=min(n, max(2 * int(k) + 1, int(k) + 32)))
    except spla.ArpackNoConvergence as exc:
        res = np.linalg.norm(H @ exc.eigenvectors - exc.eigenvectors * exc.eigenvalues, axis=0).max()
        raise NumericalFault("Lanczos did not converge (residual %.3g)" % res) from exc
    order = np.argsort(w)[::-1]
    return GramSpectrum(w[order], V[:, order], n)


def operator_eigenvalues(spectrum, n=None):
    n = spectrum.n if n is None else int(n)
    return spectrum.eigenvalues / n


# ---------------------------------------------------------------------------
# Multiplicity structure
# ---------------------------------------------------------------------------

def multiplicity(kappa, d):
    """Number of harmonics of frequency ``kappa`` on S^{d-1}, d in {2, 3}."""
    if d == 2:
        return 1 if kappa == 0 else 2
    if d == 3:
        return 2 * kappa + 1
    raise ConfigError("d must be 2 or 3")


def frequency_labels(k, d):
    """Frequency label of each of the first ``k`` ranks under rank-order
    pairing within multiplicity blocks."""
    labels = []
    kappa = 0
    while len(labels) < k:
        labels.extend([kappa] * multiplicity(kappa, d))
        kappa += 1
    return np.array(labels[:k])


def group_by_multiplicity(eigenvalues, d, kappa_max=None):
    """Mean eigenvalue of each frequency block.

    Consecutive descending eigenvalues are grouped in blocks of size
    1, 2, 2, ... on the circle and 1, 3, 5, ... on the 2-sphere.

    Returns
    -------
    kappas, means : ndarray
    """
    lam = np.asarray(eigenvalues, dtype=float)
    kappas, means = [], []
    start, kappa = 0, 0
    while kappa_max is None or kappa <= kappa_max:
        size = multiplicity(kappa, d)
        if start + size > lam.size:
            if kappa_max is not None:
                warnings.warn("spectrum too short; truncated at frequency %d" % (kappa - 1))
            break
        kappas.append(kappa)
        means.append(lam[start:start + size].mean())
        start += size
        kappa += 1
    return np.array(kappas), np.array(means)


def fourier_eigenvalues(spec, grid_size=2 ** 16):
    """Uniform-density eigenvalues on the circle from the kernel profile.

    For the uniform density ``p = 1/(2 pi)`` the eigenfunctions are Fourier
    modes and ``lambda_q = (1/2 pi) * int k(cos t) cos(q t) dt``, computed
    here by FFT of the sampled profile.

    Returns
    -------
    ndarray
        ``lambda_q`` for ``q = 0 .. grid_size // 2``.
    """
    n = int(grid_size)
    if n < 1024 or n & (n - 1):
        raise ConfigError("grid_size must be a power of two >= 1024")
    _, prof = kernel_profile(spec, n)
    coef = np.fft.rfft(prof).real / n
    # the profile starts at -pi, a shift by half a period
    q = np.arange(coef.size)
    return np.where(q % 2 == 0, coef, -coef)


def slope_fit(frequencies, eigenvalues, kappa_min, kappa_max=None):
    """Least-squares slope of ``log lambda`` against ``log kappa``.

    Points with ``kappa < kappa_min`` (or above ``kappa_max``) are ignored;
    non-positive eigenvalues are dropped with a warning.
    """
    k = np.asarray(frequencies, dtype=float)
    lam = np.asarray(eigenvalues, dtype=float)
    keep = k >= kappa_min
    if kappa_max is not None:
        keep &= k <= kappa_max
    bad = keep & ~(lam > 0)
    if bad.any():
        warnings.warn("dropping %d non-positive eigenvalues from the slope fit" % bad.sum())
    keep &= lam > 0
    if keep.sum() < 10:
        raise ConfigError("slope fit needs at least 10 points above kappa_min")
    slope, _ = np.polyfit(np.log(k[keep]), np.log(lam[keep]), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# Local frequency
# ---------------------------------------------------------------------------

@dataclass
class LocalFrequency:
    frequency: float  # cycles per 2 pi
    bin_width: float  # one periodogram bin in the same units
    confident: bool


def _region_values(values, angles, start, end, min_points):
    values = np.asarray(values, dtype=float)
    t = start + np.mod(np.asarray(angles, dtype=float) - start, 2 * np.pi)
    inside = t < end
    if inside.sum() < min_points:
        raise ConfigError("local_frequency needs at least %d points in the region" % min_points)
    t, v = t[inside], values[inside]
    order = np.argsort(t)
    return t[order], v[order]


def local_frequency(values, angles, start, end, pad=16, min_points=32, method="periodogram"):
    """Dominant frequency of an eigenvector restricted to one arc.

    Parameters
    ----------
    values, angles : ndarray
        Eigenvector entries and their angles in ``[-pi, pi)``.
    start, end : float
        Arc limits, ``end`` may exceed ``pi`` for arcs that wrap.
    method : {"periodogram", "fit"}
        ``"periodogram"``: the values are interpolated onto a uniform grid,
        the mean is removed, a Hann window is applied and the zero-padded
        periodogram peak is refined by a parabola through the log-power of
        the peak and its neighbours.  ``"fit"``: least-squares fit of
        ``A cos(w t) + B sin(w t)`` over a fine grid of ``w`` followed by a
        bounded scalar refinement.  The fit resolves regions holding less
        than one cycle, where the periodogram peak carries no information.

    Returns
    -------
    LocalFrequency
        Frequency in cycles per full circle (equal to the angular
        frequency ``w``), with one periodogram bin ``2 pi / (end - start)``.
    """
    t, v = _region_values(values, angles, start, end, min_points)
    length = end - start
    bin_width = 2 * np.pi / length
    scale = np.max(np.abs(v))
    if method == "fit":
        return _fit_frequency(t - start, v, length, bin_width, scale)
    if method != "periodogram":
        raise ConfigError("unknown local frequency method %r" % (method,))
    m = t.size
    grid = start + (np.arange(m) + 0.5) * length / m
    g = np.interp(grid, t, v)
    g = g - g.mean()
    if scale == 0 or np.std(g) < 1e-9 * scale:
        return LocalFrequency(0.0, bin_width, False)
    nfft = pad * m
    power = np.abs(np.fft.rfft(g * np.hanning(m), nfft)) ** 2
    k = int(np.argmax(power))
    # parabolic refinement on log power
    if 0 < k < power.size - 1:
        a, b, c = np.log(power[k - 1:k + 2] + 1e-300)
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom < 0 else 0.0
    else:
        shift = 0.0
    cycles = (k + shift) / pad  # cycles per region length
    confident = power[k] > 3.0 * np.median(power)
    freq = cycles * bin_width
    if not confident:
        freq = 0.0
    return LocalFrequency(float(freq), bin_width, bool(confident))


def _grid_rss(t, v, step, count, chunk=256):
    """Residual of the best ``A cos(w t) + B sin(w t)`` fit for every ``w``
    in ``step * (1 .. count)``, from the 2x2 normal equations.

    Rows of phasors ``exp(i w t)`` are built by repeated rotation from an
    exact anchor at the start of every chunk, which avoids evaluating the
    trigonometric functions on the whole grid.
    """
    vv = float(v @ v)
    out = np.empty(count)
    rot = np.exp(1j * step * t)
    for s in range(0, count, chunk):
        rows = min(chunk, count - s)
        Z = np.empty((rows, t.size), dtype=complex)
        Z[0] = np.exp(1j * step * (s + 1) * t)
        Z[1:] = rot
        np.cumprod(Z, axis=0, out=Z)
        C, S = Z.real, Z.imag
        cc, ss, cs = np.einsum("ij,ij->i", C, C), np.einsum("ij,ij->i", S, S), np.einsum("ij,ij->i", C, S)
        cv, sv = C @ v, S @ v
        det = cc * ss - cs * cs
        explained = (ss * cv * cv - 2 * cs * cv * sv + cc * sv * sv) / det
        out[s:s + rows] = np.maximum(vv - explained, 0.0)
    return out


def _fit_frequency(t, v, length, bin_width, scale):
    vv = float(v @ v)
    if scale == 0 or np.std(v) < 1e-9 * scale:
        return LocalFrequency(0.0, bin_width, False)

    def rss(w):
        M = np.stack([np.cos(w * t), np.sin(w * t)], axis=1)
        coef, *_ = np.linalg.lstsq(M, v, rcond=None)
        r = v - M @ coef
        return float(r @ r)

    # 32 grid points per bin up to half the mean sampling rate
    step = bin_width / 32
    w_max = 0.5 * np.pi * t.size / length
    grid = step * np.arange(1, int(w_max / step) + 2)
    vals = _grid_rss(t, v, step, grid.size)
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = optimize.minimize_scalar(rss, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    w, best = (float(res.x), res.fun) if res.fun <= vals[k] else (float(grid[k]), vals[k])
    return LocalFrequency(w, bin_width, bool(best < 0.5 * vv))


def symmetrized_grid_gram(density, spec, n_grid):
    """Matrix of the symmetrized kernel ``sqrt(p) k sqrt(p)`` on a uniform
    grid, scaled so that its eigenvalues estimate operator eigenvalues."""
    theta = -np.pi + 2 * np.pi * (np.arange(n_grid) + 0.5) / n_grid
    x = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    sp = np.sqrt(density.pdf(theta))
    H = assemble_gram(x, spec)
    return (sp[:, None] * H * sp[None, :]) * (2 * np.pi / n_grid)
