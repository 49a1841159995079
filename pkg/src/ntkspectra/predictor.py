"""Residual dynamics of gradient descent predicted from a Gram spectrum.

In the linearized (kernel) regime, full-batch gradient descent on the sum
loss with step ``eta`` moves the training outputs as
``u(t + 1) = u(t) + eta H (y - u(t))``, so that from ``u(0) = 0``

    ||y - u(t)||^2 = sum_i (1 - eta lambda_i)^(2 t) (v_i . y)^2 .

This module evaluates that formula, inverts it for the iteration count that
reaches a residual threshold, and compares it with a measured trace.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

UNREACHABLE = -1


class StepSizeWarning(UserWarning):
    """``eta * lambda_max > 1``: some residual components oscillate."""


def _projections(spectrum, y):
    y = np.asarray(y, dtype=float).ravel()
    if y.size != spectrum.eigenvectors.shape[0]:
        raise ConfigError("target length does not match the spectrum")
    return spectrum.eigenvectors.T @ y


def _factors(spectrum, eta):
    lam = np.asarray(spectrum.eigenvalues, dtype=float)
    if eta <= 0:
        raise ConfigError("eta must be positive")
    if lam.size and eta * lam.max() > 1.0:
        warnings.warn("eta * lambda_max = %.3g > 1" % (eta * lam.max()), StepSizeWarning)
    return 1.0 - eta * lam


def predict_residual(spectrum, y, eta, t):
    """Predicted ``||y - u(t)||`` for one ``t`` or an array of ``t``.

    Parameters
    ----------
    spectrum : GramSpectrum
        Full eigen-system of the Gram matrix ``H`` on the training set.
    y : ndarray, shape (n,)
    eta : float
    t : int or array of int

    Returns
    -------
    float or ndarray
    """
    c = _projections(spectrum, y) ** 2
    f = _factors(spectrum, eta) ** 2
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ConfigError("t must be non-negative")
    with np.errstate(over="ignore", under="ignore"):
        out = np.sqrt(np.array([np.sum(c * f ** tt) for tt in t_arr]))
    return float(out[0]) if np.ndim(t) == 0 else out


def predicted_time(spectrum, y, eta, delta, t_max=10 ** 9):
    """Smallest ``t`` with predicted residual ``<= delta``.

    Found by doubling then bisection, which is exact because the residual is
    non-increasing in ``t`` when ``eta lambda_max <= 1``.  Returns
    :data:`UNREACHABLE` if the threshold is not met by ``t_max``.
    """
    if predict_residual(spectrum, y, eta, 0) <= delta:
        return 0
    hi = 1
    while predict_residual(spectrum, y, eta, hi) > delta:
        hi *= 2
        if hi > t_max:
            return UNREACHABLE
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if predict_residual(spectrum, y, eta, mid) <= delta:
            hi = mid
        else:
            lo = mid
    return int(hi)


def single_mode_time(lam, eta, norm_y, delta):
    """Closed form ``ceil(log(delta / ||y||) / log(1 - eta lambda))`` for a
    target lying in one eigen-direction."""
    if not 0 < eta * lam < 1:
        raise ConfigError("need 0 < eta * lambda < 1")
    if norm_y <= delta:
        return 0
    return int(math.ceil(math.log(delta / norm_y) / math.log(1.0 - eta * lam)))


def linear_dynamics(H, y, eta, steps, u0=None):
    """Iterate ``u <- u + eta H (y - u)`` and return residual norms for
    ``t = 0 .. steps``."""
    y = np.asarray(y, dtype=float)
    u = np.zeros_like(y) if u0 is None else np.array(u0, dtype=float)
    out = np.empty(steps + 1)
    for t in range(steps + 1):
        out[t] = np.linalg.norm(y - u)
        if t < steps:
            u = u + eta * (H @ (y - u))
    return out


@dataclass
class Comparison:
    """Measured against predicted residual norms on shared iterations."""

    iterations: np.ndarray
    measured: np.ndarray
    predicted: np.ndarray

    @property
    def rel_dev(self):
        return np.abs(self.measured - self.predicted) / np.maximum(self.predicted, 1e-300)

    @property
    def max_rel_dev(self):
        return float(self.rel_dev.max())

    def iteration_ratio(self, threshold):
        """Ratio of measured to predicted iteration counts to reach
        ``threshold``; ``nan`` if either never gets there."""
        m = np.flatnonzero(self.measured <= threshold)
        p = np.flatnonzero(self.predicted <= threshold)
        if not m.size or not p.size or self.iterations[p[0]] == 0:
            return float("nan")
        return float(self.iterations[m[0]] / self.iterations[p[0]])

    def to_csv(self, path):
        data = np.column_stack([self.iterations, self.measured, self.predicted, self.rel_dev])
        np.savetxt(path, data, delimiter=",", header="t,measured_residual,predicted_residual,rel_dev",
                   comments="", fmt=["%d", "%.17g", "%.17g", "%.17g"])


def compare(trace, spectrum, y, eta):
    """Compare a :class:`~ntkspectra.nets.TrainingTrace` with the kernel
    prediction at the trace's recorded iterations."""
    pred = predict_residual(spectrum, y, eta, trace.iterations)
    return Comparison(np.asarray(trace.iterations), np.asarray(trace.residual_norm), np.asarray(pred))
