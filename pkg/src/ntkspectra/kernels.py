"""Closed-form neural tangent kernels as functions of rho = x_i . x_j.

Three kernels are provided:

``two_layer``
    ``k(rho) = (rho + 1) (pi - arccos rho) / (4 pi)``, the kernel of a
    two-layer ReLU network with bias in which only the first layer is
    trained.
``deep``
    The depth-``L`` fully connected ReLU kernel with ``c_sigma = 2``,
    computed by the arc-cosine recursion.
``two_layer_net``
    The infinite-width tangent kernel of :class:`ntkspectra.nets.TwoLayerNet`
    when weights *and* biases start from ``N(0, tau^2)``.  The bias then
    enters the activation pattern, which changes the angle in the arc-cosine
    term: ``(rho + 1) (pi - arccos((rho + 1) / 2)) / (2 pi)``.  With zero bias
    initialization the network kernel is exactly ``2 k(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalFault

KINDS = ("two_layer", "deep", "two_layer_net")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel selector.

    Parameters
    ----------
    kind : {"two_layer", "deep", "two_layer_net"}
    depth : int
        Number of hidden layers ``L`` for the deep kernel (ignored
        otherwise), ``1 <= L <= 64``.
    """

    kind: str = "two_layer"
    depth: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError("unknown kernel kind %r" % (self.kind,))
        if not 1 <= int(self.depth) <= 64:
            raise ConfigError("depth must satisfy 1 <= L <= 64")

    def __call__(self, rho):
        return kernel_eval(self, rho)

    @property
    def diagonal(self):
        return float(kernel_eval(self, 1.0))

    def to_config(self):
        return {"kind": self.kind, "depth": int(self.depth)}


def _clamp(rho, slack=1e-12):
    rho = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho) > 1.0 + slack) or np.any(~np.isfinite(rho)):
        raise ValueError("inner product outside [-1, 1]; inputs must be unit norm")
    return np.clip(rho, -1.0, 1.0)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def ntk2_eval(rho):
    """Two-layer kernel ``(rho + 1)(pi - arccos rho) / (4 pi)``.

    >>> ntk2_eval(1.0), ntk2_eval(0.0)
    (0.5, 0.125)
    """
    rho = _clamp(rho)
    return _scalar((rho + 1.0) * (np.pi - np.arccos(rho)) / (4.0 * np.pi))


def ntk2_angle(delta):
    """The same kernel written in the angle ``delta`` between inputs."""
    delta = np.abs(np.asarray(delta, dtype=float))
    delta = np.where(delta > np.pi, 2 * np.pi - delta, delta)
    return _scalar((np.cos(delta) + 1.0) * (np.pi - delta) / (4.0 * np.pi))


def ntk2_net_eval(rho):
    """Tangent kernel of the two-layer net with ``N(0, tau^2)`` biases."""
    rho = _clamp(rho)
    c = np.clip(0.5 * (rho + 1.0), -1.0, 1.0)
    return _scalar((rho + 1.0) * (np.pi - np.arccos(c)) / (2.0 * np.pi))


def arccos_pair(rho):
    """Normalized arc-cosine maps used by the deep recursion.

    Returns ``(sigma, sigma_dot)`` with ``c_sigma = 2`` folded in:
    ``sigma = (rho (pi - arccos rho) + sqrt(1 - rho^2)) / pi`` and
    ``sigma_dot = (pi - arccos rho) / pi``.
    """
    rho = np.clip(rho, -1.0, 1.0)
    acos = np.arccos(rho)
    sig = (rho * (np.pi - acos) + np.sqrt(np.maximum(1.0 - rho * rho, 0.0))) / np.pi
    dsig = (np.pi - acos) / np.pi
    return sig, dsig


def ntk_deep_eval(rho, depth):
    """Depth-``L`` ReLU NTK by the recursion
    ``Theta_h = Theta_{h-1} * sigma_dot(Sigma_{h-1}) + Sigma_h``.

    Seeded with ``Theta_0 = Sigma_0 = rho``.  ``Theta_L(1) = L + 1``.
    """
    depth = int(depth)
    if not 1 <= depth <= 64:
        raise ConfigError("depth must satisfy 1 <= L <= 64")
    sigma = _clamp(rho).copy()
    theta = sigma.copy()
    for h in range(depth):
        if np.any(np.abs(sigma) > 1.0 + 1e-10):
            raise NumericalFault("correlation left [-1, 1] at layer %d" % h)
        new_sigma, dsig = arccos_pair(sigma)
        theta = theta * dsig + new_sigma
        sigma = new_sigma
    return _scalar(theta)


def kernel_eval(spec, rho):
    if spec.kind == "two_layer":
        return ntk2_eval(rho)
    if spec.kind == "two_layer_net":
        return ntk2_net_eval(rho)
    return ntk_deep_eval(rho, spec.depth)


def kernel_profile(spec, grid_size):
    """Kernel sampled on ``theta_j = 2 pi j / N - pi``, ``j = 0..N-1``.

    Returns ``(theta, values)``.
    """
    n = int(grid_size)
    if n < 256 or n & (n - 1):
        raise ConfigError("grid_size must be a power of two >= 256")
    theta = 2.0 * np.pi * np.arange(n) / n - np.pi
    return theta, np.asarray(kernel_eval(spec, np.cos(theta)), dtype=float)


def write_profile_csv(path, theta, values):
    np.savetxt(path, np.column_stack([theta, values]), delimiter=",",
               header="theta,value", comments="", fmt="%.17g")
