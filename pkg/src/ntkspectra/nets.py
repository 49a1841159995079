"""Finite-width ReLU networks and gradient-descent training.

Two architectures are provided.

:class:`TwoLayerNet`
    ``f(x) = (1/sqrt(m)) sum_r a_r relu(w_r . x + b_r)`` with fixed signs
    ``a_r``; only ``W`` and ``b`` are trained.
:class:`DeepNet`
    ``f(x) = v . sqrt(c/d_L) relu(W_L sqrt(c/d_{L-1}) relu(... sqrt(c/d_1)
    relu(W_1 x)))`` with ``c = 2`` and no biases.

The loss is ``Phi = 1/2 sum_i (y_i - f(x_i))^2`` (``loss="sum"``) or the
same divided by ``n`` (``loss="mean"``).

Full-batch training of the two-layer net has two compiled paths.  On the
circle every unit is active on one contiguous arc of the angle-sorted
training points, so the forward pass is a difference array over arc
endpoints and every gradient is a difference of prefix sums: ``O(n + m)``
work per step after the arcs are tracked.  In higher dimension a fused
loop over points and units is used.  Both agree with the plain numpy
reference :func:`two_layer_grad` to rounding.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigError, NumericalFault
from .geometry import make_rng, points_to_angles

C_SIGMA = 2.0


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------

@dataclass
class TwoLayerNet:
    """Two-layer ReLU network with bias; the output layer stays fixed.

    Attributes
    ----------
    W : ndarray, shape (m, d)
    b : ndarray, shape (m,)
    a : ndarray, shape (m,)
        Signs in ``{-1, +1}``, never modified by training.
    tau : float
        Initialization scale.
    seed : int
    """

    W: np.ndarray
    b: np.ndarray
    a: np.ndarray
    tau: float = 1.0
    seed: int = 0

    @property
    def m(self):
        return self.W.shape[0]

    @property
    def d(self):
        return self.W.shape[1]

    @classmethod
    def init(cls, d, m, tau, seed, bias_init="normal", paired=False):
        """Random initialization.

        Parameters
        ----------
        d, m : int
            Input dimension and width.
        tau : float
            Standard deviation of ``W`` (and of ``b`` with
            ``bias_init="normal"``).
        seed : int
        bias_init : {"normal", "zero"}
        paired : bool
            Duplicate every unit with the opposite output sign so that the
            initial function is exactly zero.  ``m`` must be even.
        """
        if d < 1 or m < 1:
            raise ConfigError("widths must be >= 1")
        if bias_init not in ("normal", "zero"):
            raise ConfigError("bias_init must be 'normal' or 'zero'")
        rng = make_rng(seed)
        if paired:
            if m % 2:
                raise ConfigError("paired initialization needs an even width")
            half = m // 2
            W = rng.standard_normal((half, d)) * tau
            b = rng.standard_normal(half) * tau if bias_init == "normal" else np.zeros(half)
            a = rng.choice(np.array([-1.0, 1.0]), size=half)
            return cls(np.vstack([W, W]), np.concatenate([b, b]), np.concatenate([a, -a]), float(tau), int(seed))
        W = rng.standard_normal((m, d)) * tau
        b = rng.standard_normal(m) * tau if bias_init == "normal" else np.zeros(m)
        a = rng.choice(np.array([-1.0, 1.0]), size=m)
        return cls(W, b, a, float(tau), int(seed))

    def copy(self):
        return TwoLayerNet(self.W.copy(), self.b.copy(), self.a.copy(), self.tau, self.seed)

    def forward(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        z = X @ self.W.T + self.b
        if not np.all(np.isfinite(z)):
            raise NumericalFault("non-finite activation in layer 1")
        return np.maximum(z, 0.0) @ self.a / math.sqrt(self.m)

    __call__ = forward

    def params(self):
        return np.concatenate([self.W.ravel(), self.b])

    def set_params(self, theta):
        m, d = self.W.shape
        self.W = theta[:m * d].reshape(m, d).copy()
        self.b = theta[m * d:].copy()

    def ntk(self, X):
        """Empirical tangent kernel ``J J^T`` at the current weights."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        act = (X @ self.W.T + self.b > 0).astype(float)
        G = (act * self.a) @ (act * self.a).T / self.m
        return G * (X @ X.T + 1.0)


def two_layer_grad(net: TwoLayerNet, X, y, loss="sum"):
    """Exact gradient of the loss with respect to ``(W, b)``.

    Plain numpy reference implementation.  The ReLU derivative at zero is
    taken as 0.

    Returns
    -------
    gW, gb, value
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = X @ net.W.T + net.b
    if not np.all(np.isfinite(z)):
        raise NumericalFault("non-finite activation in layer 1")
    scale = 1.0 / math.sqrt(net.m)
    res = np.maximum(z, 0.0) @ net.a * scale - y
    c = 1.0 if loss == "sum" else 1.0 / X.shape[0]
    g = (res[:, None] * (z > 0)) * (net.a * scale) * c
    return g.T @ X, g.sum(axis=0), 0.5 * c * float(res @ res)


@dataclass
class DeepNet:
    """Fully connected ReLU network without biases (NTK parameterization).

    ``weights[l]`` has shape ``(d_{l+1}, d_l)`` for the hidden layers and
    the last entry is the output row of shape ``(1, d_L)``.
    """

    weights: list
    tau: float = 1.0
    seed: int = 0

    @property
    def depth(self):
        return len(self.weights) - 1

    @property
    def widths(self):
        return [w.shape[0] for w in self.weights[:-1]]

    @classmethod
    def init(cls, d, widths, tau=1.0, seed=0, dtype=np.float64):
        """All weights ``N(0, tau^2)``; ``widths`` lists ``d_1 .. d_L``.

        ``dtype=np.float32`` halves the cost of training; the weights are
        drawn in float64 first so both precisions start from the same net.
        """
        widths = [int(w) for w in widths]
        if d < 1 or not widths or min(widths) < 1:
            raise ConfigError("widths must be >= 1")
        rng = make_rng(seed)
        dims = [int(d)] + widths
        weights = [rng.standard_normal((dims[i + 1], dims[i])) * tau for i in range(len(widths))]
        weights.append(rng.standard_normal((1, dims[-1])) * tau)
        return cls([w.astype(dtype) for w in weights], float(tau), int(seed))

    def copy(self):
        return DeepNet([w.copy() for w in self.weights], self.tau, self.seed)

    def _forward(self, X):
        h = np.atleast_2d(np.asarray(X, dtype=self.weights[0].dtype)).T  # (d, n)
        hs, zs = [h], []
        for l, W in enumerate(self.weights[:-1]):
            z = W @ h
            if not np.all(np.isfinite(z)):
                raise NumericalFault("non-finite activation in layer %d" % (l + 1))
            zs.append(z)
            h = math.sqrt(C_SIGMA / W.shape[0]) * np.maximum(z, 0.0)
            hs.append(h)
        out = (self.weights[-1] @ h).ravel()
        return out, hs, zs

    def forward(self, X):
        return self._forward(X)[0]

    __call__ = forward

    def grad(self, X, y, loss="sum", trainable=None):
        """Gradients of the loss for every weight matrix.

        ``trainable`` is a boolean per matrix; frozen matrices get ``None``.
        """
        grads, value, _ = self._grad_out(X, y, loss, trainable)
        return grads, value

    def _grad_out(self, X, y, loss="sum", trainable=None):
        out, hs, zs = self._forward(X)
        res = out - np.asarray(y, dtype=out.dtype)
        c = 1.0 if loss == "sum" else 1.0 / res.size
        trainable = [True] * len(self.weights) if trainable is None else trainable
        grads = [None] * len(self.weights)
        delta = (res * c)[None, :]  # d loss / d output, (1, n)
        if trainable[-1]:
            grads[-1] = delta @ hs[-1].T
        back = self.weights[-1].T @ delta  # d loss / d h_L, (d_L, n)
        for l in range(len(self.weights) - 2, -1, -1):
            W = self.weights[l]
            dz = back * math.sqrt(C_SIGMA / W.shape[0]) * (zs[l] > 0)
            if trainable[l]:
                grads[l] = dz @ hs[l].T
            if l > 0:
                back = W.T @ dz
        return grads, 0.5 * c * float(res @ res), out

    def params(self):
        return np.concatenate([w.ravel() for w in self.weights])

    def set_params(self, theta):
        k = 0
        for i, w in enumerate(self.weights):
            self.weights[i] = theta[k:k + w.size].reshape(w.shape).copy()
            k += w.size


# ---------------------------------------------------------------------------
# Compiled two-layer steps
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _full_arc(A, B, bias, Cx, Sx, theta):
    """Sorted-index arc ``[s, e)`` (``e`` may exceed ``n``) of the points
    with ``A cos + B sin + bias > 0``."""
    n = theta.shape[0]
    R = math.sqrt(A * A + B * B)
    if bias - R > 0.0:
        return 0, n
    if bias + R <= 0.0:
        return 0, 0
    phi = math.atan2(B, A)
    half = math.acos(min(1.0, max(-1.0, -bias / R)))
    lo = phi - half
    lo = (lo + math.pi) % (2.0 * math.pi) - math.pi
    s = np.searchsorted(theta, lo)
    hi = lo + 2.0 * half
    if hi < math.pi:
        e = np.searchsorted(theta, hi)
    else:
        e = n + np.searchsorted(theta, hi - 2.0 * math.pi)
    if s >= n:
        s -= n
        e -= n
    return _polish_arc(A, B, bias, Cx, Sx, s, e, n, 8)[:2]


@numba.njit(cache=True, inline="always")
def _active(A, B, bias, Cx, Sx, i):
    # Cx, Sx hold the sorted coordinates five times over so that any index
    # i in [-2n, 3n) reads point i mod n at position i + 2n, no modulo needed
    o = Cx.shape[0] // 5 * 2
    return A * Cx[i + o] + B * Sx[i + o] + bias > 0.0


def extend_coords(C, S):
    """Padded copies of the sorted coordinates used by the arc kernels."""
    n = C.size
    idx = np.arange(5 * n) % n
    return np.ascontiguousarray(C[idx]), np.ascontiguousarray(S[idx])


@numba.njit(cache=True)
def _polish_arc(A, B, bias, Cx, Sx, s, e, n, limit):
    """Move arc endpoints to the exact active set, at most ``limit`` steps
    per direction.  Returns ``(s, e, ok)``."""
    steps = 0
    while e > s and not _active(A, B, bias, Cx, Sx, s):
        s += 1
        steps += 1
        if steps > limit:
            return s, e, False
    steps = 0
    while e - s < n and _active(A, B, bias, Cx, Sx, s - 1):
        s -= 1
        steps += 1
        if steps > limit:
            return s, e, False
    steps = 0
    while e > s and not _active(A, B, bias, Cx, Sx, e - 1):
        e -= 1
        steps += 1
        if steps > limit:
            return s, e, False
    steps = 0
    while e - s < n and _active(A, B, bias, Cx, Sx, e):
        e += 1
        steps += 1
        if steps > limit:
            return s, e, False
    if s < 0:
        s += n
        e += n
    elif s >= n:
        s -= n
        e -= n
    return s, e, True


@numba.njit(cache=True)
def _update_arcs(Wt, b, Cx, Sx, theta, starts, ends, fresh, limit=16):
    """Track every unit's active arc.

    A partial arc is updated by walking its endpoints from their previous
    positions (the weights move little per step); empty, full or
    fast-moving arcs are recomputed from the trigonometric solution.
    """
    n = theta.shape[0]
    m = b.shape[0]
    o = 2 * n
    for r in range(m):
        A = Wt[0, r]
        B = Wt[1, r]
        c = b[r]
        s = starts[r]
        e = ends[r]
        ok = not fresh and s < e and e - s < n
        if ok:
            k = 0
            while k <= limit and A * Cx[s + o] + B * Sx[s + o] + c <= 0.0:
                s += 1
                k += 1
            while k <= limit and A * Cx[s - 1 + o] + B * Sx[s - 1 + o] + c > 0.0:
                s -= 1
                k += 1
            while k <= limit and A * Cx[e - 1 + o] + B * Sx[e - 1 + o] + c <= 0.0:
                e -= 1
                k += 1
            while k <= limit and A * Cx[e + o] + B * Sx[e + o] + c > 0.0:
                e += 1
                k += 1
            ok = k <= limit and s < e and e - s < n
        if ok:
            if s < 0:
                s += n
                e += n
            elif s >= n:
                s -= n
                e -= n
        else:
            s, e = _full_arc(A, B, c, Cx, Sx, theta)
        starts[r] = s
        ends[r] = e


@numba.njit(cache=True)
def _arc_forward(Wt, b, a, scale, C, S, starts, ends, out):
    n = C.shape[0]
    m = b.shape[0]
    dA = np.zeros(n + 1)
    dB = np.zeros(n + 1)
    db = np.zeros(n + 1)
    for r in range(m):
        s = starts[r]
        e = ends[r]
        if e <= s:
            continue
        vA = a[r] * Wt[0, r]
        vB = a[r] * Wt[1, r]
        vb = a[r] * b[r]
        if e <= n:
            dA[s] += vA
            dA[e] -= vA
            dB[s] += vB
            dB[e] -= vB
            db[s] += vb
            db[e] -= vb
        else:
            dA[s] += vA
            dA[n] -= vA
            dB[s] += vB
            dB[n] -= vB
            db[s] += vb
            db[n] -= vb
            e2 = e - n
            dA[0] += vA
            dA[e2] -= vA
            dB[0] += vB
            dB[e2] -= vB
            db[0] += vb
            db[e2] -= vb
    sA = 0.0
    sB = 0.0
    sb = 0.0
    for i in range(n):
        sA += dA[i]
        sB += dB[i]
        sb += db[i]
        out[i] = (sA * C[i] + sB * S[i] + sb) * scale


@numba.njit(cache=True)
def _arc_update(Wt, b, a, step, C, S, res, starts, ends):
    """``W -= step * a_r * sum_{i in arc} res_i x_i`` via prefix sums."""
    n = C.shape[0]
    m = b.shape[0]
    P0 = np.zeros(n + 1)
    P1 = np.zeros(n + 1)
    P2 = np.zeros(n + 1)
    for i in range(n):
        P0[i + 1] = P0[i] + res[i] * C[i]
        P1[i + 1] = P1[i] + res[i] * S[i]
        P2[i + 1] = P2[i] + res[i]
    for r in range(m):
        s = starts[r]
        e = ends[r]
        if e <= s:
            continue
        if e <= n:
            g0 = P0[e] - P0[s]
            g1 = P1[e] - P1[s]
            g2 = P2[e] - P2[s]
        else:
            e2 = e - n
            g0 = P0[n] - P0[s] + P0[e2]
            g1 = P1[n] - P1[s] + P1[e2]
            g2 = P2[n] - P2[s] + P2[e2]
        c = step * a[r]
        Wt[0, r] -= c * g0
        Wt[1, r] -= c * g1
        b[r] -= c * g2


@numba.njit(cache=True)
def _arc_train(Wt, b, a, scale, step, C, S, Cx, Sx, theta, ys, regions, counts, starts, ends,
               max_iters, record_every, loss_c, threshold, stop, rec_iter, rec_loss, rec_mse, rec_rn):
    """Whole full-batch training loop on the circle.

    Returns ``(records, status)`` with status 0 = ran to ``max_iters``,
    1 = diverged, 2 = every region converged.
    """
    n = theta.shape[0]
    k = counts.shape[0]
    out = np.empty(n)
    res = np.empty(n)
    sq = np.zeros(k)
    first = -1.0
    nrec = 0
    for t in range(max_iters + 1):
        _update_arcs(Wt, b, Cx, Sx, theta, starts, ends, t == 0)
        _arc_forward(Wt, b, a, scale, C, S, starts, ends, out)
        for i in range(n):
            res[i] = out[i] - ys[i]
        if t % record_every == 0 or t == max_iters:
            for j in range(k):
                sq[j] = 0.0
            total = 0.0
            for i in range(n):
                r2 = res[i] * res[i]
                sq[regions[i]] += r2
                total += r2
            done = True
            for j in range(k):
                mse = sq[j] / max(counts[j], 1.0)
                rec_mse[nrec, j] = mse
                if counts[j] > 0 and not mse < threshold:
                    done = False
            rec_iter[nrec] = t
            rec_loss[nrec] = 0.5 * loss_c * total
            rec_rn[nrec] = math.sqrt(total)
            nrec += 1
            if first < 0.0:
                first = 0.5 * loss_c * total
            if not math.isfinite(total) or (first > 0.0 and 0.5 * loss_c * total > 1e6 * first):
                return nrec, 1
            if stop and done:
                return nrec, 2
            if t == max_iters:
                break
        _arc_update(Wt, b, a, step, C, S, res, starts, ends)
    return nrec, 0


@numba.njit(cache=True)
def _dense_pass(X, y, Wt, b, a, scale, out, g):
    """Outputs at the current weights and, in the same sweep, the gradient
    sums ``g[k, r] = sum_i res_i 1[z_ir > 0] x_ik`` (row ``d`` for the bias)."""
    n, d = X.shape
    m = b.shape[0]
    z = np.empty(m)
    g[:] = 0.0
    for i in range(n):
        z[:] = b
        for k in range(d):
            xk = X[i, k]
            for r in range(m):
                z[r] += Wt[k, r] * xk
        acc = 0.0
        for r in range(m):
            if z[r] > 0.0:
                acc += a[r] * z[r]
        out[i] = acc * scale
        c = out[i] - y[i]
        for r in range(m):
            z[r] = c if z[r] > 0.0 else 0.0
        for k in range(d):
            xk = X[i, k]
            for r in range(m):
                g[k, r] += z[r] * xk
        for r in range(m):
            g[d, r] += z[r]


@numba.njit(cache=True)
def _dense_pass3(X, y, W0, W1, W2, b, a, scale, out, g0, g1, g2, gb):
    """:func:`_dense_pass` unrolled for inputs on the 2-sphere; contiguous
    weight rows let the compiler vectorize the unit loop."""
    n = X.shape[0]
    m = b.shape[0]
    z = np.empty(m)
    g0[:] = 0.0
    g1[:] = 0.0
    g2[:] = 0.0
    gb[:] = 0.0
    for i in range(n):
        x0 = X[i, 0]
        x1 = X[i, 1]
        x2 = X[i, 2]
        acc = 0.0
        for r in range(m):
            v = b[r] + W0[r] * x0 + W1[r] * x1 + W2[r] * x2
            z[r] = v
            acc += a[r] * max(v, 0.0)
        o = acc * scale
        out[i] = o
        c = o - y[i]
        for r in range(m):
            u = c if z[r] > 0.0 else 0.0
            g0[r] += u * x0
            g1[r] += u * x1
            g2[r] += u * x2
            gb[r] += u


@numba.njit(cache=True)
def _dense_apply(Wt, b, a, step, g):
    d = Wt.shape[0]
    for r in range(b.shape[0]):
        c = step * a[r]
        b[r] -= c * g[d, r]
        for k in range(d):
            Wt[k, r] -= c * g[k, r]


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    """Gradient-descent settings.

    Attributes
    ----------
    eta : float
        Learning rate.
    batch : int or None
        Minibatch size; ``None`` for full-batch GD.
    max_iters : int
    seed : int
        Seed of the minibatch shuffle.
    delta : float
        Convergence threshold ``delta`` of the per-region criterion.
    record_every : int
    loss : {"sum", "mean"}
    stop_when_converged : bool
        Stop once every region has met the criterion.
    train_first_last : bool
        For :class:`DeepNet`: when False the first and last weight matrices
        are frozen (the model of the finite-width convergence theorem).
    """

    eta: float
    batch: int | None = None
    max_iters: int = 1000
    seed: int = 0
    delta: float = 0.05
    record_every: int = 1
    loss: str = "sum"
    stop_when_converged: bool = False
    train_first_last: bool = True

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.loss not in ("sum", "mean"):
            raise ConfigError("loss must be 'sum' or 'mean'")
        if self.record_every < 1 or self.max_iters < 0:
            raise ConfigError("record_every must be >= 1 and max_iters >= 0")
        if self.batch is not None and self.batch < 1:
            raise ConfigError("batch must be positive")


@dataclass
class TrainingTrace:
    """Recorded training history.

    ``region_mse[k, j]`` is the mean squared error over region ``j`` at
    ``iterations[k]``; ``residual_norm[k] = ||y - u(t)||`` on the full
    training set.  An iteration index ``t`` refers to the network after
    ``t`` updates.
    """

    iterations: np.ndarray
    loss: np.ndarray
    region_mse: np.ndarray
    residual_norm: np.ndarray
    region_counts: np.ndarray
    n: int
    diverged: bool = False
    stopped_early: bool = False
    extras: dict = field(default_factory=dict)

    def to_csv(self, path):
        k = self.region_mse.shape[1]
        header = "iter,loss," + ",".join("region_%d_mse" % j for j in range(k)) + ",residual_norm"
        data = np.column_stack([self.iterations, self.loss, self.region_mse, self.residual_norm])
        fmt = ["%d"] + ["%.17g"] * (data.shape[1] - 1)
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=fmt)


NOT_CONVERGED = -1


def region_convergence_time(trace: TrainingTrace, delta, n=None):
    """First recorded iteration where ``mse_j / 2 < delta / n`` per region.

    ``mse_j / 2`` equals ``(1 / (2 |R_j|)) sum_{i in R_j} (f(x_i) - y_i)^2``.
    Regions that never meet the criterion get :data:`NOT_CONVERGED`.
    """
    n = trace.n if n is None else int(n)
    ok = 0.5 * trace.region_mse < delta / n
    out = np.full(ok.shape[1], NOT_CONVERGED, dtype=np.int64)
    for j in range(ok.shape[1]):
        hit = np.flatnonzero(ok[:, j])
        if hit.size:
            out[j] = int(trace.iterations[hit[0]])
    return out


class _Recorder:
    def __init__(self, y, regions, cfg, n_regions):
        self.y = y
        self.cfg = cfg
        self.regions = np.zeros(y.size, dtype=np.int64) if regions is None else np.asarray(regions, dtype=np.int64)
        self.k = max(int(n_regions if n_regions is not None else self.regions.max() + 1), 1)
        self.counts = np.bincount(self.regions, minlength=self.k).astype(float)
        self.iters, self.loss, self.mse, self.rn = [], [], [], []
        self.c = 1.0 if cfg.loss == "sum" else 1.0 / y.size
        self.first = None
        self.done = np.zeros(self.k, dtype=bool)
        self.threshold = 2.0 * cfg.delta / y.size

    def record(self, t, out):
        res = out - self.y
        sq = res * res
        total = float(sq.sum())
        mse = np.bincount(self.regions, weights=sq, minlength=self.k) / np.maximum(self.counts, 1.0)
        self.iters.append(t)
        self.loss.append(0.5 * self.c * total)
        self.mse.append(mse)
        self.rn.append(math.sqrt(total))
        self.done |= (mse < self.threshold) | (self.counts == 0)
        if self.first is None:
            self.first = 0.5 * self.c * total
        if not np.isfinite(total):
            return "diverged"
        if self.first > 0 and 0.5 * self.c * total > 1e6 * self.first:
            return "diverged"
        if self.cfg.stop_when_converged and self.done.all():
            return "converged"
        return None

    def extend(self, iters, loss, mse, rn):
        self.iters.extend(int(t) for t in iters)
        self.loss.extend(loss)
        self.mse.extend(mse)
        self.rn.extend(rn)

    def trace(self, n, status):
        return TrainingTrace(np.asarray(self.iters, dtype=np.int64), np.asarray(self.loss),
                             np.asarray(self.mse).reshape(-1, self.k), np.asarray(self.rn),
                             self.counts.astype(np.int64), n,
                             diverged=status == "diverged", stopped_early=status == "converged")


def train(net, X, y, cfg: TrainConfig, regions=None, n_regions=None, backend="auto", callback=None):
    """Train ``net`` in place and return its :class:`TrainingTrace`.

    Parameters
    ----------
    net : TwoLayerNet or DeepNet
    X : ndarray, shape (n, d)
        Unit-norm training inputs.
    y : ndarray, shape (n,)
    cfg : TrainConfig
    regions : ndarray of int, optional
        Region label per point for per-region errors.
    backend : {"auto", "arc", "dense", "numpy"}
        Two-layer full-batch kernel; ``"auto"`` picks ``"arc"`` on the
        circle and ``"dense"`` otherwise.
    callback : callable, optional
        Called as ``callback(t, outputs)`` at every recorded iteration.

    Notes
    -----
    Training stops early (flagged ``diverged``) when the loss exceeds
    ``1e6`` times its initial value.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] == 0 or X.shape[0] != y.size:
        raise ConfigError("dataset must be non-empty with one target per point")
    if not np.all(np.isfinite(y)):
        raise ConfigError("targets must be finite")
    rec = _Recorder(y, regions, cfg, n_regions)
    if isinstance(net, TwoLayerNet):
        if cfg.batch is None and backend != "numpy":
            if backend == "arc" or (backend == "auto" and X.shape[1] == 2):
                status = _train_two_layer_arc(net, X, y, cfg, rec, callback)
            else:
                status = _train_two_layer_dense(net, X, y, cfg, rec, callback)
        else:
            status = _train_generic(net, X, y, cfg, rec, callback)
    elif isinstance(net, DeepNet):
        status = _train_generic(net, X, y, cfg, rec, callback)
    else:
        raise ConfigError("unsupported network type %s" % type(net).__name__)
    return rec.trace(y.size, status)


def _loop(cfg, rec, callback, forward, update):
    status = None
    out = forward()
    for t in range(cfg.max_iters + 1):
        if t % cfg.record_every == 0 or t == cfg.max_iters:
            status = rec.record(t, out)
            if callback is not None:
                callback(t, out)
            if status is not None or t == cfg.max_iters:
                break
        update(out)
        out = forward()
    return status


def _train_two_layer_arc(net, X, y, cfg, rec, callback):
    if X.shape[1] != 2:
        raise ConfigError("the arc kernel needs inputs on the circle")
    theta = points_to_angles(X)
    order = np.argsort(theta, kind="stable")
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    theta_s = np.ascontiguousarray(theta[order])
    C = np.ascontiguousarray(X[order, 0])
    S = np.ascontiguousarray(X[order, 1])
    ys = y[order]
    Wt = np.ascontiguousarray(net.W.T)
    b = net.b.copy()
    a = net.a
    m = net.m
    scale = 1.0 / math.sqrt(m)
    step = cfg.eta * scale * (1.0 if cfg.loss == "sum" else 1.0 / y.size)
    starts = np.zeros(m, dtype=np.int64)
    ends = np.zeros(m, dtype=np.int64)
    out_s = np.empty(y.size)
    Cx, Sx = extend_coords(C, S)
    _update_arcs(Wt, b, Cx, Sx, theta_s, starts, ends, True)
    if callback is None:
        nrec_max = cfg.max_iters // cfg.record_every + 2
        it = np.empty(nrec_max, dtype=np.int64)
        lo = np.empty(nrec_max)
        ms = np.empty((nrec_max, rec.k))
        rn = np.empty(nrec_max)
        try:
            nrec, code = _arc_train(Wt, b, a, scale, step, C, S, Cx, Sx, theta_s, ys, rec.regions[order], rec.counts,
                                    starts, ends, cfg.max_iters, cfg.record_every, rec.c, rec.threshold,
                                    cfg.stop_when_converged, it, lo, ms, rn)
        finally:
            net.W = np.ascontiguousarray(Wt.T)
            net.b = b
        rec.extend(it[:nrec], lo[:nrec], ms[:nrec], rn[:nrec])
        return {0: None, 1: "diverged", 2: "converged"}[code]

    def forward():
        _update_arcs(Wt, b, Cx, Sx, theta_s, starts, ends, False)
        _arc_forward(Wt, b, a, scale, C, S, starts, ends, out_s)
        return out_s[inv]

    def update(out):
        _arc_update(Wt, b, a, step, C, S, out_s - ys, starts, ends)

    try:
        return _loop(cfg, rec, callback, forward, update)
    finally:
        net.W = np.ascontiguousarray(Wt.T)
        net.b = b


def _train_two_layer_dense(net, X, y, cfg, rec, callback):
    Xc = np.ascontiguousarray(X)
    Wt = np.ascontiguousarray(net.W.T)
    b = net.b.copy()
    a = net.a
    scale = 1.0 / math.sqrt(net.m)
    step = cfg.eta * scale * (1.0 if cfg.loss == "sum" else 1.0 / y.size)
    out = np.empty(y.size)
    g = np.zeros((Wt.shape[0] + 1, Wt.shape[1]))

    def forward():
        if Wt.shape[0] == 3:
            _dense_pass3(Xc, y, Wt[0], Wt[1], Wt[2], b, a, scale, out, g[0], g[1], g[2], g[3])
        else:
            _dense_pass(Xc, y, Wt, b, a, scale, out, g)
        return out

    def update(o):
        _dense_apply(Wt, b, a, step, g)

    try:
        return _loop(cfg, rec, callback, forward, update)
    finally:
        net.W = np.ascontiguousarray(Wt.T)
        net.b = b


def _train_generic(net, X, y, cfg, rec, callback):
    """Numpy path: any network, full batch or seeded-shuffle SGD.

    With minibatches one iteration is one epoch, so ``iterations`` in the
    trace count epochs.
    """
    n = y.size
    rng = make_rng(cfg.seed)
    trainable = None
    if isinstance(net, DeepNet):
        trainable = [True] * len(net.weights)
        if not cfg.train_first_last:
            trainable[0] = trainable[-1] = False

    full = cfg.batch is None or cfg.batch >= n
    pending = []

    def forward():
        if full and isinstance(net, DeepNet):
            # one pass gives both the outputs and the gradient at this point
            grads, _, out = net._grad_out(X, y, cfg.loss, trainable)
            pending[:] = [grads]
            return out.astype(float)
        return net.forward(X)

    def step_on(idx):
        if isinstance(net, TwoLayerNet):
            gW, gb, _ = two_layer_grad(net, X[idx], y[idx], cfg.loss)
            net.W -= cfg.eta * gW
            net.b -= cfg.eta * gb
        else:
            grads = pending.pop() if pending else net.grad(X[idx], y[idx], cfg.loss, trainable)[0]
            for i, g in enumerate(grads):
                if g is not None:
                    net.weights[i] -= cfg.eta * g

    def update(out):
        if full:
            step_on(slice(None))
            return
        perm = rng.permutation(n)
        for s in range(0, n, cfg.batch):
            step_on(perm[s:s + cfg.batch])

    return _loop(cfg, rec, callback, forward, update)


def weight_drift(net, net0):
    """Relative change ``||theta - theta_0|| / ||theta_0||`` of the trained
    parameters."""
    p, p0 = net.params(), net0.params()
    return float(np.linalg.norm(p - p0) / np.linalg.norm(p0))


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_MAGIC = b"NTKS"
_VERSION = 1


def save_checkpoint(path, net):
    """Flat little-endian float64 parameters behind a versioned header."""
    if isinstance(net, TwoLayerNet):
        kind, dims = 0, [net.d, net.m]
        arrays = [net.W, net.b, net.a]
    else:
        kind, dims = 1, [net.weights[0].shape[1]] + net.widths
        arrays = net.weights
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIqdI", _VERSION, kind, int(net.seed), float(net.tau), len(dims)))
        fh.write(struct.pack("<%dq" % len(dims), *dims))
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ConfigError("not a checkpoint file")
        version, kind, seed, tau, nd = struct.unpack("<IIqdI", fh.read(struct.calcsize("<IIqdI")))
        if version != _VERSION:
            raise ConfigError("unsupported checkpoint version %d" % version)
        dims = list(struct.unpack("<%dq" % nd, fh.read(8 * nd)))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if kind == 0:
        d, m = dims
        W = data[:m * d].reshape(m, d).copy()
        b = data[m * d:m * d + m].copy()
        a = data[m * d + m:m * d + 2 * m].copy()
        return TwoLayerNet(W, b, a, tau, seed)
    shapes = [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)] + [(1, dims[-1])]
    weights, k = [], 0
    for sh in shapes:
        size = sh[0] * sh[1]
        weights.append(data[k:k + size].reshape(sh).copy())
        k += size
    return DeepNet(weights, tau, seed)
