"""Pure numpy simulation kernels.

Same signatures and arithmetic as the compiled ``_ckernels`` extension; used
when the extension is not built or when ``VGCONTRACT_BACKEND=python``.  Loops
run over time steps in Python and are vectorised over replicas.

Model vector layout (see ``ModelParams.packed``)::

    [v_l, v_e, g_l, gamma, a, kind, c0, c1, c2, c3]

Interaction kernel vector layout (see ``network.Kernel.packed``)::

    [h0, kappa, steepness, center]

The ``threads`` arguments are accepted for signature parity and ignored.
"""

import math

import numpy as np

from .rng import LANE_AUX, LANE_MAIN, normal_pair

SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / math.sqrt(2.0)
FIX_SCALE = 1125899906842624.0  # 2**50
FIX_INV = 1.0 / FIX_SCALE

KIND_SYNC = 0
KIND_MIRROR = 1
KIND_INDEPENDENT = 2


def conductance(model, v):
    kind = int(model[5])
    c0, c1, c2 = model[6], model[7], model[8]
    if kind == 0:
        return np.full_like(v, c0)
    if kind == 1:
        return c0 + c1 / (1.0 + np.exp(-c2 * (v - model[9])))
    return np.maximum(c0 * v + c1, c2)


def step_arrays(model, v, g, dt, dW, extra=None):
    """One Euler step with clamped v and symmetrised reflection of g.

    ``extra`` is an additive conductance (network interaction field).
    """
    v_l, v_e, g_l, gamma, a = model[0], model[1], model[2], model[3], model[4]
    dv = g_l * (v_l - v) + g * (v_e - v)
    Gv = conductance(model, v)
    if extra is not None:
        Gv = Gv + extra
    dg = gamma * (Gv - g)
    vn = np.minimum(np.maximum(v + dv * dt, v_l), v_e)
    gn = np.abs(g + dg * dt + (SQRT2 * a) * dW)
    return vn, gn


def beta_weight(kind, s, xi):
    """Noise weight on the antisymmetric channel as a function of the gap ``s``."""
    s = np.asarray(s, dtype=float)
    if kind == KIND_SYNC:
        return np.zeros_like(s)
    h = 0.5 * xi
    t = np.minimum(np.maximum((s - h) / h, 0.0), 1.0)
    w = np.minimum(t * t * t * (10.0 + t * (-15.0 + 6.0 * t)), 1.0)  # rounding just below t = 1
    if kind == KIND_INDEPENDENT:
        return w * INV_SQRT2
    return w


def pair_step_arrays(model, v, g, vp, gp, dt, dB, dBp, kind, xi, extra=None, extra_p=None):
    beta = beta_weight(kind, np.abs(g - gp), xi)
    alpha = np.sqrt(1.0 - beta * beta)
    w1 = alpha * dB + beta * dBp
    w2 = alpha * dB - beta * dBp
    vn, gn = step_arrays(model, v, g, dt, w1, extra)
    vpn, gpn = step_arrays(model, vp, gp, dt, w2, extra_p)
    return vn, gn, vpn, gpn


def _n_snap(n_steps, stride):
    return n_steps // stride + 1


class _Normals:
    """Caches the Box-Muller pair so each Philox block is evaluated once."""

    def __init__(self, seed, streams, lane):
        self.seed, self.streams, self.lane = seed, streams, lane
        self._pair = None

    def __call__(self, n):
        if n & 1 == 0:
            self._pair = normal_pair(self.seed, self.streams, self.lane, n >> 1)
            return self._pair[0]
        if self._pair is None:
            self._pair = normal_pair(self.seed, self.streams, self.lane, n >> 1)
        return self._pair[1]


def run_single(model, v, g, seed, streams, n_steps, dt, stride, threads=1):
    v = np.array(v, dtype=np.float64)
    g = np.array(g, dtype=np.float64)
    streams = np.asarray(streams, dtype=np.uint64)
    vs = np.empty((_n_snap(n_steps, stride), v.size))
    gs = np.empty_like(vs)
    vs[0], gs[0] = v, g
    sqdt = math.sqrt(dt)
    z = _Normals(seed, streams, LANE_MAIN)
    for n in range(n_steps):
        v, g = step_arrays(model, v, g, dt, sqdt * z(n))
        if (n + 1) % stride == 0:
            vs[(n + 1) // stride], gs[(n + 1) // stride] = v, g
    return vs, gs


def run_pair(model, v, g, vp, gp, seed, streams, n_steps, dt, stride, kind, xi, threads=1):
    v, g, vp, gp = (np.array(x, dtype=np.float64) for x in (v, g, vp, gp))
    streams = np.asarray(streams, dtype=np.uint64)
    out = [np.empty((_n_snap(n_steps, stride), v.size)) for _ in range(4)]
    for arr, x in zip(out, (v, g, vp, gp)):
        arr[0] = x
    sqdt = math.sqrt(dt)
    z = _Normals(seed, streams, LANE_MAIN)
    zp = _Normals(seed, streams, LANE_AUX)
    for n in range(n_steps):
        v, g, vp, gp = pair_step_arrays(model, v, g, vp, gp, dt, sqdt * z(n), sqdt * zp(n), kind, xi)
        if (n + 1) % stride == 0:
            k = (n + 1) // stride
            for arr, x in zip(out, (v, g, vp, gp)):
                arr[k] = x
    return tuple(out)


def sigmoid(h1, v):
    return 1.0 / (1.0 + np.exp(-h1[2] * (v - h1[3])))


def fixed_sum(s):
    """Order-independent row sums: values rounded to multiples of 2**-50, summed as int64."""
    q = np.floor(s * FIX_SCALE + 0.5).astype(np.int64)
    return q, q.sum(axis=-1)


def network_field(h1, v, self_inclusive):
    """Interaction conductance ``(1/(N-1)) sum_{j != i} H1(v_i, v_j)`` (or self-inclusive ``1/N``)."""
    s = sigmoid(h1, v)
    q, S = fixed_sum(s)
    n = v.shape[-1]
    if self_inclusive:
        mean = (S * FIX_INV / n)[..., None]
    else:
        mean = ((S[..., None] - q) * FIX_INV) / (n - 1)
    return h1[0] + h1[1] * s * mean


def run_network(model, h1, v, g, seed, streams, n_steps, dt, stride, self_inclusive, threads=1):
    v = np.array(v, dtype=np.float64)
    g = np.array(g, dtype=np.float64)
    streams = np.asarray(streams, dtype=np.uint64)
    shape = (_n_snap(n_steps, stride),) + v.shape
    vs, gs = np.empty(shape), np.empty(shape)
    vs[0], gs[0] = v, g
    sqdt = math.sqrt(dt)
    z = _Normals(seed, streams, LANE_MAIN)
    for n in range(n_steps):
        field = network_field(h1, v, self_inclusive)
        v, g = step_arrays(model, v, g, dt, sqdt * z(n), field)
        if (n + 1) % stride == 0:
            vs[(n + 1) // stride], gs[(n + 1) // stride] = v, g
    return vs, gs


def run_network_pair(model, h1, v, g, vp, gp, seed, streams, n_steps, dt, stride, kind, xi, threads=1):
    v, g, vp, gp = (np.array(x, dtype=np.float64) for x in (v, g, vp, gp))
    streams = np.asarray(streams, dtype=np.uint64)
    shape = (_n_snap(n_steps, stride),) + v.shape
    out = [np.empty(shape) for _ in range(4)]
    for arr, x in zip(out, (v, g, vp, gp)):
        arr[0] = x
    sqdt = math.sqrt(dt)
    z = _Normals(seed, streams, LANE_MAIN)
    zp = _Normals(seed, streams, LANE_AUX)
    for n in range(n_steps):
        f1 = network_field(h1, v, False)
        f2 = network_field(h1, vp, False)
        v, g, vp, gp = pair_step_arrays(model, v, g, vp, gp, dt, sqdt * z(n), sqdt * zp(n),
                                        kind, xi, f1, f2)
        if (n + 1) % stride == 0:
            k = (n + 1) // stride
            for arr, x in zip(out, (v, g, vp, gp)):
                arr[k] = x
    return tuple(out)


def run_chaos(model, h1, v, g, va, ga, seed, seed_aux, streams, streams_aux,
              n_steps, dt, stride, threads=1):
    """Network coupled synchronously to non-interacting surrogates.

    Surrogates start from the network's initial state, share its Gaussian
    streams, and feel the mean field of an auxiliary self-interacting particle
    ensemble ``(va, ga)`` standing in for the nonlinear law.  Returns the
    per-replica ``sum_i |z_i - z'_i|^2`` at each snapshot and the final
    ``(v, g, v', g')``.
    """
    v, g, va, ga = (np.array(x, dtype=np.float64) for x in (v, g, va, ga))
    vp, gp = v.copy(), g.copy()
    streams = np.asarray(streams, dtype=np.uint64)
    streams_aux = np.asarray(streams_aux, dtype=np.uint64)
    sq = np.empty((_n_snap(n_steps, stride), v.shape[0]))
    sq[0] = 0.0
    sqdt = math.sqrt(dt)
    z = _Normals(seed, streams, LANE_MAIN)
    za = _Normals(seed_aux, streams_aux, LANE_MAIN)
    m_aux = va.shape[-1]
    for n in range(n_steps):
        f_net = network_field(h1, v, False)
        sa = sigmoid(h1, va)
        _, S = fixed_sum(sa)
        mean_aux = (S * FIX_INV / m_aux)[:, None]
        f_aux = h1[0] + h1[1] * sa * mean_aux
        f_sur = h1[0] + h1[1] * sigmoid(h1, vp) * mean_aux
        dW = sqdt * z(n)
        v, g = step_arrays(model, v, g, dt, dW, f_net)
        vp, gp = step_arrays(model, vp, gp, dt, dW, f_sur)
        va, ga = step_arrays(model, va, ga, dt, sqdt * za(n), f_aux)
        if (n + 1) % stride == 0:
            d = (v - vp) ** 2 + (g - gp) ** 2
            sq[(n + 1) // stride] = d.sum(axis=-1)
    return sq, (v, g, vp, gp)
