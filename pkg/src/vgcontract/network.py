"""Mean-field network of N neurons, its McKean-Vlasov particle limit, and
propagation of chaos.

Neuron ``i`` follows the single-neuron SDE with conductance target

    G_i(v) = H0(v_i) + (1/(N-1)) sum_{j != i} H1(v_i, v_j)

and its own Brownian motion.  The interaction kernels are separable,
``H1(v, w) = h0 + kappa s(v) s(w)`` with ``s`` a logistic, so one step costs
``O(N)``.  The McKean-Vlasov system uses the self-inclusive mean with weight
``1/M`` instead.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .coupling import CouplingKind, MetricSeries, resolution_warning
from .errors import ArgumentError, NumericError, ParameterError
from .integrator import SimConfig, UniformBox, check_stability, snapshot_times
from .metric import DistanceSpec, rho_distance_arrays
from .model import AffineClamped, Constant, ConductanceSpec, Logistic, ModelParams, conductance_to_dict
from .rng import derive_seed
from .transport import PointCloud


# --- interaction kernels ----------------------------------------------------

def _logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class ConstantKernel:
    """``H1(v, w) = c``."""

    c: float

    variant = "constant"

    def __post_init__(self):
        if not self.c > 0:
            raise ParameterError(f"constant interaction kernel must be positive, got {self.c}")

    def __call__(self, v, w):
        return np.full(np.broadcast(v, w).shape, float(self.c))

    def packed(self):
        return np.array([self.c, 0.0, 0.0, 0.0])

    def bounds(self, v_l, v_e):
        return {"sup": float(self.c), "sup_dv": 0.0, "sup_dw": 0.0}

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class ProductLogistic:
    """``H1(v, w) = h0 + kappa s(v) s(w)`` with ``s(v) = 1/(1 + exp(-steepness (v - center)))``."""

    h0: float
    kappa: float
    steepness: float
    center: float

    variant = "product_logistic"

    def __post_init__(self):
        if self.steepness < 0:
            raise ParameterError("interaction steepness must be >= 0")
        if not (self.h0 > 0 and self.h0 + min(self.kappa, 0.0) > 0):
            raise ParameterError("interaction kernel must stay positive")

    def sigma(self, v):
        return _logistic(self.steepness * (np.asarray(v, dtype=float) - self.center))

    def __call__(self, v, w):
        return self.h0 + self.kappa * self.sigma(v) * self.sigma(w)

    def dv(self, v, w):
        s = self.sigma(v)
        return self.kappa * self.steepness * s * (1 - s) * self.sigma(w)

    def packed(self):
        return np.array([self.h0, self.kappa, self.steepness, self.center])

    def bounds(self, v_l, v_e):
        s_max = float(self.sigma(v_e))
        vc = min(max(self.center, v_l), v_e)
        sc = float(self.sigma(vc))
        ds_max = self.steepness * sc * (1 - sc)
        sup = self.h0 + max(self.kappa, 0.0) * s_max * s_max
        d = abs(self.kappa) * ds_max * s_max
        return {"sup": sup, "sup_dv": d, "sup_dw": d}

    def params(self):
        return {"h0": self.h0, "kappa": self.kappa, "steepness": self.steepness, "center": self.center}


Kernel = ConstantKernel | ProductLogistic
_KERNELS = {cls.variant: cls for cls in (ConstantKernel, ProductLogistic)}


def kernel_from_dict(d):
    d = dict(d)
    try:
        cls = _KERNELS[d.pop("variant")]
    except KeyError as exc:
        raise ParameterError(f"unknown or missing interaction kernel variant: {exc}") from None
    return cls(**{k: float(v) for k, v in d.items()})


def shifted(G: ConductanceSpec, c):
    """``G + c`` within the same family."""
    if isinstance(G, Constant):
        return Constant(G.c + c)
    if isinstance(G, Logistic):
        return Logistic(G.base + c, G.amplitude, G.steepness, G.center)
    if isinstance(G, AffineClamped):
        return AffineClamped(G.slope, G.intercept + c, G.floor + c)
    raise ParameterError(f"cannot shift conductance {G!r}")


@dataclass(frozen=True)
class MeanFieldSpec:
    H0: ConductanceSpec
    H1: Kernel

    def model(self, p: ModelParams):
        """Single-neuron parameters with ``G = H0``; the kernels add the interaction field."""
        return p.with_(G=self.H0)

    def bounds(self, p: ModelParams):
        return self.H1.bounds(p.v_l, p.v_e)

    def g_max(self, p: ModelParams):
        return self.H0.sup_bound(p.v_l, p.v_e) + self.bounds(p)["sup"]

    def decoupled_model(self, p: ModelParams):
        """Single-neuron model equivalent to a neuron of a constant-kernel network."""
        if not isinstance(self.H1, ConstantKernel):
            raise ParameterError("decoupling needs a constant interaction kernel")
        return p.with_(G=shifted(self.H0, self.H1.c))

    def to_dict(self):
        return {"H0": conductance_to_dict(self.H0),
                "H1": {"variant": self.H1.variant, **self.H1.params()}}


def log_eta(spec: MeanFieldSpec, p: ModelParams, dist: DistanceSpec):
    """``log eta``; ``-inf`` when the kernel does not depend on the other neurons."""
    d = spec.bounds(p)["sup_dw"]
    if d == 0:
        return -math.inf
    return math.log(dist.M * p.gamma * d) + dist.kR2


def eta(spec: MeanFieldSpec, p: ModelParams, dist: DistanceSpec):
    """Interaction rate ``M gamma exp(k R_star^2) ||d_w H1||``, independent of ``N``.

    Returns ``inf`` when ``exp(k R_star^2)`` overflows; see :func:`log_eta`.
    """
    le = log_eta(spec, p, dist)
    if le == -math.inf:
        return 0.0
    return math.exp(le) if le < 709.0 else math.inf


def derivative_bounds(spec: MeanFieldSpec, p: ModelParams, N):
    """``N x N`` matrix of ``||d G_i / d v_j||`` for ``j != i`` (zero diagonal)."""
    _check_N(N)
    d = np.full((N, N), spec.bounds(p)["sup_dw"] / (N - 1))
    np.fill_diagonal(d, 0.0)
    return d


def eta_from_bounds(bounds, p: ModelParams, dist: DistanceSpec):
    """``M gamma exp(k R_star^2) max_i sum_{j != i} ||d G_i / d v_j||`` for general couplings."""
    b = np.array(bounds, dtype=float)
    np.fill_diagonal(b, 0.0)
    s = float(np.max(b.sum(axis=1)))
    if s == 0:
        return 0.0
    le = math.log(dist.M * p.gamma * s) + dist.kR2
    return math.exp(le) if le < 709.0 else math.inf


# --- trajectories -----------------------------------------------------------

def network_header(n):
    return [f"v_{i}" for i in range(1, n + 1)] + [f"g_{i}" for i in range(1, n + 1)]


@dataclass
class NetworkTrajectory:
    times: np.ndarray
    v: np.ndarray  # (n_snap, N)
    g: np.ndarray

    @property
    def N(self):
        return self.v.shape[1]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + network_header(self.N))
            for t, vr, gr in zip(self.times, self.v, self.g):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in vr] + [repr(float(x)) for x in gr])


def default_initial_law(spec: MeanFieldSpec, p: ModelParams):
    return UniformBox(p.v_l, p.v_e, 0.0, spec.g_max(p))


def _check_N(N):
    if int(N) != N or N < 2:
        raise ArgumentError(f"network size must be an integer >= 2, got {N}")


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite values in network simulation")


def _initial(law, R, N, seed):
    v, g = law.sample(R * N, seed, 0)
    return v.reshape(R, N), g.reshape(R, N)


def network_run(spec: MeanFieldSpec, p: ModelParams, v0, g0, cfg: SimConfig, streams,
                self_inclusive=False, threads=1):
    """Networks from explicit ``(R, N)`` initial arrays on explicit ``(R, N)`` streams.

    Returns ``(vs, gs)`` of shape ``(n_snap, R, N)``.  Permuting the columns of
    ``v0, g0, streams`` together permutes the output columns exactly.
    """
    v0 = np.atleast_2d(np.asarray(v0, dtype=float))
    g0 = np.atleast_2d(np.asarray(g0, dtype=float))
    streams = np.atleast_2d(np.asarray(streams, dtype=np.uint64))
    if not v0.shape == g0.shape == streams.shape:
        raise ArgumentError("initial arrays and streams must share the shape (R, N)")
    if np.any(v0 < p.v_l) or np.any(v0 > p.v_e) or np.any(g0 < 0):
        raise ArgumentError("initial network state outside the state space")
    check_stability(p, cfg)
    vs, gs = kernels.run_network(spec.model(p).packed(), spec.H1.packed(), v0, g0, cfg.master_seed,
                                 streams, cfg.n_steps, cfg.dt, cfg.snapshot_stride,
                                 bool(self_inclusive), threads)
    _finite(vs, gs)
    return vs, gs


def network_streams(R, N, offset=0):
    return (offset + np.arange(R * N, dtype=np.uint64)).reshape(R, N)


def network_simulate(spec: MeanFieldSpec, p: ModelParams, N, cfg: SimConfig, init=None,
                     replica=0, threads=1):
    """One network path; neuron ``i`` of replica ``r`` uses stream ``r N + i``."""
    _check_N(N)
    law = default_initial_law(spec, p) if init is None else init
    v0, g0 = law.sample(N, cfg.master_seed, replica * N)
    vs, gs = network_run(spec, p, v0[None, :], g0[None, :], cfg,
                         network_streams(1, N, replica * N), threads=threads)
    return NetworkTrajectory(snapshot_times(cfg), vs[:, 0, :].copy(), gs[:, 0, :].copy())


def network_ensemble(spec, p, N, cfg, R, init=None, threads=1):
    """``R`` independent networks; returns ``(times, vs, gs)`` with arrays ``(n_snap, R, N)``."""
    _check_N(N)
    law = default_initial_law(spec, p) if init is None else init
    v0, g0 = _initial(law, R, N, cfg.master_seed)
    vs, gs = network_run(spec, p, v0, g0, cfg, network_streams(R, N), threads=threads)
    return snapshot_times(cfg), vs, gs


# --- coupled networks -------------------------------------------------------

@dataclass
class NetworkCoupledResult:
    times: np.ndarray
    rho_sum: np.ndarray  # (n_snap, R): sum_i rho(R^i)
    l1: np.ndarray       # (n_snap, R): sum_i |v_i - v'_i| + |g_i - g'_i|
    final: tuple

    @staticmethod
    def _series(x):
        R = x.shape[1]
        se = x.std(axis=1, ddof=1) / math.sqrt(R) if R > 1 else np.zeros(x.shape[0])
        return x.mean(axis=1), se

    @property
    def rho_series(self):
        return MetricSeries(self.times, *self._series(self.rho_sum))

    @property
    def l1_series(self):
        return MetricSeries(self.times, *self._series(self.l1))


def network_coupled_simulate(spec: MeanFieldSpec, p: ModelParams, N, cfg: SimConfig,
                             kind: CouplingKind, dist: DistanceSpec, init, R=1, threads=1):
    """Two networks with per-neuron coupled noise, gap ``|g_i - g'_i|`` per neuron.

    ``init`` is ``(v, g, v', g')``; each entry broadcasts to ``(R, N)``.
    The mean over replicas of ``l1`` bounds ``W_1`` with the l1 ground norm.
    """
    _check_N(N)
    v0, g0, vp0, gp0 = (np.ascontiguousarray(np.broadcast_to(np.asarray(x, dtype=float), (R, N)))
                        for x in init)
    for vv, gg in ((v0, g0), (vp0, gp0)):
        if np.any(vv < p.v_l) or np.any(vv > p.v_e) or np.any(gg < 0):
            raise ArgumentError("initial network state outside the state space")
    check_stability(p, cfg)
    msg = resolution_warning(p, cfg.dt, kind)
    if msg:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    v, g, vp, gp = kernels.run_network_pair(spec.model(p).packed(), spec.H1.packed(), v0, g0, vp0,
                                            gp0, cfg.master_seed, network_streams(R, N), cfg.n_steps,
                                            cfg.dt, cfg.snapshot_stride, kind.code, kind.xi, threads)
    _finite(v, g, vp, gp)
    dv, dg = v - vp, g - gp
    rho_sum = rho_distance_arrays(dist, dv, dg).sum(axis=-1)
    l1 = (np.abs(dv) + np.abs(dg)).sum(axis=-1)
    return NetworkCoupledResult(snapshot_times(cfg), rho_sum, l1, (v[-1], g[-1], vp[-1], gp[-1]))


# --- McKean-Vlasov particles ------------------------------------------------

@dataclass
class McKeanResult:
    times: np.ndarray
    v: np.ndarray  # (n_snap, M)
    g: np.ndarray

    def cloud(self, k=-1):
        return PointCloud.from_states(self.v[k], self.g[k])


def mckean_simulate(spec: MeanFieldSpec, p: ModelParams, M_particles, cfg: SimConfig, init=None,
                    stream_offset=0, threads=1):
    """Self-interacting particle approximation of the nonlinear law (weight ``1/M``)."""
    if int(M_particles) != M_particles or M_particles < 2:
        raise ArgumentError(f"need at least 2 particles, got {M_particles}")
    law = default_initial_law(spec, p) if init is None else init
    v0, g0 = law.sample(M_particles, cfg.master_seed, stream_offset)
    vs, gs = network_run(spec, p, v0[None, :], g0[None, :], cfg,
                         network_streams(1, M_particles, stream_offset), self_inclusive=True,
                         threads=threads)
    return McKeanResult(snapshot_times(cfg), vs[:, 0, :].copy(), gs[:, 0, :].copy())


# --- propagation of chaos ---------------------------------------------------

@dataclass(frozen=True)
class ChaosResult:
    N: int
    error: float
    std_error: float
    m_aux: int
    reps: int


def default_m_aux(N):
    return max(1024, 8 * N)


def chaos_error(spec: MeanFieldSpec, p: ModelParams, N, cfg: SimConfig, reps=64, init=None,
                m_aux=None, threads=1):
    """``sqrt((1/N) E sum_i |z_i - z'_i|^2)`` at ``cfg.t_end``.

    Each replica couples an ``N``-network synchronously to ``N`` independent
    copies of the nonlinear dynamics, whose mean field is taken from an
    auxiliary particle ensemble of size ``m_aux``.  The standard error comes
    from the replica spread by the delta method.
    """
    _check_N(N)
    if reps < 2:
        raise ArgumentError("chaos_error needs at least 2 replicas")
    m_aux = default_m_aux(N) if m_aux is None else int(m_aux)
    law = default_initial_law(spec, p) if init is None else init
    seed_aux = derive_seed(cfg.master_seed, "aux")
    v0, g0 = _initial(law, reps, N, cfg.master_seed)
    va, ga = _initial(law, reps, m_aux, seed_aux)
    check_stability(p, cfg)
    sq, _ = kernels.run_chaos(spec.model(p).packed(), spec.H1.packed(), v0, g0, va, ga,
                              cfg.master_seed, seed_aux, network_streams(reps, N),
                              network_streams(reps, m_aux), cfg.n_steps, cfg.dt, cfg.n_steps,
                              threads)
    _finite(sq)
    per = sq[-1] / N
    mean = float(per.mean())
    err = math.sqrt(mean)
    se_mean = float(per.std(ddof=1) / math.sqrt(reps))
    se = se_mean / (2 * err) if err > 0 else 0.0
    return ChaosResult(int(N), err, se, m_aux, reps)


def chaos_study(spec: MeanFieldSpec, p: ModelParams, N_values, cfg: SimConfig, reps=64, init=None,
                threads=1):
    """Chaos error over ``N_values`` and the fitted log-log slope with its ``r^2``."""
    results = [chaos_error(spec, p, N, cfg, reps, init, threads=threads) for N in N_values]
    errors = np.array([r.error for r in results])
    x, y = np.log(np.asarray(N_values, dtype=float)), np.log(errors)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return {"N_values": [int(n) for n in N_values], "errors": errors.tolist(),
            "std_errors": [r.std_error for r in results], "slope": float(slope), "r2": float(r2),
            "m_aux": [r.m_aux for r in results], "reps": int(reps), "T": cfg.n_steps * cfg.dt}
