"""Two copies of the neuron SDE driven by coupled noise.

The pair receives ``alpha dB + beta dB'`` and ``alpha dB - beta dB'`` with
``alpha**2 + beta**2 = 1`` and ``beta`` a function of the conductance gap
``|g - g'|``.  Synchronous coupling (``beta = 0``) contracts pathwise when the
drift is contracting; mirror coupling (``beta = 1`` once the gap exceeds
``xi``) maximizes the noise on the gap and is what makes the noisy system
contract on average when the drift alone does not.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._pykernels import KIND_INDEPENDENT, KIND_MIRROR, KIND_SYNC, beta_weight, pair_step_arrays
from .errors import ArgumentError, NumericError, ParameterError, PreconditionError
from .integrator import SimConfig, check_stability, snapshot_times
from .metric import DistanceSpec, rho_distance_arrays
from .model import ModelParams, State, check_state, check_sync_condition


# --- coupling kinds ---------------------------------------------------------

def _check_xi(xi):
    if not 0 < xi <= 1:
        raise ParameterError(f"xi must lie in (0, 1], got {xi}")


@dataclass(frozen=True)
class Synchronous:
    variant = "synchronous"
    code = KIND_SYNC
    xi = 1.0

    def to_dict(self):
        return {"variant": self.variant}


@dataclass(frozen=True)
class Mirror:
    xi: float = 1e-3

    variant = "mirror"
    code = KIND_MIRROR

    def __post_init__(self):
        _check_xi(self.xi)

    def to_dict(self):
        return {"variant": self.variant, "xi": self.xi}


@dataclass(frozen=True)
class Independent:
    xi: float = 1e-3

    variant = "independent"
    code = KIND_INDEPENDENT

    def __post_init__(self):
        _check_xi(self.xi)

    def to_dict(self):
        return {"variant": self.variant, "xi": self.xi}


CouplingKind = Synchronous | Mirror | Independent


def coupling_from_dict(d, p: ModelParams | None = None):
    """Parse ``{"variant": ..., "xi": ...}``; ``xi`` defaults to ``1e-3 (V_E - V_L)``."""
    d = dict(d)
    variant = d.pop("variant", None)
    unknown = set(d) - {"xi"}
    if unknown:
        raise ParameterError(f"coupling: unknown keys {sorted(unknown)}")
    if variant == "synchronous":
        return Synchronous()
    default_xi = 1e-3 * (p.width if p is not None else 1.0)
    xi = float(d.get("xi", default_xi))
    if variant == "mirror":
        return Mirror(xi)
    if variant == "independent":
        return Independent(xi)
    raise ParameterError(f"coupling: unknown variant {variant!r} (synchronous, mirror, independent)")


def beta_profile(kind: CouplingKind, s):
    """Weight ``beta`` of the antisymmetric noise at conductance gap ``s >= 0``.

    Zero below ``xi/2``; above ``xi`` it is 1 (mirror) or ``1/sqrt(2)``
    (independent), joined by the quintic smoothstep.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ArgumentError("conductance gap must be non-negative")
    out = beta_weight(kind.code, s_arr, kind.xi)
    return out if np.ndim(out) else float(out)


def alpha_profile(kind: CouplingKind, s):
    b = np.asarray(beta_profile(kind, s))
    out = np.sqrt(1.0 - b * b)
    return out if np.ndim(out) else float(out)


def resolution_warning(p: ModelParams, dt, kind: CouplingKind):
    """Message when one step of gap noise jumps across the whole ``[xi/2, xi]`` ramp."""
    if kind.code == KIND_SYNC or p.a == 0:
        return None
    jump = 2 * math.sqrt(2) * p.a * math.sqrt(dt)
    if jump > kind.xi / 4:
        return (f"gap noise per step 2*sqrt(2)*a*sqrt(dt) = {jump:.3g} exceeds xi/4 = {kind.xi / 4:.3g}; "
                "the coupling ramp is not resolved and the pair may cross zero gap without coalescing")
    return None


# --- pair state and series --------------------------------------------------

@dataclass(frozen=True)
class PairState:
    z: State
    z_prime: State

    def swapped(self):
        return PairState(self.z_prime, self.z)


@dataclass
class MetricSeries:
    """Monitored distance per snapshot; ``std_errors`` is set for ensemble means."""

    times: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray | None = None

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            if self.std_errors is None:
                w.writerow(["t", "value"])
                for t, x in zip(self.times, self.values):
                    w.writerow([repr(float(t)), repr(float(x))])
            else:
                w.writerow(["t", "value", "std_error"])
                for t, x, e in zip(self.times, self.values, self.std_errors):
                    w.writerow([repr(float(t)), repr(float(x)), repr(float(e))])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        se = data[:, 2] if data.shape[1] > 2 else None
        return cls(data[:, 0], data[:, 1], se)


@dataclass
class PairTrajectory:
    times: np.ndarray
    v: np.ndarray
    g: np.ndarray
    v_prime: np.ndarray
    g_prime: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "v", "g", "v_prime", "g_prime"])
            for row in zip(self.times, self.v, self.g, self.v_prime, self.g_prime):
                w.writerow([repr(float(x)) for x in row])


@dataclass(frozen=True)
class WeightedNorm:
    """``|v - v'|^2 + A |g - g'|^2``, the synchronous Lyapunov function."""

    A: float

    def __call__(self, dv, dg):
        return dv * dv + self.A * dg * dg


@dataclass(frozen=True)
class L1Gap:
    """``|v - v'| + |g - g'|``."""

    def __call__(self, dv, dg):
        return np.abs(dv) + np.abs(dg)


def monitor_values(monitor, dv, dg):
    if isinstance(monitor, DistanceSpec):
        return rho_distance_arrays(monitor, dv, dg)
    return monitor(dv, dg)


# --- stepping ---------------------------------------------------------------

def coupled_step(p: ModelParams, ps: PairState, dt, dB, dBp, kind: CouplingKind):
    """One coupled Euler step with caller-supplied increments ``dB, dB' ~ N(0, dt)``."""
    vals = (ps.z.v, ps.z.g, ps.z_prime.v, ps.z_prime.g, dt, dB, dBp)
    if not all(math.isfinite(x) for x in vals):
        raise NumericError(f"non-finite input to coupled_step: {ps}, dt={dt}, dB={dB}, dB'={dBp}")
    check_state(p, ps.z)
    check_state(p, ps.z_prime)
    v, g, vp, gp = pair_step_arrays(p.packed(), *(np.array([x]) for x in vals[:4]), dt,
                                    np.array([dB]), np.array([dBp]), kind.code, kind.xi)
    return PairState(State(float(v[0]), float(g[0])), State(float(vp[0]), float(gp[0])))


def _run_pairs(p, v, g, vp, gp, cfg, kind, streams, stride, threads):
    check_stability(p, cfg)
    msg = resolution_warning(p, cfg.dt, kind)
    if msg:
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    out = kernels.run_pair(p.packed(), v, g, vp, gp, cfg.master_seed, streams, cfg.n_steps,
                           cfg.dt, stride, kind.code, kind.xi, threads)
    for arr in out:
        if not np.all(np.isfinite(arr)):
            raise NumericError("non-finite values in coupled simulation")
    return out


def coupled_simulate(p: ModelParams, ps0: PairState, cfg: SimConfig, kind: CouplingKind,
                     monitor, stream_id=0, threads=1):
    """Single coupled path and the monitored distance at every snapshot.

    ``monitor`` is a :class:`DistanceSpec` (``rho`` distance) or a callable of
    the gaps ``(v - v', g - g')`` such as :class:`WeightedNorm`.  The first
    component uses the same noise as ``integrator.simulate`` on this stream.
    """
    check_state(p, ps0.z)
    check_state(p, ps0.z_prime)
    arrs = [np.array([x]) for x in (ps0.z.v, ps0.z.g, ps0.z_prime.v, ps0.z_prime.g)]
    v, g, vp, gp = _run_pairs(p, *arrs, cfg, kind, np.array([stream_id], dtype=np.uint64),
                              cfg.snapshot_stride, threads)
    traj = PairTrajectory(snapshot_times(cfg), v[:, 0].copy(), g[:, 0].copy(),
                          vp[:, 0].copy(), gp[:, 0].copy())
    series = MetricSeries(traj.times, monitor_values(monitor, traj.v - traj.v_prime,
                                                     traj.g - traj.g_prime))
    return traj, series


@dataclass
class PairEnsembleResult:
    times: np.ndarray
    v: np.ndarray  # (n_snap, n)
    g: np.ndarray
    v_prime: np.ndarray
    g_prime: np.ndarray
    values: np.ndarray  # monitored distance per snapshot and pair

    @property
    def mean_series(self):
        n = self.values.shape[1]
        se = self.values.std(axis=1, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(len(self.times))
        return MetricSeries(self.times, self.values.mean(axis=1), se)


def coupled_ensemble(p: ModelParams, init, cfg: SimConfig, kind: CouplingKind, monitor,
                     stream_offset=0, threads=1):
    """Coupled pairs on streams ``stream_offset + i``.

    ``init`` is ``(v, g, v', g')``, four equal-length arrays (or scalars with an
    explicit length given by the longest array).
    """
    arrs = np.broadcast_arrays(*(np.atleast_1d(np.asarray(x, dtype=float)) for x in init))
    v0, g0, vp0, gp0 = (a.copy() for a in arrs)
    n = v0.size
    if n < 1:
        raise ArgumentError("pair ensemble must be non-empty")
    for vv, gg in ((v0, g0), (vp0, gp0)):
        if np.any(vv < p.v_l) or np.any(vv > p.v_e) or np.any(gg < 0):
            raise ArgumentError("initial pair outside the state space")
    if cfg.n_steps % cfg.snapshot_stride:
        raise ParameterError("snapshot_stride must divide the number of steps")
    streams = np.arange(stream_offset, stream_offset + n, dtype=np.uint64)
    v, g, vp, gp = _run_pairs(p, v0, g0, vp0, gp0, cfg, kind, streams, cfg.snapshot_stride, threads)
    values = monitor_values(monitor, v - vp, g - gp)
    return PairEnsembleResult(snapshot_times(cfg), v, g, vp, gp, values)


# --- synchronous rate -------------------------------------------------------

@dataclass(frozen=True)
class SyncRate:
    """Weight ``A`` and rate ``lambda_star`` with ``d/dt D <= -2 lambda_star D``.

    ``D = |v - v'|^2 + A |g - g'|^2``.  ``neg_q`` is ``-Q(A)``, kept for
    reference; it is not a rate.
    """

    A: float
    lambda_star: float
    neg_q: float

    def __iter__(self):
        return iter((self.A, self.lambda_star))

    def to_dict(self):
        return {"A": self.A, "lambda_star": self.lambda_star, "neg_Q_at_A": self.neg_q}


def q_form(p: ModelParams, A, lipschitz=None):
    L = p.G.lipschitz if lipschitz is None else lipschitz
    return (p.width + A * p.gamma * L) ** 2 - 4 * A * p.gamma * p.g_l


def sync_weight(p: ModelParams):
    """Minimiser of ``Q`` (or ``(V_E - V_L)^2 / (2 gamma g_L)`` for constant ``G``)."""
    L = p.G.lipschitz
    if L == 0:
        return p.width ** 2 / (2 * p.gamma * p.g_l)
    return (2 * p.g_l / L - p.width) / (p.gamma * L)


def sync_rate_theoretical(p: ModelParams):
    """Synchronous contraction weight and rate; requires ``(V_E - V_L) ||G'|| < g_L``.

    The rate is the smallest generalized eigenvalue of the drift form
    ``[[g_L, -c/2], [-c/2, A gamma]]`` against ``diag(1, A)``, with
    ``c = V_E - V_L + A gamma ||G'||``.
    """
    holds, margin = check_sync_condition(p)
    if not holds:
        raise PreconditionError(f"synchronous contraction needs (V_E - V_L)||G'|| < g_L (margin {margin:.4g})")
    A = sync_weight(p)
    c = p.width + A * p.gamma * p.G.lipschitz
    # eigenvalues of diag(1, A)^(-1/2) M diag(1, A)^(-1/2)
    half_tr = 0.5 * (p.g_l + p.gamma)
    disc = math.sqrt((0.5 * (p.g_l - p.gamma)) ** 2 + c * c / (4 * A))
    lam = half_tr - disc
    return SyncRate(A, lam, -q_form(p, A))


# --- rate fitting -----------------------------------------------------------

def fit_decay_rate(series: MetricSeries, window=None):
    """Least-squares ``-d log(value)/dt`` over ``window = (t0, t1)`` and its ``r^2``.

    Non-positive values are dropped.  A perfect fit (including a constant
    series) has ``r^2 = 1``.
    """
    t = np.asarray(series.times, dtype=float)
    y = np.asarray(series.values, dtype=float)
    mask = np.ones(t.shape, dtype=bool)
    if window is not None:
        t0, t1 = window
        mask &= (t >= t0) & (t <= t1)
    mask &= np.isfinite(y) & (y > 0)
    if np.count_nonzero(mask) < 2:
        raise ArgumentError("fewer than two positive values in the fit window")
    tt, ly = t[mask], np.log(y[mask])
    slope, intercept = np.polyfit(tt, ly, 1)
    resid = ly - (slope * tt + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), float(r2)
