"""Euler time stepping of the reflected voltage-conductance SDE.

Voltage is clamped to ``[V_L, V_E]`` after every step and the conductance is
reflected at zero by taking the absolute value (symmetrised Euler).  All
Gaussian increments are drawn from keyed counter-based streams (see
:mod:`vgcontract.rng`), so a trajectory depends only on
``(params, initial state, config, stream_id)``.
"""

import csv
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from ._pykernels import step_arrays
from .errors import ArgumentError, NumericError, ParameterError
from .model import ModelParams, State, check_state
from .rng import derive_seed, uniforms
from .transport import PointCloud

DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class SimConfig:
    dt: float = DEFAULT_DT
    t_end: float = 1.0
    snapshot_stride: int = 1
    master_seed: int = 0

    def __post_init__(self):
        errs = []
        if not self.dt > 0:
            errs.append(f"dt: must be > 0 (got {self.dt})")
        if not self.t_end > 0:
            errs.append(f"t_end: must be > 0 (got {self.t_end})")
        elif self.dt > self.t_end:
            errs.append(f"dt: must be <= t_end (got dt={self.dt}, t_end={self.t_end})")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            errs.append(f"snapshot_stride: must be a positive integer (got {self.snapshot_stride})")
        if not 0 <= int(self.master_seed) < 2**64:
            errs.append("master_seed: must fit in 64 unsigned bits")
        if errs:
            raise ParameterError("; ".join(errs))

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def with_(self, **changes):
        d = asdict(self)
        d.update(changes)
        return SimConfig(**d)

    def to_dict(self):
        return asdict(self)


def stability_warnings(p: ModelParams, dt, g_typ=None):
    """Messages for the explicit-Euler resolution checks ``dt*gamma < 1`` and ``dt*(g_L + g_typ) < 1``."""
    g_typ = p.g_max if g_typ is None else g_typ
    msgs = []
    if dt * p.gamma >= 1:
        msgs.append(f"dt*gamma = {dt * p.gamma:.3g} >= 1: conductance relaxation under-resolved")
    if dt * (p.g_l + g_typ) >= 1:
        msgs.append(f"dt*(g_L + g_typ) = {dt * (p.g_l + g_typ):.3g} >= 1: voltage relaxation under-resolved")
    return msgs


def check_stability(p, cfg):
    for msg in stability_warnings(p, cfg.dt):
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


def default_burn_in(p: ModelParams):
    return 20.0 / min(p.gamma, p.g_l)


@dataclass
class Trajectory:
    times: np.ndarray
    v: np.ndarray
    g: np.ndarray

    @property
    def states(self):
        return [State(float(a), float(b)) for a, b in zip(self.v, self.g)]

    def __len__(self):
        return len(self.times)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "v", "g"])
            for row in zip(self.times, self.v, self.g):
                w.writerow([repr(float(x)) for x in row])


def snapshot_times(cfg: SimConfig):
    n_snap = cfg.n_steps // cfg.snapshot_stride + 1
    return np.arange(n_snap) * (cfg.snapshot_stride * cfg.dt)


def step(p: ModelParams, s: State, dt, dW):
    """Advance one Euler step with a caller-supplied increment ``dW ~ N(0, dt)``."""
    if not all(math.isfinite(x) for x in (s.v, s.g, dt, dW)):
        raise NumericError(f"non-finite input to step: state={s}, dt={dt}, dW={dW}")
    check_state(p, s)
    vn, gn = step_arrays(p.packed(), np.array([s.v]), np.array([s.g]), dt, np.array([dW]))
    return State(float(vn[0]), float(gn[0]))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite values in simulation output")


def simulate(p: ModelParams, s0: State, cfg: SimConfig, stream_id=0, threads=1):
    """Single trajectory, storing every ``snapshot_stride``-th state."""
    check_state(p, s0)
    check_stability(p, cfg)
    vs, gs = kernels.run_single(p.packed(), np.array([s0.v]), np.array([s0.g]), cfg.master_seed,
                                np.array([stream_id], dtype=np.uint64), cfg.n_steps, cfg.dt,
                                cfg.snapshot_stride, threads)
    _check_finite(vs, gs)
    return Trajectory(snapshot_times(cfg), vs[:, 0].copy(), gs[:, 0].copy())


# --- initial laws -----------------------------------------------------------

@dataclass(frozen=True)
class PointMass:
    v: float
    g: float

    def sample(self, n, seed, stream_offset=0):
        return np.full(n, float(self.v)), np.full(n, float(self.g))


@dataclass(frozen=True)
class UniformBox:
    """Uniform law on ``[v_lo, v_hi] x [g_lo, g_hi]``."""

    v_lo: float
    v_hi: float
    g_lo: float
    g_hi: float

    def sample(self, n, seed, stream_offset=0):
        streams = np.arange(stream_offset, stream_offset + n, dtype=np.uint64)
        u1, u2 = uniforms(derive_seed(seed, "init"), streams, 0, 0)
        return self.v_lo + (self.v_hi - self.v_lo) * u1, self.g_lo + (self.g_hi - self.g_lo) * u2


@dataclass(frozen=True)
class Explicit:
    v: tuple
    g: tuple

    def sample(self, n, seed, stream_offset=0):
        v, g = np.asarray(self.v, dtype=float), np.asarray(self.g, dtype=float)
        if v.size != n or g.size != n:
            raise ArgumentError(f"explicit initial law has {v.size} points, {n} requested")
        return v.copy(), g.copy()


def uniform_state_space(p: ModelParams):
    return UniformBox(p.v_l, p.v_e, 0.0, p.g_max)


def initial_law_from_dict(d):
    kind = d.get("kind")
    if kind == "point_mass":
        return PointMass(float(d["v"]), float(d["g"]))
    if kind == "uniform_box":
        return UniformBox(float(d["v_lo"]), float(d["v_hi"]), float(d["g_lo"]), float(d["g_hi"]))
    raise ParameterError(f"initial law: unknown kind {kind!r} (expected point_mass or uniform_box)")


def _check_initial(p, v, g):
    if np.any(v < p.v_l) or np.any(v > p.v_e) or np.any(g < 0):
        raise ArgumentError("initial sample outside the state space")


@dataclass
class EnsembleResult:
    cloud: PointCloud
    times: np.ndarray
    v: np.ndarray | None = None  # snapshots, shape (n_snap, n)
    g: np.ndarray | None = None

    def snapshot_clouds(self):
        return [PointCloud.from_states(a, b) for a, b in zip(self.v, self.g)]


def ensemble(p: ModelParams, init_sampler, cfg: SimConfig, n, stream_offset=0,
             keep_snapshots=False, threads=1):
    """``n`` independent trajectories on streams ``stream_offset .. stream_offset+n-1``.

    The final states form the returned cloud; with ``keep_snapshots`` the full
    ``(n_snap, n)`` snapshot arrays are kept as well.  Stream ``i`` of an
    ensemble is bit-identical to ``simulate(..., stream_id=i)`` with the same
    initial state.
    """
    if n < 1:
        raise ArgumentError(f"ensemble size must be >= 1, got {n}")
    if keep_snapshots and cfg.n_steps % cfg.snapshot_stride:
        raise ParameterError("snapshot_stride must divide the number of steps when keeping snapshots")
    check_stability(p, cfg)
    v0, g0 = init_sampler.sample(n, cfg.master_seed, stream_offset)
    _check_initial(p, v0, g0)
    streams = np.arange(stream_offset, stream_offset + n, dtype=np.uint64)
    stride = cfg.snapshot_stride if keep_snapshots else cfg.n_steps
    vs, gs = kernels.run_single(p.packed(), v0, g0, cfg.master_seed, streams, cfg.n_steps,
                                cfg.dt, max(stride, 1), threads)
    _check_finite(vs[-1], gs[-1])
    cloud = PointCloud.from_states(vs[-1], gs[-1])
    if keep_snapshots:
        times = snapshot_times(cfg)
        return EnsembleResult(cloud, times, vs, gs)
    return EnsembleResult(cloud, np.array([0.0, cfg.n_steps * cfg.dt]))
