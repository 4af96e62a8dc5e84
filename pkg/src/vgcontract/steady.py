"""Deterministic steady states, stationary sampling and the small-noise bound.

Fixed points solve ``g = G(V(g))`` with ``V(g) = (g_L V_L + g V_E) / (g_L + g)``.
For constant ``G`` the conductance decouples into an Ornstein-Uhlenbeck
process reflected at zero, whose stationary law is the Gaussian
``N(c, a^2/gamma)`` truncated to ``[0, inf)``; that closed form is the
reference for the sampled invariant measure.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .coupling import sync_rate_theoretical
from .errors import PreconditionError
from .integrator import SimConfig, default_burn_in, ensemble, uniform_state_space
from .model import ModelParams, check_uniqueness_condition
from .transport import PointCloud

SCAN_POINTS = 10_000
BISECT_TOL = 1e-12


@dataclass(frozen=True)
class FixedPoint:
    v_star: float
    g_star: float
    residual: float
    locally_unique: bool = True

    def to_dict(self):
        return {"v_star": self.v_star, "g_star": self.g_star, "residual": self.residual,
                "locally_unique": self.locally_unique}


def _residual_fn(p):
    return lambda g: g - p.G(p.V(g))


def _bisect(f, lo, hi, flo):
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    # endpoint with the smaller residual
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


def fixed_point(p: ModelParams):
    """All roots of ``g - G(V(g))`` on ``[0, G_M]`` found by a sign-change scan and bisection."""
    f = _residual_fn(p)
    grid = np.linspace(0.0, p.g_max, SCAN_POINTS + 1)
    vals = f(grid)
    roots = []
    for i in range(SCAN_POINTS + 1):
        if vals[i] == 0:
            roots.append(float(grid[i]))
        elif i < SCAN_POINTS and vals[i + 1] != 0 and (vals[i] < 0) != (vals[i + 1] < 0):
            roots.append(_bisect(f, float(grid[i]), float(grid[i + 1]), float(vals[i])))
    out = []
    for g in roots:
        out.append(FixedPoint(float(p.V(g)), g, float(abs(f(g))), check_uniqueness_condition(p, g)))
    return out


def reflected_ou_moments(c, gamma, a):
    """Mean and variance of ``N(c, a^2/gamma)`` truncated to ``[0, inf)``."""
    if not (c >= 0 and gamma > 0 and a > 0):
        raise PreconditionError("reflected_ou_moments needs c >= 0, gamma > 0, a > 0")
    sigma = a / math.sqrt(gamma)
    alpha = -c / sigma
    # inverse Mills ratio phi(alpha) / (1 - Phi(alpha)), in log form for large c/sigma
    log_phi = -0.5 * alpha * alpha - 0.5 * math.log(2 * math.pi)
    h = math.exp(log_phi - float(log_ndtr(-alpha)))
    mean = c + sigma * h
    var = sigma * sigma * (1 + alpha * h - h * h)
    return mean, var


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    var: float
    mean_se: float
    var_se: float

    def to_dict(self):
        return {"mean": self.mean, "var": self.var, "mean_se": self.mean_se, "var_se": self.var_se}


def moment_summary(x):
    """Sample mean and variance with their standard errors (independent draws)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    mean = float(x.mean())
    d = x - mean
    var = float(d @ d / (n - 1))
    m4 = float(np.mean(d ** 4))
    var_se = math.sqrt(max(m4 - var * var * (n - 3) / (n - 1), 0.0) / n)
    return MomentSummary(mean, var, math.sqrt(var / n), var_se)


def sample_invariant(p: ModelParams, cfg: SimConfig, n, burn_in=None, stream_offset=0, threads=1):
    """End states of ``n`` independent paths started uniformly on the state box."""
    if not p.a > 0:
        raise PreconditionError("invariant sampling needs a > 0")
    burn_in = default_burn_in(p) if burn_in is None else float(burn_in)
    run = cfg.with_(t_end=burn_in, snapshot_stride=1)
    return ensemble(p, uniform_state_space(p), run, n, stream_offset, threads=threads).cloud


@dataclass(frozen=True)
class NoiseBound:
    lhs: float
    std_error: float
    rhs: float
    holds: bool
    A: float
    lambda_star: float
    v_star: float
    g_star: float
    a: float

    def to_dict(self):
        return dict(self.__dict__)


def noise_bound_check(p: ModelParams, cfg: SimConfig, n=10_000, burn_in=None, threads=1):
    """Monte-Carlo ``E|v - v*|^2 + A E|g - g*|^2`` under the invariant law against ``(A/lambda*) a^2``."""
    if not p.a > 0:
        raise PreconditionError("noise bound needs a > 0")
    rate = sync_rate_theoretical(p)
    fps = fixed_point(p)
    if len(fps) != 1:
        raise PreconditionError(f"expected a unique fixed point, found {len(fps)}")
    fp = fps[0]
    cloud: PointCloud = sample_invariant(p, cfg, n, burn_in, threads=threads)
    v, g = cloud.points[:, 0], cloud.points[:, 1]
    q = (v - fp.v_star) ** 2 + rate.A * (g - fp.g_star) ** 2
    lhs = float(q.mean())
    se = float(q.std(ddof=1) / math.sqrt(q.size))
    rhs = rate.A / rate.lambda_star * p.a ** 2
    return NoiseBound(lhs, se, rhs, lhs <= rhs + 3 * se, rate.A, rate.lambda_star,
                      fp.v_star, fp.g_star, p.a)


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    slope, _ = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope)
