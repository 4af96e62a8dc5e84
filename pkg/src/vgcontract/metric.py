"""Concave modified distance ``rho(theta1(|v - v'|) + theta2(|g - g'|))``.

``theta1`` and ``theta2`` reweight the voltage and conductance gaps (the
conductance weight switches from ``m`` near zero to ``M`` at large gaps) and
``rho`` is concave up to ``R_star`` with ``rho'' = -2 k r rho'``.  Under this
distance the mirror-coupled pair contracts on average even when the drift
alone does not.

The constants follow closed formulas in ``(g_L, gamma, ||G'||, V_E - V_L, a)``.
For realistic parameters ``k R_star**2`` is in the hundreds of thousands, so
``exp(-k R_star**2)`` underflows; everything that involves it is computed in
log space, and ``DistanceSpec`` accepts overrides of ``(m, M, R_star, k)`` to
obtain a finite monitor for experiments.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erf

from .errors import ArgumentError, ParameterError, PreconditionError
from .model import ModelParams, State

log = logging.getLogger(__name__)

_SQRT_PI = math.sqrt(math.pi)


class SynchronousRegime(PreconditionError):
    """``M <= m`` (or ``||G'|| = 0``): the synchronous contraction already applies."""


def smoothstep3(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _smoothstep3_integral(t):
    # integral_0^t (3s^2 - 2s^3) ds, t clipped to [0, 1]
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 - 0.5 * t ** 4


@dataclass(frozen=True)
class DistanceSpec:
    m: float
    M: float
    R_star: float
    k: float
    xi: float
    log_lambda_closed_form: float
    closed_form: dict = field(default_factory=dict)
    overridden: bool = False
    ramp: str = "smoothstep"
    ramp_delta: float = 0.0

    def __post_init__(self):
        errs = []
        if not 0 < self.m < self.M:
            errs.append(f"need 0 < m < M (got m={self.m}, M={self.M})")
        if not self.R_star >= 2 + self.xi:
            errs.append(f"need R_star >= 2 + xi (got {self.R_star})")
        if not self.k >= 0:
            errs.append(f"need k >= 0 (got {self.k})")
        if not 0 < self.xi <= 1:
            errs.append(f"need xi in (0, 1] (got {self.xi})")
        if errs:
            raise ParameterError("; ".join(errs))

    @property
    def kR2(self):
        return self.k * self.R_star ** 2

    @property
    def log_rho_slope_floor(self):
        """``log`` of the lower bound ``exp(-k R_star^2 - xi)`` on ``rho'``."""
        return -self.kR2 - self.xi

    def log_lambda(self, p: ModelParams):
        """Log of the contraction rate formula evaluated with the effective constants."""
        return math.log(_rate_prefactor(p, self.M, self.R_star)) - self.kR2

    def report(self):
        return {
            "m": self.m, "M": self.M, "R_star": self.R_star, "k": self.k, "xi": self.xi,
            "k_R_star_sq": self.kR2, "log_lambda_closed_form": self.log_lambda_closed_form,
            "overridden": self.overridden, "closed_form": dict(self.closed_form),
        }


def _rate_prefactor(p, M, R_star):
    return min(1.0, p.g_l / (2 + 2 * M), p.gamma / 8, p.gamma * M * R_star / (8 * p.width))


def closed_form_constants(p: ModelParams, xi, lipschitz=None):
    """``(m, M, R_star, k, log_lambda)`` from the model; ``lipschitz`` replaces ``||G'||``."""
    L = p.G.lipschitz if lipschitz is None else float(lipschitz)
    if L <= 0:
        raise SynchronousRegime("||G'|| = 0: m diverges, the synchronous contraction applies")
    width = p.width
    m = p.g_l / (2 * p.gamma * L)
    M = 4 * width / p.gamma
    R_star = max(2 * L * width, 2 + xi)
    if M <= m:
        raise SynchronousRegime(f"M={M:.4g} <= m={m:.4g}: the synchronous contraction applies")
    if not p.a > 0:
        raise PreconditionError("the noise-induced contraction needs a > 0")
    a2 = p.a ** 2
    k = (1.0 / (8 * a2 * m * m)) * (1 + (width + 4 * a2 * (M - m)) / m + m * p.gamma * L)
    log_lam = math.log(_rate_prefactor(p, M, R_star)) - k * R_star ** 2
    return {"m": m, "M": M, "R_star": R_star, "k": k, "log_lambda": log_lam,
            "k_R_star_sq": k * R_star ** 2}


def build_distance_spec(p: ModelParams, xi=None, overrides=None, lipschitz=None):
    """Distance constants for ``p``.

    Closed-form defaults are always computed (and logged in log scale); entries of
    ``overrides`` (any of ``m, M, R_star, k``) replace them in the returned
    spec.  Raises :class:`SynchronousRegime` when ``M <= m`` and
    :class:`PreconditionError` when ``a = 0``.
    """
    xi = 1e-3 * p.width if xi is None else float(xi)
    if not 0 < xi <= 1:
        raise ParameterError(f"xi must lie in (0, 1], got {xi}")
    cf = closed_form_constants(p, xi, lipschitz)
    log.info("closed-form distance constants: m=%.6g M=%.6g R_star=%.6g k=%.6g k*R^2=%.6g log(lambda)=%.6g",
             cf["m"], cf["M"], cf["R_star"], cf["k"], cf["k_R_star_sq"], cf["log_lambda"])
    chosen = {key: cf[key] for key in ("m", "M", "R_star", "k")}
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(chosen)
    if unknown:
        raise ParameterError(f"unknown distance overrides: {sorted(unknown)}")
    chosen.update({key: float(val) for key, val in overrides.items()})
    spec = DistanceSpec(xi=xi, log_lambda_closed_form=cf["log_lambda"], closed_form=cf,
                        overridden=bool(overrides), **chosen)
    if spec.m > 8.0 / 3.0:
        log.warning("m=%.4g > 8/3: the lower envelope theta2(r) >= m r - xi fails just above xi/2", spec.m)
    return _with_ramp(spec)


def custom_distance_spec(m, M, R_star, k, xi):
    """Spec from explicit constants, with no model attached (tests, monitors)."""
    spec = DistanceSpec(m=m, M=M, R_star=R_star, k=k, xi=xi, log_lambda_closed_form=float("nan"),
                        overridden=True)
    return _with_ramp(spec)


def _with_ramp(spec):
    length = spec.R_star - 1.0
    if 1.5 / length <= 1.0:
        return replace(spec, ramp="smoothstep", ramp_delta=0.0)
    # short ramp: trapezoidal theta2'' keeps the peak <= M - m and theta2' = M at R_star
    delta = min(0.25 * length, length - 1.0)
    return replace(spec, ramp="trapezoid", ramp_delta=delta)


def _nonneg(r, name):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ArgumentError(f"{name} must be non-negative")
    return r


def _out(x):
    return x if np.ndim(x) else float(x)


def theta1(spec: DistanceSpec, x):
    """Voltage-gap weight: 0 on ``[0, xi/4]``, slope ramps to 1 by ``xi``."""
    x = _nonneg(x, "voltage gap")
    lo, L = 0.25 * spec.xi, 0.75 * spec.xi
    ramp = L * _smoothstep3_integral((x - lo) / L)
    return _out(np.where(x <= spec.xi, ramp, 0.5 * L + (x - spec.xi)))


def theta1_prime(spec, x):
    x = np.asarray(x, dtype=float)
    return _out(smoothstep3((x - 0.25 * spec.xi) / (0.75 * spec.xi)))


def _trap_integrals(spec, r):
    """theta2' - m and theta2 - theta2(1) - m (r-1) on the trapezoid ramp."""
    L, d = spec.R_star - 1.0, spec.ramp_delta
    peak = (spec.M - spec.m) / (L - d)
    s = np.clip(r - 1.0, 0.0, L)
    # theta2'' = peak * min(s/d, 1, (L-s)/d)
    a = np.minimum(s, d)
    c = np.clip(s - (L - d), 0.0, d)
    mid = np.clip(s - d, 0.0, L - 2 * d)
    # first antiderivative: integral of theta2'' over [0, s]
    d1 = peak * (a * a / (2 * d) + mid + c - c * c / (2 * d))
    # second antiderivative: integral of d1 over [0, s], piecewise
    up = peak * a ** 3 / (6 * d)
    flat = peak * (d / 2 * mid + mid * mid / 2)
    down_base = peak * (d / 2 + (L - 2 * d)) * c
    down = down_base + peak * (c * c / 2 - c ** 3 / (6 * d))
    return d1, up + flat + down


def theta2_prime(spec, y):
    y = np.asarray(y, dtype=float)
    m, M, xi = spec.m, spec.M, spec.xi
    low = m * smoothstep3((y - 0.25 * xi) / (0.25 * xi))
    if spec.ramp == "smoothstep":
        high = m + (M - m) * smoothstep3((y - 1.0) / (spec.R_star - 1.0))
    else:
        high = m + _trap_integrals(spec, y)[0]
    return _out(np.where(y <= 0.5 * xi, low, np.where(y <= 1.0, m, high)))


def theta2(spec: DistanceSpec, y):
    """Conductance-gap weight with slope ``m`` on ``[xi/2, 1]`` and ``M`` beyond ``R_star``."""
    y = _nonneg(y, "conductance gap")
    m, M, xi, R = spec.m, spec.M, spec.xi, spec.R_star
    L1 = 0.25 * xi
    at_half = m * L1 * 0.5
    at_one = at_half + m * (1.0 - 0.5 * xi)
    L2 = R - 1.0
    if spec.ramp == "smoothstep":
        ramp = at_one + m * (np.minimum(y, R) - 1.0) + (M - m) * L2 * _smoothstep3_integral((y - 1.0) / L2)
        at_R = at_one + m * L2 + (M - m) * L2 * 0.5
    else:
        yc = np.clip(y, 1.0, R)
        ramp = at_one + m * (yc - 1.0) + _trap_integrals(spec, yc)[1]
        at_R = at_one + m * L2 + float(_trap_integrals(spec, np.array(R))[1])
    out = np.where(
        y <= 0.5 * xi, m * L1 * _smoothstep3_integral((y - L1) / L1),
        np.where(y <= 1.0, at_half + m * (y - 0.5 * xi),
                 np.where(y <= R, ramp, at_R + M * (y - R))))
    return _out(out)


def rho(spec: DistanceSpec, r):
    """``int_0^r exp(-k min(s, R_star)^2) ds`` (Gaussian integral, linear past ``R_star``)."""
    r = _nonneg(r, "distance")
    k, R = spec.k, spec.R_star
    if k == 0:
        return _out(r.astype(float))
    sk = math.sqrt(k)
    c = _SQRT_PI / (2 * sk)
    rc = np.minimum(r, R)
    x = sk * rc
    # series for small arguments keeps rho(r) <= r exactly
    small = x < 1e-4
    inner = np.where(small, rc * (1.0 - x * x / 3.0), c * erf(x))
    tail = math.exp(-k * R * R) * np.maximum(r - R, 0.0)
    return _out(inner + tail)


def log_rho(spec: DistanceSpec, r):
    """``log rho(r)``, accurate when ``exp(-k R_star^2)`` underflows (``-inf`` at 0)."""
    r = np.asarray(r, dtype=float)
    k, R = spec.k, spec.R_star
    with np.errstate(divide="ignore"):
        if k == 0:
            return _out(np.log(r))
        inner = np.log(rho(spec, np.minimum(r, R)))
        excess = np.maximum(r - R, 0.0)
        tail = -k * R * R + np.log(excess)
    return _out(np.where(r > R, np.logaddexp(inner, tail), inner))


def rho_prime(spec, r):
    r = np.asarray(r, dtype=float)
    return _out(np.exp(-spec.k * np.minimum(r, spec.R_star) ** 2))


def rho_distance(spec: DistanceSpec, z: State, zp: State):
    return float(rho(spec, theta1(spec, abs(z.v - zp.v)) + theta2(spec, abs(z.g - zp.g))))


def rho_distance_arrays(spec: DistanceSpec, x, y):
    """Vectorised ``rho(theta1(x) + theta2(y))`` on gap arrays."""
    return rho(spec, theta1(spec, np.abs(x)) + theta2(spec, np.abs(y)))


def envelope_violations(spec: DistanceSpec, x, y):
    """Count violations of the four sandwich inequalities on gap arrays.

    Checked, in log-safe form where ``exp(k R_star^2)`` would overflow::

        rho(R) <= R,  R <= x + M y,  exp(k R*^2 + xi) rho(R) >= R,  R >= x + m y - 2 xi
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    R = theta1(spec, x) + theta2(spec, y)
    rr = rho(spec, R)
    upper_rho = np.count_nonzero(rr > R)
    upper_R = np.count_nonzero(R > x + spec.M * y)
    lrho = log_rho(spec, R)
    pos = R > 0
    with np.errstate(divide="ignore"):
        lower_rho = np.count_nonzero(pos & (np.log(np.where(pos, R, 1.0)) > spec.kR2 + spec.xi + lrho))
    low = x + spec.m * y - 2 * spec.xi
    lower_R = np.count_nonzero(R < low)
    return {"rho<=R": int(upper_rho), "R<=x+My": int(upper_R),
            "exp(kR^2+xi)rho>=R": int(lower_rho), "R>=x+my-2xi": int(lower_R)}
