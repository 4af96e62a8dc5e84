"""Parameters, conductance families and the drift of the voltage-conductance SDE.

    dv = [g_L (V_L - v) + g (V_E - v)] dt
    dg = gamma (G(v) - g) dt + sqrt(2) a dB + dL       (g reflected at 0)

The three conductance families have closed-form sup bounds and Lipschitz
constants so that the structural conditions can be evaluated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError


# kernel codes for the conductance families
KIND_CONSTANT = 0
KIND_LOGISTIC = 1
KIND_AFFINE = 2


@dataclass(frozen=True)
class Constant:
    c: float

    variant = "constant"

    def __post_init__(self):
        if not self.c > 0:
            raise ParameterError(f"constant conductance must be positive, got {self.c}")

    def __call__(self, v):
        return np.full(np.shape(v), float(self.c)) if np.ndim(v) else float(self.c)

    def derivative(self, v):
        return np.zeros(np.shape(v)) if np.ndim(v) else 0.0

    @property
    def lipschitz(self):
        return 0.0

    def sup_bound(self, v_l, v_e):
        return float(self.c)

    def min_value(self, v_l, v_e):
        return float(self.c)

    def packed(self):
        return KIND_CONSTANT, (self.c, 0.0, 0.0, 0.0)

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class Logistic:
    """``base + amplitude / (1 + exp(-steepness (v - center)))``."""

    base: float
    amplitude: float
    steepness: float
    center: float

    variant = "logistic"

    def __post_init__(self):
        if self.steepness < 0:
            raise ParameterError("logistic steepness must be >= 0")
        if not (self.base > 0 and self.base + min(self.amplitude, 0.0) > 0):
            raise ParameterError("logistic conductance must stay positive")

    def _sigma(self, v):
        return 1.0 / (1.0 + np.exp(-self.steepness * (np.asarray(v, dtype=float) - self.center)))

    def __call__(self, v):
        x = np.asarray(v, dtype=float)
        out = self.base + self.amplitude / (1.0 + np.exp(-self.steepness * (x - self.center)))
        return out if np.ndim(out) else float(out)

    def derivative(self, v):
        s = self._sigma(v)
        out = self.amplitude * self.steepness * s * (1.0 - s)
        return out if np.ndim(out) else float(out)

    @property
    def lipschitz(self):
        return abs(self.amplitude) * self.steepness / 4.0

    def sup_bound(self, v_l, v_e):
        return float(self.base + max(self.amplitude, 0.0))

    def min_value(self, v_l, v_e):
        return float(min(self(v_l), self(v_e)))

    def packed(self):
        return KIND_LOGISTIC, (self.base, self.amplitude, self.steepness, self.center)

    def params(self):
        return {"base": self.base, "amplitude": self.amplitude,
                "steepness": self.steepness, "center": self.center}


@dataclass(frozen=True)
class AffineClamped:
    """``max(slope * v + intercept, floor)`` with ``floor > 0``."""

    slope: float
    intercept: float
    floor: float

    variant = "affine_clamped"

    def __post_init__(self):
        if not self.floor > 0:
            raise ParameterError("affine conductance floor must be positive")

    def __call__(self, v):
        out = np.maximum(self.slope * np.asarray(v, dtype=float) + self.intercept, self.floor)
        return out if np.ndim(out) else float(out)

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        out = np.where(self.slope * v + self.intercept > self.floor, self.slope, 0.0)
        return out if np.ndim(out) else float(out)

    @property
    def lipschitz(self):
        return abs(self.slope)

    def sup_bound(self, v_l, v_e):
        return float(max(self(v_l), self(v_e)))

    def min_value(self, v_l, v_e):
        return float(min(self(v_l), self(v_e)))

    def packed(self):
        return KIND_AFFINE, (self.slope, self.intercept, self.floor, 0.0)

    def params(self):
        return {"slope": self.slope, "intercept": self.intercept, "floor": self.floor}


ConductanceSpec = Constant | Logistic | AffineClamped

_VARIANTS = {cls.variant: cls for cls in (Constant, Logistic, AffineClamped)}


def conductance_to_dict(G):
    return {"variant": G.variant, **G.params()}


def conductance_from_dict(d):
    d = dict(d)
    try:
        cls = _VARIANTS[d.pop("variant")]
    except KeyError as exc:
        raise ParameterError(f"unknown or missing conductance variant: {exc}") from None
    return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class ModelParams:
    v_l: float
    v_e: float
    g_l: float
    gamma: float
    a: float
    G: ConductanceSpec = field(default_factory=lambda: Constant(0.5))

    def __post_init__(self):
        errors = validate_params(self.v_l, self.v_e, self.g_l, self.gamma, self.a)
        if errors:
            raise ParameterError("; ".join(errors))

    @property
    def width(self):
        return self.v_e - self.v_l

    @property
    def g_max(self):
        return self.G.sup_bound(self.v_l, self.v_e)

    def V(self, g):
        """Voltage nullcline ``(g_L V_L + g V_E) / (g_L + g)``."""
        return (self.g_l * self.v_l + g * self.v_e) / (self.g_l + g)

    def with_(self, **changes):
        d = {"v_l": self.v_l, "v_e": self.v_e, "g_l": self.g_l,
             "gamma": self.gamma, "a": self.a, "G": self.G}
        d.update(changes)
        return ModelParams(**d)

    def packed(self):
        """Flat float64 vector consumed by the simulation kernels."""
        kind, coeffs = self.G.packed()
        return np.array([self.v_l, self.v_e, self.g_l, self.gamma, self.a, float(kind), *coeffs],
                        dtype=np.float64)

    def to_dict(self):
        return {"v_l": self.v_l, "v_e": self.v_e, "g_l": self.g_l, "gamma": self.gamma,
                "a": self.a, "conductance": conductance_to_dict(self.G)}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"v_l", "v_e", "g_l", "gamma", "a", "conductance"}
        if unknown:
            raise ParameterError(f"unknown model keys: {sorted(unknown)}")
        G = conductance_from_dict(d["conductance"]) if "conductance" in d else Constant(0.5)
        return cls(float(d["v_l"]), float(d["v_e"]), float(d["g_l"]), float(d["gamma"]),
                   float(d["a"]), G)


def validate_params(v_l, v_e, g_l, gamma, a):
    """All violated parameter constraints, as field-named messages."""
    errors = []
    if not v_l < v_e:
        errors.append(f"v_l: must be < v_e (got v_l={v_l}, v_e={v_e})")
    if not g_l > 0:
        errors.append(f"g_l: must be > 0 (got {g_l})")
    if not gamma > 0:
        errors.append(f"gamma: must be > 0 (got {gamma})")
    if not a >= 0:
        errors.append(f"a: must be >= 0 (got {a})")
    return errors


@dataclass(frozen=True)
class State:
    v: float
    g: float


def check_state(p: ModelParams, s: State):
    if not (p.v_l <= s.v <= p.v_e):
        raise DomainError(f"v={s.v} outside [{p.v_l}, {p.v_e}]")
    if not s.g >= 0:
        raise DomainError(f"g={s.g} is negative")


def eval_conductance(G, v, domain=None):
    """Evaluate ``G(v)``; with ``domain=(V_L, V_E)`` out-of-range voltages raise."""
    if domain is not None:
        lo, hi = domain
        if np.any(np.asarray(v) < lo) or np.any(np.asarray(v) > hi):
            raise DomainError(f"v={v} outside [{lo}, {hi}]")
    return G(v)


def conductance_lipschitz(G):
    return G.lipschitz


def drift(p: ModelParams, s: State):
    """Deterministic vector field at ``s``: ``(dv/dt, dg/dt)``."""
    check_state(p, s)
    dv = p.g_l * (p.v_l - s.v) + s.g * (p.v_e - s.v)
    dg = p.gamma * (eval_conductance(p.G, s.v) - s.g)
    return dv, dg


def check_sync_condition(p: ModelParams):
    """Synchronous-contraction condition ``(V_E - V_L) ||G'|| < g_L``.

    Returns ``(holds, margin)`` with ``margin = g_L - (V_E - V_L) ||G'||``.
    """
    margin = p.g_l - p.width * p.G.lipschitz
    return margin > 0, margin


def check_uniqueness_condition(p: ModelParams, g):
    """Local uniqueness condition ``G'(V(g)) (V_E - V(g)) < g_L + g``."""
    if g < 0:
        raise DomainError(f"g={g} is negative")
    vg = p.V(g)
    return bool(p.G.derivative(vg) * (p.v_e - vg) < p.g_l + g)


def sup_abs_derivative_sampled(G, v_l, v_e, n=100_001):
    """Dense-grid estimate of ``sup |G'|`` used to validate analytic bounds."""
    grid = np.linspace(v_l, v_e, n)
    return float(np.max(np.abs(G.derivative(grid))))


def is_finite_state(v, g):
    return math.isfinite(v) and math.isfinite(g)
