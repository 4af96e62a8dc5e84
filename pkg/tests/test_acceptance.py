"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints a single ``[A<k>] PASS|FAIL ...`` line; the lines are also
collected in ``RESULTS`` and repeated in the pytest terminal summary.  Run
``python tests/test_acceptance.py`` for the lines alone.
"""

import itertools
import math
import time
import warnings

import numpy as np
import pytest
from scipy.stats import ks_2samp

from vgcontract.coupling import (Independent, L1Gap, Mirror, Synchronous, WeightedNorm, coupled_ensemble,
                                 fit_decay_rate, sync_rate_theoretical)
from vgcontract.integrator import PointMass, SimConfig, UniformBox, ensemble
from vgcontract.metric import build_distance_spec, envelope_violations
from vgcontract.model import Constant, Logistic, ModelParams
from vgcontract.network import (ConstantKernel, MeanFieldSpec, ProductLogistic, chaos_study, eta,
                                network_coupled_simulate, network_ensemble, shifted)
from vgcontract.steady import (fixed_point, loglog_slope, moment_summary, noise_bound_check,
                               reflected_ou_moments, sample_invariant)
from vgcontract.transport import PointCloud, w_bruteforce, w_exact, w_subsampled

pytestmark = pytest.mark.acceptance

CONST = ModelParams(0.0, 1.0, 1.0, 1.0, 0.3, Constant(0.5))
SYNC = ModelParams(0.0, 1.0, 1.0, 1.0, 0.3, Logistic(1.0, 1.0, 2.0, 0.5))
STEEP = ModelParams(0.0, 1.0, 1.0, 1.0, 0.3, Logistic(0.2, 2.6, 8.0, 0.5))

RESULTS = []


def report(tag, ok, detail, t0):
    line = f"[{tag}] {'PASS' if ok else 'FAIL'} {detail} ({time.perf_counter() - t0:.1f}s)"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_a1_reflected_ou_oracle():
    t0 = time.perf_counter()
    cloud = sample_invariant(CONST, SimConfig(dt=1e-3, master_seed=101), 100_000, burn_in=20.0)
    s = moment_summary(cloud.points[:, 1])
    mean, var = reflected_ou_moments(0.5, 1.0, 0.3)
    zm, zv = (s.mean - mean) / s.mean_se, (s.var - var) / s.var_se
    report("A1", abs(zm) <= 3 and abs(zv) <= 3,
           f"mean {s.mean:.5f} vs {mean:.5f} (z={zm:+.2f}), var {s.var:.5f} vs {var:.5f} (z={zv:+.2f})", t0)


def test_a2_synchronous_pathwise_contraction():
    t0 = time.perf_counter()
    A, lam = sync_rate_theoretical(SYNC)
    rng = np.random.default_rng(102)
    n = 100
    init = (rng.uniform(0, 1, n), rng.uniform(0, SYNC.g_max, n), rng.uniform(0, 1, n), rng.uniform(0, SYNC.g_max, n))
    cfg = SimConfig(dt=1e-3, t_end=10.0, snapshot_stride=1, master_seed=102)
    res = coupled_ensemble(SYNC, init, cfg, Synchronous(), WeightedNorm(A))
    D = res.values
    worst = float(np.max(D[1:] - D[:-1] * (1 + 10 * cfg.dt)))
    rate, r2 = fit_decay_rate(res.mean_series, window=(0.0, 5.0))
    report("A2", worst <= 0 and rate >= 1.8 * lam,
           f"max step excess {worst:.2e}, fitted rate {rate:.4f} >= 1.8*lambda*={1.8 * lam:.4f} (r2={r2:.4f})", t0)


def test_a3_fixed_point():
    t0 = time.perf_counter()
    worst_closed, worst_res, roots = 0.0, 0.0, 0
    for c, g_l in ((0.5, 1.0), (0.2, 2.0), (3.0, 0.5), (1e-3, 1.0)):
        p = ModelParams(0.0, 1.0, g_l, 1.0, 0.3, Constant(c))
        (fp,) = fixed_point(p)
        v_exact = (g_l * p.v_l + c * p.v_e) / (g_l + c)
        worst_closed = max(worst_closed, abs(fp.g_star - c), abs(fp.v_star - v_exact))
    for p in (CONST, SYNC, STEEP, ModelParams(0.0, 1.0, 1.0, 1.0, 0.3, Logistic(0.05, 3.0, 20.0, 0.5))):
        for fp in fixed_point(p):
            roots += 1
            worst_res = max(worst_res, abs(fp.g_star - float(p.G(p.V(fp.g_star)))))
    report("A3", worst_closed <= 1e-10 and worst_res <= 1e-10,
           f"closed-form error {worst_closed:.1e}, max residual {worst_res:.1e} over {roots} roots", t0)


def test_a4_noise_bound():
    t0 = time.perf_counter()
    a_values = [0.05, 0.1, 0.2, 0.4]
    rows = [noise_bound_check(SYNC.with_(a=a), SimConfig(dt=1e-3, master_seed=104), n=10_000) for a in a_values]
    slope = loglog_slope(a_values, [r.lhs for r in rows])
    ok = all(r.holds for r in rows) and 1.8 <= slope <= 2.2
    worst = max(r.lhs / r.rhs for r in rows)
    report("A4", ok, f"max lhs/rhs {worst:.4f}, log-log slope {slope:.3f}", t0)


def test_a5_noise_induced_contraction():
    t0 = time.perf_counter()
    n = 10_000
    kind = Mirror(1e-3)
    cfg = SimConfig(dt=1e-3, t_end=20.0, snapshot_stride=20_000, master_seed=105)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = coupled_ensemble(STEEP, (np.zeros(n), np.zeros(n), np.ones(n), np.full(n, 3.0)), cfg, kind, L1Gap())
    clouds = [(PointCloud.from_states(res.v[k], res.g[k]), PointCloud.from_states(res.v_prime[k], res.g_prime[k]))
              for k in (0, -1)]
    w0, se0 = w_subsampled(*clouds[0], p=1, n_sub=512, reps=8, seed=5)
    wT, seT = w_subsampled(*clouds[1], p=1, n_sub=512, reps=8, seed=5)
    ok = wT + 3 * seT < 0.2 * (w0 - 3 * se0)
    report("A5", ok, f"W1 {w0:.4f}+-{se0:.4f} at T=0, {wT:.4f}+-{seT:.4f} at T=20", t0)


def test_a6_coupling_marginal_consistency():
    t0 = time.perf_counter()
    n = 10_000
    cfg = SimConfig(dt=1e-3, t_end=5.0, snapshot_stride=5000, master_seed=106)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = coupled_ensemble(STEEP, (np.zeros(n), np.zeros(n), np.ones(n), np.full(n, 3.0)), cfg,
                               Mirror(1e-3), L1Gap())
    ind = ensemble(STEEP, PointMass(0.0, 0.0), cfg, n, stream_offset=10 * n)
    stat = ks_2samp(res.v[-1], ind.cloud.points[:, 0]).statistic
    crit = math.sqrt(-0.5 * math.log(0.01 / 2)) * math.sqrt(2.0 / n)
    report("A6", stat < crit, f"KS statistic {stat:.4f} < 1% critical value {crit:.4f}", t0)


def test_a7_transport_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(107)
    checked = mismatches = 0
    for i in range(200):
        n = int(rng.integers(1, 7))
        dim = int(rng.integers(1, 4))
        if i % 3 == 0:
            x, y = rng.integers(0, 4, (n, dim)) / 4.0, rng.integers(0, 4, (n, dim)) / 4.0
        else:
            x, y = rng.normal(size=(n, dim)), rng.normal(size=(n, dim))
        c1, c2 = PointCloud(x), PointCloud(y)
        for norm, p in itertools.product(("euclidean", "ell1"), (1, 2)):
            checked += 1
            mismatches += w_exact(c1, c2, p, norm) != w_bruteforce(c1, c2, p, norm)
    report("A7", mismatches == 0, f"{mismatches} mismatches in {checked} comparisons", t0)


def test_a8_metric_envelopes():
    t0 = time.perf_counter()
    rng = np.random.default_rng(108)
    specs = {"closed-form": build_distance_spec(STEEP),
             "k=0.01,xi=0.2": build_distance_spec(STEEP, 0.2, {"k": 0.01}),
             "R*=2.2": build_distance_spec(STEEP, None, {"R_star": 2.2, "k": 0.5})}
    total, n = 0, 1_000_000
    counts = {}
    for name, spec in specs.items():
        x = rng.uniform(0, STEEP.width, n)
        y = rng.uniform(0, 3 * spec.R_star, n)
        v = envelope_violations(spec, x, y)
        counts[name] = sum(v.values())
        total += counts[name]
    report("A8", total == 0, f"violations per spec {counts} on {n} pairs each", t0)


def test_a9_chaos_scaling():
    t0 = time.perf_counter()
    spec = MeanFieldSpec(Constant(0.3), ProductLogistic(0.2, 0.5, 2.0, 0.5))
    out = chaos_study(spec, CONST, [8, 32, 128], SimConfig(dt=1e-3, t_end=2.0, master_seed=109), reps=64)
    ok = -0.7 <= out["slope"] <= -0.3 and out["r2"] >= 0.9
    errs = ", ".join(f"{e:.5f}" for e in out["errors"])
    report("A9", ok, f"errors [{errs}], slope {out['slope']:.3f}, r2 {out['r2']:.3f}", t0)


def test_a10_mean_field_regime():
    t0 = time.perf_counter()
    p = STEEP
    dist = build_distance_spec(p, 0.2, {"k": 0.01})
    spec = MeanFieldSpec(p.G, ProductLogistic(0.05, 0.1, 1.0, 0.5))
    kind = Mirror(0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        single = coupled_ensemble(p.with_(G=shifted(p.G, 0.05)),
                                  (np.zeros(2000), np.zeros(2000), np.ones(2000), np.full(2000, 3.0)),
                                  SimConfig(dt=1e-3, t_end=10.0, snapshot_stride=100, master_seed=110), kind, dist)
        rate, _ = fit_decay_rate(single.mean_series, window=(0.0, 10.0))
        e = eta(spec, p, dist)
        net = network_coupled_simulate(spec, p, 16, SimConfig(dt=1e-3, t_end=20.0, snapshot_stride=1000,
                                                              master_seed=111),
                                       kind, dist, (0.0, 0.0, 1.0, 3.0), R=64)
    s = net.rho_series.values
    decay = s[0] / s[-1] if s[-1] > 0 else math.inf

    const = MeanFieldSpec(p.G, ConstantKernel(0.3))
    cfg = SimConfig(dt=1e-3, t_end=5.0, snapshot_stride=5000, master_seed=112)
    _, vs, gs = network_ensemble(const, p, 16, cfg, 64, init=PointMass(0.2, 0.5))
    ref = ensemble(const.decoupled_model(p), PointMass(0.2, 0.5), cfg, 1024, stream_offset=10 ** 6)
    z = []
    for a, b in ((vs[-1].ravel(), ref.cloud.points[:, 0]), (gs[-1].ravel(), ref.cloud.points[:, 1])):
        sa, sb = moment_summary(a), moment_summary(b)
        z.append(abs(sa.mean - sb.mean) / math.hypot(sa.mean_se, sb.mean_se))
    ok = e < rate and decay >= 5 and max(z) <= 3
    report("A10", ok, f"eta {e:.4f} < rate {rate:.4f}, sum-rho decay x{decay:.1f}, "
                      f"decoupling |z| v {z[0]:.2f} g {z[1]:.2f}", t0)


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_a"):
            try:
                fn()
            except AssertionError:
                pass
