import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.stats import ks_2samp

from vgcontract.coupling import Mirror, Synchronous, coupled_ensemble
from vgcontract.errors import ArgumentError, ParameterError
from vgcontract.integrator import PointMass, SimConfig, UniformBox, ensemble
from vgcontract.metric import build_distance_spec, custom_distance_spec
from vgcontract.model import AffineClamped, Constant, Logistic, ModelParams
from vgcontract.network import (ConstantKernel, MeanFieldSpec, ProductLogistic, chaos_error,
                                derivative_bounds, eta, eta_from_bounds, log_eta, mckean_simulate,
                                network_coupled_simulate, network_run, network_simulate,
                                network_streams, shifted)
from vgcontract.transport import w_subsampled

H1 = ProductLogistic(0.05, 0.4, 3.0, 0.4)


@pytest.fixture
def spec(steep_model):
    return MeanFieldSpec(steep_model.G, H1)


def test_kernel_bounds_dominate_samples(steep_model):
    v, w = np.meshgrid(np.linspace(0, 1, 801), np.linspace(0, 1, 801))
    b = H1.bounds(0.0, 1.0)
    assert H1(v, w).max() <= b["sup"] + 1e-15 and H1(v, w).min() > 0
    assert np.abs(H1.dv(v, w)).max() <= b["sup_dv"] + 1e-15
    assert np.abs(H1.dv(w, v)).max() <= b["sup_dw"] + 1e-15
    # the bound is attained at the clipped centre
    assert np.abs(H1.dv(v, w)).max() == pytest.approx(b["sup_dv"], rel=1e-5)
    edge = ProductLogistic(0.1, 0.4, 3.0, 2.0)
    assert edge.bounds(0.0, 1.0)["sup_dv"] == pytest.approx(abs(edge.dv(1.0, 1.0)), rel=1e-14)
    with pytest.raises(ParameterError):
        ProductLogistic(0.1, -0.2, 1.0, 0.5)


def test_eta_examples(steep_model, spec):
    dist = custom_distance_spec(0.1, 4.0, 10.4, 0.01, 0.1)
    assert eta(MeanFieldSpec(steep_model.G, ConstantKernel(0.3)), steep_model, dist) == 0.0
    e = eta(spec, steep_model, dist)
    d = spec.bounds(steep_model)["sup_dw"]
    assert e == pytest.approx(4.0 * 1.0 * d * math.exp(0.01 * 10.4 ** 2), rel=1e-14)
    doubled = MeanFieldSpec(steep_model.G, ProductLogistic(0.05, 0.8, 3.0, 0.4))
    assert eta(doubled, steep_model, dist) == pytest.approx(2 * e, rel=1e-14)
    for N in (2, 10, 100):
        assert eta_from_bounds(derivative_bounds(spec, steep_model, N), steep_model, dist) == \
            pytest.approx(e, rel=1e-13)
    default = build_distance_spec(steep_model)
    assert eta(spec, steep_model, default) == math.inf
    assert log_eta(spec, steep_model, default) == pytest.approx(math.log(4 * d) + default.kR2, rel=1e-15)


def test_shifted_families():
    for G in (Constant(0.5), Logistic(0.2, 2.6, 8.0, 0.5), AffineClamped(0.4, 0.1, 0.05)):
        v = np.linspace(0, 1, 11)
        np.testing.assert_allclose(shifted(G, 0.3)(v), G(v) + 0.3, rtol=0, atol=1e-15)


def test_exchangeability_is_exact(spec, steep_model):
    cfg = SimConfig(dt=1e-3, t_end=1.0, snapshot_stride=250, master_seed=6)
    rng = np.random.default_rng(1)
    v0, g0 = rng.uniform(0, 1, (1, 7)), rng.uniform(0, 3, (1, 7))
    st = network_streams(1, 7)
    perm = rng.permutation(7)
    vs, gs = network_run(spec, steep_model, v0, g0, cfg, st)
    vp, gp = network_run(spec, steep_model, v0[:, perm], g0[:, perm], cfg, st[:, perm])
    assert np.array_equal(vs[..., perm], vp) and np.array_equal(gs[..., perm], gp)


def test_two_neuron_ode_reference(steep_model):
    p0 = steep_model.with_(a=0.0)
    spec = MeanFieldSpec(p0.G, H1)

    def rhs(t, y):
        v1, v2, g1, g2 = y
        G1 = p0.G(v1) + H1(v1, v2)
        G2 = p0.G(v2) + H1(v2, v1)
        return [p0.g_l * (p0.v_l - v1) + g1 * (p0.v_e - v1), p0.g_l * (p0.v_l - v2) + g2 * (p0.v_e - v2),
                p0.gamma * (G1 - g1), p0.gamma * (G2 - g2)]

    y0 = [0.1, 0.8, 0.3, 2.0]
    ref = solve_ivp(rhs, (0, 1), y0, method="DOP853", rtol=1e-12, atol=1e-12).y[:, -1]
    vs, gs = network_run(spec, p0, [[0.1, 0.8]], [[0.3, 2.0]], SimConfig(dt=1e-5, t_end=1.0, snapshot_stride=100_000),
                         network_streams(1, 2))
    got = np.concatenate([vs[-1, 0], gs[-1, 0]])
    assert np.max(np.abs(got - ref)) < 1e-4


def test_constant_kernel_decouples(steep_model):
    spec = MeanFieldSpec(steep_model.G, ConstantKernel(0.3))
    single = spec.decoupled_model(steep_model)
    cfg = SimConfig(dt=1e-3, t_end=1.0, snapshot_stride=1000, master_seed=12)
    tr = network_simulate(spec, steep_model, 4, cfg)
    ref = ensemble(single, UniformBox(0.0, 1.0, 0.0, spec.g_max(steep_model)), cfg, 4)
    np.testing.assert_allclose(tr.v[-1], ref.cloud.points[:, 0], rtol=0, atol=1e-10)
    np.testing.assert_allclose(tr.g[-1], ref.cloud.points[:, 1], rtol=0, atol=1e-10)
    m = mckean_simulate(spec, steep_model, 4, cfg)
    np.testing.assert_allclose(m.v[-1], tr.v[-1], rtol=0, atol=1e-10)
    with pytest.raises(ParameterError):
        MeanFieldSpec(steep_model.G, H1).decoupled_model(steep_model)


def test_network_marginal_matches_single_neuron_law(steep_model):
    spec = MeanFieldSpec(steep_model.G, ConstantKernel(0.3))
    cfg = SimConfig(dt=1e-3, t_end=2.0, snapshot_stride=2000, master_seed=13)
    from vgcontract.network import network_ensemble
    _, vs, _ = network_ensemble(spec, steep_model, 8, cfg, 250, init=PointMass(0.2, 0.5))
    ref = ensemble(spec.decoupled_model(steep_model), PointMass(0.2, 0.5), cfg.with_(master_seed=14), 2000)
    assert ks_2samp(vs[-1].ravel(), ref.cloud.points[:, 0]).pvalue > 0.01


def test_coupled_networks(spec, steep_model, quiet):
    dist = custom_distance_spec(0.1, 4.0, 10.4, 0.01, 0.2)
    cfg = SimConfig(dt=1e-3, t_end=1.0, snapshot_stride=100)
    same = network_coupled_simulate(spec, steep_model, 5, cfg, Synchronous(), dist, (0.3, 1.0, 0.3, 1.0), R=3)
    assert np.all(same.rho_sum == 0) and np.all(same.l1 == 0)
    res = network_coupled_simulate(spec, steep_model, 5, cfg.with_(t_end=6.0), Mirror(0.2), dist,
                                   (0.0, 0.0, 1.0, 3.0), R=16)
    s = res.rho_series
    assert s.values[-1] < 0.5 * s.values[0]
    assert res.l1_series.values[0] == pytest.approx(5 * 4.0)


def test_mckean_stationary_laws_agree(spec, steep_model):
    cfg = SimConfig(dt=1e-3, t_end=12.0, snapshot_stride=12_000, master_seed=3)
    a = mckean_simulate(spec, steep_model, 1024, cfg, init=PointMass(0.0, 0.0)).cloud()
    b = mckean_simulate(spec, steep_model, 1024, cfg, init=PointMass(1.0, 3.0), stream_offset=5000).cloud()
    c = mckean_simulate(spec, steep_model, 1024, cfg, init=PointMass(0.0, 0.0), stream_offset=9000).cloud()
    cross, se1 = w_subsampled(a, b, n_sub=512, reps=8, seed=2)
    base, se2 = w_subsampled(a, c, n_sub=512, reps=8, seed=2)
    assert abs(cross - base) < 3 * math.hypot(se1, se2) + 0.03


def test_chaos_error_vanishes_without_interaction(steep_model):
    spec = MeanFieldSpec(steep_model.G, ConstantKernel(0.3))
    r = chaos_error(spec, steep_model, 8, SimConfig(dt=1e-3, t_end=1.0), reps=4)
    assert r.error == 0.0 and r.m_aux == 1024


def test_chaos_error_grows_with_horizon(spec, steep_model):
    errs = [chaos_error(spec, steep_model, 16, SimConfig(dt=1e-3, t_end=T, master_seed=4), reps=16).error
            for T in (0.5, 1.0, 2.0)]
    assert errs[0] > 0 and errs[0] <= errs[1] * 1.5 and errs[1] <= errs[2] * 1.5


def test_network_csv_and_argument_checks(tmp_path, spec, steep_model):
    tr = network_simulate(spec, steep_model, 3, SimConfig(dt=1e-2, t_end=0.05))
    tr.to_csv(tmp_path / "n.csv")
    assert (tmp_path / "n.csv").read_text().splitlines()[0] == "t,v_1,v_2,v_3,g_1,g_2,g_3"
    with pytest.raises(ArgumentError):
        network_simulate(spec, steep_model, 1, SimConfig())
    with pytest.raises(ArgumentError):
        mckean_simulate(spec, steep_model, 1, SimConfig())
