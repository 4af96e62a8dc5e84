"""Command-line entry point.

    vgcontract <command> --config run.json [--output DIR] [--threads N] [--section.key VALUE ...]

Every run writes its artifacts and a ``manifest.json`` (resolved config,
seed, versions, backend) into a fresh timestamped directory.  Exit codes:
0 success, 2 invalid input, 1 numerical failure, 64 usage error.
"""

import argparse
import copy
import datetime
import json
import logging
import math
import os
import platform
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__, kernels
from .coupling import (Mirror, PairState, Synchronous, WeightedNorm, coupled_ensemble,
                       coupled_simulate, coupling_from_dict, fit_decay_rate, sync_rate_theoretical)
from .errors import NumericError, ParameterError, PreconditionError, ValidationError
from .integrator import (PointMass, SimConfig, ensemble, initial_law_from_dict, simulate)
from .metric import SynchronousRegime, build_distance_spec
from .model import Constant, ModelParams, State, check_sync_condition, conductance_from_dict, validate_params
from .network import (MeanFieldSpec, chaos_study, eta, kernel_from_dict, log_eta, network_simulate)
from .steady import (fixed_point, loglog_slope, moment_summary, noise_bound_check,
                     reflected_ou_moments, sample_invariant)
from .transport import NORMS, MAX_EXACT, PointCloud, subsampled_report, w_exact

log = logging.getLogger("vgcontract")

EXIT_OK, EXIT_NUMERIC, EXIT_INVALID, EXIT_USAGE = 0, 1, 2, 64

COMMANDS = ("fixed-point", "simulate", "couple", "contract", "invariant", "noise-bound",
            "constants", "network", "chaos", "transport")

# allowed keys and defaults per config section (None: required / no default)
SCHEMA = {
    "model": {"v_l": None, "v_e": None, "g_l": None, "gamma": None, "a": None,
              "conductance": {"variant": "constant", "c": 0.5}},
    "sim": {"dt": 1e-3, "t_end": 1.0, "snapshot_stride": 1, "master_seed": 0},
    "initial": {"kind": "point_mass", "v": None, "g": None, "v_lo": None, "v_hi": None,
                "g_lo": None, "g_hi": None, "stream_id": 0},
    "pair": {"v": None, "g": None, "v_prime": None, "g_prime": None},
    "coupling": {"variant": "mirror", "xi": None},
    "distance": {"xi": None, "overrides": {}},
    "ensemble": {"n": 1000, "burn_in": None},
    "network": {"H0": None, "H1": {"variant": "constant", "c": 0.1}, "N": 16},
    "chaos": {"N_values": [8, 32, 128], "reps": 64},
    "sweep": {"a": None},
    "transport": {"cloud1": None, "cloud2": None, "p": 1, "norm": "euclidean",
                  "n_sub": 512, "reps": 8, "seed": 0},
    "output": {"dir": "runs"},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass
class ExperimentConfig:
    """Validated configuration; ``raw`` is the resolved JSON that round-trips."""

    raw: dict
    model: ModelParams | None = None
    sim: SimConfig = field(default_factory=SimConfig)

    def section(self, name):
        out = copy.deepcopy(SCHEMA[name])
        out.update(self.raw.get(name, {}))
        return out

    def to_dict(self):
        return copy.deepcopy(self.raw)


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw, overrides):
    """Set dotted paths, e.g. ``{"model.a": 0.3}``, creating sections as needed."""
    raw = copy.deepcopy(raw)
    for path, value in overrides.items():
        keys = path.split(".")
        node = raw
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ParameterError(f"override {path}: {k} is not a section")
        node[keys[-1]] = value
    return raw


def validate_config(raw):
    """Every schema and invariant violation in ``raw`` as a list of messages."""
    errors = []
    if not isinstance(raw, dict):
        return ["config must be a JSON object"]
    for name in set(raw) - set(SCHEMA):
        errors.append(f"unknown section {name!r}")
    for name, allowed in SCHEMA.items():
        sec = raw.get(name, {})
        if not isinstance(sec, dict):
            errors.append(f"{name}: must be an object")
            continue
        for key in set(sec) - set(allowed):
            errors.append(f"{name}.{key}: unknown key")
    model = raw.get("model")
    if isinstance(model, dict):
        missing = [k for k in ("v_l", "v_e", "g_l", "gamma", "a") if k not in model]
        errors += [f"model.{k}: required" for k in missing]
        if not missing:
            try:
                errors += [f"model.{e}" for e in validate_params(*(float(model[k]) for k in
                                                                  ("v_l", "v_e", "g_l", "gamma", "a")))]
            except (TypeError, ValueError):
                errors.append("model: numeric fields must be numbers")
        try:
            conductance_from_dict(model.get("conductance", SCHEMA["model"]["conductance"]))
        except (ValidationError, TypeError) as exc:
            errors.append(f"model.conductance: {exc}")
    sim = dict(SCHEMA["sim"], **raw.get("sim", {})) if isinstance(raw.get("sim", {}), dict) else None
    if sim is not None:
        try:
            SimConfig(**sim)
        except (ValidationError, TypeError) as exc:
            errors += [f"sim.{m}" for m in str(exc).split("; ")]
    return errors


def load_config(path, overrides=None):
    """Read, override and validate a config (or a previous run's manifest)."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config {path} is not valid JSON: {exc}") from None
    if isinstance(raw, dict) and "manifest_version" in raw:
        raw = raw["config"]
    return config_from_dict(raw, overrides)


def config_from_dict(raw, overrides=None):
    raw = apply_overrides(raw, overrides or {})
    errors = validate_config(raw)
    if errors:
        raise ParameterError("invalid config:\n  " + "\n  ".join(errors))
    model = ModelParams.from_dict(raw["model"]) if "model" in raw else None
    sim = SimConfig(**dict(SCHEMA["sim"], **raw.get("sim", {})))
    return ExperimentConfig(raw, model, sim)


def _require_model(cfg):
    if cfg.model is None:
        raise ParameterError("model: section required for this command")
    return cfg.model


# --- commands ---------------------------------------------------------------

def _initial_state(cfg):
    sec = cfg.section("initial")
    p = cfg.model
    v = p.v_l if sec["v"] is None else float(sec["v"])
    g = 0.0 if sec["g"] is None else float(sec["g"])
    return State(v, g), int(sec["stream_id"])


def _initial_law(cfg):
    sec = {k: v for k, v in cfg.section("initial").items() if v is not None and k != "stream_id"}
    if sec.get("kind") == "point_mass":
        s, _ = _initial_state(cfg)
        return PointMass(s.v, s.g)
    return initial_law_from_dict(sec)


def _pair(cfg):
    p = cfg.model
    sec = cfg.section("pair")
    vals = [sec["v"], sec["g"], sec["v_prime"], sec["g_prime"]]
    defaults = [p.v_l, 0.0, p.v_e, p.g_max]
    v, g, vp, gp = (float(d if x is None else x) for x, d in zip(vals, defaults))
    return PairState(State(v, g), State(vp, gp))


def _coupling(cfg):
    return coupling_from_dict({k: v for k, v in cfg.section("coupling").items() if v is not None}, cfg.model)


def _distance(cfg, xi=None):
    sec = cfg.section("distance")
    xi = sec["xi"] if sec["xi"] is not None else xi
    return build_distance_spec(cfg.model, xi, sec["overrides"])


def cmd_fixed_point(cfg, out, threads):
    p = _require_model(cfg)
    fps = fixed_point(p)
    holds, margin = check_sync_condition(p)
    report = {"count": len(fps), "fixed_points": [f.to_dict() for f in fps],
              "sync_condition": {"holds": holds, "margin": margin}}
    if len(fps) == 1:
        report.update(v_star=fps[0].v_star, g_star=fps[0].g_star)
    _write_json(out, "fixed_points.json", report)
    return report


def cmd_simulate(cfg, out, threads):
    p = _require_model(cfg)
    sec = cfg.section("ensemble")
    if "ensemble" in cfg.raw:
        res = ensemble(p, _initial_law(cfg), cfg.sim, int(sec["n"]), threads=threads)
        res.cloud.to_csv(os.path.join(out, "cloud.csv"))
        return {"n": len(res.cloud), "t_end": float(res.times[-1])}
    s0, stream = _initial_state(cfg)
    traj = simulate(p, s0, cfg.sim, stream, threads)
    traj.to_csv(os.path.join(out, "trajectory.csv"))
    return {"snapshots": len(traj), "final": {"v": float(traj.v[-1]), "g": float(traj.g[-1])}}


def _monitor(cfg, kind):
    if isinstance(kind, Synchronous):
        try:
            return WeightedNorm(sync_rate_theoretical(cfg.model).A), "weighted_norm"
        except PreconditionError:
            return WeightedNorm(1.0), "euclidean_squared"
    return _distance(cfg, kind.xi), "rho"


def cmd_couple(cfg, out, threads):
    p = _require_model(cfg)
    kind = _coupling(cfg)
    monitor, name = _monitor(cfg, kind)
    traj, series = coupled_simulate(p, _pair(cfg), cfg.sim, kind, monitor, threads=threads)
    traj.to_csv(os.path.join(out, "pair.csv"))
    series.to_csv(os.path.join(out, "distance.csv"))
    report = {"coupling": kind.to_dict(), "monitor": name,
              "initial": float(series.values[0]), "final": float(series.values[-1])}
    _write_json(out, "report.json", report)
    return report


def cmd_contract(cfg, out, threads):
    p = _require_model(cfg)
    if not p.a > 0:
        raise PreconditionError("model.a: the noise-induced contraction under mirror coupling "
                                "requires noise intensity a > 0")
    kind = _coupling(cfg)
    if isinstance(kind, Synchronous):
        kind = Mirror(1e-3 * p.width)
    dist = _distance(cfg, kind.xi)
    ps = _pair(cfg)
    n = int(cfg.section("ensemble")["n"])
    init = [np.full(n, x) for x in (ps.z.v, ps.z.g, ps.z_prime.v, ps.z_prime.g)]
    res = coupled_ensemble(p, init, cfg.sim, kind, dist, threads=threads)
    series = res.mean_series
    series.to_csv(os.path.join(out, "distance.csv"))
    tsec = cfg.section("transport")
    n_sub = min(int(tsec["n_sub"]), n)
    reps = max(int(tsec["reps"]), 2)

    def w1(k):
        c1 = PointCloud.from_states(res.v[k], res.g[k])
        c2 = PointCloud.from_states(res.v_prime[k], res.g_prime[k])
        return subsampled_report(c1, c2, 1, "euclidean", n_sub, reps, int(tsec["seed"]))

    report = {"coupling": kind.to_dict(), "distance": dist.report(),
              "rho_mean_initial": float(series.values[0]), "rho_mean_final": float(series.values[-1]),
              "rho_se_final": float(series.std_errors[-1]),
              "w1_initial": w1(0), "w1_final": w1(-1)}
    try:
        rate, r2 = fit_decay_rate(series)
        report.update(fitted_rate=rate, fit_r2=r2)
    except ValidationError:
        pass
    _write_json(out, "report.json", report)
    return report


def cmd_invariant(cfg, out, threads):
    p = _require_model(cfg)
    sec = cfg.section("ensemble")
    cloud = sample_invariant(p, cfg.sim, int(sec["n"]), sec["burn_in"], threads=threads)
    cloud.to_csv(os.path.join(out, "cloud.csv"))
    report = {"n": len(cloud), "v": moment_summary(cloud.points[:, 0]).to_dict(),
              "g": moment_summary(cloud.points[:, 1]).to_dict()}
    if isinstance(p.G, Constant):
        mean, var = reflected_ou_moments(p.G.c, p.gamma, p.a)
        report["g_oracle"] = {"mean": mean, "var": var}
    _write_json(out, "moments.json", report)
    return report


def cmd_noise_bound(cfg, out, threads):
    p = _require_model(cfg)
    sec = cfg.section("ensemble")
    a_values = cfg.section("sweep")["a"] or [p.a]
    rows = [noise_bound_check(p.with_(a=float(a)), cfg.sim, int(sec["n"]), sec["burn_in"],
                              threads=threads).to_dict() for a in a_values]
    report = {"results": rows, "all_hold": all(r["holds"] for r in rows)}
    if len(rows) > 1:
        report["loglog_slope"] = loglog_slope([r["a"] for r in rows], [r["lhs"] for r in rows])
    _write_json(out, "noise_bound.json", report)
    return report


def cmd_constants(cfg, out, threads):
    p = _require_model(cfg)
    holds, margin = check_sync_condition(p)
    report = {"sync_condition": {"holds": holds, "margin": margin}}
    if holds:
        report["synchronous"] = sync_rate_theoretical(p).to_dict()
    try:
        dist = _distance(cfg)
        report.update(regime="noise_induced", **dist.report())
    except SynchronousRegime as exc:
        report.update(regime="synchronous", detail=str(exc))
    _write_json(out, "constants.json", report)
    return report


def _mean_field(cfg):
    p = _require_model(cfg)
    sec = cfg.section("network")
    H0 = conductance_from_dict(sec["H0"]) if sec["H0"] is not None else p.G
    return MeanFieldSpec(H0, kernel_from_dict(sec["H1"])), int(sec["N"])


def cmd_network(cfg, out, threads):
    spec, N = _mean_field(cfg)
    traj = network_simulate(spec, cfg.model, N, cfg.sim, threads=threads)
    traj.to_csv(os.path.join(out, "network.csv"))
    report = {"N": N, "spec": spec.to_dict(), "bounds": spec.bounds(cfg.model)}
    try:
        dist = _distance(cfg)
        report.update(eta=eta(spec, cfg.model, dist), log_eta=log_eta(spec, cfg.model, dist))
    except (SynchronousRegime, PreconditionError) as exc:
        report["eta_note"] = str(exc)
    _write_json(out, "report.json", _json_safe(report))
    return report


def cmd_chaos(cfg, out, threads):
    spec, _ = _mean_field(cfg)
    sec = cfg.section("chaos")
    report = chaos_study(spec, cfg.model, [int(n) for n in sec["N_values"]], cfg.sim,
                         int(sec["reps"]), threads=threads)
    _write_json(out, "chaos.json", report)
    return report


def cmd_transport(cfg, out, threads):
    sec = cfg.section("transport")
    if sec["cloud1"] is None or sec["cloud2"] is None:
        raise ParameterError("transport.cloud1 and transport.cloud2 are required")
    if sec["norm"] not in NORMS:
        raise ParameterError(f"transport.norm: expected one of {NORMS}")
    c1, c2 = PointCloud.from_csv(sec["cloud1"]), PointCloud.from_csv(sec["cloud2"])
    p_ord = int(sec["p"])
    if len(c1) == len(c2) and len(c1) <= MAX_EXACT:
        report = {"method": "exact", "estimate": w_exact(c1, c2, p_ord, sec["norm"]), "n": len(c1)}
    else:
        n_sub = min(int(sec["n_sub"]), len(c1), len(c2))
        report = {"method": "subsampled",
                  **subsampled_report(c1, c2, p_ord, sec["norm"], n_sub, int(sec["reps"]), int(sec["seed"]))}
    report.update(p=p_ord, norm=sec["norm"])
    _write_json(out, "transport.json", report)
    return report


HANDLERS = {
    "fixed-point": cmd_fixed_point, "simulate": cmd_simulate, "couple": cmd_couple,
    "contract": cmd_contract, "invariant": cmd_invariant, "noise-bound": cmd_noise_bound,
    "constants": cmd_constants, "network": cmd_network, "chaos": cmd_chaos,
    "transport": cmd_transport,
}


# --- plumbing ---------------------------------------------------------------

def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _write_json(out, name, obj):
    with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
        json.dump(_json_safe(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_id():
    return f"vgcontract {__version__} ({kernels.BACKEND} kernels)"


def make_run_dir(base, command):
    stamp = datetime.datetime.now().strftime("%Y%m%dT%H%M%S_%f")
    path = os.path.join(base, f"{command}-{stamp}")
    i = 1
    while os.path.exists(path):
        path = os.path.join(base, f"{command}-{stamp}-{i}")
        i += 1
    os.makedirs(path)
    return path


def write_manifest(out, command, cfg, threads):
    manifest = {
        "manifest_version": 1, "command": command, "config": cfg.to_dict(),
        "master_seed": cfg.sim.master_seed, "build": build_id(), "version": __version__,
        "backend": kernels.BACKEND, "threads": threads,
        "versions": {"python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
    }
    _write_json(out, "manifest.json", manifest)


def _split_overrides(extra):
    overrides = {}
    i = 0
    while i < len(extra):
        arg = extra[i]
        if not arg.startswith("--") or "." not in arg:
            raise UsageError(f"unrecognized argument {arg!r}")
        key = arg[2:]
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            if i + 1 >= len(extra):
                raise UsageError(f"override {arg} needs a value")
            i += 1
            val = extra[i]
        overrides[key] = _parse_value(val)
        i += 1
    return overrides


def build_parser():
    parser = _Parser(prog="vgcontract", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=build_id())
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", "-c", required=True, help="JSON config or a previous manifest")
    parser.add_argument("--output", "-o", help="base directory for run outputs (overrides output.dir)")
    parser.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
    parser.add_argument("--verbose", "-v", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        overrides = _split_overrides(extra)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
    except UsageError as exc:
        print(f"vgcontract: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, overrides)
        base = args.output or cfg.section("output")["dir"]
        out = make_run_dir(base, args.command)
        write_manifest(out, args.command, cfg, args.threads)
        report = HANDLERS[args.command](cfg, out, args.threads)
    except ValidationError as exc:
        print(f"vgcontract: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericError, FloatingPointError, OverflowError) as exc:
        print(f"vgcontract: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(_json_safe({"output": out, **(report or {})}), indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
