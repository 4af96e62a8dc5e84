import json
import os

import pytest

from vgcontract import __version__
from vgcontract.cli import COMMANDS, EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, HANDLERS, main
from vgcontract.errors import NumericError

STEEP = {"v_l": 0.0, "v_e": 1.0, "g_l": 1.0, "gamma": 1.0, "a": 0.3,
         "conductance": {"variant": "logistic", "base": 0.2, "amplitude": 2.6, "steepness": 8.0, "center": 0.5}}
CONST = dict(STEEP, conductance={"variant": "constant", "c": 0.5})


def _config(tmp_path, **sections):
    cfg = {"model": STEEP, "sim": {"dt": 1e-2, "t_end": 0.5, "snapshot_stride": 10, "master_seed": 3},
           "output": {"dir": str(tmp_path / "runs")}}
    cfg.update(sections)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == EXIT_OK else None), err


def _files(run_dir):
    return {f: open(os.path.join(run_dir, f), "rb").read() for f in sorted(os.listdir(run_dir))
            if f != "manifest.json"}


@pytest.fixture
def clouds(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write_text("v,g\n0.0,0.0\n1.0,1.0\n")
    b.write_text("v,g\n0.5,0.0\n1.0,2.0\n")
    return str(a), str(b)


def test_every_command_runs(tmp_path, capsys, clouds, quiet):
    sections = {
        "ensemble": {"n": 64, "burn_in": 1.0},
        "network": {"N": 4, "H1": {"variant": "product_logistic", "h0": 0.05, "kappa": 0.1,
                                    "steepness": 1.0, "center": 0.5}},
        "chaos": {"N_values": [4, 8], "reps": 2},
        "distance": {"xi": 0.2, "overrides": {"k": 0.01}},
        "transport": {"cloud1": clouds[0], "cloud2": clouds[1], "n_sub": 16, "reps": 2},
    }
    path = _config(tmp_path, **sections)
    for cmd in COMMANDS:
        argv = [cmd, "-c", path]
        if cmd in ("noise-bound",):
            argv += ["--model.conductance", json.dumps(CONST["conductance"])]
        code, report, err = _run(capsys, *argv)
        assert code == EXIT_OK, (cmd, err)
        files = os.listdir(report["output"])
        assert "manifest.json" in files and len(files) >= 2, cmd
    assert len(os.listdir(tmp_path / "runs")) == len(COMMANDS)


def test_expected_reports(tmp_path, capsys, clouds):
    path = _config(tmp_path, transport={"cloud1": clouds[0], "cloud2": clouds[1]})
    _, rep, _ = _run(capsys, "transport", "-c", path)
    assert rep["method"] == "exact" and rep["estimate"] == pytest.approx(0.75)
    _, rep, _ = _run(capsys, "constants", "-c", path)
    assert rep["regime"] == "noise_induced" and rep["M"] == pytest.approx(4.0)
    _, rep, _ = _run(capsys, "fixed-point", "-c", path, "--model.conductance",
                     json.dumps(CONST["conductance"]))
    assert rep["fixed_points"][0]["v_star"] == pytest.approx(1 / 3, abs=1e-12)


def test_manifest_and_rerun_are_byte_identical(tmp_path, capsys):
    path = _config(tmp_path)
    code, rep, _ = _run(capsys, "simulate", "-c", path, "--threads", "2")
    assert code == EXIT_OK
    first = rep["output"]
    with open(os.path.join(first, "manifest.json")) as fh:
        man = json.load(fh)
    assert man["command"] == "simulate" and man["master_seed"] == 3 and man["version"] == __version__
    assert man["backend"] in ("compiled", "python") and man["threads"] == 2
    assert {"python", "numpy", "scipy"} <= set(man["versions"])
    _, rep2, _ = _run(capsys, "simulate", "-c", os.path.join(first, "manifest.json"))
    assert rep2["output"] != first
    assert _files(first) == _files(rep2["output"])
    with open(os.path.join(rep2["output"], "manifest.json")) as fh:
        assert json.load(fh)["config"] == man["config"]


def test_dotted_overrides(tmp_path, capsys):
    path = _config(tmp_path)
    _, rep, _ = _run(capsys, "simulate", "-c", path, "--sim.master_seed", "9", "--model.a=0.5")
    with open(os.path.join(rep["output"], "manifest.json")) as fh:
        man = json.load(fh)
    assert man["master_seed"] == 9 and man["config"]["model"]["a"] == 0.5


def test_invalid_config_lists_every_error(tmp_path, capsys):
    bad = dict(STEEP, g_l=-1.0, gamma=0.0)
    path = _config(tmp_path, model=bad, bogus={})
    code, _, err = _run(capsys, "simulate", "-c", path, "--sim.dt", "-1")
    assert code == EXIT_INVALID
    for field in ("model.g_l", "model.gamma", "sim.dt", "bogus"):
        assert field in err


def test_contract_without_noise_is_rejected(tmp_path, capsys):
    code, _, err = _run(capsys, "contract", "-c", _config(tmp_path), "--model.a", "0")
    assert code == EXIT_INVALID
    assert "model.a" in err and "a > 0" in err


def test_usage_errors(tmp_path, capsys):
    path = _config(tmp_path)
    assert main(["nonsense", "-c", path]) == EXIT_USAGE
    assert main(["simulate"]) == EXIT_USAGE
    assert main(["simulate", "-c", path, "--threads", "0"]) == EXIT_USAGE
    assert main(["simulate", "-c", path, "--stray"]) == EXIT_USAGE
    assert main(["simulate", "-c", str(tmp_path / "missing.json")]) == EXIT_INVALID
    capsys.readouterr()


def test_numeric_failure_exit_code(tmp_path, capsys, monkeypatch):
    def boom(cfg, out, threads):
        raise NumericError("non-finite state")
    monkeypatch.setitem(HANDLERS, "simulate", boom)
    code, _, err = _run(capsys, "simulate", "-c", _config(tmp_path))
    assert code == EXIT_NUMERIC and "numerical failure" in err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out
