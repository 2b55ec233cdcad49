import hashlib
import json

import pytest

from edgeburst.cli import apply_overrides, config_hash, main, validate_config
from edgeburst.errors import ConfigError
from edgeburst.presets import PRESETS, get_preset, list_presets


def small(kind="profile", **kw):
    cfg = {"schema_version": 1, "kind": kind,
           "model": {"model": "I", "t1": 0.4, "t2": 0.5, "gamma": 0.8},
           "geometry": {"L": 20, "boundary": "OBC"}, "x0": 15}
    cfg.update(kw)
    return cfg


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate(name):
    validate_config(get_preset(name))


def test_list_presets(capsys):
    assert main(["--list-presets"]) == 0
    out = capsys.readouterr().out
    for name in list_presets():
        assert name in out


def test_overrides_parse_json_and_dotted_paths():
    cfg = apply_overrides(small(), ["geometry.L=30", "x0=[5, 6]", "description=abc", "evolve.dt=0.2"])
    assert cfg["geometry"]["L"] == 30 and cfg["x0"] == [5, 6]
    assert cfg["description"] == "abc" and cfg["evolve"] == {"dt": 0.2}
    with pytest.raises(ConfigError):
        apply_overrides(small(), ["novalue"])


@pytest.mark.parametrize("bad", [
    {"schema_version": 2},
    {"kind": "movie"},
    {"extra": 1},
    {"x0": 21},
    {"x0": 0},
    {"model": {"model": "I", "t1": 0.4, "t2": 0.5}},
    {"model": {"model": "I", "t1": 0.4, "t2": 0.5, "gamma": -1}},
    {"evolve": {"norm_floor": 2.0}},
])
def test_invalid_configs_exit_one(tmp_path, bad, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(small(**bad)))
    assert main(["--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "configuration error" in capsys.readouterr().err


def test_missing_config_exit_one(tmp_path):
    assert main(["--out", str(tmp_path)]) == 1
    assert main(["--preset", "nope", "--out", str(tmp_path)]) == 1
    assert main(["--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 1


def test_numeric_failure_exit_two(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(small(evolve={"t_max": 1.0})))
    assert main(["--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "SlowDecayError" in capsys.readouterr().err


def _digest(d):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir())}


def test_profile_run_is_deterministic(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(small(x0=[8, 12, 15, 17, 19])))
    assert main(["--config", str(path), "--out", str(tmp_path / "a")]) == 0
    assert main(["--config", str(path), "--out", str(tmp_path / "b")]) == 0
    assert _digest(tmp_path / "a") == _digest(tmp_path / "b")
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    run = summary["runs"][0]
    assert len(run["result"]) == 5 and "growth_exponent" in run
    for row in run["result"]:
        assert abs(row["sum_rule_residual"]) < 1e-9
    manifest = json.loads((tmp_path / "a" / "run_manifest.json").read_text())
    assert manifest["config_hash"] == config_hash(validate_config(json.loads(path.read_text())))
    assert "profile_x0_8.csv" in manifest["outputs"]


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("EDGEBURST_OUT", str(tmp_path / "env"))
    assert main(["--preset", "fig2e", "--set", "Nk=32", "--set", 'sweep=[{"t1": 0.3}]']) == 0
    assert (tmp_path / "env" / "spectrum.csv").exists()


def test_threads_match_serial(tmp_path):
    args = ["--preset", "figS3-modelIII", "--set", "geometry.L=12", "--set", "x0=6"]
    assert main(args + ["--out", str(tmp_path / "s")]) == 0
    assert main(args + ["--out", str(tmp_path / "p"), "--threads", "2"]) == 0
    assert _digest(tmp_path / "s") == _digest(tmp_path / "p")


@pytest.mark.parametrize("kind,extra,expect", [
    ("gbz", {"geometry": {"L": 40}}, "gbz.csv"),
    ("regime", {}, None),
    ("sumrule", {}, None),
    ("greens", {"displacements": [-3, 2], "omega_scan": {"start": -1, "stop": 1, "num": 5}},
     "greens_infinite.csv"),
])
def test_other_kinds(tmp_path, kind, extra, expect):
    cfg = small(kind, **extra)
    if kind in ("regime", "greens", "gbz"):
        cfg.pop("x0")
    if kind in ("regime", "greens"):
        cfg.pop("geometry")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["--config", str(path), "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["kind"] == kind
    if expect:
        assert (tmp_path / "o" / expect).exists()


def test_dump_config(capsys):
    assert main(["--preset", "fig1c", "--set", "x0=40", "--dump-config"]) == 0
    assert json.loads(capsys.readouterr().out)["x0"] == 40
