import json
import os

import pandas as pd
import pytest

import Loopfloer
from Models.Errors import ConfigError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def _run(command, out_dir, **model_config):
    updates = {"cfg": {"model_config": dict(model_config, out_dir=str(out_dir))}}
    return Loopfloer.ex.run(command, config_updates=updates)


def test_translate():
    assert Loopfloer._translate(["loopfloer"]) is None
    assert Loopfloer._translate(["loopfloer", "radial", "with", "cfg.model_config.r=16"]) is None
    assert Loopfloer._translate(["loopfloer", "bogus", "--out", "x"]) is None
    command, updates = Loopfloer._translate(["loopfloer", "radial", "--out", "x", "--seed", "7"])
    assert command == "radial"
    assert updates == {"cfg": {"model_config": {"out_dir": "x"}}, "seed": 7}
    with pytest.raises(ConfigError):
        Loopfloer._translate(["loopfloer", "radial", "--out"])
    with pytest.raises(ConfigError):
        Loopfloer._translate(["loopfloer", "radial", "--out", "x", "--workers", "2"])
    with pytest.raises(ConfigError):
        Loopfloer._translate(["loopfloer", "radial", "--seed", "abc"])


def test_bad_arguments_exit_with_config_status():
    assert Loopfloer.main(["loopfloer", "radial", "--seed", "abc"]) == Loopfloer.EXIT_CONFIG
    assert Loopfloer.main(["loopfloer", "radial", "--config", "missing.json"]) == Loopfloer.EXIT_CONFIG


def test_radial_run(tmp_path):
    run = _run("radial", tmp_path, profile={"kind": "sharp"})
    assert run.result == Loopfloer.EXIT_OK
    with open(os.path.join(str(tmp_path), "radial.json")) as f:
        record = json.load(f)
    assert record["orbits"] == []
    assert record["existence"]["verdict"] == "VACUOUS"
    with open(os.path.join(str(tmp_path), "manifest.json")) as f:
        manifest = json.load(f)
    assert manifest["status"] == "success"
    assert manifest["seed"] == 1337
    assert [entry["file"] for entry in manifest["outputs"]] == ["radial.json", "profile.csv", "orbits.csv",
                                                               "manifest.json"]


def test_identical_runs_write_identical_files(tmp_path):
    for name in ("a", "b"):
        assert _run("radial", tmp_path / name).result == Loopfloer.EXIT_OK
    for name in ("radial.json", "orbits.csv", "profile.csv"):
        with open(str(tmp_path / "a" / name), "rb") as a, open(str(tmp_path / "b" / name), "rb") as b:
            assert a.read() == b.read()


def test_configuration_errors_leave_a_manifest(tmp_path):
    run = _run("critical", tmp_path / "out", N=100)
    assert run.result == Loopfloer.EXIT_CONFIG
    with open(str(tmp_path / "out" / "manifest.json")) as f:
        manifest = json.load(f)
    assert manifest["status"] == "config_error"
    assert manifest["error"].startswith("ConfigError")
    assert [entry["file"] for entry in manifest["outputs"]] == ["manifest.json"]
    assert sorted(os.listdir(str(tmp_path / "out"))) == ["manifest.json"]


def test_unusable_output_directory(tmp_path):
    (tmp_path / "file").write_text("")
    assert _run("radial", tmp_path / "file" / "out").result == Loopfloer.EXIT_CONFIG


def test_contractible_radial_run(tmp_path):
    run = _run("radial", tmp_path, alpha=[0], allow_contractible=True, profile={"kind": "zero"})
    assert run.result == Loopfloer.EXIT_OK
    with open(os.path.join(str(tmp_path), "radial.json")) as f:
        assert json.load(f)["existence"]["verdict"] == "VACUOUS"


def test_command_line_with_a_document(tmp_path, monkeypatch):
    monkeypatch.chdir(ROOT)
    status = Loopfloer.main(["loopfloer", "radial", "--config", os.path.join("data", "configs", "radial_sharp.json"),
                             "--out", str(tmp_path)])
    assert status == Loopfloer.EXIT_OK
    with open(os.path.join(str(tmp_path), "radial.json")) as f:
        assert json.load(f)["existence"]["verdict"] == "VACUOUS"


def test_document_for_another_command(tmp_path, monkeypatch):
    monkeypatch.chdir(ROOT)
    status = Loopfloer.main(["loopfloer", "flow", "--config", os.path.join("data", "configs", "radial_sharp.json"),
                             "--out", str(tmp_path)])
    assert status == Loopfloer.EXIT_CONFIG


def test_critical_run(tmp_path):
    assert _run("critical", tmp_path).result == Loopfloer.EXIT_OK
    table = pd.read_csv(os.path.join(str(tmp_path), "critical_points.csv"))
    assert list(table["index"]) == [0, 1]
    assert list(table["label"]) == [0, 1]
    with open(os.path.join(str(tmp_path), "potential.json")) as f:
        assert json.load(f)["n"] == 1
