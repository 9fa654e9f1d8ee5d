import json
import os

import pytest

from slenat.cli import EXIT_FAILED, EXIT_INVALID, main, resolve_threads
from slenat.config import ConfigError, from_dict, normalize, parse_config, serialize


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def test_round_trip(tmp_path):
    raw = {"kind": "simulate", "kappa": 2}
    path = write(tmp_path, raw)
    assert serialize(parse_config(path)) == normalize(raw, tmp_path)
    # the serialized form parses back to itself
    again = write(tmp_path, json.loads(serialize(parse_config(path))), "again.json")
    assert serialize(parse_config(again)) == serialize(parse_config(path))


def test_unknown_key_suggestion(tmp_path):
    with pytest.raises(ConfigError, match="did you mean 'kappa'") as exc:
        parse_config(write(tmp_path, {"kind": "simulate", "kapa": 2}))
    assert exc.value.field == "kapa"


def test_missing_required(tmp_path):
    with pytest.raises(ConfigError, match="kappa") as exc:
        parse_config(write(tmp_path, {"kind": "phi"}))
    assert exc.value.field == "kappa"
    with pytest.raises(ConfigError, match="kind"):
        from_dict({"kappa": 2})


def test_relative_paths(tmp_path):
    sub = tmp_path / "exp"
    sub.mkdir()
    cfg = parse_config(write(sub, {"kind": "simulate", "kappa": 2, "out": "res"}))
    assert cfg.out == str(sub / "res")


def test_unknown_kind_and_types():
    with pytest.raises(ConfigError, match="kind"):
        from_dict({"kind": "nope", "kappa": 2})
    with pytest.raises(ConfigError, match="n_seeds"):
        from_dict({"kind": "phi", "kappa": 2, "n_seeds": 1.5})
    with pytest.raises(ConfigError, match="dt"):
        from_dict({"kind": "phi", "kappa": 2, "dt": "x"})


def test_kappa_nine_exit_code(tmp_path, capsys):
    code = main(["simulate", "--config", str(write(tmp_path, {"kind": "simulate", "kappa": 9}))])
    assert code == EXIT_INVALID
    assert "kappa" in capsys.readouterr().err


@pytest.mark.parametrize("extra,field", [
    ({"horizon": 1.0005}, "horizon"),
    ({"domain": [0, 1, 0, 1]}, "domain"),
    ({"points": [[0, -1]]}, "points"),
    ({"n_samples": 10}, "n_samples"),
    ({"times": [0.3, 0.1]}, "times"),
    ({"criteria": ["13"]}, "criteria"),
    ({"grid": [4, 8]}, "grid"),
])
def test_validation_names_field(tmp_path, capsys, extra, field):
    code = main(["simulate", "--config", str(write(tmp_path, {"kind": "simulate", "kappa": 2, **extra}))])
    assert code == EXIT_INVALID
    assert f"'{field}'" in capsys.readouterr().err


def test_theta_needs_dyadic_dt(tmp_path, capsys):
    code = main(["theta", "--config", str(write(tmp_path, {"kind": "theta", "kappa": 2, "dt": 0.001}))])
    assert code == EXIT_INVALID and "'dt'" in capsys.readouterr().err


def test_unwritable_out(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(["simulate", "--kappa", "2", "--out", str(blocker / "sub")])
    assert code == EXIT_INVALID and "'out'" in capsys.readouterr().err


def test_threads(monkeypatch):
    monkeypatch.setenv("SLENAT_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv("SLENAT_THREADS", "x")
    with pytest.raises(ConfigError, match="threads"):
        resolve_threads(None)


def _files(d):
    return {f: (d / f).read_bytes() for f in sorted(os.listdir(d)) if f.endswith((".csv", ".ndjson"))}


@pytest.mark.parametrize("kind,cmd,extra", [
    ("simulate", "simulate", {"dt": 0.01, "n_seeds": 2}),
    ("minkowski", "minkowski", {"dt": 0.001, "n_seeds": 2}),
    ("dvariation", "dvar", {"dt": 0.001, "n_seeds": 2, "meshes": [10, 100]}),
    ("moments", "moments", {"n_seeds": 50}),
    ("phi", "phi", {"grid": [8, 8], "n_samples": 100, "points": [[0.5, 0.5]], "times": [1.0]}),
    ("theta", "theta", {"dt": 2.0**-8, "n_seeds": 2, "grid": [8, 8], "n_samples": 100, "levels": [2, 3]}),
])
def test_runs_are_byte_identical(tmp_path, kind, cmd, extra):
    cfg = write(tmp_path, {"kind": kind, "kappa": 2.0, **extra})
    for threads, out in ((1, "a"), (2, "b")):
        assert main([cmd, "--config", str(cfg), "--out", str(tmp_path / out), "--threads", str(threads)]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a and a == b
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["config"]["kind"] == kind and man["version"]


def test_acceptance_real_subset(tmp_path, capsys):
    cfg = {"kind": "acceptance", "kappa": 8 / 3, "criteria": ["1", "7"]}
    assert main(["acceptance", "--config", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "criterion 1 [PASS]" in out and "criterion 7 [PASS]" in out


def test_acceptance_exit_codes(tmp_path, capsys, monkeypatch):
    from slenat import acceptance

    ok = acceptance.CheckResult("1", "x", True, "")
    bad = acceptance.CheckResult("2", "y", False, "")
    cfg = {"kind": "acceptance", "kappa": 8 / 3, "criteria": ["1"]}
    monkeypatch.setattr(acceptance, "run_all", lambda *a, **k: [ok])
    assert main(["acceptance", "--config", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o1")]) == 0
    monkeypatch.setattr(acceptance, "run_all", lambda *a, **k: [ok, bad])
    assert main(["acceptance", "--config", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o2")]) == EXIT_FAILED
    assert "[FAIL]" in capsys.readouterr().out
    assert (tmp_path / "o2" / "acceptance.csv").read_text().startswith("criterion,name,status,detail")
