import json

import pytest

from ksmotility.cli import config_hash, main, read_config


def _run(tmp_path, command, text="", *extra):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    out = tmp_path / "out"
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    man = json.loads((out / "manifest.json").read_text()) if (out / "manifest.json").exists() else None
    return code, out, man


def test_read_config(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("# comment\nZ = 5\n\nV_profiles = 0.1, 0.2  # trailing\ntol.p2_rel = 0.1\ndt = none\n")
    assert read_config(p) == {"Z": 5, "V_profiles": [0.1, 0.2], "tol.p2_rel": 0.1, "dt": None}


def test_config_hash_is_order_independent():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})


def test_stationary_stability_pass(tmp_path):
    code, out, man = _run(tmp_path, "stationary-stability", "grid_n = 128\n")
    assert code == 0
    assert man["schema"] == 1 and man["claims"][0]["status"] == "PASS"
    assert set(man["versions"]) == {"ksmotility", "numpy", "scipy"}
    assert "decay.csv" in man["outputs"] and (out / "decay.csv").exists()


def test_stationary_stability_supercritical(tmp_path):
    code, out, _ = _run(tmp_path, "stationary-stability", "P = 12\ninit_modes = 1, 2\nT = 0.5\n")
    verdict = json.loads((out / "verdict.json").read_text())
    assert code == 0 and verdict["verdict"] == "supercritical, growth detected"


def test_stationary_stability_trivial(tmp_path):
    code, out, _ = _run(tmp_path, "stationary-stability", "eps = 0\nT = 0.05\n")
    assert code == 0
    assert json.loads((out / "verdict.json").read_text())["verdict"] == "PASS-trivial"


def test_failed_claim_exits_one(tmp_path):
    code, _, man = _run(tmp_path, "stationary-stability", "tol.decay_rel = 1e-9\n")
    assert code == 1 and man["claims"][0]["status"] == "FAIL"


@pytest.mark.parametrize("text", ["bogus = 1\n", "tol.mass = 0\n", "init = nonsense\n", "Z = 1\nP\n"])
def test_bad_input_exits_two(tmp_path, text):
    code, _, _ = _run(tmp_path, "simulate", text)
    assert code == 2


def test_numerical_failure_exits_two(tmp_path):
    # the cell-length dynamics of Model A collapse for this activity
    code, _, _ = _run(tmp_path, "simulate", "variant = A\nP = 5\nK = 1\nT = 1\ninit = constant\n", "--grid-n", "32")
    assert code == 2


def test_bifurcation_skips_singular_Z(tmp_path):
    code, out, _ = _run(tmp_path, "bifurcation", "Z = 0.08333333333333333, 5\nsteps = 11\n", "--grid-n", "128")
    verdict = json.loads((out / "verdict.json").read_text())
    assert code == 0
    assert "skipped" in verdict["curves"][0]
    assert verdict["curves"][1]["P2_sign"] == "supercritical"
    assert (out / "profile_Z5_V0.1.csv").exists() and (out / "profile_Z5_V0.2.csv").exists()
    assert (out / "bifurcation_Z5.csv").exists()


def test_spectrum_neutral_at_zero_speed(tmp_path):
    code, out, man = _run(tmp_path, "spectrum", "V = 0\n", "--grid-n", "64", "--modes", "32")
    assert code == 0
    assert json.loads((out / "verdict.json").read_text())["status"].startswith("neutral")


def test_tw_stability_trivial(tmp_path):
    code, _, man = _run(tmp_path, "tw-stability", "eps = 0\nT = 0.05\nT_companion = 0.5\n", "--grid-n", "128")
    assert code == 0, man["claims"]


def test_stiff_limit_table(tmp_path):
    code, out, man = _run(tmp_path, "stiff-limit", "T = 0.2\n", "--grid-n", "64")
    lines = (out / "stiff_limit.csv").read_text().splitlines()
    assert lines[0] == "eps,dev_l2,dev_length,dev_center,ratio,marker" and len(lines) == 4
    assert code == 0, man["claims"]


def test_stiff_limit_needs_two_eps(tmp_path):
    code, _, _ = _run(tmp_path, "stiff-limit", "eps = 0.1\n")
    assert code == 2


def test_outputs_are_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    for d in (a, b):
        assert _run(d, "simulate", "T = 0.01\n", "--seed", "7", "--grid-n", "64")[0] == 0
    for name in ("trajectory.csv", "snapshot_00001.csv"):
        assert (a / "out/trajectory" / name).read_bytes() == (b / "out/trajectory" / name).read_bytes()
    c = tmp_path / "c"
    c.mkdir()
    _run(c, "simulate", "T = 0.01\n", "--seed", "8", "--grid-n", "64")
    assert (a / "out/trajectory/snapshot_00000.csv").read_bytes() != (c / "out/trajectory/snapshot_00000.csv").read_bytes()
