import json
from pathlib import Path

import pytest

from fracbubble.cli import main, parse_config


def _write(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


def test_default_config_parses():
    cfg = parse_config(None)
    assert cfg.params.n == 1 and cfg.grid.N == 4096
    assert cfg.digest == parse_config(None).digest


def test_config_fragment_schema(tmp_path):
    path = _write(tmp_path, "c.json", {
        "n": 1, "s": 0.2, "q": 1.5, "eps": 0.01,
        "weight": {"bumps": [{"c": [0.0], "r": 1.0, "a": 1.0, "k": 2}]}})
    cfg = parse_config(path)
    assert cfg.params.q == 1.5
    assert cfg.weight.bumps[0].r == 1.0


def test_bad_dimension_is_config_error(tmp_path):
    path = _write(tmp_path, "bad.json", {"s": 0.3})  # n=1 <= 4s
    assert main(["verify", "--config", path, "--out",
                 str(tmp_path / "o")]) == 3


def test_nonpositive_weight_is_config_error(tmp_path):
    path = _write(tmp_path, "bad.json", {
        "weight": {"bumps": [{"c": [0.0], "r": 1.0, "a": -1.0, "k": 2}]}})
    assert main(["landscape", "--config", path, "--out",
                 str(tmp_path / "o")]) == 3


def test_sublinear_sign_changing_refused(tmp_path):
    path = _write(tmp_path, "bad.json", {
        "q": 0.5,
        "weight": {"bumps": [{"c": [0.0], "r": 1.0, "a": 1.0, "k": 2},
                             {"c": [3.0], "r": 1.0, "a": -1.0, "k": 2}]}})
    assert main(["asymptotics", "--config", path, "--out",
                 str(tmp_path / "o")]) == 3


def test_solve_rejects_3d(tmp_path):
    path = _write(tmp_path, "c3.json", {
        "n": 3, "s": 0.3, "q": 1.2,
        "weight": {"bumps": [{"c": [0.0, 0.0, 0.0], "r": 1.0, "a": 1.0,
                              "k": 2}]},
        "grid": {"L": 20.0, "N": 64}})
    assert main(["solve", "--config", path, "--out",
                 str(tmp_path / "o")]) == 3


def test_verify_list(capsys):
    assert main(["verify", "--list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "bubble_profile_residual" in out
    assert len(out) >= 10


def test_coarse_grid_fails_verify_naming_check(tmp_path, capsys):
    path = _write(tmp_path, "coarse.json", {"grid": {"L": 40.0, "N": 64}})
    code = main(["verify", "--config", path, "--out", str(tmp_path / "o")])
    assert code == 1
    rep = json.loads((tmp_path / "o" / "verify_report.json").read_text())
    assert rep["checks"]["bubble_profile_residual"]["pass"] is False


def test_landscape_csv_header(tmp_path):
    path = _write(tmp_path, "c.json", {"grid": {"L": 40.0, "N": 256},
                                       "sweeps": {"landscape": {
                                           "mu_points": 5, "xi_points": 5}}})
    out = tmp_path / "o"
    assert main(["landscape", "--config", path, "--out", str(out)]) == 0
    header = (out / "landscape.csv").read_text().splitlines()[0]
    assert header == "mu,xi_1,gamma,dgamma_dmu,dgamma_dxi_1"
    pts = json.loads((out / "critical_points.json").read_text())
    assert pts and pts[0]["kind"] == "max"
    manifest = json.loads((out / "manifest_landscape.json").read_text())
    assert set(manifest["files"]) == {"landscape.csv", "slab.json",
                                      "critical_points.json"}


def test_manifest_hashes_match(tmp_path):
    import hashlib
    path = _write(tmp_path, "c.json", {"grid": {"L": 40.0, "N": 256},
                                       "sweeps": {"landscape": {
                                           "mu_points": 4, "xi_points": 5}}})
    out = tmp_path / "o"
    main(["landscape", "--config", path, "--out", str(out)])
    manifest = json.loads((out / "manifest_landscape.json").read_text())
    for name, digest in manifest["files"].items():
        actual = hashlib.sha256((out / name).read_bytes()).hexdigest()
        assert actual == digest


def test_regularity_outputs(tmp_path):
    path = _write(tmp_path, "c.json", {"grid": {"L": 40.0, "N": 512}})
    out = tmp_path / "o"
    assert main(["regularity", "--config", path, "--out", str(out)]) == 0
    audit = json.loads((out / "regularity_audit.json").read_text())
    assert audit["pass"] is True
    assert audit["theta"] == pytest.approx(5.0 / 3.0)
    lines = (out / "regularity_trace.csv").read_text().splitlines()
    assert lines[0] == "k,A_k,U_k,support_measure"
    assert len(lines) == 42
