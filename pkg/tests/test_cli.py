import json
import math

import numpy as np
import pytest

from tangentia.cli import ExperimentConfig, run


def read_body(path):
    """Artifact body without the leading config comment line."""
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# {")
    return "\n".join(lines[1:])


# ---------------------------------------------------------------------------
# config plumbing


def test_config_json_roundtrip():
    cfg = ExperimentConfig("tau", {"seed": 3, "n_dir": 16, "point": "0,0"})
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg


def test_config_file_overrides_flags(tmp_path):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(json.dumps({"theta": "-1"}))
    out = tmp_path / "d.json"
    rc = run(
        [
            "dirderiv",
            "--function",
            "tent",
            "--point",
            "0.5",
            "--theta",
            "1",
            "--config",
            str(cfgfile),
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["options"]["theta"] == "-1"
    assert doc["result"]["derivative"] == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# exit codes


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as ei:
        run(["not-a-command"])
    assert ei.value.code == 2


def test_parse_error_exits_2(tmp_path, capsys):
    rc = run(
        [
            "dirderiv",
            "--function",
            "bogus",
            "--point",
            "0",
            "--theta",
            "1",
        ]
    )
    assert rc == 2


def test_domain_error_exits_1(tmp_path):
    # envelope formula refused at a kink with lambda = 0
    rc = run(
        [
            "dirderiv",
            "--function",
            "tent",
            "--point",
            "1",
            "--theta",
            "1",
            "--of",
            "maximal",
        ]
    )
    assert rc == 1


# ---------------------------------------------------------------------------
# subcommands


def test_maximal_field_value_at_two(tmp_path):
    out = tmp_path / "mf.csv"
    rc = run(
        [
            "maximal-field",
            "--function",
            "tent",
            "--box",
            "1.5,2.5",
            "--res",
            "3",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    lines = read_body(out).splitlines()
    header = lines[0].split(",")
    row = dict(zip(header, lines[2].split(",")))  # middle row is x = 2
    assert float(row["x1"]) == 2.0
    assert float(row["Mf"]) == pytest.approx((3.0 - math.sqrt(7.0)) / 2.0, abs=1e-6)
    assert float(row["r_best_1"]) == pytest.approx(math.sqrt(7.0), abs=1e-4)


def test_determinism_byte_identical(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    argv = ["singular-set", "--function", "abs", "--box=-1,1", "--res", "17",
            "--no-gamma"]
    assert run(argv + ["--out", str(a)]) == 0
    assert run(argv + ["--out", str(b)]) == 0
    # the echoed-config comment line carries the output path; the body
    # itself must be byte-identical across runs
    assert read_body(a) == read_body(b)


def test_tau_subcommand_subspace_syntax(tmp_path):
    out = tmp_path / "t.json"
    rc = run(
        [
            "tau",
            "--function",
            "maxaffine[(1,0,0),(-1,0,0)]",
            "--point",
            "0,0.5",
            "--subspace",
            "V=[0,1]",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["result"]["tau"] < 1e-9


def test_tau_halfspace_spec(tmp_path):
    out = tmp_path / "t.json"
    rc = run(
        [
            "tau",
            "--function",
            "abs",
            "--point",
            "0",
            "--subspace",
            "ray=[1]",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    # |x| restricted to the positive ray is linear
    assert doc["result"]["tau"] < 1e-9


def test_gamma_subcommand(tmp_path):
    out = tmp_path / "g.json"
    rc = run(
        [
            "gamma",
            "--function",
            "maxaffine[(1,0,0),(-1,0,0)]",
            "--point",
            "0,0.3",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["result"]["gamma"] == 1


def test_medial_axis_subcommand(tmp_path):
    out = tmp_path / "m.csv"
    rc = run(
        [
            "medial-axis",
            "--set-points=-1,0;1,0",
            "--box=-0.5,0.5",
            "--res",
            "9",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    lines = read_body(out).splitlines()
    assert lines[0] == "x1,x2,dist,multiplicity"


def test_infconv_subcommand(tmp_path):
    out = tmp_path / "ic.json"
    rc = run(
        [
            "infconv",
            "--function",
            "abs",
            "--point",
            "2",
            "--y-box=-4,4",
            "--t",
            "1",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["result"]["value"] == pytest.approx(1.5, abs=1e-6)


def test_tangency_subcommand(tmp_path):
    pts = tmp_path / "cloud.csv"
    t = np.linspace(-1, 1, 60)
    with open(pts, "w") as fh:
        fh.write("x1,x2\n")
        for v in t:
            fh.write(f"{v},0.0\n")
    out = tmp_path / "r.json"
    rc = run(["tangency", "--points", str(pts), "--k", "1", "--bases", "4",
              "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["result"]["reports"]
    assert all(r["verdict"] == "tangential" for r in doc["result"]["reports"])


def test_tangency_sigma_flag(tmp_path):
    pts = tmp_path / "cloud.csv"
    t = np.linspace(-1, 1, 50)
    with open(pts, "w") as fh:
        for v in t:
            fh.write(f"{v},0.0\n")
        for v in t:
            fh.write(f"{v},{v}\n")
    out = tmp_path / "r.json"
    rc = run(["tangency", "--points", str(pts), "--k", "1", "--sigma",
              "--pieces", "4", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["result"]["sigma"]["pass"] is True
    assert len(doc["result"]["sigma"]["pieces"]) == 2


def test_thread_env_cap(monkeypatch, tmp_path):
    monkeypatch.setenv("TANGENTIA_THREADS", "1")
    out = tmp_path / "mf.csv"
    rc = run(
        [
            "maximal-field",
            "--function",
            "tent",
            "--box",
            "0,1",
            "--res",
            "3",
            "--threads",
            "8",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
