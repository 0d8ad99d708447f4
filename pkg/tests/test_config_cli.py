import json
import textwrap

import pytest

from singplap.cli import main
from singplap.config import load_config, parse_config
from singplap.errors import ConfigError
from singplap.runner import run_checks, sweep_points, worker_count

BASE = """
[problem]
p = 2.0
gamma = {gamma}

[domain]
variant = "interval"
R = 1.0

[mesh]
n_cells = 2048

[analysis]
checks = {checks}
"""


def write_cfg(tmp_path, gamma=3.0, checks='["rate"]', extra="", name="c.toml"):
    path = tmp_path / name
    path.write_text(BASE.format(gamma=gamma, checks=checks) + textwrap.dedent(extra))
    return path


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("raw, key", [
    ({"problem": {"p": 2.0, "gamma": 3.0, "colour": 1}}, "colour"),
    ({"problem": {"p": 2.0, "gamma": 3.0}, "plots": {}}, "plots"),
    ({"problem": {"p": 2.0, "gamma": 3.0}, "mesh": {"cells": 10}}, "cells"),
    ({"problem": {"p": 2.0, "gamma": 3.0}, "sweep": {"q": [1.0]}}, "q"),
    ({"problem": {"p": 0.5, "gamma": 3.0}}, "problem.p"),
    ({"problem": {"p": 2.0, "gamma": 3.0}, "analysis": {"checks": ["magic"]}}, "magic"),
    ({"problem": {"p": 2.0, "gamma": 3.0}, "output": {"formats": ["png"]}}, "png"),
])
def test_config_errors_name_the_key(raw, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(raw)


def test_toml_syntax_error_reports_location(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[problem]\np = \n")
    with pytest.raises(ConfigError, match="line"):
        load_config(bad)


def test_config_hash_is_stable(tmp_path):
    a = load_config(write_cfg(tmp_path, name="a.toml"))
    b = load_config(write_cfg(tmp_path, name="b.toml"))
    c = load_config(write_cfg(tmp_path, gamma=2.5, name="c.toml"))
    assert a.content_hash == b.content_hash != c.content_hash


def test_sweep_points_cartesian_product():
    cfg = parse_config({"problem": {"p": 2.0, "gamma": 3.0},
                        "sweep": {"gamma": [2.0, 3.0], "p": [2.0, 3.0, 4.0]}})
    pts = sweep_points(cfg)
    assert len(pts) == 6 and {"gamma", "p"} <= set(pts[0])
    assert sweep_points(parse_config({"problem": {"p": 2.0, "gamma": 3.0}})) == []


def test_worker_count_respects_cap(monkeypatch):
    monkeypatch.setenv("PLAP_THREADS", "1")
    assert worker_count(10) == 1
    monkeypatch.setenv("PLAP_THREADS", "3")
    assert worker_count(10) == 3
    assert worker_count(2) == 2


def test_gamma_one_rate_check_routes_to_log_fit():
    cfg = parse_config({"problem": {"p": 2.0, "gamma": 1.0}, "mesh": {"n_cells": 2048},
                        "analysis": {"checks": ["rate"]}})
    _, reps = run_checks(cfg, 0, 0, ["rate"])
    assert reps[0].check == "log-correction"


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def test_solve_writes_field_files(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    header = (out / "field.csv").read_text().splitlines()[0]
    assert header == "x,u,du"
    meta = json.loads((out / "field.json").read_text())
    assert meta["meta"]["residual"] <= 1e-10
    assert "solve: ok" in capsys.readouterr().out


def test_report_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, checks='["rate", "limit", "wcp"]')
    runs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert main(["report", "--config", str(cfg), "--out", str(out), "--format", "json"]) == 0
        runs.append((out / "report.json").read_bytes())
    assert runs[0] == runs[1]
    rep = json.loads(runs[0])
    assert rep["schema"] == "report_v1" and rep["failed"] == []


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[problem]\np = 0.5\ngamma = 3.0\n")
    assert main(["report", "--config", str(bad)]) == 2
    assert "problem.p" in capsys.readouterr().err
    assert main(["report", "--config", str(tmp_path / "missing.toml")]) == 2
    stuck = write_cfg(tmp_path, extra="""
        [solver]
        max_iter = 1
        picard_iters = 0
        """, name="stuck.toml")
    assert main(["solve", "--config", str(stuck), "--out", str(tmp_path / "o")]) == 3
    assert "stage" in capsys.readouterr().err
    assert main(["solve", "--config", str(write_cfg(tmp_path)), "--dim", "2",
                 "--out", str(tmp_path / "o2")]) == 2


def test_failed_check_exits_one(tmp_path):
    # an absurdly tight rate tolerance must fail honestly
    path = write_cfg(tmp_path)
    path.write_text(path.read_text() + "rate_tol = 1e-9\n")
    assert main(["report", "--config", str(path), "--out", str(tmp_path / "t")]) == 1
    rep = json.loads((tmp_path / "t" / "report.json").read_text())
    assert rep["failed"] == ["boundary-rate"]


def test_empty_sweep_writes_nothing(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    assert not out.exists()


def test_sweep_tracks_predicted_exponent(tmp_path, monkeypatch):
    monkeypatch.setenv("PLAP_THREADS", "2")
    cfg = write_cfg(tmp_path, extra="""
        [sweep]
        gamma = [2.0, 4.0]
        """)
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--format", "json",
                 "--format", "csv", "--format", "svg"]) == 0
    rows = json.loads((out / "sweep.json").read_text())["rows"]
    for r in rows:
        assert abs(r["exponent"] - 2.0 / (r["gamma"] + 1.0)) < 0.02
    assert (out / "sweep.csv").read_text().startswith("gamma,")
    assert (out / "sweep.svg").read_text().lstrip().startswith("<svg")
