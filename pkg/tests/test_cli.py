import json

import pytest

from edge_spectral_lab import cli
from edge_spectral_lab.cli import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_PROPERTY,
    SSF_HEADER,
    ConfigError,
    RunConfig,
    RunReport,
    emit_report,
    main,
    parse_config,
    run_scenario,
)

BANDS = """\
scenario = bands   # band tables
j = 1, 2
k_min = -6
k_max = 6
n_nodes = 16
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# ---------------------------------------------------------------------------
# parsing


def test_defaults_filled_and_echoed():
    cfg = parse_config("scenario = ssf\n")
    assert cfg.b == 1.0 and cfg.bc == "dirichlet"
    assert cfg.potential_kind == "radial_power" and cfg.potential_m == 4.0
    echo = cfg.echo()
    assert echo["potential.m"] == 4.0
    assert echo["scenario"] == "ssf"
    assert set(echo) == set(cli._KEYS)


def test_parse_values_and_comments():
    cfg = parse_config("# header\nscenario = Bands\nbc = Neumann\nj = 1 2 3\nlambdas = 1e-3, 1e-4\npotential.kind = compact_bump\n")
    assert cfg.scenario == "bands" and cfg.bc == "neumann"
    assert cfg.j == (1, 2, 3)
    assert cfg.lambdas == (1e-3, 1e-4)
    assert cfg.potential().kind == "compact_bump"


@pytest.mark.parametrize("text,match", [
    ("scenario = ssf\npotential.m = 1.5\n", r"line 2: potential\.m: decay exponent must exceed 2"),
    ("scenario = ssf\nr = 0.2\nr = 0.3\n", r"line 3: duplicate key 'r' \(first set on line 2\)"),
    ("scenario = ssf\ncolour = red\n", r"line 2: unknown key 'colour'"),
    ("b = 1\n", r"missing required key 'scenario'"),
    ("scenario = ssf\nn_x = many\n", r"line 2: bad value"),
    ("scenario = ssf\nthis line has no equals\n", r"line 2: expected"),
    ("scenario = nonsense\n", r"line 1: scenario"),
    ("scenario = ssf\nr = 1.5\n", r"line 2: r: must lie in \(0, 1\)"),
    ("scenario = ssf\nside = left\n", r"line 2: side"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_lambda_grid():
    cfg = parse_config("scenario = ssf\nlambda_min = 1e-4\nlambda_max = 1e-2\nper_decade = 2\n")
    g = cfg.lambda_grid()
    assert len(g) == 5
    assert g[0] == pytest.approx(1e-2) and g[-1] == pytest.approx(1e-4)
    cfg = parse_config("scenario = ssf\nlambdas = 1e-4 1e-2 1e-3\n")
    assert list(cfg.lambda_grid()) == [1e-2, 1e-3, 1e-4]


# ---------------------------------------------------------------------------
# outputs


def test_empty_run_writes_json_only(tmp_path):
    written = emit_report(RunReport(config={"scenario": "volume"}), tmp_path)
    assert sorted(p.name for p in written) == ["summary.json", "timing.json"]
    assert not list(tmp_path.glob("*.csv"))
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["tables"] == [] and summary["passed"] is True
    assert summary["version"]


def test_bands_run_and_rerun_byte_identical(tmp_path, capsys):
    cfg = _write(tmp_path, BANDS)
    assert main([cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main([cfg, "--out", str(tmp_path / "b")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "PASS  j1_monotone" in out and "PASS  j2_dominates_j1" in out
    for name in ("band_j1.csv", "band_j2.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    text = (tmp_path / "a" / "band_j1.csv").read_text()
    lines = text.split("\n")
    assert lines[0] == "k,E,dE,disc_error"
    assert len(lines) == 16 + 2 and lines[-1] == ""
    assert "\r" not in text
    assert lines[1].split(",")[0] == "-6.0000000000000000e+00"
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["config"]["n_nodes"] == 16 and summary["config"]["b"] == 1.0
    assert summary["flags"]["j1_above_threshold"]
    timing = json.loads((tmp_path / "a" / "timing.json").read_text())
    assert timing["threads"] == 1 and timing["wall_seconds"] > 0


def test_rerun_overwrites(tmp_path):
    cfg = _write(tmp_path, BANDS)
    out = tmp_path / "o"
    out.mkdir()
    (out / "band_j1.csv").write_text("stale\n")
    assert main([cfg, "--out", str(out)]) == EXIT_OK
    assert (out / "band_j1.csv").read_text().startswith("k,E,dE,disc_error\n")
    assert not [p for p in out.iterdir() if p.name.startswith(".")]


def test_ssf_run_header(tmp_path):
    cfg = _write(tmp_path, "scenario = ssf\nlambdas = 1e-2\nnode_budget = 300\n")
    assert main([cfg, "--out", str(tmp_path / "s")]) == EXIT_OK
    header = (tmp_path / "s" / "ssf_sweep.csv").read_text().split("\n")[0]
    assert header == ",".join(SSF_HEADER)
    assert header == "lambda,eps,nodes,n_minus_hi,n_minus_lo,n_plus_hi,n_plus_lo,trace_norm,volume,ratio"


def test_ssf_below_threshold_flag():
    rep = run_scenario(parse_config("scenario = ssf\nlambdas = 1e-2\nside = below\nnode_budget = 300\n"))
    assert rep.flags["below_sign_definite"]
    (row,) = rep.tables["ssf_sweep"][1]
    assert row[0] == -1e-2 and row[3] == 0 and row[4] == 0 and row[6] > 0


def test_volume_scenario():
    rep = run_scenario(parse_config("scenario = volume\nlambdas = 1e-2 1e-3\n"))
    header, rows = rep.tables["volume"]
    assert header == ("lambda", "half_plane", "full_plane")
    assert rows[0][1] == pytest.approx(2.25)
    assert rep.flags["nonincreasing"]
    assert rep.results["admissibility"]["admissible"]


# ---------------------------------------------------------------------------
# exit codes


def test_exit_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, "scenario = ssf\npotential.m = 1.5\n")
    assert main([cfg]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err
    assert main([str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert main([]) == EXIT_CONFIG
    assert main([_write(tmp_path, BANDS), "--threads", "0"]) == EXIT_CONFIG


def test_exit_config_error_bad_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ESL_THREADS", "lots")
    assert main([_write(tmp_path, BANDS), "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_exit_numerical_failure(tmp_path, capsys):
    cfg = _write(tmp_path, "scenario = invert\ns_values = 1e-30\n")
    assert main([cfg, "--out", str(tmp_path / "n")]) == EXIT_NUMERICAL
    assert "outside the covered range" in capsys.readouterr().err


def test_exit_property_failure(tmp_path, monkeypatch):
    def failing(cfg, rep):
        rep.flags["always_false"] = False

    monkeypatch.setitem(cli.RUNNERS, "volume", failing)
    cfg = _write(tmp_path, "scenario = volume\n")
    assert main([cfg, "--out", str(tmp_path / "p")]) == EXIT_PROPERTY
    assert json.loads((tmp_path / "p" / "summary.json").read_text())["passed"] is False


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ESL_THREADS", "2")
    cfg = _write(tmp_path, "scenario = volume\nlambdas = 1e-2\n")
    assert main([cfg, "--out", str(tmp_path / "t")]) == EXIT_OK
    assert json.loads((tmp_path / "t" / "timing.json").read_text())["threads"] == 2


def test_run_config_requires_scenario():
    with pytest.raises(TypeError):
        RunConfig()


def test_shipped_configs_parse():
    from pathlib import Path

    cfgs = sorted((Path(__file__).resolve().parent.parent / "configs").glob("*.cfg"))
    assert len(cfgs) >= 8
    for p in cfgs:
        cfg = parse_config(p.read_text())
        assert cfg.out.startswith("out/")
