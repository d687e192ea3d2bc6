import json

import numpy as np
import pytest

from crossdiff import parse_config, read_snapshot, write_snapshot, Field, Grid1D
from crossdiff.cli import cli
from crossdiff.errors import AsymmetricCoefficients, GridMismatch, ParseError

MINIMAL = """
schema = 1

[model]
n = 1
K = [0.0, 1.0, 1.0, 0.0]

[grid]
L = 1.0
m = 32

[solver]
tau = 1e-3
T = 0.01
"""

FULL = """
schema = 1

[model]
n = 2
K = [0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]
epsilon = 0.05

[grid]
L = 2.0
m = 16

[solver]
tau = 1e-3
T = 0.02
newton_tol = 1e-11
newton_max = 40
delta_stab = 0.0
theta = 1e-9
output_every = 5

[initial]
profile = "cosine"
base = [0.4, 0.3, 0.3]
amplitude = [0.1, -0.05, -0.05]
mode = 1

[output]
dir = "out"

[study]
amplitude = 0.02
epsilons = [0.1, 0.05]
deltas = [1e-2, 1e-3]
horizon = 0.5
refine = false
"""


def test_parse_minimal_config():
    cfg = parse_config(MINIMAL)
    assert cfg.model.n == 1
    assert cfg.grid.m == 32
    assert cfg.solver.tau == 1e-3
    assert cfg.solver.t_end == 0.01
    assert cfg.initial is None
    assert cfg.output_dir is None
    assert cfg.hypotheses.h2star


def test_parse_full_config():
    cfg = parse_config(FULL)
    assert cfg.model.n == 2
    assert not cfg.hypotheses.h2star and cfg.hypotheses.h3
    assert cfg.solver.eps_model == 0.05
    assert cfg.solver.output_every == 5
    assert cfg.output_dir == "out"
    assert cfg.study["epsilons"] == (0.1, 0.05)
    assert cfg.study["refine"] is False
    field = cfg.build_initial()
    assert field.cells == 16
    np.testing.assert_allclose(field.values.sum(axis=1), 1.0, atol=1e-14)


def test_parse_rejects_unknown_keys():
    with pytest.raises(ParseError, match="solver.bogus"):
        parse_config(MINIMAL + "\n[solver.bogus]\nx = 1\n")
    with pytest.raises(ParseError, match="turbo"):
        parse_config(MINIMAL.replace("[solver]", "[solver]\nturbo = true"))
    with pytest.raises(ParseError, match="extra"):
        parse_config(MINIMAL + "\n[extra]\nkey = 1\n")


def test_parse_rejects_schema_problems():
    with pytest.raises(ParseError, match="schema"):
        parse_config(MINIMAL.replace("schema = 1", "schema = 2"))
    with pytest.raises(ParseError, match="schema"):
        parse_config(MINIMAL.replace("schema = 1\n", ""))
    with pytest.raises(ParseError, match="malformed"):
        parse_config("schema = [unclosed")


def test_parse_rejects_wrong_table_size():
    bad = MINIMAL.replace("K = [0.0, 1.0, 1.0, 0.0]", "K = [0.0, 1.0, 1.0]")
    with pytest.raises(ParseError, match="row-major"):
        parse_config(bad)


def test_parse_forwards_model_validation():
    bad = MINIMAL.replace("K = [0.0, 1.0, 1.0, 0.0]", "K = [0.0, 1.0, 2.0, 0.0]")
    with pytest.raises(AsymmetricCoefficients):
        parse_config(bad)


def test_csv_initial_roundtrip(tmp_path):
    grid = Grid1D(1.0, 8)
    fld = Field(np.tile([0.25, 0.75], (8, 1)))
    snap = tmp_path / "init.csv"
    write_snapshot(snap, fld, grid)
    text = MINIMAL.replace("m = 32", "m = 8") + f"\n[initial]\nprofile = \"csv\"\npath = \"{snap}\"\n"
    cfg = parse_config(text)
    built = cfg.build_initial()
    np.testing.assert_allclose(built.values, fld.values, atol=1e-15)
    wrong = parse_config(MINIMAL + f"\n[initial]\nprofile = \"csv\"\npath = \"{snap}\"\n")
    with pytest.raises(GridMismatch):
        wrong.build_initial()


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_cli_validate_matrix(capsys):
    assert cli(["validate", "--matrix", "0,1,1,0"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["hypotheses"]["H2star"] is True
    assert payload["classification"]["A"] == [0, 1]


def test_cli_validate_reports_partial(tmp_path, capsys):
    path = _write(tmp_path, FULL)
    assert cli(["validate", "--config", path]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["hypotheses"]["H2star"] is False
    assert payload["classification"]["B"] == [1, 2]


def test_cli_validate_errors():
    assert cli(["validate", "--matrix", "0,1,2,0"]) == 2  # asymmetric
    assert cli(["validate", "--matrix", "0,1,1"]) == 2  # not square
    assert cli(["validate"]) == 2  # neither input given


def test_cli_unknown_subcommand():
    assert cli(["frobnicate"]) == 2


def test_cli_missing_config_file():
    assert cli(["simulate", "--config", "/nonexistent/nope.toml"]) == 2


def test_cli_simulate_writes_outputs(tmp_path, capsys):
    from crossdiff import EntropyReport

    text = MINIMAL + "\n[initial]\nprofile = \"constant\"\nvalues = [0.4, 0.6]\n"
    path = _write(tmp_path, text)
    out = tmp_path / "out"
    assert cli(["simulate", "--config", path, "--out", str(out)]) == 0
    assert (out / "config.toml").read_text() == text
    snaps = sorted(out.glob("snapshot_*.csv"))
    assert len(snaps) == 2  # initial and final
    x, fld = read_snapshot(snaps[0])
    assert fld.cells == 32
    # Emitted files reparse through the package's own readers.
    report = EntropyReport.from_csv(out / "report.csv")
    assert report.rows == 11
    assert "mass_drift" in capsys.readouterr().out


def test_cli_heat_check_passes(tmp_path, capsys):
    text = """
schema = 1

[model]
n = 1
K = [0.0, 1.0, 1.0, 0.0]

[grid]
L = 1.0
m = 50

[solver]
tau = 1e-3
T = 0.1

[study]
refine = false
"""
    path = _write(tmp_path, text)
    assert cli(["heat-check", "--config", path]) == 0
    out = capsys.readouterr().out
    assert "PASS heat_max_error" in out


def test_cli_epsilon_study_quiet(tmp_path, capsys):
    text = """
schema = 1

[model]
n = 2
K = [0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]

[grid]
L = 1.0
m = 16

[solver]
tau = 2e-3
T = 0.02

[study]
epsilons = [0.1, 0.05]
"""
    path = _write(tmp_path, text)
    out_dir = tmp_path / "eps"
    assert cli(["epsilon-study", "--config", path, "--quiet", "--out", str(out_dir)]) == 0
    assert capsys.readouterr().out == ""
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["name"] == "epsilon"
