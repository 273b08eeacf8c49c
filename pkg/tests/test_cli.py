import json
import math
import subprocess
import sys

import pytest

from ldp_metrics import catalog
from ldp_metrics.cli import main, parse_grid
from ldp_metrics.errors import ParseError
from ldp_metrics.specs import parse_protocol, protocol_to_json


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_grr(capsys):
    code, out, _ = run(capsys, "analyze", "--protocol", "grr:a=4,eps=2", "--samples", "20000")
    rep = json.loads(out)
    assert code == 0
    assert rep["s_wc"] == pytest.approx(math.exp(-2))
    assert rep["structure"]["ldp_level"] == pytest.approx(2.0)
    assert rep["provenance"]["seed"] == 0


def test_analyze_identity(capsys):
    rep = json.loads(run(capsys, "analyze", "--protocol", "id:a=3", "--samples", "20000")[1])
    assert rep["s_mu"]["value"] == pytest.approx(0.0, abs=1e-12)
    assert rep["f_mu"]["value"] == pytest.approx(1.0, abs=1e-10)


def test_analyze_parity(capsys):
    rep = json.loads(run(capsys, "analyze", "--protocol", "parity:a=4", "--samples", "50000")[1])
    s = rep["s_mu"]
    assert abs(s["value"] - 0.435853) <= 3 * s["std_error"]
    assert rep["f_mu"]["value"] == 0.0


def test_analyze_is_deterministic(capsys):
    argv = ("analyze", "--protocol", "oue:a=3,eps=1", "--samples", "10000", "--seed", "4", "--n", "2")
    first = run(capsys, *argv)[1]
    assert run(capsys, *argv)[1] == first


def test_analyze_workers_do_not_change_output(capsys):
    argv = ("analyze", "--protocol", "grr:a=3,eps=1", "--samples", "30000")
    one = json.loads(run(capsys, *argv)[1])
    many = json.loads(run(capsys, *argv, "--workers", "3")[1])
    assert one["s_mu"] == many["s_mu"] and one["u_as"] == many["u_as"]


def test_json_protocol_file_matches_builtin(tmp_path, capsys):
    path = tmp_path / "grr.json"
    path.write_text(json.dumps(protocol_to_json(catalog.grr(3, 1.0))))
    builtin = json.loads(run(capsys, "analyze", "--protocol", "grr:a=3,eps=1", "--samples", "10000")[1])
    loaded = json.loads(run(capsys, "analyze", "--protocol", str(path), "--samples", "10000")[1])
    for key in ("s_wc", "s_mu", "u_as", "f_mu", "structure"):
        assert builtin[key] == loaded[key]


def test_sweep_csv(capsys):
    code, out, _ = run(capsys, "sweep", "--protocol", "grr:a=3", "--vary", "eps", "--grid", "1,2",
                       "--samples", "2000")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 3
    assert lines[0].startswith("protocol,param,ldp,s_wc,s_mu")


def test_sweep_over_n(capsys):
    code, out, _ = run(capsys, "sweep", "--protocol", "grr:a=2,eps=1", "--vary", "n", "--grid", "1:3:1",
                       "--samples", "2000")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 4 and "u_tally" in lines[0]


@pytest.mark.parametrize("text, expected", [("1,2,3", [1.0, 2.0, 3.0]), ("0:1:0.5", [0.0, 0.5, 1.0])])
def test_parse_grid(text, expected):
    assert parse_grid(text) == pytest.approx(expected)


def test_empty_grid_is_rejected(capsys):
    code, _, err = run(capsys, "sweep", "--protocol", "grr:a=3", "--vary", "eps", "--grid", "")
    assert code == 2 and "error" in err


def test_posterior_identity(capsys):
    rep = json.loads(run(capsys, "posterior", "--protocol", "id:a=2", "--counts", "3,1")[1])
    assert rep["components"] == [{"weight": 1.0, "alpha": [3.5, 1.5]}]


def test_posterior_empty_counts_echo_prior(capsys):
    rep = json.loads(run(capsys, "posterior", "--protocol", "grr:a=2,eps=1", "--counts", "0,0")[1])
    assert rep["components"] == [{"weight": 1.0, "alpha": [0.5, 0.5]}]


def test_posterior_grr_mean(capsys):
    rep = json.loads(run(capsys, "posterior", "--protocol", "grr:a=2,eps=1", "--counts", "5,0")[1])
    assert rep["moments"]["mean"][0] > 0.5


def test_unknown_suite(capsys):
    code, _, err = run(capsys, "verify", "--suite", "nope")
    assert code == 2 and "nope" in err


def test_bad_protocol_spec():
    with pytest.raises(ParseError):
        parse_protocol("grr:a=3")
    with pytest.raises(ParseError):
        parse_protocol("zzz:a=3")


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "ldp_metrics.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
