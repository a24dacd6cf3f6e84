import json
import subprocess
import sys

import pytest

from amplify import cli
from amplify.config import ConfigError, load_config, parse_config
from amplify.report import ReportError, emit_report, fmt, to_csv

SMALL = """
[run]
n_max = 20
stab_n_max = 30
M_grid = 1e3, 1e4
r_grid = 50
"""


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


def test_defaults():
    cfg = parse_config("")
    assert (cfg.algebra.D, cfg.algebra.E, cfg.algebra.f) == (3, 1, 1)
    assert cfg.run.nus == (40.0, 80.0, 160.0)
    assert cfg.analysis.error_C == 2.0


def test_parse_values():
    cfg = parse_config("[algebra]\nD = 7  # comment\nCprime = 5.5\n[run]\nside_ns = 1, 4\n")
    assert cfg.algebra.D == 7 and cfg.algebra.Cprime == 5.5 and cfg.run.side_ns == (1, 4)


@pytest.mark.parametrize("text", [
    "[algebra]\nfoo = 1\n",
    "[nonsense]\nD = 3\n",
    "[algebra]\nD = 4\n",
    "[algebra]\nD = three\n",
    "[run]\ndeltas = 0.1, 1.5\n",
    "[run]\nM_grid = 2\n",
    "D = 3\n",
    "[run]\nthreads = 0\n",
])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "true" and fmt(None) == "" and fmt(3) == "3"
    assert fmt(float("inf")) == "inf"
    assert to_csv([{"a": 1.5, "b": "x,y"}], ["a", "b"]) == 'a,b\n1.5,"x,y"\n'


def test_empty_results_write_nothing(tmp_path):
    with pytest.raises(ReportError):
        emit_report("empty", [], tmp_path / "out")
    assert not (tmp_path / "out").exists()


def test_json_round_trip(tmp_path):
    rows = [{"x": 0.1 + 0.2, "y": 1e-300, "z": 2.0 / 3.0, "n": 7}]
    _, js = emit_report("r", rows, tmp_path)
    back = json.loads(js.read_text())["rows"]
    assert back == rows
    assert js.read_bytes().endswith(b"}\n") and b"\r" not in js.read_bytes()


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ReportError, match="file"):
        emit_report("r", [{"a": 1}], blocker / "sub")


def test_malformed_config_exit_2(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[algebra]\nunknown_key = 1\n")
    out = tmp_path / "out"
    assert cli.main(["all", "--config", str(bad), "--out", str(out)]) == 2
    assert not out.exists()


def test_usage_errors_exit_2(small, tmp_path):
    assert cli.main(["nonsense", "--config", str(small)]) == 2
    assert cli.main(["budget"]) == 2
    assert cli.main(["budget", "--config", str(small), "--threads", "0"]) == 2


def test_exit_codes(small, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["stabilizers", "--config", str(small), "--out", str(out)]) == 0
    assert cli.main(["resonate", "--config", str(small), "--out", str(out)]) == 0
    # the measured r L(r) is 2, not 4 pi
    assert cli.main(["stationary-phase", "--config", str(small), "--out", str(out)]) == 1
    text = (out / "stationary-phase.csv").read_text()
    assert "ref_4pi" in text.splitlines()[0]
    crash = tmp_path / "crash.ini"
    crash.write_text("[run]\nbudget_nu = 100\nbudget_A = 1\n")
    assert cli.main(["budget", "--config", str(crash), "--out", str(tmp_path / "c")]) == 3


def test_byte_determinism_and_threads(small, tmp_path):
    a, b, c = (tmp_path / x for x in "abc")
    for d, t in ((a, "1"), (b, "1"), (c, "3")):
        cli.main(["counts", "--config", str(small), "--out", str(d), "--threads", t])
    for name in ("counts.csv", "counts.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()


def test_seed_echoed(small, tmp_path):
    cli.main(["resonate", "--config", str(small), "--out", str(tmp_path), "--seed", "18446744073709551615"])
    meta = json.loads((tmp_path / "resonate.json").read_text())["meta"]
    assert meta["seed"] == 2**64 - 1
    assert meta["config"]["run"]["M_grid"] == [1e3, 1e4]
    assert cli.main(["resonate", "--config", str(small), "--seed", str(2**64)]) == 2


def test_console_entry_point(small, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "amplify", "budget", "--config", str(small),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    header = (tmp_path / "budget.csv").read_text().splitlines()[0]
    assert header.startswith("nu,A,Cpp,M,")


def test_fractions_in_reports(tmp_path):
    from fractions import Fraction
    csv, js = emit_report("q", [{"x": Fraction(1, 2), "y": Fraction(4, 2)}], tmp_path)
    assert csv.read_text() == "x,y\n1/2,2\n"
    assert json.loads(js.read_text())["rows"] == [{"x": "1/2", "y": 2}]


def test_enumeration_dump(tmp_path):
    cfg = tmp_path / "e.ini"
    cfg.write_text("[run]\nside_ns = 3\n")
    assert cli.main(["geometric-sides", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "enumeration.csv").read_text().splitlines()
    assert lines[0] == "n,x0,x1,x2,x3,trace,type"
    assert len(lines) == 1 + 72
    assert {ln.rsplit(",", 1)[1] for ln in lines[1:]} <= {"hyperbolic", "elliptic"}
