import json
import subprocess
import sys

import pytest

from dslab import __version__
from dslab.cli import build_parser, main

SUBCOMMANDS = [
    "series", "measure", "overlap", "variance", "gcdsum", "chung-erdos", "collapse",
    "graph", "compress", "anatomy", "orbit", "montecarlo",
]

RUNS = {
    "series": ["series", "--family", "khintchine", "--c", "1/2", "--s", "0", "--Q", "3,10"],
    "measure": ["measure", "--q", "5", "--psi-const", "1/4"],
    "overlap": ["overlap", "--psi-const", "1/2", "--X", "2", "--Y", "5"],
    "variance": ["variance", "--psi-const", "1/2", "--X", "2", "--Y", "3"],
    "gcdsum": ["gcdsum", "--psi-const", "1/2", "--Q", "2"],
    "chung-erdos": ["chung-erdos", "--psi-const", "1/2", "--X", "2", "--Y", "3"],
    "collapse": ["collapse", "--family", "ds-chain", "--q0", "2", "--m", "5", "--scale", "1/2", "--compare"],
    "graph": ["graph", "--V", "2:1/6,3:1/6", "--C", "1/2", "--report", "main"],
    "compress": ["compress", "--V", "2:1/6,3:1/6,5:1/30", "--C", "1/2"],
    "anatomy": ["anatomy", "--x", "100", "--M", "60", "--t", "2", "--c", "1/2"],
    "orbit": ["orbit", "--seed", "5", "--count", "3", "--psi-const", "1/4", "--Q", "300"],
    "montecarlo": ["montecarlo", "--psi-const", "1/2", "--X", "2", "--Y", "3", "--samples", "20000", "--seed", "7", "--exact"],
}


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def test_measure_example(capsys):
    code, out, _ = run(capsys, RUNS["measure"])
    assert code == 0
    assert rows(out)[1] == "5,2/5"


def test_series_example(capsys):
    code, out, _ = run(capsys, ["series", "--family", "khintchine", "--c", "1/2", "--s", "0", "--Q", "3"])
    assert code == 0
    assert rows(out)[1].endswith("11/12,53/72")


def test_variance_and_collapse_rows(capsys):
    _, out, _ = run(capsys, RUNS["variance"])
    assert "13/6" in out and "7/6" in out and "78/49" in out
    _, out, _ = run(capsys, ["collapse", "--psi", "2:1/2,3:1/2"])
    assert rows(out)[1] == "input,2/1,1/1,1/2"


def test_empty_range_is_usage_error(capsys):
    code, out, err = run(capsys, ["variance", "--psi-const", "1/2", "--X", "5", "--Y", "3"])
    assert code == 2 and out == ""
    rec = json.loads(err.strip().splitlines()[-1])
    assert rec["exit_status"] == 2 and rec["subcommand"] == "variance"


def test_domain_error_exit_1(capsys):
    code, _, err = run(capsys, ["orbit", "--alpha", "1/3", "--family", "multiplicative", "--beta", "1/3", "--theta-const", "1", "--psi-Q", "5", "--Q", "5"])
    assert code == 1
    rec = json.loads(err.strip().splitlines()[-1])
    assert set(rec) == {"error", "message", "exit_status", "subcommand"}
    assert "q=3" in rec["message"]


def test_unknown_and_abbreviated_flags_rejected(capsys):
    assert run(capsys, ["measure", "--q", "5", "--psi-const", "1/4", "--bogus", "1"])[0] == 2
    assert run(capsys, ["measure", "--q", "5", "--psi-con", "1/4"])[0] == 2
    assert run(capsys, [])[0] == 2


def test_help_lists_subcommands():
    text = build_parser().format_help()
    for name in SUBCOMMANDS:
        assert name in text
    assert set(RUNS) == set(SUBCOMMANDS)


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_every_subcommand_reruns_byte_identical(name, tmp_path, capsys):
    first, second, jsn = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "a.json"
    assert main(RUNS[name] + ["-o", str(first)]) == 0
    head = first.read_text().splitlines()[0]
    assert head.startswith("# config=")
    assert main(["--config", str(first), "-o", str(second), "--threads", "3"]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert main(RUNS[name] + ["--format", "json", "-o", str(jsn)]) == 0
    env = json.loads(jsn.read_text())
    assert env["version"] == __version__ and env["config"]["subcommand"] == name
    assert isinstance(env["results"], list)
    capsys.readouterr()


def test_threads_do_not_change_output(capsys):
    argv = ["overlap", "--psi-const", "1/5", "--X", "2", "--Y", "12"]
    one = run(capsys, argv)[1]
    four = run(capsys, argv + ["--threads", "4"])[1]
    assert one == four


def test_plain_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"subcommand": "measure", "q": 5, "psi_const": "1/4"}))
    code, out, _ = run(capsys, ["--config", str(cfg)])
    assert code == 0 and rows(out)[1] == "5,2/5"


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "dslab", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == __version__
