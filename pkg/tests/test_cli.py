import csv
import json

import pytest

from fragwave import cli
from fragwave.cli import parse_spec, run

BINARY_SPEC = {"model": "binary", "atoms": [{"weight": 1.0, "fragments": [0.5, 0.5]}]}


def write_spec(tmp_path, data, name="spec.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data, indent=2))
    return str(path)


def invoke(*argv):
    lines = []
    code = run([str(a) for a in argv], echo=lines.append)
    return code, "\n".join(lines)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# spec parsing -----------------------------------------------------------------------

def test_parse_spec_accepts_pairs_and_defaults():
    nu, defaults = parse_spec(json.dumps({"model": "m", "atoms": [[2.0, [0.5, 0.25]]],
                                          "defaults": {"trials": 10}}))
    assert nu.name == "m" and nu.weights.tolist() == [2.0]
    assert defaults == {"trials": 10}


def test_parse_spec_reports_line_of_bad_atom():
    text = '{\n  "model": "bad",\n  "atoms": [\n    {"weight": 1, "fragments": [0.5, 0.5]},\n' \
           '    {"weight": 1, "fragments": [0.5]}\n  ]\n}\n'
    with pytest.raises(cli.ValidationError, match=r"spec.json line 5: atoms\[1\]\.fragments: .*nu\(s_2=0\)=0"):
        parse_spec(text, "spec.json")


@pytest.mark.parametrize("text,match", [
    ('{"model": "x",\n "atoms": [1,}', r"line 2"),
    ('{"atoms": []}', "atoms"),
    ('{"atoms": [{"weight": 1, "fragments": [0.5, 0.5]}], "defaults": {"bogus": 1}}', "bogus"),
    ('[1, 2]', "object"),
])
def test_parse_spec_rejects(text, match):
    with pytest.raises(cli.ValidationError, match=match):
        parse_spec(text, "s")


# subcommands ------------------------------------------------------------------------

def test_critical_binary_and_scaling(tmp_path):
    spec = write_spec(tmp_path, BINARY_SPEC)
    code, text = invoke("critical", "--spec", spec, "--out", tmp_path / "a")
    assert code == 0 and "p_bar = 1.42134287939" in text and "c_pbar = 0.258796632081" in text
    rows = read_csv(tmp_path / "a" / "critical.csv")
    assert list(rows[0]) == ["p", "phi", "phi_prime", "c_p"]
    doubled = write_spec(tmp_path, {"atoms": [[2.0, [0.5, 0.5]]]}, "double.json")
    code, text2 = invoke("critical", "--spec", doubled, "--out", tmp_path / "b")
    assert code == 0 and "p_bar = 1.42134287939" in text2 and "c_pbar = 0.517593264162" in text2
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["subcommand"] == "critical" and man["seed"] == 0xF4A6
    assert man["outputs"] == ["critical.csv"] and man["spec_data"]["model"] == "binary"


def test_invalid_spec_exits_one_without_outputs(tmp_path, capsys):
    spec = write_spec(tmp_path, {"atoms": [{"weight": 1, "fragments": [0.5]}]})
    code, _ = invoke("critical", "--spec", spec, "--out", tmp_path / "o")
    assert code == 1
    assert "nu(s_2=0)=0" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_simulate_is_reproducible(tmp_path):
    spec = write_spec(tmp_path, BINARY_SPEC)
    args = ["simulate", "--spec", spec, "--x", 0.5, "--c", 1.0, "--trials", 200, "--cap", 100]
    assert invoke(*args, "--out", tmp_path / "a")[0] == 0
    assert invoke(*args, "--out", tmp_path / "b", "--threads", 2)[0] == 0
    a = (tmp_path / "a" / "trials.csv").read_bytes()
    assert a == (tmp_path / "b" / "trials.csv").read_bytes()
    assert len(read_csv(tmp_path / "a" / "trials.csv")) == 200
    code, _ = invoke("--from-manifest", tmp_path / "a" / "manifest.json", "--out", tmp_path / "c")
    assert code == 0 and (tmp_path / "c" / "trials.csv").read_bytes() == a


def test_scan_rows(tmp_path):
    spec = write_spec(tmp_path, BINARY_SPEC)
    code, _ = invoke("scan", "--spec", spec, "--x", 1.0, "--c-min", 0.1, "--c-max", 1.0,
                     "--trials", 20, "--out", tmp_path)
    rows = read_csv(tmp_path / "scan.csv")
    assert code == 0 and len(rows) == 16
    assert float(rows[0]["c"]) == 0.1 and float(rows[-1]["c"]) == 1.0
    assert all(int(r["n_trials"]) == 20 for r in rows)


def test_wave_outputs_and_check(tmp_path):
    spec = write_spec(tmp_path, BINARY_SPEC)
    code, text = invoke("wave", "--spec", spec, "--c", 1.0, "--check", "0,1", "--trials", 400,
                        "--out", tmp_path)
    assert code == 0 and "f(0+) = 0.53624517" in text
    assert {p.name for p in tmp_path.iterdir()} >= {"wave.csv", "residual.csv", "scale.csv",
                                                    "crossval.csv", "manifest.json"}
    assert float(read_csv(tmp_path / "wave.csv")[0]["f"]) == pytest.approx(0.5362451733145199)
    assert len(read_csv(tmp_path / "crossval.csv")) == 2


@pytest.mark.parametrize("extra,code", [(("--c", 0.2), 1), (("--c", 1.0, "--tol", 1e-9), 2)])
def test_wave_failures(tmp_path, extra, code):
    spec = write_spec(tmp_path, BINARY_SPEC)
    assert invoke("wave", "--spec", spec, *extra, "--out", tmp_path / "o")[0] == code
    assert not (tmp_path / "o").exists()


def test_partial_outputs_removed(tmp_path, monkeypatch):
    def broken(args, nu, defaults, out, echo):
        out.csv("half.csv", ["a"], [[1]])
        raise cli.NumericalError("boom")

    monkeypatch.setitem(cli.COMMANDS, "critical", broken)
    spec = write_spec(tmp_path, BINARY_SPEC)
    (tmp_path / "o").mkdir()
    (tmp_path / "o" / "keep.txt").write_text("x")
    assert invoke("critical", "--spec", spec, "--out", tmp_path / "o")[0] == 2
    assert [p.name for p in (tmp_path / "o").iterdir()] == ["keep.txt"]


@pytest.mark.parametrize("argv", [
    ("simulate", "--spec", "{spec}", "--c", 1.0),
    ("simulate", "--spec", "{spec}", "--x", -1.0, "--c", 1.0),
    ("simulate", "--spec", "{spec}", "--x", 1.0, "--c", 1.0, "--trials", 0),
    ("critical", "--spec", "{spec}", "--seed", "nope"),
    ("frobnicate",),
    (),
    ("critical", "--spec", "missing.json"),
])
def test_usage_errors_exit_one(tmp_path, argv):
    spec = write_spec(tmp_path, BINARY_SPEC)
    argv = [spec if a == "{spec}" else a for a in argv]
    assert invoke(*argv, *(("--out", tmp_path / "o") if argv else ()))[0] == 1


def test_verify_quick(tmp_path):
    spec = write_spec(tmp_path, BINARY_SPEC)
    code, text = invoke("verify", "--spec", spec, "--budget", "quick", "--out", tmp_path)
    assert code == 0, text
    rows = read_csv(tmp_path / "acceptance.csv")
    assert [int(r["criterion"]) for r in rows] == list(range(1, 9))
    assert text.count("[PASS]") == 8
