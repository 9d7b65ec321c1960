import json
import subprocess
import sys
import time
from importlib import resources

import jsonschema
import pytest

from liereduce.cli import corpus_dir, corpus_names, execute, main

SCHEMA = json.loads((resources.files("liereduce") / "schema" / "report.schema.json").read_text())


def corpus(name):
    return str(corpus_dir() / f"{name}.sys")


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    report = json.loads(out.out) if out.out.strip() else None
    if report is not None:
        jsonschema.validate(report, SCHEMA)
    return code, report, out.err


def test_check_symmetry_self(capsys):
    code, report, _ = run(["check-symmetry", corpus("example1"), "--field", "f", "--candidate", "f"], capsys)
    assert code == 0 and report["status"] == "ok"


def test_failure_carries_witness(capsys):
    code, report, _ = run(["check-symmetry", corpus("example1"), "--field", "f", "--candidate", "g"], capsys)
    assert code == 1 and report["status"] == "fail"
    assert report["witnesses"] == ["[g, f] = (-1, -x2, -gamma(x2)/x1)"]


def test_raw_expression_arguments(capsys):
    code, report, _ = run(["check-orbital-symmetry", corpus("example2"), "--field", "1, x2, 0",
                           "--candidate", "x2, x1, x2"], capsys)
    assert code == 0 and report["alpha"] == ["0"]


def test_usage_and_parse_errors(capsys, tmp_path):
    assert main(["no-such-command"]) == 2
    assert main(["check-symmetry", str(tmp_path / "missing.sys")]) == 2
    bad = tmp_path / "bad.sys"
    bad.write_text("vars: x0\nfield f: x0 +\n")
    code, report, err = run(["check-symmetry", str(bad)], capsys)
    assert code == 2 and report is None and "bad.sys:2:" in err
    code, report, err = run(["check-symmetry", corpus("example2"), "--field", "x1 + y9, 0, 0"], capsys)
    assert code == 2 and "y9" in err


def test_engine_limitation_exit_code(capsys, tmp_path):
    p = tmp_path / "q.sys"
    p.write_text("vars: x0 x1 x2\nfield f: 1, x2, x1^3 + x2^2*x1\n")
    code, report, _ = run(["raise-order", str(p), "--phi", "x2^2 + x1"], capsys)
    assert code == 3 and report["status"] == "unsupported"
    assert report["data"]["implicit"]


def test_orbital_reduce_example2(capsys):
    code, report, _ = run(["orbital-reduce", corpus("example2"), "--field", "H", "--generators", "g"], capsys)
    assert code == 0
    assert report["reduced"] == ["1", "-w2^2"] and report["mu"] == "x1*x2 + 1"
    assert report["data"]["reduced_tuple"] == "(1, -w2^2)"


def test_orbital_reduce_not_reducible(capsys):
    code, report, _ = run(["orbital-reduce", corpus("example2"), "--field", "1, x2, x1",
                           "--generators", "g"], capsys)
    assert code == 1 and report["witnesses"]


def test_decompose_and_prolong(capsys):
    code, report, _ = run(["decompose", corpus("order3"), "--field", "f", "--generators", "g1,g2", "--allow-f"], capsys)
    assert code == 0 and report["alpha"] == ["-1", "0"]
    code, report, _ = run(["decompose", corpus("order3"), "--field", "f", "--generators", "g1"], capsys)
    assert code == 1
    code, report, _ = run(["prolong", corpus("example2"), "--g0", "x0", "--g1", "x1", "--order", "2"], capsys)
    assert report["data"]["field"] == "(x0, x1, 0)" and report["mu"] == "-1"
    code, report, _ = run(["prolong", corpus("order3"), "--g0", "0", "--g1", "1", "--order", "3",
                           "--lambda", "x1"], capsys)
    assert code == 0 and report["data"]["field"] == "(0, 1, x1, x1^2 + x2)"


def test_raise_order_and_build_higher(capsys):
    code, report, _ = run(["raise-order", corpus("example2"), "--field", "H", "--phi", "x1"], capsys)
    assert code == 0 and report["data"]["order"] == 2
    code, report, _ = run(["raise-order", corpus("example2"), "--field", "f", "--phi", "x2"], capsys)
    assert code == 0 and report["data"]["order"] == 1 and report["data"]["rhs"] == "0"
    code, report, _ = run(["build-higher", corpus("order3"), "--field", "f", "--generators", "g1,g2",
                           "--coeffs", "x1, 1/x1", "--phi", "x1"], capsys)
    assert code == 0 and report["reduced"] == ["-w1^2 + w1 + w2", "-w1*w2 + 2*w2"]


def test_verify_numeric_flags(capsys):
    argv = ["verify-numeric", corpus("example2"), "--field", "H", "--reduced", "h", "--mu", "mu",
            "--points", "5", "--seed", "3", "--tol", "1e-9"]
    code, report, _ = run(argv, capsys)
    assert code == 0 and report["residual_max"] < 1e-9 and report["data"] == {"points": 5, "seed": 3}
    code, report, _ = run(argv[:4] + ["--reduced", "1, 1 - w2^2", "--mu", "mu"], capsys)
    assert code == 1 and report["residual_max"] >= 1 - 1e-8


def test_output_is_byte_identical(capsys):
    argv = ["verify-numeric", corpus("example1"), "--field", "H", "--reduced", "h", "--mu", "mu"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first


def test_corpus_list(capsys):
    code, report, _ = run(["corpus", "list"], capsys)
    assert report["data"]["entries"] == ["example1", "example1_ii", "example2", "order3", "so2_example_a", "so3_theta"]


@pytest.mark.parametrize("name", ["so2_example_a", "so3_theta", "example1", "example1_ii", "example2", "order3"])
def test_corpus_entry(name):
    t = time.perf_counter()
    report, code = execute(["corpus", "run", name])
    assert time.perf_counter() - t < 10
    jsonschema.validate(report, SCHEMA)
    assert code == 0, report["witnesses"]
    assert all(step["match"] for step in report["data"]["steps"].values())


def test_corpus_example2_and_order3_reports():
    report, _ = execute(["corpus", "run", "example2"])
    assert report["reduced"] == ["1", "-w2^2"] and report["mu"] == "x1*x2 + 1"
    report, _ = execute(["corpus", "run", "order3"])
    assert sum("display discrepancy" in n for n in report["notes"]) == 2


def test_corpus_unknown_entry():
    assert execute(["corpus", "run", "nope"]) == (None, 2)


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "liereduce.cli", "corpus", "list"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "corpus list"


def test_all_corpus_fixtures_have_a_primary_step():
    for name in corpus_names():
        entry = json.loads((corpus_dir() / f"{name}.json").read_text())
        assert sum(bool(s.get("primary")) for s in entry["steps"]) == 1
