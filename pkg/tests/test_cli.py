import json
import os
import subprocess
import sys

import pytest

from threshprof.analysis import AnalysisDocument
from threshprof.cli import main
from threshprof.config import preset, serialize
from threshprof.graphio import load_graph
from threshprof.topology import build_graph

GOLDEN_EXEC_79_64_42_10 = "4634842f467c03b0"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_describe(capsys):
    code, out, _ = run(capsys, "describe", "threshnet79")
    assert code == 0
    rows = [l.split() for l in out.splitlines()[2:]]
    assert [r[-1] for r in rows] == ["56", "28", "14", "14", "7"]
    assert [r[1] for r in rows] == ["dense"] * 3 + ["harmonic"] * 2


def test_describe_missing_file(capsys):
    code, _, err = run(capsys, "describe", "./myspec")
    assert code == 2 and "./myspec" in err


def test_describe_without_argument(capsys):
    with pytest.raises(SystemExit) as info:
        main(["describe"])
    assert info.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_config_file(tmp_path, capsys):
    p = tmp_path / "net.json"
    p.write_text(serialize(preset("threshnet95")))
    assert run(capsys, "analyze", str(p), "--format", "json")[1] == run(capsys, "analyze", "threshnet95", "--format", "json")[1]
    p.write_text('{"schema": ')
    code, _, err = run(capsys, "describe", str(p))
    assert code == 2 and str(p) in err


def test_analyze_text_and_json_agree(capsys):
    _, text, _ = run(capsys, "analyze", "densenet121", "--input", "224", "--classes", "1000")
    _, js, _ = run(capsys, "analyze", "densenet121", "--input", "224", "--classes", "1000", "--format", "json")
    doc = AnalysisDocument.from_dict(json.loads(js))
    fields = dict(line.split(None, 1) for line in text.splitlines() if line and not line.startswith(("MemR", "read", "write", "peak")))
    assert int(fields["params"].split()[0]) == doc.total_params
    assert int(fields["macc"].split()[0]) == doc.total_macc
    assert f"{doc.memrw_mb!r} MB" in text
    assert abs(doc.total_params / 7.97e6 - 1) <= 0.02
    assert doc.depth == 121


def test_analyze_ordering(capsys):
    docs = [json.loads(run(capsys, "analyze", n, "--format", "json")[1]) for n in ("threshnet79", "threshnet95")]
    assert docs[0]["total_params"] < docs[1]["total_params"]


def test_analyze_input_underflow(capsys):
    code, _, err = run(capsys, "analyze", "threshnet79", "--input", "31")
    assert code == 2 and "31" in err


def test_export_round_trip(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert run(capsys, "export", "threshnet79", "--format", "json", "--out", str(out))[0] == 0
    assert load_graph(out.read_text()) == build_graph(preset("threshnet79"))


def test_export_dot_twice(tmp_path, capsys):
    a, b = tmp_path / "a.dot", tmp_path / "b.dot"
    run(capsys, "export", "densenet121", "--out", str(a))
    run(capsys, "export", "densenet121", "--out", str(b))
    assert a.read_bytes() == b.read_bytes() and a.read_text().startswith("digraph")


def test_unwritable_out(capsys):
    code, _, err = run(capsys, "export", "threshnet79", "--out", "/nonexistent/dir/g.dot")
    assert code == 1 and "/nonexistent/dir/g.dot" in err


def test_exec_golden(capsys):
    code, out, _ = run(capsys, "exec", "threshnet79", "--input", "64", "--seed", "42", "--classes", "10")
    assert code == 0
    lines = dict(l.split(None, 1) for l in out.splitlines())
    assert lines["shape"] == "(1, 10, 1, 1)"
    assert lines["checksum"] == GOLDEN_EXEC_79_64_42_10


def test_exec_verify(capsys):
    code, out, _ = run(capsys, "exec", "threshnet79", "--input", "64", "--seed", "42", "--verify")
    assert code == 0 and "scheduled == naive" in out


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_exec_backends_match_golden(capsys, backend):
    pytest.importorskip(backend)
    out = run(capsys, "exec", "threshnet79", "--input", "64", "--seed", "42", "--classes", "10", "--backend", backend)[1]
    assert GOLDEN_EXEC_79_64_42_10 in out


def test_exec_bad_seed(capsys):
    with pytest.raises(SystemExit) as info:
        main(["exec", "threshnet79", "--seed", str(2**64)])
    assert info.value.code == 1


def test_compare(capsys):
    code, out, _ = run(capsys, "compare", "threshnet79", "threshnet95", "--format", "json")
    rows = json.loads(out)["rows"]
    assert code == 0 and rows[0][1] < rows[1][1] and rows[0][2] < rows[1][2]
    _, out, _ = run(capsys, "compare", "densenet121", "densenet121")
    header, a, b = out.splitlines()
    assert header.split()[0] == "Name" and a == b


def test_module_entry_point_is_deterministic():
    cmd = [sys.executable, "-m", "threshprof", "exec", "threshnet79", "--input", "32", "--seed", "7", "--classes", "3"]
    env = dict(os.environ, THRESHPROF_NO_NUMBA="1")
    a = subprocess.run(cmd, capture_output=True, env=env, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, env=env, check=True).stdout
    assert a == b and b"checksum" in a
