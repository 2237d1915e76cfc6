import json

import pytest

from hfd.cli import RunConfig, main, parse_matrix, parse_quadint
from hfd.ring import QuadInt


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_quadint():
    assert parse_quadint("1+w", 5) == QuadInt(5, 1, 1)
    assert parse_quadint("-2*w", 5) == QuadInt(5, 0, -2)
    assert parse_quadint("3-w", 2) == QuadInt(2, 3, -1)
    assert parse_quadint("-w", 2) == QuadInt(2, 0, -1)
    assert parse_quadint("7", 2) == QuadInt(2, 7, 0)
    for s in (QuadInt(5, -3, 4), QuadInt(5, 0, 1), QuadInt(5, 2, -1)):
        assert parse_quadint(str(s), 5) == s
    with pytest.raises(ValueError):
        parse_quadint("1+x", 5)


def test_parse_matrix_checks_determinant():
    assert parse_matrix("1,1,0,1", 5).b == QuadInt(5, 1, 0)
    with pytest.raises(ValueError):
        parse_matrix("1,1,1,1", 5)


def test_field_examples(capsys):
    code, out, _ = run(capsys, "field", "--k", "5", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["eps0"] == "w" and doc["norm_eps0"] == -1
    code, out, _ = run(capsys, "field", "--k", "2")
    assert code == 0 and "eps0 w" in out  # omega = 1 + sqrt 2
    code, _, err = run(capsys, "field", "--k", "4")
    assert code == 3 and "square-free" in err


def test_exit_codes(capsys):
    assert run(capsys, "s1", "--k", "10")[0] == 3
    assert run(capsys, "nonsense", "--k", "5")[0] == 2
    assert run(capsys, "s1")[0] == 2
    assert run(capsys, "reduce", "--k", "5", "--point", "1,2")[0] == 2
    assert run(capsys, "reduce", "--k", "5", "--point", "0,0,1,2", "--reduce-cap", "0")[0] == 2
    assert run(capsys, "reduce", "--k", "5", "--point", "1/7,2/9,1,1/1000000", "--reduce-cap", "1")[0] == 4


def test_s1_command(capsys):
    code, out, _ = run(capsys, "s1", "--k", "5", "--format", "json")
    assert code == 0 and len(json.loads(out)["pairs"]) == 21


def test_generators_command(capsys):
    code, out, _ = run(capsys, "generators", "--k", "2")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "P1 = [[1, 1], [0, 1]]"
    assert lines[1] == "P2 = [[1, w], [0, 1]]"
    assert lines[2].startswith("P3 = [[w, 0], [0, ")
    assert len(lines) == 3 + 67


def test_reduce_command(capsys):
    code, out, _ = run(capsys, "reduce", "--k", "5", "--point", "0,0,1,2", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["steps"] == 0 and doc["verified"]
    assert doc["point"] == {"s1": "0", "s2": "0", "r": "1", "h": "2"}
    code, out, _ = run(capsys, "reduce", "--k", "2", "--point", "1/3,-2/7,5,1/50")
    assert code == 0 and "verified True" in out


def test_decompose_command(capsys):
    code, out, _ = run(capsys, "decompose", "--k", "5", "--matrix", "1,0,0,1")
    assert code == 0 and out.splitlines()[0].strip() == "word"
    code, out, _ = run(capsys, "decompose", "--k", "5", "--matrix", "w,-1+w,0,-1+w", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["word"] == "P1 P3" and doc["verified"]


def test_slice_command(capsys):
    code, out, _ = run(capsys, "slice", "--k", "5", "--r", "1", "--grid", "9")
    assert code == 0
    rows = [list(map(float, line.split(","))) for line in out.splitlines()[1:]]
    assert len(rows) == 81
    assert all(0.4 < h <= 1 for _, _, h in rows)
    vals = {(round(a, 9), round(b, 9)): h for a, b, h in rows}
    for (a, b), h in vals.items():
        assert vals[(round(-a, 9) + 0.0, round(-b, 9) + 0.0)] == pytest.approx(h, abs=1e-9)
    assert run(capsys, "slice", "--k", "5", "--r", "100")[0] == 2


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text("k = 5\nslice_grid = 3\nformat = \"csv\"\n")
    code, out, _ = run(capsys, "slice", "--config", str(cfg), "--r", "1")
    assert code == 0 and len(out.splitlines()) == 1 + 9
    code, out, _ = run(capsys, "slice", "--config", str(cfg), "--r", "1", "--grid", "2")
    assert len(out.splitlines()) == 1 + 4
    bad = tmp_path / "bad.toml"
    bad.write_text("k = 5\nbogus = 1\n")
    assert run(capsys, "field", "--config", str(bad))[0] == 2
    neg = tmp_path / "neg.toml"
    neg.write_text("k = 5\ncluster_tol = -1.0\n")
    assert run(capsys, "field", "--config", str(neg))[0] == 2


def test_out_file(tmp_path, capsys):
    path = tmp_path / "s1.json"
    assert run(capsys, "s1", "--k", "5", "--format", "json", "--out", str(path))[0] == 0
    assert len(json.loads(path.read_text())["pairs"]) == 21


def test_output_is_deterministic(capsys):
    a = run(capsys, "s1", "--k", "2", "--format", "json")[1]
    b = run(capsys, "s1", "--k", "2", "--format", "json")[1]
    assert a == b


def test_run_config_defaults():
    cfg = RunConfig(k=5)
    cfg.validate()
    p = cfg.pipeline()
    assert p.order_cap == 60 and p.seed == 1 and p.cluster_tol == 1e-6
