import json

import pytest

from ccdc.cli import EXIT_INVALID, EXIT_OK, main
from ccdc.processes import canonical_process


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_builtin(capsys):
    code, out, err = _run(capsys, "validate", "--builtin", "W_222")
    assert code == EXIT_OK
    obj = json.loads(out)
    assert obj["passed"] and obj["process"] == "W_222"
    assert "valid" in err


def test_validate_rejects_invalid_file(tmp_path, capsys):
    w = canonical_process("W_222")
    obj = json.loads(w.to_json())
    # breaking the trace normalization makes it invalid
    for part in ("real", "imag"):
        obj[part] = [[2 * x for x in row] for row in obj[part]]
    f = tmp_path / "bad.json"
    f.write_text(json.dumps(obj))
    code, out, _ = _run(capsys, "validate", "--in", str(f))
    assert code == EXIT_INVALID
    assert not json.loads(out)["passed"]


@pytest.mark.parametrize("argv", [
    ["validate"],
    ["validate", "--builtin", "W_NOPE"],
    ["validate", "--builtin", "W_222", "--in", "x.json"],
    ["validate", "--in", "/nonexistent/w.json"],
    ["sample", "--dims", "2,2"],
    ["sample", "--sampler", "M2", "--dims", "2,2,3"],
    ["robustness", "--builtin", "W_222", "--method", "inner", "--states", "cube:3"],
    ["witness", "--analytic", "CHSH"],
    ["nonsense"],
])
def test_bad_input_exits_with_one(argv, capsys):
    code, _, err = _run(capsys, *argv)
    assert code == EXIT_INVALID


def test_robustness_ppt(capsys):
    code, out, _ = _run(capsys, "robustness", "--builtin", "W_222", "--kind", "generalized")
    assert code == EXIT_OK
    obj = json.loads(out)
    assert abs(obj["value"] - 0.5) < 1e-6
    assert obj["direction"] == "LOWER"
    assert obj["caps"]["generalized_cap"] == 0.5


def test_robustness_inner_family(capsys):
    code, out, _ = _run(capsys, "robustness", "--builtin", "W_222", "--kind", "whitenoise",
                        "--method", "inner", "--states", "family:5")
    assert code == EXIT_OK
    obj = json.loads(out)
    assert abs(obj["value"] - 2 / 3) < 1e-5 and obj["direction"] == "UPPER"


def test_robustness_outer_family(capsys):
    code, out, _ = _run(capsys, "robustness", "--builtin", "W_MRSR", "--method", "outer-poly",
                        "--states", "family:5")
    assert code == EXIT_OK
    assert json.loads(out)["value"] <= 0.3507


def test_analytic_witness(capsys):
    code, out, _ = _run(capsys, "witness", "--analytic", "DDD2", "--d", "2")
    assert code == EXIT_OK
    obj = json.loads(out)
    assert obj["sufficient_check"]["passed"]
    assert obj["witness"]["dims"] == [2, 2, 4]


def test_dual_witness_to_file(tmp_path, capsys):
    f = tmp_path / "wit.json"
    code, out, _ = _run(capsys, "witness", "--builtin", "W_222", "--out", str(f))
    assert code == EXIT_OK and out == ""
    obj = json.loads(f.read_text())
    assert abs(obj["report"]["value"] - 0.5) < 1e-6


def test_sample_is_deterministic(capsys):
    _, a, _ = _run(capsys, "sample", "--sampler", "M3", "--dims", "2,2,2", "--seed", "9")
    _, b, _ = _run(capsys, "sample", "--sampler", "M3", "--dims", "2,2,2", "--seed", "9")
    assert a == b
    assert json.loads(a)["dims"] == [2, 2, 2]


def test_sampled_process_round_trips_through_validate(tmp_path, capsys):
    f = tmp_path / "w.json"
    assert main(["sample", "--dims", "2,2,4", "--sampler", "M2", "--seed", "1",
                 "--out", str(f)]) == EXIT_OK
    code, _, _ = _run(capsys, "validate", "--in", str(f))
    assert code == EXIT_OK


def test_seesaw(capsys):
    code, out, err = _run(capsys, "seesaw", "--dims", "2,2,2", "--seed", "2", "--max-iter", "3")
    assert code == EXIT_OK
    obj = json.loads(out)
    assert obj["final_value"] <= 1 - 1 / 9 + 1e-7
    assert "iteration 0" in err


def test_reproduce_table_small(tmp_path, capsys):
    code, out, err = _run(capsys, "reproduce-table", "--rows", "W_222", "--family-n", "5",
                          "--out-dir", str(tmp_path))
    assert code == EXIT_OK
    obj = json.loads(out)
    cells = obj["rows"][0]["cells"]
    assert cells["R_G"]["within_tolerance"] and cells["R_WN"]["within_tolerance"]
    for kind in ("csv", "json", "png"):
        assert (tmp_path / f"table.{kind}").exists()
    assert "W_222" in err


def test_reproduce_table_unknown_row(tmp_path, capsys):
    code, _, _ = _run(capsys, "reproduce-table", "--rows", "W_XYZ", "--out-dir", str(tmp_path))
    assert code == EXIT_INVALID


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == EXIT_OK
