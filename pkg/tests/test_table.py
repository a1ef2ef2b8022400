import csv
import json
from fractions import Fraction

import pytest

from ccdc.plotting import seesaw_figure
from ccdc.robustness import GENERALIZED, WHITE_NOISE
from ccdc.sampling import SeesawTrace
from ccdc.table import (
    COLUMNS,
    EXACT_TOL,
    NUMERIC_TOL,
    REFERENCE,
    _assemble,
    _canonical_name,
    format_table,
    ppt_k,
    tolerance,
    write_outputs,
)


def _result(name, kind, method, value):
    return {"cell": {"process": name, "kind": kind, "method": method}, "value": value,
            "method": method, "time": 0.0}


def _fake_rows():
    by_key = {}
    for kind, lo, up in ((GENERALIZED, 0.5, 0.50001), (WHITE_NOISE, 0.6, 0.6667)):
        by_key[("W_222", kind, "PPT")] = _result("W_222", kind, "PPT", lo)
        by_key[("W_222", kind, "INNER")] = _result("W_222", kind, "INNER", up)
    by_key[("W_222", WHITE_NOISE, "OUTER")] = _result("W_222", WHITE_NOISE, "OUTER", 0.6666)
    return [_assemble("W_222", by_key)]


def test_tolerances():
    assert tolerance(Fraction(1, 2)) == EXACT_TOL == 1e-4
    assert tolerance(0.3506) == NUMERIC_TOL == 2e-3
    assert ppt_k("W_PPT") == 2 and ppt_k("W_SEP") == 1


def test_reference_rows_have_four_columns():
    assert all(len(v) == len(COLUMNS) for v in REFERENCE.values())
    assert REFERENCE["W_222"][2] == Fraction(2, 3)


def test_canonical_names():
    assert _canonical_name("w_222^2") == "W_222^2"
    with pytest.raises(ValueError):
        _canonical_name("W_ABC")


def test_assemble_brackets_and_directions():
    row = _fake_rows()[0]
    g = row["cells"]["R_G"]
    assert g["direction"] == "EXACT" and g["within_tolerance"]
    wn = row["cells"]["R_WN"]
    # the outer bound beats the PPT bound and closes the gap
    assert wn["bracket"] == [0.6666, 0.6667] and wn["direction"] == "EXACT"
    low = row["cells"]["R_WN_low_PPT"]
    assert low["direction"] == "LOWER" and not low["within_tolerance"]


def test_failed_cell_is_reported():
    by_key = {}
    for kind in (GENERALIZED, WHITE_NOISE):
        by_key[("W_MRSR", kind, "PPT")] = _result("W_MRSR", kind, "PPT", 0.35)
        by_key[("W_MRSR", kind, "INNER")] = _result("W_MRSR", kind, "INNER", None)
    row = _assemble("W_MRSR", by_key)
    assert row["cells"]["R_G"]["value"] is None
    assert not row["cells"]["R_G"]["within_tolerance"]
    assert "fail" in format_table([row])


def test_format_table_marks_cells():
    text = format_table(_fake_rows())
    lines = text.splitlines()
    assert lines[0].startswith("process") and len(lines) == 2
    assert "ok" in lines[1] and "!!" in lines[1]


def test_write_outputs(tmp_path):
    rows = _fake_rows()
    paths = write_outputs(rows, tmp_path / "out", stem="t")
    assert json.loads(open(paths["json"]).read())["rows"][0]["process"] == "W_222"
    with open(paths["csv"]) as fh:
        table = list(csv.reader(fh))
    assert table[0][0] == "process" and len(table) == 1 + len(COLUMNS)
    with open(paths["png"], "rb") as fh:
        assert fh.read(8) == b"\x89PNG\r\n\x1a\n"


def test_seesaw_figure(tmp_path):
    t = SeesawTrace((2, 2, 2), WHITE_NOISE, 1e-4)
    t.iterations = [(None, None, 0.3), (None, None, 0.5), (None, None, 0.66)]
    path = tmp_path / "s.png"
    seesaw_figure([t], path)
    assert path.stat().st_size > 0
