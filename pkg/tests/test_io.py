import json
import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from edgeburst.io import format_value, to_jsonable, write_csv, write_json


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(v):
    assert float(format_value(v)) == v


def test_scalar_formats():
    assert format_value(True) == "true"
    assert format_value(np.int64(3)) == "3"
    assert format_value("L") == "L"


def test_csv_layout(tmp_path):
    p = write_csv(tmp_path / "sub" / "a.csv", {"x": [1, 2], "P": [0.5, np.float64(0.25)]})
    assert p.read_bytes() == b"x,P\n1,0.5\n2,0.25\n"
    assert not list(p.parent.glob(".*tmp"))


def test_csv_rejects_ragged(tmp_path):
    try:
        write_csv(tmp_path / "a.csv", {"x": [1], "y": [1, 2]})
    except ValueError:
        pass
    else:
        raise AssertionError("ragged columns accepted")


def test_json_conversions(tmp_path):
    data = {"z": 1 + 2j, "a": np.arange(2), "f": np.float32(0.5), "bad": math.inf, "b": np.bool_(True)}
    p = write_json(tmp_path / "d.json", data)
    back = json.loads(p.read_text())
    assert back == {"z": {"re": 1.0, "im": 2.0}, "a": [0, 1], "f": 0.5, "bad": "inf", "b": True}
    assert list(back) == sorted(back)
    assert to_jsonable((1, 2)) == [1, 2]
