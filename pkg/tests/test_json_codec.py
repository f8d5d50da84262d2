from datetime import datetime

import numpy as np
import pytest

from ness_errors import ConfigError
from utils import current_timestamp, decode_matrix, format_float, to_jsonable


def test_real_nested_lists():
    M = decode_matrix([[1, 2], [3, 4]], "H")
    assert M.dtype == complex
    np.testing.assert_array_equal(M, [[1, 2], [3, 4]])


def test_real_and_imaginary_parts():
    M = decode_matrix({"re": [[0, 1], [1, 0]], "im": [[0, -1], [1, 0]]}, "H")
    np.testing.assert_array_equal(M, [[0, 1 - 1j], [1 + 1j, 0]])


def test_imaginary_part_optional():
    np.testing.assert_array_equal(decode_matrix({"re": [[2.0]]}), [[2.0]])


@pytest.mark.parametrize("value", [
    [1, 2, 3],
    "identity",
    [[1, 2], [3]],
    {"real": [[1.0]]},
    {"re": [[1.0]], "im": [[1.0, 0.0]]},
])
def test_malformed_matrices(value):
    with pytest.raises(ConfigError, match="Q0"):
        decode_matrix(value, "Q0")


def test_jsonable_conversion():
    payload = to_jsonable({
        "Q": np.array([[0.5 + 0.1j]]),
        "w": np.array([1.0, 2.0]),
        "n": np.int64(3),
        "ok": np.bool_(True),
        "ratio": float("inf"),
        "pair": (np.float64(0.25), 1),
    })
    assert payload == {
        "Q": {"re": [[0.5]], "im": [[0.1]]},
        "w": [1.0, 2.0],
        "n": 3,
        "ok": True,
        "ratio": "inf",
        "pair": [0.25, 1],
    }


def test_format_float_is_exact():
    assert format_float(0.1) == "0.1"
    assert float(format_float(1 / 3)) == 1 / 3
    assert format_float(2) == "2.0"


def test_timestamp_is_iso():
    assert datetime.fromisoformat(current_timestamp()).tzinfo is not None
