import json
import math

import numpy as np
import pytest
from hypothesis import given

from privex.errors import InputError, NegativeEntry
from privex.prob_core import Channel
from privex.serialization import csv_table, dumps, fmt, load_channel, load_joint, round_floats

from conftest import joints


def test_fmt():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(-0.0) == "0"
    assert fmt(math.inf) == "inf" and fmt(math.nan) == "nan"
    assert fmt(None) == ""


def test_round_floats_and_dumps():
    assert round_floats({"a": [1 / 3, 2], "b": math.inf}) == {"a": [0.333333333333, 2], "b": "inf"}
    assert json.loads(dumps({"x": 0.1 + 0.2}))["x"] == 0.3


def test_csv_table():
    assert csv_table(["a", "b"], [(1.0, "x"), (0.5, 2 / 3)]) == "a,b\n1,x\n0.5,0.666666666667\n"


@given(joints())
def test_joint_roundtrip(tmp_path_factory, j):
    path = tmp_path_factory.mktemp("j") / "joint.json"
    path.write_text(json.dumps(j.to_dict()))
    back = load_joint(path)
    np.testing.assert_allclose(back.pxy, j.pxy, rtol=0, atol=1e-15)
    assert back.x_labels == j.x_labels and back.y_labels == j.y_labels


def test_load_errors_carry_context(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"pxy": [[0.5, 0.5],\n [0.5 0.5]]}')
    with pytest.raises(InputError, match=r"bad.json:2:7"):
        load_joint(bad)
    neg = tmp_path / "neg.json"
    neg.write_text('{"pxy": [[0.6, -0.1], [0.3, 0.2]]}')
    with pytest.raises(NegativeEntry, match="neg.json"):
        load_joint(neg)
    with pytest.raises(InputError):
        load_joint(tmp_path / "missing.json")
    nomat = tmp_path / "nomat.json"
    nomat.write_text('{"rows": []}')
    with pytest.raises(InputError):
        load_joint(nomat)


def test_load_channel_accepts_filter_documents(tmp_path):
    ch = Channel([[0.25, 0.75], [1.0, 0.0]], ("a", "b"), ("u", "v"))
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"epsilon": 0.1, "filter": ch.to_dict()}))
    back = load_channel(path)
    np.testing.assert_array_equal(back.rows, ch.rows)
    assert back.in_labels == ("a", "b") and back.out_labels == ("u", "v")
