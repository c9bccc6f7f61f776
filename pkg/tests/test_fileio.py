import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from extremal.field import ScalarField
from extremal.fileio import (
    FormatError, atomic_write, decode_fgrid, decode_pgm, dumps_json, encode_fgrid, encode_pgm, histogram_csv,
    read_field, sha256_file, write_field,
)


@given(arrays(np.float32, st.tuples(st.integers(3, 9), st.integers(3, 9)),
              elements=st.floats(-1e6, 1e6, width=32)), st.floats(0.1, 10))
def test_fgrid_round_trip(v, spacing):
    f = decode_fgrid(encode_fgrid(ScalarField(v.astype(float), spacing)))
    assert np.array_equal(f.values, v.astype(float)) and f.spacing == spacing


def test_pgm_round_trip():
    v = np.arange(12).reshape(3, 4) / 11.0
    back = decode_pgm(encode_pgm(v)).values
    assert np.abs(back - v).max() <= 0.5 / 255 + 1e-12


def test_bad_data():
    with pytest.raises(FormatError):
        decode_fgrid(b"FGRD\x00")
    with pytest.raises(FormatError):
        decode_pgm(b"P2 1 1 255\n0")


def test_read_detects_format(tmp_path):
    f = ScalarField(np.eye(4))
    write_field(tmp_path / "a.fgrid", f)
    write_field(tmp_path / "a.pgm", f)
    assert read_field(tmp_path / "a.fgrid") == f
    assert np.array_equal(read_field(tmp_path / "a.pgm").values, np.eye(4))
    (tmp_path / "c.bin").write_bytes(b"????")
    with pytest.raises(FormatError):
        read_field(tmp_path / "c.bin")


def test_atomic_write_and_hash(tmp_path):
    p = tmp_path / "x.txt"
    atomic_write(p, "abc")
    assert p.read_text() == "abc" and list(tmp_path.iterdir()) == [p]
    assert sha256_file(p) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_json_and_csv():
    assert json.loads(dumps_json({"b": 1, "a": [1.5]})) == {"a": [1.5], "b": 1}
    assert dumps_json({"b": 1, "a": 2}).index('"a"') < dumps_json({"b": 1, "a": 2}).index('"b"')
    lines = histogram_csv(np.array([0.0, 0.5, 1.0]), np.array([3, 4])).strip().splitlines()
    assert len(lines) == 3
