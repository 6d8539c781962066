import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bifrom.errors import BadMagicError, TruncatedFileError
from bifrom.matrixio import IoFailure, load_matrix, save_matrix


def _bits(a):
    return np.ascontiguousarray(a, dtype="<f8").view("<u8")


def test_empty_matrix_is_header_only(tmp_path):
    p = tmp_path / "e.mat"
    save_matrix(p, np.zeros((0, 0)))
    assert p.stat().st_size == 24
    assert load_matrix(p).shape == (0, 0)


def test_layout_by_hand(tmp_path):
    p = tmp_path / "m.mat"
    save_matrix(p, [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    raw = p.read_bytes()
    assert raw[:8] == b"LROMMAT1"
    assert struct.unpack("<QQ", raw[8:24]) == (2, 3)
    assert struct.unpack("<6d", raw[24:]) == (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)


def test_random_roundtrip(tmp_path, rng):
    a = rng.normal(size=(7, 3))
    save_matrix(tmp_path / "r.mat", a)
    assert np.array_equal(_bits(load_matrix(tmp_path / "r.mat")), _bits(a))


def test_vector_saved_as_column(tmp_path):
    save_matrix(tmp_path / "v.mat", np.arange(4.0))
    assert load_matrix(tmp_path / "v.mat").shape == (4, 1)


def test_special_values_bit_exact(tmp_path):
    payload_nan = np.array([0x7FF8_0000_DEAD_BEEF], dtype="<u8").view("<f8")[0]
    a = np.array([[np.nan, -0.0, 0.0], [np.inf, -np.inf, payload_nan], [5e-324, -1.7976931348623157e308, 1.0]])
    save_matrix(tmp_path / "s.mat", a)
    assert np.array_equal(_bits(load_matrix(tmp_path / "s.mat")), _bits(a))


def test_truncated_by_one_byte(tmp_path, rng):
    p = tmp_path / "t.mat"
    save_matrix(p, rng.normal(size=(3, 3)))
    p.write_bytes(p.read_bytes()[:-1])
    with pytest.raises(TruncatedFileError):
        load_matrix(p)
    p.write_bytes(b"LROMMAT1\x01")
    with pytest.raises(TruncatedFileError):
        load_matrix(p)


def test_trailing_bytes_rejected(tmp_path):
    p = tmp_path / "x.mat"
    save_matrix(p, np.ones((2, 2)))
    p.write_bytes(p.read_bytes() + b"\0")
    with pytest.raises(TruncatedFileError):
        load_matrix(p)


def test_bad_magic(tmp_path):
    p = tmp_path / "b.mat"
    p.write_bytes(b"NOTAMAT!" + bytes(16))
    with pytest.raises(BadMagicError):
        load_matrix(p)
    p.write_bytes(b"xy")
    with pytest.raises(BadMagicError):
        load_matrix(p)


def test_io_failure(tmp_path):
    with pytest.raises(IoFailure):
        load_matrix(tmp_path / "missing.mat")
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoFailure):
        save_matrix(blocker / "sub.mat", np.ones((1, 1)))
    assert IoFailure.exit_code == 4


@settings(max_examples=100, deadline=None)
@given(
    a=arrays(
        np.float64,
        st.tuples(st.integers(0, 6), st.integers(0, 6)),
        elements=st.floats(allow_nan=True, allow_infinity=True, allow_subnormal=True) | st.sampled_from([-0.0, np.nan]),
    )
)
def test_roundtrip_property(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("mat") / "a.mat"
    save_matrix(p, a)
    b = load_matrix(p)
    assert b.shape == a.shape
    assert np.array_equal(_bits(b), _bits(a))
    assert p.stat().st_size == 24 + 8 * a.size
