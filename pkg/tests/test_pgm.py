import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fhtnet.pgm import PGMError, decode_pgm, encode_pgm, normalize_to_u8, read_pgm, write_pgm


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 20), st.integers(1, 20))))
def test_roundtrip(img):
    np.testing.assert_array_equal(decode_pgm(encode_pgm(img)), img)


def test_header_layout():
    data = encode_pgm(np.zeros((2, 3)))
    assert data == b"P5\n3 2\n255\n" + bytes(6)


def test_comments_and_16_bit():
    data = b"P5\n# made by hand\n2 1\n# max\n65535\n" + bytes([1, 0, 0, 2])
    np.testing.assert_array_equal(decode_pgm(data), [[256, 2]])


@pytest.mark.parametrize(
    "data, match",
    [(b"P2\n1 1\n255\n0", "magic"), (b"P5\n2 2\n255\n\x00", "truncated"), (b"P5\n2", "header"),
     (b"P5\n0 2\n255\n", "geometry"), (b"P5\nx 2\n255\n\x00", "malformed")],
)
def test_bad_files(data, match):
    with pytest.raises(PGMError, match=match):
        decode_pgm(data)


def test_encode_clips_and_rejects_3d():
    np.testing.assert_array_equal(decode_pgm(encode_pgm(np.array([[-4.0, 300.0, 7.6]]))), [[0, 255, 8]])
    with pytest.raises(PGMError):
        encode_pgm(np.zeros((2, 2, 2)))


def test_file_roundtrip(tmp_path, rng):
    img = rng.integers(0, 256, (5, 9)).astype(np.uint8)
    write_pgm(tmp_path / "a.pgm", img)
    np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), img)
    assert [p.name for p in tmp_path.iterdir()] == ["a.pgm"]


def test_normalize():
    np.testing.assert_array_equal(normalize_to_u8([[1.0, 2.0, 3.0]]), [[0, 128, 255]])
    assert not normalize_to_u8(np.full((3, 3), 7.0)).any()
