import struct

import numpy as np
import pytest

from beamfilt.tensorio import Nbf1FormatError, read_nbf1, write_nbf1


def test_round_trip_3d(tmp_path):
    rng = np.random.default_rng(0)
    x = (rng.standard_normal((3, 4, 5))
         + 1j * rng.standard_normal((3, 4, 5))).astype(np.complex64)
    p = tmp_path / "t.nbf"
    write_nbf1(p, x)
    y = read_nbf1(p)
    assert y.dtype == np.complex64
    np.testing.assert_array_equal(y, x)


def test_round_trip_scalar_rank0(tmp_path):
    p = tmp_path / "s.nbf"
    write_nbf1(p, np.complex64(1.5 - 2.5j))
    y = read_nbf1(p)
    assert y.shape == ()
    assert y == np.complex64(1.5 - 2.5j)


def test_float_input_upcast(tmp_path):
    p = tmp_path / "f.nbf"
    write_nbf1(p, np.arange(6.0).reshape(2, 3))
    np.testing.assert_array_equal(read_nbf1(p), np.arange(6.0).reshape(2, 3))


def test_header_layout(tmp_path):
    # Byte-level check: magic, LE u32 rank/dims/dtype, interleaved float32.
    p = tmp_path / "h.nbf"
    write_nbf1(p, np.array([[1 + 2j, 3 + 4j]], dtype=np.complex64))
    raw = p.read_bytes()
    assert raw[:4] == b"NBF1"
    rank, d0, d1, code = struct.unpack("<4I", raw[4:20])
    assert (rank, d0, d1, code) == (2, 1, 2, 0)
    payload = np.frombuffer(raw[20:], dtype="<f4")
    np.testing.assert_array_equal(payload, [1.0, 2.0, 3.0, 4.0])


def test_deterministic_bytes(tmp_path):
    x = np.ones((2, 2), dtype=np.complex64) * (0.5 + 0.25j)
    p1, p2 = tmp_path / "a.nbf", tmp_path / "b.nbf"
    write_nbf1(p1, x)
    write_nbf1(p2, x)
    assert p1.read_bytes() == p2.read_bytes()


def test_no_temp_files_left(tmp_path):
    write_nbf1(tmp_path / "x.nbf", np.zeros(3, dtype=np.complex64))
    assert sorted(f.name for f in tmp_path.iterdir()) == ["x.nbf"]


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.nbf"
    p.write_bytes(b"XXXX" + b"\x00" * 16)
    with pytest.raises(Nbf1FormatError):
        read_nbf1(p)


def test_implausible_rank(tmp_path):
    p = tmp_path / "rank.nbf"
    p.write_bytes(b"NBF1" + struct.pack("<I", 99))
    with pytest.raises(Nbf1FormatError):
        read_nbf1(p)


def test_unknown_dtype_code(tmp_path):
    p = tmp_path / "dtype.nbf"
    p.write_bytes(b"NBF1" + struct.pack("<III", 1, 2, 7) + b"\x00" * 16)
    with pytest.raises(Nbf1FormatError):
        read_nbf1(p)


def test_truncated_payload(tmp_path):
    p = tmp_path / "trunc.nbf"
    p.write_bytes(b"NBF1" + struct.pack("<III", 1, 4, 0) + b"\x00" * 8)
    with pytest.raises(Nbf1FormatError):
        read_nbf1(p)
