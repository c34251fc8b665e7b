import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dagmc.io import (
    BadMagic,
    BinaryTraceSink,
    CsvParseError,
    CsvTraceSink,
    RaggedRows,
    TruncatedRow,
    UnsupportedVersion,
    format_float,
    format_report,
    open_sink,
    read_csv,
    read_trace_binary,
    read_trace_csv,
)
from dagmc.sampler import BlockReport, RunReport


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_read_csv_header(tmp_path):
    t = read_csv(_write(tmp_path, "d.csv", "y,z\n0.4,1\n0.378,2\n"))
    assert t.headers == ["y", "z"]
    np.testing.assert_array_equal(t.column("y"), [0.4, 0.378])
    np.testing.assert_array_equal(t.column(2), [1.0, 2.0])


def test_read_csv_no_header_and_blank_lines(tmp_path):
    t = read_csv(_write(tmp_path, "d.csv", "1, 2\n\n3 ,4\n"))
    assert t.headers is None
    np.testing.assert_array_equal(t.rows, [[1, 2], [3, 4]])


def test_read_csv_errors(tmp_path):
    with pytest.raises(CsvParseError) as info:
        read_csv(_write(tmp_path, "a.csv", "1,2\nx,3\n"))
    assert info.value.line == 2
    with pytest.raises(RaggedRows) as info:
        read_csv(_write(tmp_path, "b.csv", "a,b\n1,2\n3\n"))
    assert info.value.line == 3
    t = read_csv(_write(tmp_path, "c.csv", "a,b\n1,2\n"))
    with pytest.raises(IndexError):
        t.column(3)
    with pytest.raises(KeyError):
        t.column("c")


def test_baseball_data_file():
    from conftest import MODELS
    t = read_csv(f"{MODELS}/baseball.data")
    assert t.nrows == 18 and t.column(1)[0] == 0.4 and t.column(1)[-1] == 0.156


def test_format_float():
    assert format_float(0.1) == "0.1"
    assert format_float(1.0) == "1"
    assert format_float(-0.0) == "-0"
    assert format_float(1e-300) == "1e-300"
    assert format_float(float("inf")) == "inf"
    with pytest.raises(ValueError):
        format_float(float("nan"))


@settings(max_examples=500)
@given(st.floats(allow_nan=False))
def test_format_float_round_trip(v):
    assert float(format_float(v)) == v


def test_csv_sink_example(tmp_path):
    p = tmp_path / "t.csv"
    with CsvTraceSink(p, ["a", "t1"]) as s:
        s.write([1.0, 2.0])
        s.write([3.0, 4.0])
    assert p.read_text() == "a,t1\n1,2\n3,4\n"
    t = read_trace_csv(p)
    assert t.headers == ["a", "t1"]


def test_csv_sink_rejects_nan(tmp_path):
    with CsvTraceSink(tmp_path / "t.csv", ["a"]) as s:
        with pytest.raises(ValueError):
            s.write([float("nan")])


def test_binary_round_trip_bit_exact(tmp_path, rng):
    rows = rng.standard_normal((57, 4)) * 10.0 ** rng.integers(-300, 300, size=(57, 4))
    rows[0, 0] = -0.0
    rows[1, 1] = np.inf
    p = tmp_path / "t.bin"
    with BinaryTraceSink(p, ["mu", "a", "t1", "functional[1]"]) as s:
        for r in rows:
            s.write(r.tolist())
    t = read_trace_binary(p)
    assert t.headers == ["mu", "a", "t1", "functional[1]"]
    assert t.rows.tobytes() == rows.astype("<f8").tobytes()


def test_binary_layout(tmp_path):
    p = tmp_path / "t.bin"
    with BinaryTraceSink(p, ["ab"]) as s:
        s.write([1.5])
    raw = p.read_bytes()
    assert raw == b"GRAT" + struct.pack("<IIH", 1, 1, 2) + b"ab" + struct.pack("<Qd", 1, 1.5)


def test_binary_empty_trace(tmp_path):
    p = tmp_path / "t.bin"
    BinaryTraceSink(p, ["a", "b"]).close()
    t = read_trace_binary(p)
    assert t.headers == ["a", "b"] and t.rows.shape == (0, 2)


def test_binary_streaming_sentinel(tmp_path):
    p = tmp_path / "t.bin"
    s = BinaryTraceSink(p, ["a"])
    for v in (1.0, 2.0, 3.0):
        s.write([v])
    s._fh.flush()
    assert p.read_bytes()[15:23] == b"\xff" * 8
    np.testing.assert_array_equal(read_trace_binary(p).rows[:, 0], [1, 2, 3])
    s.close()
    assert struct.unpack("<Q", p.read_bytes()[15:23])[0] == 3


def test_binary_errors(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(BadMagic):
        read_trace_binary(p)
    p.write_bytes(b"GRAT" + struct.pack("<II", 2, 0) + struct.pack("<Q", 0))
    with pytest.raises(UnsupportedVersion):
        read_trace_binary(p)
    good = tmp_path / "t.bin"
    with BinaryTraceSink(good, ["a", "b"]) as s:
        s.write([1.0, 2.0])
        s.write([3.0, 4.0])
    p.write_bytes(good.read_bytes()[:-4])
    with pytest.raises(TruncatedRow):
        read_trace_binary(p)
    p.write_bytes(good.read_bytes()[:9])
    with pytest.raises(TruncatedRow):
        read_trace_binary(p)


def test_thinning(tmp_path):
    p = tmp_path / "t.csv"
    with open_sink(p, ["i"], thin=3) as s:
        for i in range(1, 11):
            s.write([float(i)])
    np.testing.assert_array_equal(read_trace_csv(p).column("i"), [3, 6, 9])
    assert isinstance(open_sink(tmp_path / "x.bin", ["a"]), BinaryTraceSink)
    with pytest.raises(ValueError):
        open_sink(tmp_path / "y.csv", ["a"], thin=0)


def test_row_length_checked(tmp_path):
    with CsvTraceSink(tmp_path / "t.csv", ["a", "b"]) as s:
        with pytest.raises(ValueError):
            s.write([1.0])


def _report(dr):
    blocks = [BlockReport("mu", 100, 40, 10 if dr else 0, 1.0, None),
              BlockReport("t1", 100, 25, 5 if dr else 0, 1.0, None)]
    return RunReport(functional_average=[0.3925, 0.2674, 0.3189], blocks=blocks, delayed_rejection=dr,
                     sweeps=100, elapsed=0.0)


def test_format_report():
    assert format_report(_report(False)) == (
        "Functional average = [ 0.392500 0.267400 0.318900 ]\n"
        "Acceptance rates:\n"
        " ( mu ): 40.00\n"
        " ( t1 ): 25.00\n")
    text = format_report(_report(True))
    assert " ( mu ): 50.00\n  (40.00 + 10.00)\n" in text
