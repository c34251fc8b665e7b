"""CSV data ingestion, trace files and the run report text.

Binary trace layout (all integers and floats little-endian)::

    b"GRAT"                     magic
    u32  version = 1
    u32  k                      number of columns
    k x (u16 n, n bytes UTF-8)  column names
    u64  row count              0xFFFFFFFFFFFFFFFF until the sink is closed
    rows of k x f64
"""

from __future__ import annotations

import csv
import math
import os
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DagmcError

__all__ = [
    "Table",
    "CsvParseError",
    "RaggedRows",
    "BadMagic",
    "UnsupportedVersion",
    "TruncatedRow",
    "read_csv",
    "format_float",
    "TraceSink",
    "CsvTraceSink",
    "BinaryTraceSink",
    "open_sink",
    "read_trace_binary",
    "read_trace_csv",
    "format_report",
]

MAGIC = b"GRAT"
VERSION = 1
STREAMING = 0xFFFFFFFFFFFFFFFF


class CsvParseError(DagmcError):
    def __init__(self, message, line):
        self.line = line
        super().__init__(f"line {line}: {message}")


class RaggedRows(CsvParseError):
    pass


class BadMagic(DagmcError):
    pass


class UnsupportedVersion(DagmcError):
    pass


class TruncatedRow(DagmcError):
    pass


@dataclass
class Table:
    headers: Optional[list]
    rows: np.ndarray

    @property
    def ncols(self) -> int:
        return self.rows.shape[1]

    @property
    def nrows(self) -> int:
        return self.rows.shape[0]

    def column(self, key) -> np.ndarray:
        """Column by 1-based index or by header name."""
        if isinstance(key, str):
            if not self.headers or key not in self.headers:
                raise KeyError(f"no column named {key!r}")
            return self.rows[:, self.headers.index(key)]
        if not 1 <= key <= self.ncols:
            raise IndexError(f"column {key} out of range 1..{self.ncols}")
        return self.rows[:, key - 1]


def _parse_fields(fields, lineno):
    out = []
    for f in fields:
        try:
            out.append(float(f))
        except ValueError:
            raise CsvParseError(f"not a number: {f.strip()!r}", lineno) from None
    return out


def read_csv(path) -> Table:
    """Read a numeric CSV file; a non-numeric first line is taken as the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = list(csv.reader(fh))
    headers = None
    rows = []
    ncols = None
    for lineno, fields in enumerate(lines, start=1):
        fields = [f.strip() for f in fields]
        if not fields or all(f == "" for f in fields):
            continue
        if lineno == 1 and headers is None:
            try:
                [float(f) for f in fields]
            except ValueError:
                headers = fields
                ncols = len(fields)
                continue
        values = _parse_fields(fields, lineno)
        if ncols is None:
            ncols = len(values)
        elif len(values) != ncols:
            raise RaggedRows(f"expected {ncols} fields, found {len(values)}", lineno)
        rows.append(values)
    arr = np.array(rows, dtype=float) if rows else np.zeros((0, ncols or 0))
    return Table(headers, arr)


def format_float(v: float) -> str:
    """Shortest text that reads back as exactly ``v``."""
    v = float(v)
    if v != v:
        raise ValueError("NaN cannot be written to a trace")
    if v == 0.0:
        return "-0" if math.copysign(1.0, v) < 0 else "0"
    if math.isfinite(v) and v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


class TraceSink:
    """Base class: keeps every ``thin``-th row passed to :meth:`write`."""

    def __init__(self, path, columns, thin: int = 1):
        if thin < 1:
            raise ValueError("thin must be a positive integer")
        self.path = os.fspath(path)
        self.columns = list(columns)
        self.thin = int(thin)
        self.rows_seen = 0
        self.rows_written = 0
        self._fh = None

    def write(self, row):
        if len(row) != len(self.columns):
            raise ValueError(f"row of length {len(row)} for {len(self.columns)} columns")
        self.rows_seen += 1
        if self.rows_seen % self.thin:
            return
        if self._fh is None:
            self._open()
        self._write_row(row)
        self.rows_written += 1

    def close(self):
        if self._fh is None:
            self._open()
        self._finish()
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class CsvTraceSink(TraceSink):
    format = "csv"

    def _open(self):
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._fh.write(",".join(self.columns) + "\n")

    def _write_row(self, row):
        self._fh.write(",".join(format_float(v) for v in row) + "\n")

    def _finish(self):
        pass


class BinaryTraceSink(TraceSink):
    format = "binary"

    def _open(self):
        self._fh = open(self.path, "wb")
        head = [MAGIC, struct.pack("<II", VERSION, len(self.columns))]
        for name in self.columns:
            raw = name.encode("utf-8")
            head.append(struct.pack("<H", len(raw)) + raw)
        self._count_offset = sum(len(h) for h in head)
        head.append(struct.pack("<Q", STREAMING))
        self._fh.write(b"".join(head))
        self._row_fmt = struct.Struct(f"<{len(self.columns)}d")

    def _write_row(self, row):
        self._fh.write(self._row_fmt.pack(*row))

    def _finish(self):
        self._fh.seek(self._count_offset)
        self._fh.write(struct.pack("<Q", self.rows_written))


def open_sink(path, columns, thin: int = 1) -> TraceSink:
    """CSV for ``.csv`` paths, binary otherwise."""
    if os.fspath(path).lower().endswith(".csv"):
        return CsvTraceSink(path, columns, thin)
    return BinaryTraceSink(path, columns, thin)


def read_trace_binary(path) -> Table:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"{path}: not a trace file")
    try:
        version, k = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise UnsupportedVersion(f"{path}: trace format version {version}")
        pos = 12
        names = []
        for _ in range(k):
            (n,) = struct.unpack_from("<H", data, pos)
            pos += 2
            if pos + n > len(data):
                raise struct.error("name runs past end of file")
            names.append(data[pos:pos + n].decode("utf-8"))
            pos += n
        (count,) = struct.unpack_from("<Q", data, pos)
        pos += 8
    except struct.error:
        raise TruncatedRow(f"{path}: header is truncated") from None
    body = len(data) - pos
    width = 8 * k
    if count == STREAMING:
        count = body // width if width else 0
    elif count * width > body:
        raise TruncatedRow(f"{path}: header declares {count} rows, file holds {body / max(width, 1):g}")
    rows = np.frombuffer(data, dtype="<f8", count=count * k, offset=pos).reshape(count, k)
    return Table(names, rows.astype(float))


def read_trace_csv(path) -> Table:
    return read_csv(path)


def format_report(report) -> str:
    """Text summary: functional average and per-block acceptance percentages."""
    lines = []
    if report.functional_average is not None:
        vals = " ".join(f"{v:.6f}" for v in report.functional_average)
        lines.append(f"Functional average = [ {vals} ]")
    lines.append("Acceptance rates:")
    for b in report.blocks:
        lines.append(f" ( {b.label} ): {100.0 * b.acceptance:.2f}")
        if report.delayed_rejection:
            lines.append(f"  ({100.0 * b.first_stage:.2f} + {100.0 * b.delayed:.2f})")
    return "\n".join(lines) + "\n"
