"""Logical equality of two Parquet files, compared value by value."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _kernels
from .column import ByteArrays, ColumnData, ColumnDescriptor
from .model import to_jsonable
from .reader import ParquetFile
from .rewriter import rebuffer

WINDOW_ROWS = 1 << 18


@dataclass(frozen=True)
class Mismatch:
    row: int
    column: str
    left_digest: str
    right_digest: str


@dataclass(frozen=True)
class EqualityReport:
    equal: bool
    rows_compared: int
    columns_compared: tuple[str, ...]
    first_mismatch: Mismatch | None = None
    structural: str | None = None

    def __post_init__(self):
        if self.equal != (self.first_mismatch is None and self.structural is None):
            raise ValueError("equal must hold exactly when no mismatch is recorded")

    def to_dict(self) -> dict:
        return to_jsonable(self)


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def _row_bytes(col: ColumnData, row: int) -> bytes:
    if row >= col.num_rows:
        return b"<absent>"
    one = col.slice_rows(row, row + 1)
    parts = []
    for lv in (one.rep_levels, one.def_levels):
        if lv is not None:
            parts.append(lv.astype("<i2").tobytes())
    v = one.values
    if isinstance(v, ByteArrays):
        for item in v.to_list():
            parts.append(len(item).to_bytes(4, "little") + item)
    else:
        parts.append(np.ascontiguousarray(v).tobytes())
    return b"|".join(parts)


def _first_value_mismatch(a, b) -> int:
    """Index of the first differing value, -1 if equal; floats compared by bits."""
    if isinstance(a, ByteArrays):
        n = min(len(a), len(b))
        i = _kernels.bytes_first_mismatch(a.offsets[: n + 1], a.data, b.offsets[: n + 1], b.data)
        if i < 0 and len(a) != len(b):
            return n
        return int(i)
    n = min(len(a), len(b))
    if n == 0:
        return 0 if len(a) != len(b) else -1
    ua = np.ascontiguousarray(a[:n]).view(np.uint8).reshape(n, -1)
    ub = np.ascontiguousarray(b[:n]).view(np.uint8).reshape(n, -1)
    diff = np.flatnonzero((ua != ub).any(axis=1))
    if diff.size:
        return int(diff[0])
    return n if len(a) != len(b) else -1


def _first_row_mismatch(a: ColumnData, b: ColumnData) -> int:
    """First row whose levels or values differ, -1 if the windows are equal."""
    candidates = []
    level_pos = None
    for la, lb in ((a.rep_levels, b.rep_levels), (a.def_levels, b.def_levels)):
        if la is None:
            continue
        n = min(la.size, lb.size)
        d = np.flatnonzero(la[:n] != lb[:n])
        pos = int(d[0]) if d.size else (n if la.size != lb.size else None)
        if pos is not None:
            level_pos = pos if level_pos is None else min(level_pos, pos)
    vi = _first_value_mismatch(a.values, b.values)
    if vi >= 0:
        if a.def_levels is not None:
            slots = np.flatnonzero(a.def_levels == a.descriptor.max_def)
            lp = int(slots[vi]) if vi < slots.size else a.num_levels
            level_pos = lp if level_pos is None else min(level_pos, lp)
        else:
            candidates.append(vi)
    if level_pos is not None:
        if a.rep_levels is not None:
            rows, _ = a._index()
            candidates.append(int(np.searchsorted(rows, level_pos, side="right")) - 1)
        else:
            candidates.append(level_pos)
    return min(candidates) if candidates else -1


def _windows(pf: ParquetFile, ci: int, rows: int) -> Iterator[ColumnData]:
    bounds = [WINDOW_ROWS] * (rows // WINDOW_ROWS) + ([rows % WINDOW_ROWS] if rows % WINDOW_ROWS else [])
    return rebuffer(pf.iter_column(ci), bounds)


def _schema_difference(a: list[ColumnDescriptor], b: list[ColumnDescriptor]) -> str | None:
    if len(a) != len(b):
        return f"column count differs: {len(a)} vs {len(b)}"
    for x, y in zip(a, b):
        ka = (x.path, x.physical_type, x.type_length, x.max_def, x.max_rep, x.logical_name)
        kb = (y.path, y.physical_type, y.type_length, y.max_def, y.max_rep, y.logical_name)
        if ka != kb:
            return f"column {x.dotted} differs in schema"
    return None


def verify_equal(a, b) -> EqualityReport:
    """Decode both files in row order and stop at the first differing row.

    A schema difference is reported as structural inequality; a row-count
    difference is reported as a mismatch at the first row only one file has.
    """
    pa_ = a if isinstance(a, ParquetFile) else ParquetFile(a)
    pb = b if isinstance(b, ParquetFile) else ParquetFile(b)
    try:
        names = tuple(c.dotted for c in pa_.columns)
        problem = _schema_difference(pa_.columns, pb.columns)
        if problem:
            return EqualityReport(False, 0, names, None, problem)
        n = min(pa_.num_rows, pb.num_rows)
        streams = [
            (_windows(pa_, ci, pa_.num_rows), _windows(pb, ci, pb.num_rows)) for ci in range(len(names))
        ]
        base = 0
        while base < n:
            hit: tuple[int, int, ColumnData, ColumnData] | None = None
            for ci, (sa, sb) in enumerate(streams):
                wa, wb = next(sa), next(sb)
                if base + wa.num_rows > n:
                    wa = wa.slice_rows(0, n - base)
                if base + wb.num_rows > n:
                    wb = wb.slice_rows(0, n - base)
                r = _first_row_mismatch(wa, wb)
                if r >= 0 and (hit is None or r < hit[0]):
                    hit = (r, ci, wa, wb)
            if hit is not None:
                r, ci, wa, wb = hit
                m = Mismatch(base + r, names[ci], _digest(_row_bytes(wa, r)), _digest(_row_bytes(wb, r)))
                return EqualityReport(False, base + r, names, m)
            base += min(WINDOW_ROWS, n - base)
        if pa_.num_rows != pb.num_rows:
            m = Mismatch(n, "<row count>", _digest(str(pa_.num_rows).encode()), _digest(str(pb.num_rows).encode()))
            return EqualityReport(False, n, names, m)
        return EqualityReport(True, n, names)
    finally:
        if pa_ is not a:
            pa_.close()
        if pb is not b:
            pb.close()
