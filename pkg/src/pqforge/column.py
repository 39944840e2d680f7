"""Decoded column slices and the leaf-column view of a Parquet schema."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels, _meta
from .model import ColumnPhysicalType, ColumnSchema

_NUMPY = {
    ColumnPhysicalType.INT32: np.dtype("<i4"),
    ColumnPhysicalType.INT64: np.dtype("<i8"),
    ColumnPhysicalType.FLOAT: np.dtype("<f4"),
    ColumnPhysicalType.DOUBLE: np.dtype("<f8"),
    ColumnPhysicalType.BOOLEAN: np.dtype(bool),
}

_LOGICAL_NAMES = ("string", "map", "list", "enum", "decimal", "date", "time", "timestamp",
                  "integer", "unknown", "json", "bson", "uuid", "float16")
_CONVERTED_NAMES = {0: "UTF8", 1: "MAP", 3: "LIST", 4: "ENUM", 5: "DECIMAL", 6: "DATE",
                    7: "TIME_MILLIS", 8: "TIME_MICROS", 9: "TIMESTAMP_MILLIS",
                    10: "TIMESTAMP_MICROS", 11: "UINT_8", 12: "UINT_16", 13: "UINT_32",
                    14: "UINT_64", 15: "INT_8", 16: "INT_16", 17: "INT_32", 18: "INT_64",
                    19: "JSON", 20: "BSON", 21: "INTERVAL"}


@dataclass(frozen=True)
class ColumnDescriptor:
    path: tuple[str, ...]
    physical_type: ColumnPhysicalType
    type_length: int | None
    max_def: int
    max_rep: int
    element: dict = field(compare=False, repr=False, default_factory=dict)

    @property
    def dotted(self) -> str:
        return ".".join(self.path)

    @property
    def width(self) -> int | None:
        """Bytes per value for fixed-width types."""
        t = self.physical_type
        if t is ColumnPhysicalType.BYTE_ARRAY:
            return None
        if t is ColumnPhysicalType.INT96:
            return 12
        if t is ColumnPhysicalType.FIXED_LEN_BYTE_ARRAY:
            return self.type_length
        if t is ColumnPhysicalType.BOOLEAN:
            return 1
        return _NUMPY[t].itemsize

    @property
    def logical_name(self) -> str | None:
        lt = self.element.get("logical_type")
        if lt:
            for name in _LOGICAL_NAMES:
                if name in lt:
                    return name.upper()
        ct = self.element.get("converted_type")
        return _CONVERTED_NAMES.get(ct) if ct is not None else None

    @property
    def sort_order(self) -> str | None:
        """'signed', 'unsigned' or None when min/max statistics are not written."""
        t = self.physical_type
        lt = self.element.get("logical_type") or {}
        ct = self.element.get("converted_type")
        if t in (ColumnPhysicalType.INT96, ColumnPhysicalType.BOOLEAN):
            return None
        if "decimal" in lt or ct in (_meta.CONVERTED_DECIMAL, _meta.CONVERTED_INTERVAL) or "float16" in lt:
            return None
        if t in (ColumnPhysicalType.INT32, ColumnPhysicalType.INT64):
            if ct in _meta.CONVERTED_UINT:
                return "unsigned"
            if "integer" in lt and not lt["integer"].get("is_signed", True):
                return "unsigned"
            return "signed"
        if t in (ColumnPhysicalType.FLOAT, ColumnPhysicalType.DOUBLE):
            return "signed"
        return "unsigned"

    def to_schema(self) -> ColumnSchema:
        return ColumnSchema(self.dotted, self.physical_type, self.type_length,
                            self.max_def, self.max_rep, self.logical_name)


class SchemaError(ValueError):
    pass


def leaf_columns(schema: Sequence[dict]) -> list[ColumnDescriptor]:
    """Flatten the depth-first SchemaElement list into leaf descriptors."""
    if not schema:
        raise SchemaError("empty schema")
    out: list[ColumnDescriptor] = []
    pos = 1

    def walk(n_children: int, path: tuple, d: int, r: int):
        nonlocal pos
        for _ in range(n_children):
            if pos >= len(schema):
                raise SchemaError("schema ends inside a group")
            el = schema[pos]
            pos += 1
            rep = el.get("repetition_type", _meta.REQUIRED)
            dd = d + (rep != _meta.REQUIRED)
            rr = r + (rep == _meta.REPEATED)
            p = path + (el["name"],)
            kids = el.get("num_children")
            if kids:
                walk(kids, p, dd, rr)
            else:
                if "type" not in el:
                    raise SchemaError(f"leaf {'.'.join(p)} has no physical type")
                t = ColumnPhysicalType(el["type"])
                tl = el.get("type_length")
                if t is ColumnPhysicalType.FIXED_LEN_BYTE_ARRAY and not tl:
                    raise SchemaError(f"{'.'.join(p)}: FIXED_LEN_BYTE_ARRAY needs type_length")
                out.append(ColumnDescriptor(p, t, tl, dd, rr, el))

    walk(schema[0].get("num_children", 0), (), 0, 0)
    if pos != len(schema):
        raise SchemaError("trailing schema elements")
    return out


@dataclass
class ByteArrays:
    """Variable-length binary values as (offsets, data); offsets has n + 1 entries."""

    offsets: np.ndarray
    data: np.ndarray

    def __len__(self) -> int:
        return self.offsets.size - 1

    @classmethod
    def from_list(cls, items: Sequence[bytes]) -> "ByteArrays":
        lens = np.fromiter((len(x) for x in items), np.int64, len(items))
        offsets = np.zeros(len(items) + 1, np.int64)
        np.cumsum(lens, out=offsets[1:])
        data = np.frombuffer(b"".join(items), np.uint8).copy()
        return cls(offsets, data)

    def to_list(self) -> list[bytes]:
        raw = self.data.tobytes()
        o = self.offsets
        return [raw[o[i]:o[i + 1]] for i in range(len(self))]

    def take(self, idx: np.ndarray) -> "ByteArrays":
        off, data = _kernels.take_bytes(self.offsets, self.data, np.asarray(idx, np.int64))
        return ByteArrays(off, data)

    def slice(self, start: int, stop: int) -> "ByteArrays":
        o = self.offsets[start:stop + 1]
        base = o[0] if o.size else 0
        return ByteArrays(o - base, self.data[base:o[-1] if o.size else 0])

    @property
    def nbytes(self) -> int:
        return int(self.offsets[-1] - self.offsets[0])

    @staticmethod
    def concat(parts: Sequence["ByteArrays"]) -> "ByteArrays":
        if len(parts) == 1:
            return parts[0]
        lens = [np.diff(p.offsets) for p in parts]
        allens = np.concatenate(lens) if lens else np.zeros(0, np.int64)
        offsets = np.zeros(allens.size + 1, np.int64)
        np.cumsum(allens, out=offsets[1:])
        data = np.concatenate([p.data[p.offsets[0]:p.offsets[-1]] for p in parts]) if parts else np.zeros(0, np.uint8)
        return ByteArrays(offsets, data)


Values = "np.ndarray | ByteArrays"


def fixed_as_bytes(values: np.ndarray) -> ByteArrays:
    """View (n, width) uint8 rows as a ByteArrays without copying data."""
    n, w = values.shape
    return ByteArrays(np.arange(n + 1, dtype=np.int64) * w, np.ascontiguousarray(values).reshape(-1))


def empty_values(desc: ColumnDescriptor):
    t = desc.physical_type
    if t is ColumnPhysicalType.BYTE_ARRAY:
        return ByteArrays(np.zeros(1, np.int64), np.zeros(0, np.uint8))
    if t in (ColumnPhysicalType.INT96, ColumnPhysicalType.FIXED_LEN_BYTE_ARRAY):
        return np.zeros((0, desc.width), np.uint8)
    return np.zeros(0, _NUMPY[t])


def numpy_dtype(t: ColumnPhysicalType) -> np.dtype | None:
    return _NUMPY.get(t)


def values_len(values) -> int:
    return len(values) if isinstance(values, ByteArrays) else values.shape[0]


def values_slice(values, start: int, stop: int):
    if isinstance(values, ByteArrays):
        return values.slice(start, stop)
    return values[start:stop]


def values_concat(parts: Sequence):
    if isinstance(parts[0], ByteArrays):
        return ByteArrays.concat(parts)
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


@dataclass
class ColumnData:
    """One column's decoded values plus its definition/repetition levels.

    ``values`` holds only non-null leaf values.  Levels are ``None`` when the
    column's max level is zero.
    """

    descriptor: ColumnDescriptor
    values: object
    def_levels: np.ndarray | None = None
    rep_levels: np.ndarray | None = None
    _row_starts: np.ndarray | None = field(default=None, repr=False, compare=False)
    _value_starts: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        d = self.descriptor
        if (d.max_def > 0) != (self.def_levels is not None):
            raise ValueError(f"{d.dotted}: definition levels do not match max level {d.max_def}")
        if (d.max_rep > 0) != (self.rep_levels is not None):
            raise ValueError(f"{d.dotted}: repetition levels do not match max level {d.max_rep}")
        if self.def_levels is not None:
            expected = int(np.count_nonzero(self.def_levels == d.max_def))
            if expected != self.num_values:
                raise ValueError(f"{d.dotted}: {self.num_values} values for {expected} defined slots")
            if self.rep_levels is not None and self.rep_levels.size != self.def_levels.size:
                raise ValueError(f"{d.dotted}: level arrays differ in length")

    @property
    def num_values(self) -> int:
        return values_len(self.values)

    @property
    def num_levels(self) -> int:
        return self.def_levels.size if self.def_levels is not None else self.num_values

    @property
    def num_rows(self) -> int:
        if self.rep_levels is not None:
            return int(np.count_nonzero(self.rep_levels == 0))
        return self.num_levels

    @property
    def null_count(self) -> int:
        return self.num_levels - self.num_values

    def _index(self):
        if self._row_starts is None:
            n = self.num_levels
            if self.rep_levels is not None:
                starts = np.flatnonzero(self.rep_levels == 0)
            else:
                starts = np.arange(n, dtype=np.int64)
            self._row_starts = np.append(starts, n).astype(np.int64)
            if self.def_levels is not None:
                vs = np.zeros(n + 1, np.int64)
                np.cumsum(self.def_levels == self.descriptor.max_def, out=vs[1:])
                self._value_starts = vs
        return self._row_starts, self._value_starts

    def level_range(self, row_start: int, row_stop: int) -> tuple[int, int]:
        rows, _ = self._index()
        return int(rows[row_start]), int(rows[row_stop])

    def value_range(self, row_start: int, row_stop: int) -> tuple[int, int]:
        l0, l1 = self.level_range(row_start, row_stop)
        _, vs = self._index()
        if vs is None:
            return l0, l1
        return int(vs[l0]), int(vs[l1])

    def slice_rows(self, start: int, stop: int) -> "ColumnData":
        if self.def_levels is None and self.rep_levels is None:
            return ColumnData(self.descriptor, values_slice(self.values, start, stop))
        l0, l1 = self.level_range(start, stop)
        v0, v1 = self.value_range(start, stop)
        return ColumnData(
            self.descriptor,
            values_slice(self.values, v0, v1),
            None if self.def_levels is None else self.def_levels[l0:l1],
            None if self.rep_levels is None else self.rep_levels[l0:l1],
        )

    def copy(self) -> "ColumnData":
        """Detach from any larger buffer this data may be a view of."""
        v = self.values
        v = ByteArrays(v.offsets.copy(), v.data.copy()) if isinstance(v, ByteArrays) else v.copy()
        return ColumnData(
            self.descriptor, v,
            None if self.def_levels is None else self.def_levels.copy(),
            None if self.rep_levels is None else self.rep_levels.copy(),
        )

    @classmethod
    def concat(cls, parts: Sequence["ColumnData"]) -> "ColumnData":
        if len(parts) == 1:
            return parts[0]
        desc = parts[0].descriptor
        d = np.concatenate([p.def_levels for p in parts]) if desc.max_def else None
        r = np.concatenate([p.rep_levels for p in parts]) if desc.max_rep else None
        return cls(desc, values_concat([p.values for p in parts]), d, r)

    @classmethod
    def empty(cls, desc: ColumnDescriptor) -> "ColumnData":
        lv = np.zeros(0, np.int16)
        return cls(desc, empty_values(desc), lv if desc.max_def else None, lv.copy() if desc.max_rep else None)

    def raw_size(self) -> int:
        """Decoded byte accounting: width x values, or data bytes + 4-byte offsets."""
        if isinstance(self.values, ByteArrays):
            return self.values.nbytes + 4 * self.num_values
        return self.descriptor.width * self.num_values
