"""Value and level encoders/decoders for Parquet data pages."""

from __future__ import annotations

import struct

import numpy as np

from . import _kernels
from .column import ByteArrays, ColumnDescriptor, fixed_as_bytes, numpy_dtype, values_len
from .model import ColumnPhysicalType, Encoding, encoding_applicable

_T = ColumnPhysicalType


class EncodingError(ValueError):
    pass


class UnsupportedEncoding(EncodingError):
    pass


def _u8(buf) -> np.ndarray:
    if isinstance(buf, np.ndarray):
        return buf
    return np.frombuffer(buf, np.uint8)


def _as_fixed_bytes(values, desc: ColumnDescriptor) -> ByteArrays:
    return fixed_as_bytes(values)


# -- PLAIN -------------------------------------------------------------------


def encode_plain(values, desc: ColumnDescriptor) -> bytes:
    t = desc.physical_type
    if t is _T.BOOLEAN:
        return np.packbits(values, bitorder="little").tobytes()
    if t is _T.BYTE_ARRAY:
        return _kernels.plain_bytes_encode(values.offsets, values.data).tobytes()
    return np.ascontiguousarray(values).tobytes()


def decode_plain(buf, pos: int, end: int, count: int, desc: ColumnDescriptor):
    buf = _u8(buf)
    t = desc.physical_type
    if t is _T.BOOLEAN:
        nbytes = (count + 7) // 8
        if pos + nbytes > end:
            raise EncodingError("truncated PLAIN booleans")
        return np.unpackbits(buf[pos:pos + nbytes], count=count, bitorder="little").astype(bool), pos + nbytes
    if t is _T.BYTE_ARRAY:
        off, data, p = _kernels.plain_bytes_decode(buf, pos, end, count)
        return ByteArrays(off, data), p
    w = desc.width
    nbytes = w * count
    if pos + nbytes > end:
        raise EncodingError("truncated PLAIN values")
    raw = buf[pos:pos + nbytes]
    if t in (_T.INT96, _T.FIXED_LEN_BYTE_ARRAY):
        return raw.reshape(count, w).copy(), pos + nbytes
    return raw.view(numpy_dtype(t)).copy(), pos + nbytes


# -- levels and RLE ----------------------------------------------------------


def level_width(max_level: int) -> int:
    return int(max_level).bit_length()


def encode_rle(values: np.ndarray, width: int) -> bytes:
    return _kernels.rle_encode(np.ascontiguousarray(values, dtype=np.int32), width).tobytes()


def decode_rle(buf, pos: int, end: int, width: int, count: int) -> np.ndarray:
    return _kernels.rle_decode(_u8(buf), pos, end, width, count)


def encode_levels_v1(levels: np.ndarray, max_level: int) -> bytes:
    body = encode_rle(levels, level_width(max_level))
    return struct.pack("<I", len(body)) + body


def decode_levels_v1(buf, pos: int, count: int, max_level: int) -> tuple[np.ndarray, int]:
    buf = _u8(buf)
    if pos + 4 > buf.size:
        raise EncodingError("truncated level length")
    (n,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    if pos + n > buf.size:
        raise EncodingError("truncated levels")
    levels = decode_rle(buf, pos, pos + n, level_width(max_level), count)
    return levels.astype(np.int16), pos + n


def decode_bitpacked_levels(buf, pos: int, count: int, max_level: int) -> tuple[np.ndarray, int]:
    # deprecated BIT_PACKED level encoding: MSB-first packing, no header
    w = level_width(max_level)
    nbytes = (count * w + 7) // 8
    bits = np.unpackbits(_u8(buf)[pos:pos + nbytes], bitorder="big")[: count * w]
    if w == 0:
        return np.zeros(count, np.int16), pos
    vals = bits.reshape(count, w).astype(np.int16)
    weights = (1 << np.arange(w - 1, -1, -1)).astype(np.int16)
    return (vals * weights).sum(axis=1).astype(np.int16), pos + nbytes


# -- delta encodings -----------------------------------------------------------


def encode_dbp(values: np.ndarray, is32: bool) -> bytes:
    return _kernels.dbp_encode(np.ascontiguousarray(values, dtype=np.int64), is32).tobytes()


def decode_dbp(buf, pos: int, is32: bool) -> tuple[np.ndarray, int]:
    try:
        return _kernels.dbp_decode(_u8(buf), pos, is32)
    except ValueError as exc:
        raise EncodingError(str(exc)) from None


def _encode_dlba(ba: ByteArrays) -> bytes:
    lens = np.diff(ba.offsets)
    return encode_dbp(lens, True) + ba.data[ba.offsets[0]:ba.offsets[-1]].tobytes()


def _decode_dlba(buf, pos: int, end: int, count: int) -> tuple[ByteArrays, int]:
    lens, pos = decode_dbp(buf, pos, True)
    if lens.size != count:
        raise EncodingError("DELTA_LENGTH_BYTE_ARRAY count mismatch")
    if lens.size and lens.min() < 0:
        raise EncodingError("negative byte array length")
    offsets = np.zeros(count + 1, np.int64)
    np.cumsum(lens, out=offsets[1:])
    total = int(offsets[-1])
    if pos + total > end:
        raise EncodingError("truncated DELTA_LENGTH_BYTE_ARRAY data")
    return ByteArrays(offsets, _u8(buf)[pos:pos + total].copy()), pos + total


def _encode_dba(ba: ByteArrays) -> bytes:
    base = ba.offsets[0]
    offsets = ba.offsets - base if base else ba.offsets
    prefixes = _kernels.prefix_lengths(offsets, ba.data[base:])
    soff, sdata = _kernels.suffixes(offsets, ba.data[base:], prefixes)
    return encode_dbp(prefixes, True) + _encode_dlba(ByteArrays(soff, sdata))


def _decode_dba(buf, pos: int, end: int, count: int) -> tuple[ByteArrays, int]:
    prefixes, pos = decode_dbp(buf, pos, True)
    if prefixes.size != count:
        raise EncodingError("DELTA_BYTE_ARRAY count mismatch")
    suff, pos = _decode_dlba(buf, pos, end, count)
    try:
        off, data = _kernels.unprefix(prefixes, suff.offsets, suff.data)
    except ValueError as exc:
        raise EncodingError(str(exc)) from None
    return ByteArrays(off, data), pos


# -- byte stream split ---------------------------------------------------------


def _encode_bss(values, desc: ColumnDescriptor) -> bytes:
    w = desc.width
    n = values_len(values)
    raw = np.ascontiguousarray(values).view(np.uint8).reshape(n, w)
    return np.ascontiguousarray(raw.T).tobytes()


def _decode_bss(buf, pos: int, end: int, count: int, desc: ColumnDescriptor):
    w = desc.width
    nbytes = w * count
    if pos + nbytes > end:
        raise EncodingError("truncated BYTE_STREAM_SPLIT data")
    streams = _u8(buf)[pos:pos + nbytes].reshape(w, count)
    rows = np.ascontiguousarray(streams.T)
    if desc.physical_type is _T.FIXED_LEN_BYTE_ARRAY:
        return rows, pos + nbytes
    return rows.reshape(-1).view(numpy_dtype(desc.physical_type)).copy(), pos + nbytes


# -- dispatch ------------------------------------------------------------------


def encode_values(encoding: Encoding, values, desc: ColumnDescriptor) -> bytes:
    """Encode non-null values for a data page (dictionary handled separately)."""
    t = desc.physical_type
    if not encoding_applicable(encoding, t):
        raise EncodingError(f"{encoding.name} does not apply to {t.name}")
    if encoding is Encoding.PLAIN:
        return encode_plain(values, desc)
    if encoding is Encoding.RLE:
        body = encode_rle(values.astype(np.int32), 1)
        return struct.pack("<I", len(body)) + body
    if encoding is Encoding.DELTA_BINARY_PACKED:
        return encode_dbp(values, t is _T.INT32)
    if encoding is Encoding.DELTA_LENGTH_BYTE_ARRAY:
        return _encode_dlba(values)
    if encoding is Encoding.DELTA_BYTE_ARRAY:
        ba = values if t is _T.BYTE_ARRAY else _as_fixed_bytes(values, desc)
        return _encode_dba(ba)
    if encoding is Encoding.BYTE_STREAM_SPLIT:
        return _encode_bss(values, desc)
    raise UnsupportedEncoding(encoding.name)


def decode_values(encoding: Encoding, buf, pos: int, end: int, count: int, desc: ColumnDescriptor):
    """Decode ``count`` non-null values; returns (values, end position)."""
    buf = _u8(buf)
    t = desc.physical_type
    if encoding is Encoding.PLAIN:
        return decode_plain(buf, pos, end, count, desc)
    if encoding is Encoding.RLE and t is _T.BOOLEAN:
        if pos + 4 > end:
            raise EncodingError("truncated RLE booleans")
        (n,) = struct.unpack_from("<I", buf, pos)
        vals = decode_rle(buf, pos + 4, pos + 4 + n, 1, count)
        return vals.astype(bool), pos + 4 + n
    if encoding is Encoding.DELTA_BINARY_PACKED and t in (_T.INT32, _T.INT64):
        vals, p = decode_dbp(buf, pos, t is _T.INT32)
        if vals.size != count:
            raise EncodingError("DELTA_BINARY_PACKED count mismatch")
        return vals.astype(numpy_dtype(t)), p
    if encoding is Encoding.DELTA_LENGTH_BYTE_ARRAY and t is _T.BYTE_ARRAY:
        return _decode_dlba(buf, pos, end, count)
    if encoding is Encoding.DELTA_BYTE_ARRAY and t in (_T.BYTE_ARRAY, _T.FIXED_LEN_BYTE_ARRAY):
        ba, p = _decode_dba(buf, pos, end, count)
        if t is _T.FIXED_LEN_BYTE_ARRAY:
            if ba.data.size != count * desc.width:
                raise EncodingError("DELTA_BYTE_ARRAY value length does not match type_length")
            return ba.data.reshape(count, desc.width), p
        return ba, p
    if encoding is Encoding.BYTE_STREAM_SPLIT and t in (_T.FLOAT, _T.DOUBLE, _T.INT32, _T.INT64, _T.FIXED_LEN_BYTE_ARRAY):
        return _decode_bss(buf, pos, end, count, desc)
    raise UnsupportedEncoding(f"{encoding.name} for {t.name}")


# -- dictionary ------------------------------------------------------------------


def build_dictionary(values, desc: ColumnDescriptor, limit_bytes: int):
    """First-occurrence dictionary as (dictionary values, int32 codes).

    Returns None when the PLAIN-encoded dictionary would exceed ``limit_bytes``.
    Floating point keys are compared by bit pattern.
    """
    t = desc.physical_type
    if t is _T.BOOLEAN:
        return None
    if t is _T.BYTE_ARRAY:
        codes, firsts, ok = _kernels.factorize_bytes(values.offsets, values.data, limit_bytes)
        if not ok:
            return None
        return values.take(firsts), codes
    if t in (_T.INT96, _T.FIXED_LEN_BYTE_ARRAY):
        ba = fixed_as_bytes(values)
        # the kernel charges 4 + width per entry; PLAIN fixed-width entries cost width
        max_entries = limit_bytes // desc.width
        codes, firsts, ok = _kernels.factorize_bytes(ba.offsets, ba.data, max_entries * (4 + desc.width))
        if not ok:
            return None
        return values[firsts], codes
    w = desc.width
    keys = np.ascontiguousarray(values).view(np.uint32 if w == 4 else np.uint64).astype(np.uint64)
    codes, firsts, ok = _kernels.factorize_u64(keys, w, limit_bytes)
    if not ok:
        return None
    return values[firsts], codes


def index_width(dict_size: int) -> int:
    return max(int(dict_size - 1).bit_length(), 0) if dict_size > 0 else 0


def encode_dict_indices(codes: np.ndarray, dict_size: int) -> bytes:
    w = index_width(dict_size)
    return bytes([w]) + encode_rle(codes, w)


def decode_dict_indices(buf, pos: int, end: int, count: int) -> np.ndarray:
    buf = _u8(buf)
    if count == 0:
        return np.zeros(0, np.int32)
    if pos >= end:
        raise EncodingError("missing dictionary index bit width")
    w = int(buf[pos])
    if w > 32:
        raise EncodingError("dictionary index bit width out of range")
    return decode_rle(buf, pos + 1, end, w, count)


def take(values, idx: np.ndarray):
    if isinstance(values, ByteArrays):
        return values.take(idx)
    return values[idx]
