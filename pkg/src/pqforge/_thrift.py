"""Schema-driven Thrift compact protocol codec.

Structs decode to plain dicts keyed by field name.  Fields that the schema
does not know about are kept as raw bytes under ``UNKNOWN`` so that a
decode/encode round trip reproduces them verbatim.
"""

from __future__ import annotations

import struct as _struct
from typing import Any

STOP = 0
C_TRUE = 1
C_FALSE = 2
C_BYTE = 3
C_I16 = 4
C_I32 = 5
C_I64 = 6
C_DOUBLE = 7
C_BINARY = 8
C_LIST = 9
C_SET = 10
C_MAP = 11
C_STRUCT = 12

UNKNOWN = "__unknown__"

_SCALAR_CODES = {
    "bool": C_TRUE,
    "i8": C_BYTE,
    "i16": C_I16,
    "i32": C_I32,
    "i64": C_I64,
    "double": C_DOUBLE,
    "binary": C_BINARY,
    "string": C_BINARY,
}

# name -> {field_id: (field_name, type_spec)}; populated by register()
STRUCTS: dict[str, dict[int, tuple[str, Any]]] = {}
_BY_NAME: dict[str, dict[str, tuple[int, Any]]] = {}


class ThriftError(ValueError):
    pass


def register(name: str, fields: dict[int, tuple[str, Any]]) -> None:
    STRUCTS[name] = fields
    _BY_NAME[name] = {fname: (fid, spec) for fid, (fname, spec) in fields.items()}


def _code(spec: Any) -> int:
    if isinstance(spec, str):
        return _SCALAR_CODES[spec] if spec in _SCALAR_CODES else C_STRUCT
    return C_LIST  # ("list", elem)


# -- reading -----------------------------------------------------------------


def _varint(buf, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        try:
            b = buf[pos]
        except IndexError:
            raise ThriftError("truncated varint") from None
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise ThriftError("varint too long")


def _zigzag(n: int) -> int:
    return (n >> 1) ^ -(n & 1)


def _read_value(buf, pos: int, ctype: int, spec: Any):
    if ctype in (C_TRUE, C_FALSE):
        # only reached inside collections; fields carry the value in the header
        b = buf[pos]
        return b == C_TRUE, pos + 1
    if ctype == C_BYTE:
        v = buf[pos]
        return (v - 256 if v > 127 else v), pos + 1
    if ctype in (C_I16, C_I32, C_I64):
        v, pos = _varint(buf, pos)
        return _zigzag(v), pos
    if ctype == C_DOUBLE:
        if pos + 8 > len(buf):
            raise ThriftError("truncated double")
        return _struct.unpack_from("<d", buf, pos)[0], pos + 8
    if ctype == C_BINARY:
        n, pos = _varint(buf, pos)
        if pos + n > len(buf):
            raise ThriftError("truncated binary")
        raw = bytes(buf[pos:pos + n])
        if spec == "string":
            return raw.decode("utf-8", errors="surrogateescape"), pos + n
        return raw, pos + n
    if ctype in (C_LIST, C_SET):
        head = buf[pos]
        pos += 1
        size = head >> 4
        etype = head & 0x0F
        if size == 15:
            size, pos = _varint(buf, pos)
        elem = spec[1] if isinstance(spec, tuple) else None
        out = []
        for _ in range(size):
            v, pos = _read_value(buf, pos, etype, elem)
            out.append(v)
        return out, pos
    if ctype == C_MAP:
        size, pos = _varint(buf, pos)
        if size == 0:
            return {}, pos
        kv = buf[pos]
        pos += 1
        out = {}
        for _ in range(size):
            k, pos = _read_value(buf, pos, kv >> 4, None)
            v, pos = _read_value(buf, pos, kv & 0x0F, None)
            out[k] = v
        return out, pos
    if ctype == C_STRUCT:
        return read_struct(spec if isinstance(spec, str) else None, buf, pos)
    raise ThriftError(f"unknown compact type {ctype}")


def read_struct(name: str | None, buf, pos: int = 0) -> tuple[dict, int]:
    """Decode one struct starting at ``pos``; returns (fields, end position)."""
    fields = STRUCTS.get(name, {}) if name else {}
    out: dict[str, Any] = {}
    last = 0
    while True:
        try:
            head = buf[pos]
        except IndexError:
            raise ThriftError("truncated struct") from None
        pos += 1
        if head == STOP:
            return out, pos
        ctype = head & 0x0F
        delta = head >> 4
        if delta:
            fid = last + delta
        else:
            raw, pos = _varint(buf, pos)
            fid = _zigzag(raw)
        last = fid
        start = pos
        if ctype in (C_TRUE, C_FALSE):
            value = ctype == C_TRUE
        else:
            known = fields.get(fid)
            value, pos = _read_value(buf, pos, ctype, known[1] if known else None)
        if fid in fields:
            out[fields[fid][0]] = value
        else:
            if ctype in (C_TRUE, C_FALSE):
                raw_bytes = b""
            else:
                raw_bytes = bytes(buf[start:pos])
            out.setdefault(UNKNOWN, []).append((fid, ctype, raw_bytes))


# -- writing -----------------------------------------------------------------


def _put_varint(out: bytearray, n: int) -> None:
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def _put_zigzag(out: bytearray, n: int) -> None:
    _put_varint(out, (n << 1) ^ (n >> 63) if n < 0 else n << 1)


def _write_value(out: bytearray, spec: Any, value: Any) -> None:
    if isinstance(spec, tuple):
        elem = spec[1]
        ecode = _code(elem)
        n = len(value)
        if n < 15:
            out.append((n << 4) | ecode)
        else:
            out.append(0xF0 | ecode)
            _put_varint(out, n)
        for v in value:
            _write_value(out, elem, v)
        return
    if spec == "bool":
        out.append(C_TRUE if value else C_FALSE)
    elif spec == "i8":
        out.append(value & 0xFF)
    elif spec in ("i16", "i32", "i64"):
        _put_zigzag(out, int(value))
    elif spec == "double":
        out += _struct.pack("<d", value)
    elif spec in ("binary", "string"):
        raw = value.encode("utf-8", errors="surrogateescape") if isinstance(value, str) else bytes(value)
        _put_varint(out, len(raw))
        out += raw
    else:
        _write_struct(out, spec, value)


def _write_struct(out: bytearray, name: str, obj: dict) -> None:
    by_name = _BY_NAME[name]
    items = []
    for key, value in obj.items():
        if value is None:
            continue
        if key == UNKNOWN:
            for fid, ctype, raw in value:
                items.append((fid, ctype, None, raw))
            continue
        fid, spec = by_name[key]
        items.append((fid, _code(spec), spec, value))
    items.sort(key=lambda t: t[0])
    last = 0
    for fid, ctype, spec, value in items:
        if ctype in (C_TRUE, C_FALSE) and spec is not None:
            ctype = C_TRUE if value else C_FALSE
        delta = fid - last
        if 0 < delta <= 15:
            out.append((delta << 4) | ctype)
        else:
            out.append(ctype)
            _put_zigzag(out, fid)
        last = fid
        if spec is None:
            out += value
        elif ctype not in (C_TRUE, C_FALSE):
            _write_value(out, spec, value)
    out.append(STOP)


def write_struct(name: str, obj: dict) -> bytes:
    out = bytearray()
    _write_struct(out, name, obj)
    return bytes(out)
