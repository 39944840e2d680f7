"""Footer parsing, page-header scanning and column chunk decoding."""

from __future__ import annotations

import io
import os
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from . import _meta, codecs
from ._thrift import ThriftError
from .column import ColumnData, ColumnDescriptor, leaf_columns, values_concat
from .encoding import (
    EncodingError,
    decode_bitpacked_levels,
    decode_dict_indices,
    decode_levels_v1,
    decode_plain,
    decode_rle,
    decode_values,
    level_width,
    take,
)
from .model import Encoding

SUPPORTED_ENCODING_IDS = frozenset({
    _meta.ENC_PLAIN, _meta.ENC_PLAIN_DICTIONARY, _meta.ENC_RLE, _meta.ENC_BIT_PACKED,
    _meta.ENC_DELTA_BINARY_PACKED, _meta.ENC_DELTA_LENGTH_BYTE_ARRAY,
    _meta.ENC_DELTA_BYTE_ARRAY, _meta.ENC_RLE_DICTIONARY, _meta.ENC_BYTE_STREAM_SPLIT,
})


class ParquetFormatError(ValueError):
    """The input is not a readable Parquet file."""


class NotParquetError(ParquetFormatError):
    pass


class TruncatedFileError(ParquetFormatError):
    pass


class ChunkDecodeError(ParquetFormatError):
    pass


@dataclass(frozen=True)
class PageInfo:
    header: dict
    header_size: int
    offset: int  # of the header, relative to the file

    @property
    def page_type(self) -> int:
        return self.header["type"]

    @property
    def compressed_size(self) -> int:
        return self.header.get("compressed_page_size", 0)

    @property
    def uncompressed_size(self) -> int:
        return self.header.get("uncompressed_page_size", 0)


class _Source:
    """Random-access reads from a path, bytes buffer or binary file object."""

    def __init__(self, source):
        self._fd = None
        self._buf = None
        self._fh = None
        self._lock = threading.Lock()
        self.name = None
        if isinstance(source, (str, os.PathLike)):
            self.name = os.fspath(source)
            self._fd = os.open(self.name, os.O_RDONLY)
            self.size = os.fstat(self._fd).st_size
        elif isinstance(source, (bytes, bytearray, memoryview)):
            self._buf = memoryview(source).cast("B")
            self.size = len(self._buf)
        elif hasattr(source, "read") and hasattr(source, "seek"):
            self._fh = source
            self.size = source.seek(0, io.SEEK_END)
        else:
            raise TypeError(f"cannot read Parquet from {type(source).__name__}")

    def read(self, offset: int, n: int) -> bytes:
        if offset < 0 or n < 0 or offset + n > self.size:
            raise TruncatedFileError(f"read of {n} bytes at {offset} beyond end of file ({self.size})")
        if self._buf is not None:
            return bytes(self._buf[offset:offset + n])
        if self._fd is not None:
            out = os.pread(self._fd, n, offset)
        else:
            with self._lock:
                self._fh.seek(offset)
                out = self._fh.read(n)
        if len(out) != n:
            raise TruncatedFileError("short read")
        return out

    def close(self) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None


class ParquetFile:
    """Read-only view of one Parquet file.

    >>> pf = ParquetFile("data.parquet")          # doctest: +SKIP
    >>> pf.read_column(0, 0).num_rows             # doctest: +SKIP
    """

    def __init__(self, source):
        self._src = _Source(source)
        try:
            self._read_footer()
        except Exception:
            self._src.close()
            raise

    def _read_footer(self) -> None:
        size = self._src.size
        if size < 12:
            raise NotParquetError("file too small to be Parquet")
        tail = self._src.read(size - 8, 8)
        if tail[4:] != _meta.MAGIC:
            if tail[4:] == b"PARE":
                raise ParquetFormatError("encrypted Parquet footers are not supported")
            raise NotParquetError("missing PAR1 footer magic")
        if self._src.read(0, 4) != _meta.MAGIC:
            raise NotParquetError("missing PAR1 header magic")
        (footer_len,) = struct.unpack("<I", tail[:4])
        if footer_len + 12 > size:
            raise TruncatedFileError("footer length exceeds file size")
        raw = self._src.read(size - 8 - footer_len, footer_len)
        try:
            self.metadata = _meta.read_file_metadata(raw)
        except (ThriftError, IndexError, UnicodeDecodeError) as exc:
            raise NotParquetError(f"unparseable footer: {exc}") from None
        self.footer_size = footer_len
        self.file_size = size
        try:
            self.columns = leaf_columns(self.metadata.get("schema", []))
        except (ValueError, KeyError) as exc:
            raise ParquetFormatError(f"invalid schema: {exc}") from None
        self.row_groups = self.metadata.get("row_groups", [])
        self.num_rows = sum(rg.get("num_rows", 0) for rg in self.row_groups)
        for rg in self.row_groups:
            if len(rg.get("columns", [])) != len(self.columns):
                raise ParquetFormatError("row group column count does not match schema")

    def close(self) -> None:
        self._src.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def name(self) -> str | None:
        return self._src.name

    @property
    def schema_elements(self) -> list[dict]:
        return self.metadata["schema"]

    @property
    def key_value_metadata(self) -> list[dict] | None:
        return self.metadata.get("key_value_metadata")

    def row_group_rows(self) -> list[int]:
        return [rg["num_rows"] for rg in self.row_groups]

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.dotted == name:
                return i
        raise KeyError(name)

    def chunk_meta(self, rg: int, col: int) -> dict:
        cc = self.row_groups[rg]["columns"][col]
        if cc.get("file_path"):
            raise ParquetFormatError("column chunks in external files are not supported")
        meta = cc.get("meta_data")
        if meta is None:
            raise ParquetFormatError("column chunk without metadata (encrypted?)")
        return meta

    def chunk_range(self, rg: int, col: int) -> tuple[int, int]:
        meta = self.chunk_meta(rg, col)
        start = meta["data_page_offset"]
        dict_off = meta.get("dictionary_page_offset")
        if dict_off and 0 < dict_off < start:
            start = dict_off
        return start, meta["total_compressed_size"]

    def read_chunk_bytes(self, rg: int, col: int) -> bytes:
        start, length = self.chunk_range(rg, col)
        return self._src.read(start, length)

    def chunk_support(self, rg: int, col: int) -> str | None:
        """None when the chunk can be decoded, otherwise the reason it cannot."""
        meta = self.chunk_meta(rg, col)
        if not codecs.readable(meta["codec"]):
            return f"unsupported codec {_meta.CODEC_NAMES.get(meta['codec'], meta['codec'])}"
        bad = [e for e in meta.get("encodings", []) if e not in SUPPORTED_ENCODING_IDS]
        if bad:
            return f"unsupported encoding id(s) {bad}"
        return None

    def iter_page_headers(self, rg: int, col: int) -> Iterator[PageInfo]:
        start, length = self.chunk_range(rg, col)
        end = start + length
        pos = start
        while pos < end:
            want = min(256, end - pos)
            while True:
                buf = self._src.read(pos, want)
                try:
                    header, hsize = _meta.read_page_header(buf, 0)
                    break
                except (ThriftError, IndexError):
                    if want >= end - pos:
                        raise TruncatedFileError(f"unreadable page header at offset {pos}") from None
                    want = min(want * 4, end - pos)
            info = PageInfo(header, hsize, pos)
            yield info
            pos += hsize + info.compressed_size
        if pos != end:
            raise TruncatedFileError("pages overrun the column chunk")

    def read_column(self, rg: int, col: int) -> ColumnData:
        meta = self.chunk_meta(rg, col)
        reason = self.chunk_support(rg, col)
        if reason:
            raise ChunkDecodeError(reason)
        raw = self.read_chunk_bytes(rg, col)
        return decode_chunk(raw, meta, self.columns[col], self.row_groups[rg]["num_rows"])

    def iter_column(self, col: int, row_groups: range | None = None) -> Iterator[ColumnData]:
        for rg in row_groups if row_groups is not None else range(len(self.row_groups)):
            yield self.read_column(rg, col)


def _levels_v1(body, pos: int, count: int, max_level: int, encoding: int):
    if max_level == 0:
        return None, pos
    if encoding == _meta.ENC_BIT_PACKED:
        return decode_bitpacked_levels(body, pos, count, max_level)
    if encoding != _meta.ENC_RLE:
        raise ChunkDecodeError(f"unsupported level encoding {encoding}")
    return decode_levels_v1(body, pos, count, max_level)


def _decode_data(body: np.ndarray, pos: int, end: int, encoding_id: int, count: int,
                 desc: ColumnDescriptor, dictionary):
    if encoding_id in (_meta.ENC_PLAIN_DICTIONARY, _meta.ENC_RLE_DICTIONARY):
        if dictionary is None:
            raise ChunkDecodeError("dictionary-encoded page without a dictionary page")
        codes = decode_dict_indices(body, pos, end, count)
        n = len(dictionary) if not isinstance(dictionary, np.ndarray) else dictionary.shape[0]
        if codes.size and (codes.min() < 0 or codes.max() >= n):
            raise ChunkDecodeError("dictionary index out of range")
        return take(dictionary, codes)
    enc = Encoding.from_parquet(encoding_id)
    if enc is None:
        raise ChunkDecodeError(f"unsupported data encoding {encoding_id}")
    values, _ = decode_values(enc, body, pos, end, count, desc)
    return values


def decode_chunk(raw: bytes, meta: dict, desc: ColumnDescriptor, num_rows: int | None = None) -> ColumnData:
    """Decode a whole column chunk (all pages) into values and levels."""
    codec_id = meta["codec"]
    total = meta.get("num_values", 0)
    mv = memoryview(raw)
    pos = 0
    dictionary = None
    vals, defs, reps = [], [], []
    seen = 0
    try:
        while pos < len(raw) and seen < total:
            header, hend = _meta.read_page_header(mv, pos)
            csize = header["compressed_page_size"]
            usize = header["uncompressed_page_size"]
            body_raw = mv[hend:hend + csize]
            if len(body_raw) != csize:
                raise TruncatedFileError("page body runs past the chunk")
            pos = hend + csize
            ptype = header["type"]
            if ptype == _meta.DICTIONARY_PAGE:
                dh = header["dictionary_page_header"]
                body = np.frombuffer(codecs.decompress(body_raw, codec_id, usize), np.uint8)
                dictionary, _ = decode_plain(body, 0, body.size, dh["num_values"], desc)
                continue
            if ptype == _meta.DATA_PAGE:
                dh = header["data_page_header"]
                n = dh["num_values"]
                body = np.frombuffer(codecs.decompress(body_raw, codec_id, usize), np.uint8)
                p = 0
                rep, p = _levels_v1(body, p, n, desc.max_rep, dh.get("repetition_level_encoding", _meta.ENC_RLE))
                dfn, p = _levels_v1(body, p, n, desc.max_def, dh.get("definition_level_encoding", _meta.ENC_RLE))
                nn = n if dfn is None else int(np.count_nonzero(dfn == desc.max_def))
                v = _decode_data(body, p, body.size, dh["encoding"], nn, desc, dictionary)
            elif ptype == _meta.DATA_PAGE_V2:
                dh = header["data_page_header_v2"]
                n = dh["num_values"]
                rl = dh.get("repetition_levels_byte_length", 0)
                dl = dh.get("definition_levels_byte_length", 0)
                lev = np.frombuffer(body_raw[:rl + dl], np.uint8)
                rep = dfn = None
                if desc.max_rep:
                    rep = decode_rle(lev, 0, rl, level_width(desc.max_rep), n).astype(np.int16)
                if desc.max_def:
                    dfn = decode_rle(lev, rl, rl + dl, level_width(desc.max_def), n).astype(np.int16)
                rest = body_raw[rl + dl:]
                if dh.get("is_compressed", True) and codec_id != _meta.CODEC_UNCOMPRESSED:
                    body = np.frombuffer(codecs.decompress(rest, codec_id, usize - rl - dl), np.uint8)
                else:
                    body = np.frombuffer(rest, np.uint8)
                nn = n if dfn is None else int(np.count_nonzero(dfn == desc.max_def))
                v = _decode_data(body, 0, body.size, dh["encoding"], nn, desc, dictionary)
            else:
                continue
            seen += n
            vals.append(v)
            if dfn is not None:
                defs.append(dfn)
            if rep is not None:
                reps.append(rep)
    except (EncodingError, ThriftError, codecs.CodecError, KeyError, IndexError, ValueError) as exc:
        raise ChunkDecodeError(f"{desc.dotted}: {exc}") from exc
    if seen != total:
        raise ChunkDecodeError(f"{desc.dotted}: chunk holds {seen} values, metadata says {total}")
    if not vals:
        return ColumnData.empty(desc)
    lv = lambda parts: np.concatenate(parts) if len(parts) > 1 else parts[0]  # noqa: E731
    try:
        col = ColumnData(
            desc,
            values_concat(vals),
            lv(defs) if desc.max_def else None,
            lv(reps) if desc.max_rep else None,
        )
    except ValueError as exc:
        raise ChunkDecodeError(f"{desc.dotted}: {exc}") from exc
    if num_rows is not None and col.num_rows != num_rows:
        raise ChunkDecodeError(f"{desc.dotted}: decoded {col.num_rows} rows, row group has {num_rows}")
    return col


def open_parquet(source) -> ParquetFile:
    if isinstance(source, ParquetFile):
        return source
    if isinstance(source, (str, os.PathLike)) and not Path(source).is_file():
        raise FileNotFoundError(source)
    return ParquetFile(source)
