"""Streaming Parquet file writer for pre-serialized column chunks."""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import _meta
from .column import ColumnDescriptor
from .model import V2_ENCODINGS, Encoding, PageType
from .transcoder import TRIAL_KEY, EncodedChunk

CREATED_BY = "pqforge version 0.1.0"

_PAGE_TYPE_IDS = {
    PageType.DICTIONARY: _meta.DICTIONARY_PAGE,
    PageType.DATA_V1: _meta.DATA_PAGE,
    PageType.DATA_V2: _meta.DATA_PAGE_V2,
}


@dataclass(frozen=True)
class RawChunk:
    """Source chunk bytes copied verbatim, with the source ColumnMetaData."""

    meta: dict
    data: bytes


class ParquetWriter:
    """Write row groups of ready-made chunks, then the footer.

    When given a path the file is written to a sibling temporary file and
    renamed into place on ``close``; ``abort`` removes it instead.
    """

    def __init__(self, target, schema_elements: Sequence[dict], columns: Sequence[ColumnDescriptor],
                 key_value_metadata: list[dict] | None = None, created_by: str = CREATED_BY):
        self.schema_elements = list(schema_elements)
        self.columns = list(columns)
        self.key_value_metadata = key_value_metadata
        self.created_by = created_by
        self.row_groups: list[dict] = []
        self._uses_v2 = False
        self._closed = False
        self._open: dict | None = None
        self._final: Path | None = None
        self._tmp: str | None = None
        if isinstance(target, (str, os.PathLike)):
            self._final = Path(target)
            fd, self._tmp = tempfile.mkstemp(prefix=f".{self._final.name}.", suffix=".tmp",
                                             dir=self._final.parent or ".")
            self._fh = os.fdopen(fd, "wb")
        else:
            self._fh = target
        self._pos = 0
        self._write(_meta.MAGIC)

    def _write(self, data: bytes) -> None:
        self._fh.write(data)
        self._pos += len(data)

    @property
    def bytes_written(self) -> int:
        return self._pos

    def _encoded_meta(self, chunk: EncodedChunk, desc: ColumnDescriptor) -> dict:
        start = self._pos
        dict_offset = None
        data_offset = None
        encodings: set[int] = set()
        page_stats: dict[tuple[int, int], int] = {}
        for page in chunk.pages:
            if page.page_type is PageType.DICTIONARY:
                dict_offset = self._pos
                encodings.add(_meta.ENC_PLAIN)
            elif data_offset is None:
                data_offset = self._pos
            if page.page_type is not PageType.DICTIONARY:
                encodings.add(page.encoding.value)
                if desc.max_def or desc.max_rep:
                    encodings.add(_meta.ENC_RLE)
            if page.encoding in V2_ENCODINGS:
                self._uses_v2 = True
            key = (_PAGE_TYPE_IDS[page.page_type], page.encoding.value)
            page_stats[key] = page_stats.get(key, 0) + 1
            self._write(page.header)
            self._write(page.body)
        meta = {
            "type": desc.physical_type.value,
            "encodings": sorted(encodings),
            "path_in_schema": list(desc.path),
            "codec": chunk.codec.parquet_id,
            "num_values": chunk.num_values,
            "total_uncompressed_size": chunk.total_uncompressed_size,
            "total_compressed_size": self._pos - start,
            "data_page_offset": data_offset if data_offset is not None else start,
            "dictionary_page_offset": dict_offset,
            "statistics": chunk.statistics,
            "encoding_stats": [
                {"page_type": pt, "encoding": enc, "count": n} for (pt, enc), n in sorted(page_stats.items())
            ],
        }
        if chunk.trial_candidates:
            meta["key_value_metadata"] = [
                {"key": TRIAL_KEY, "value": ",".join(e.name for e in chunk.trial_candidates)}
            ]
        return meta

    def _raw_meta(self, chunk: RawChunk) -> dict:
        src = chunk.meta
        src_start = src["data_page_offset"]
        dict_off = src.get("dictionary_page_offset")
        if dict_off and 0 < dict_off < src_start:
            src_start = dict_off
        shift = self._pos - src_start
        meta = {k: v for k, v in src.items()
                if k not in ("index_page_offset", "bloom_filter_offset", "bloom_filter_length")}
        meta["data_page_offset"] = src["data_page_offset"] + shift
        if dict_off:
            meta["dictionary_page_offset"] = dict_off + shift
        for e in src.get("encodings", []):
            enc = Encoding.from_parquet(e)
            if enc in V2_ENCODINGS:
                self._uses_v2 = True
        self._write(chunk.data)
        return meta

    def begin_row_group(self, num_rows: int) -> None:
        if self._open is not None:
            raise RuntimeError("previous row group not finished")
        self._open = {"num_rows": num_rows, "start": self._pos, "columns": [], "uncompressed": 0}

    def write_chunk(self, chunk: "EncodedChunk | RawChunk") -> None:
        g = self._open
        if g is None:
            raise RuntimeError("no open row group")
        if len(g["columns"]) >= len(self.columns):
            raise ValueError("row group already has a chunk for every column")
        desc = self.columns[len(g["columns"])]
        offset = self._pos
        meta = self._raw_meta(chunk) if isinstance(chunk, RawChunk) else self._encoded_meta(chunk, desc)
        g["uncompressed"] += meta["total_uncompressed_size"]
        g["columns"].append({"file_offset": offset, "meta_data": meta})

    def end_row_group(self) -> None:
        g = self._open
        if g is None or len(g["columns"]) != len(self.columns):
            raise ValueError("one chunk per column is required")
        self.row_groups.append({
            "columns": g["columns"],
            "total_byte_size": g["uncompressed"],
            "num_rows": g["num_rows"],
            "file_offset": g["start"],
            "total_compressed_size": self._pos - g["start"],
            "ordinal": len(self.row_groups),
        })
        self._open = None

    def write_row_group(self, num_rows: int, chunks: Sequence["EncodedChunk | RawChunk"]) -> None:
        if len(chunks) != len(self.columns):
            raise ValueError("one chunk per column is required")
        self.begin_row_group(num_rows)
        for chunk in chunks:
            self.write_chunk(chunk)
        self.end_row_group()

    def footer(self) -> dict:
        return {
            "version": 2 if self._uses_v2 else 1,
            "schema": self.schema_elements,
            "num_rows": sum(rg["num_rows"] for rg in self.row_groups),
            "row_groups": self.row_groups,
            "key_value_metadata": self.key_value_metadata,
            "created_by": self.created_by,
            "column_orders": [{"type_order": {}} for _ in self.columns],
        }

    def close(self) -> int:
        """Write the footer and publish the file; returns the file size."""
        if self._closed:
            return self._pos
        if self._open is not None:
            raise RuntimeError("row group left open")
        raw = _meta.write_file_metadata(self.footer())
        self._write(raw)
        self._write(struct.pack("<I", len(raw)) + _meta.MAGIC)
        self._closed = True
        if self._final is not None:
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._fh.close()
            os.replace(self._tmp, self._final)
        return self._pos

    def abort(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self._final is not None:
            self._fh.close()
            try:
                os.unlink(self._tmp)
            except FileNotFoundError:
                pass

    def __enter__(self):
        return self

    def __exit__(self, exc_type, *rest):
        if exc_type is None:
            self.close()
        else:
            self.abort()
