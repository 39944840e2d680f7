"""Page-level compression for the codecs Parquet files use.

Writing is limited to UNCOMPRESSED, SNAPPY, ZSTD and LZ4 (as LZ4_RAW).  GZIP,
BROTLI and the legacy Hadoop-framed LZ4 id are read-only.
"""

from __future__ import annotations

import struct

import cramjam

from . import _meta
from .model import Codec, CodecKind, ZSTD_DEFAULT_LEVEL


class CodecError(RuntimeError):
    pass


class UnsupportedCodec(CodecError):
    pass


def compress(data, codec: Codec) -> bytes:
    kind = codec.kind
    if kind is CodecKind.UNCOMPRESSED:
        return bytes(data)
    if kind is CodecKind.SNAPPY:
        return bytes(cramjam.snappy.compress_raw(data))
    if kind is CodecKind.ZSTD:
        level = ZSTD_DEFAULT_LEVEL if codec.level is None else codec.level
        return bytes(cramjam.zstd.compress(data, level=level))
    if kind is CodecKind.LZ4:
        return bytes(cramjam.lz4.compress_block(data, store_size=False))
    raise UnsupportedCodec(str(codec))


def _hadoop_lz4(data, size: int) -> bytes:
    out = bytearray()
    pos = 0
    n = len(data)
    while pos < n:
        if pos + 8 > n:
            raise CodecError("truncated hadoop lz4 frame")
        raw_len, comp_len = struct.unpack_from(">II", data, pos)
        pos += 8
        if pos + comp_len > n:
            raise CodecError("truncated hadoop lz4 frame")
        out += bytes(cramjam.lz4.decompress_block(bytes(data[pos:pos + comp_len]), output_len=raw_len))
        pos += comp_len
    if len(out) != size:
        raise CodecError("hadoop lz4 size mismatch")
    return bytes(out)


def decompress(data, codec_id: int, uncompressed_size: int) -> bytes:
    """Decompress a page body given the footer's codec id."""
    if codec_id == _meta.CODEC_UNCOMPRESSED:
        return bytes(data)
    try:
        if codec_id == _meta.CODEC_SNAPPY:
            out = bytes(cramjam.snappy.decompress_raw(data))
        elif codec_id == _meta.CODEC_ZSTD:
            out = bytes(cramjam.zstd.decompress(data, output_len=uncompressed_size))
        elif codec_id == _meta.CODEC_LZ4_RAW:
            out = bytes(cramjam.lz4.decompress_block(data, output_len=uncompressed_size))
        elif codec_id == _meta.CODEC_GZIP:
            out = bytes(cramjam.gzip.decompress(data, output_len=uncompressed_size))
        elif codec_id == _meta.CODEC_BROTLI:
            out = bytes(cramjam.brotli.decompress(data, output_len=uncompressed_size))
        elif codec_id == _meta.CODEC_LZ4:
            # Hadoop framing first, then the raw-frame and raw-block variants
            # that some older writers emitted under the same id.
            try:
                out = _hadoop_lz4(data, uncompressed_size)
            except Exception:
                try:
                    out = bytes(cramjam.lz4.decompress(data))
                except Exception:
                    out = bytes(cramjam.lz4.decompress_block(data, output_len=uncompressed_size))
        else:
            raise UnsupportedCodec(_meta.CODEC_NAMES.get(codec_id, str(codec_id)))
    except UnsupportedCodec:
        raise
    except Exception as exc:
        raise CodecError(f"{_meta.CODEC_NAMES.get(codec_id, codec_id)} decompression failed: {exc}") from exc
    if len(out) != uncompressed_size:
        raise CodecError("decompressed page size does not match its header")
    return out


def readable(codec_id: int) -> bool:
    return codec_id in (_meta.CODEC_UNCOMPRESSED, _meta.CODEC_SNAPPY, _meta.CODEC_ZSTD, _meta.CODEC_GZIP,
                        _meta.CODEC_BROTLI, _meta.CODEC_LZ4, _meta.CODEC_LZ4_RAW)
