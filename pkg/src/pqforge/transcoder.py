"""Per-chunk encoding trials and the compression gate.

Every candidate encoding is applied to the full chunk under identical page
partitioning; the smallest serialized chunk wins.  Compression is then tried
page by page but accepted or rejected for the chunk as a whole.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import _kernels, _meta, codecs
from .column import ByteArrays, ColumnData, ColumnDescriptor, fixed_as_bytes, values_slice
from .encoding import (
    build_dictionary,
    encode_dict_indices,
    encode_levels_v1,
    encode_plain,
    encode_values,
)
from .model import (
    UNCOMPRESSED,
    Codec,
    CodecKind,
    ColumnPhysicalType,
    CompressionMode,
    Encoding,
    EncodingMode,
    PageType,
    encoding_applicable,
    meets_threshold,
    sort_encodings,
)
from .reader import decode_chunk  # noqa: F401  (part of this module's surface)

log = logging.getLogger(__name__)

# Pages whose raw bytes would exceed this are split further; Parquet page
# sizes are signed 32-bit.
MAX_PAGE_BYTES = 1 << 30
TRIAL_KEY = "pqforge.trial"


class TranscodeError(ValueError):
    pass


@dataclass(frozen=True)
class SerializedPage:
    page_type: PageType
    header: bytes
    body: bytes
    num_values: int
    encoding: Encoding
    uncompressed_size: int

    @property
    def size(self) -> int:
        return len(self.header) + len(self.body)


@dataclass(frozen=True)
class EncodedChunk:
    """A column chunk ready to be written, pages already serialized."""

    descriptor: ColumnDescriptor
    pages: tuple[SerializedPage, ...]
    codec: Codec
    num_values: int
    num_rows: int
    statistics: dict | None
    trial_candidates: tuple[Encoding, ...] = ()

    @property
    def size(self) -> int:
        return sum(p.size for p in self.pages)

    @property
    def total_uncompressed_size(self) -> int:
        return sum(len(p.header) + p.uncompressed_size for p in self.pages)

    @property
    def has_dictionary(self) -> bool:
        return bool(self.pages) and self.pages[0].page_type is PageType.DICTIONARY

    @property
    def data_encoding(self) -> Encoding | None:
        for p in self.pages:
            if p.page_type is not PageType.DICTIONARY:
                return p.encoding
        return None

    @property
    def data_page_count(self) -> int:
        return sum(p.page_type is not PageType.DICTIONARY for p in self.pages)

    def to_bytes(self) -> bytes:
        return b"".join(p.header + p.body for p in self.pages)


@dataclass(frozen=True)
class TrialResult:
    encoding: Encoding
    encoded_size: int
    dictionary_used: bool
    fallback: bool

    def __post_init__(self):
        if self.fallback and self.dictionary_used:
            raise ValueError("a dictionary fallback cannot report dictionary_used")


@dataclass(frozen=True)
class EncodingChoice:
    chosen: Encoding
    trials: tuple[TrialResult, ...]
    chunk: EncodedChunk | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        best = min(self.trials, key=lambda r: (r.encoded_size, r.encoding.order))
        if best.encoding is not self.chosen:
            raise ValueError("chosen encoding must be the argmin of the trials")

    @property
    def chosen_trial(self) -> TrialResult:
        return next(t for t in self.trials if t.encoding is self.chosen)

    def digest(self) -> dict:
        return {
            "chosen": self.chosen.name,
            "trials": [
                {"encoding": t.encoding.name, "encoded_size": t.encoded_size,
                 "dictionary_used": t.dictionary_used, "fallback": t.fallback}
                for t in self.trials
            ],
        }


@dataclass(frozen=True)
class CompressionDecision:
    codec: Codec
    uncompressed_size: int
    compressed_size: int
    reduction: float
    applied: bool
    threshold: float | None = None
    forced: bool = False
    error: str | None = None

    def __post_init__(self):
        if self.threshold is not None and not self.forced and self.error is None:
            if self.applied != meets_threshold(self.uncompressed_size, self.compressed_size, self.threshold):
                raise ValueError("applied must hold exactly when reduction >= threshold")

    def to_dict(self) -> dict:
        return {
            "codec": str(self.codec),
            "uncompressed_size": self.uncompressed_size,
            "compressed_size": self.compressed_size,
            "reduction": self.reduction,
            "applied": self.applied,
            "threshold": self.threshold,
            "forced": self.forced,
            "error": self.error,
        }


def reduction_of(uncompressed_size: int, compressed_size: int) -> float:
    if uncompressed_size <= 0:
        return 0.0
    return 1.0 - compressed_size / uncompressed_size


def decide(uncompressed_size: int, compressed_size: int, threshold: float,
           codec: Codec = Codec(CodecKind.ZSTD)) -> CompressionDecision:
    """The gate's arithmetic: apply exactly when reduction >= threshold."""
    if not 0 <= threshold < 1:
        raise ValueError("threshold must be in [0, 1)")
    r = reduction_of(uncompressed_size, compressed_size)
    applied = meets_threshold(uncompressed_size, compressed_size, threshold)
    return CompressionDecision(codec, uncompressed_size, compressed_size, r, applied, threshold)


# -- page layout ---------------------------------------------------------------


def page_ranges(col: ColumnData, page_row_limit: int, max_page_bytes: int = MAX_PAGE_BYTES) -> list[tuple[int, int]]:
    """Row ranges of the data pages; identical for every candidate encoding."""
    if page_row_limit < 1:
        raise ValueError("page_row_limit must be >= 1")
    n = col.num_rows
    ranges = [(s, min(s + page_row_limit, n)) for s in range(0, n, page_row_limit)]
    if isinstance(col.values, ByteArrays) and col.values.nbytes > max_page_bytes:
        out = []
        for a, b in ranges:
            out.extend(_split_bytes(col, a, b, max_page_bytes))
        ranges = out
    return ranges


def _split_bytes(col: ColumnData, a: int, b: int, limit: int):
    v0, v1 = col.value_range(a, b)
    off = col.values.offsets
    if off[v1] - off[v0] + 4 * (v1 - v0) <= limit or b - a == 1:
        return [(a, b)]
    mid = (a + b) // 2
    return _split_bytes(col, a, mid, limit) + _split_bytes(col, mid, b, limit)


def _data_page_header(num_values: int, encoding_id: int, raw_size: int, stored_size: int) -> bytes:
    return _meta.write_page_header({
        "type": _meta.DATA_PAGE,
        "uncompressed_page_size": raw_size,
        "compressed_page_size": stored_size,
        "data_page_header": {
            "num_values": num_values,
            "encoding": encoding_id,
            "definition_level_encoding": _meta.ENC_RLE,
            "repetition_level_encoding": _meta.ENC_RLE,
        },
    })


def _dict_page_header(num_values: int, raw_size: int, stored_size: int) -> bytes:
    return _meta.write_page_header({
        "type": _meta.DICTIONARY_PAGE,
        "uncompressed_page_size": raw_size,
        "compressed_page_size": stored_size,
        "dictionary_page_header": {"num_values": num_values, "encoding": _meta.ENC_PLAIN},
    })


def _reheader(page: SerializedPage, body: bytes) -> SerializedPage:
    if page.page_type is PageType.DICTIONARY:
        header = _dict_page_header(page.num_values, page.uncompressed_size, len(body))
    else:
        header = _data_page_header(page.num_values, page.encoding.value, page.uncompressed_size, len(body))
    return SerializedPage(page.page_type, header, body, page.num_values, page.encoding, page.uncompressed_size)


# -- statistics ----------------------------------------------------------------


def _float_stats(vals: np.ndarray):
    finite = vals[~np.isnan(vals)]
    if finite.size == 0:
        return None
    lo, hi = finite.min(), finite.max()
    if lo == 0:
        lo = -vals.dtype.type(0.0)
    if hi == 0:
        hi = vals.dtype.type(0.0)
    return np.array([lo], vals.dtype).tobytes(), np.array([hi], vals.dtype).tobytes()


def chunk_statistics(col: ColumnData, max_len: int = 1024) -> dict:
    stats: dict = {"null_count": col.null_count}
    desc = col.descriptor
    order = desc.sort_order
    if order is None or col.num_values == 0:
        return stats
    t = desc.physical_type
    v = col.values
    mm = None
    if t in (ColumnPhysicalType.FLOAT, ColumnPhysicalType.DOUBLE):
        mm = _float_stats(v)
    elif t in (ColumnPhysicalType.INT32, ColumnPhysicalType.INT64):
        arr = v.view(np.uint32 if t is ColumnPhysicalType.INT32 else np.uint64) if order == "unsigned" else v
        i_lo, i_hi = int(np.argmin(arr)), int(np.argmax(arr))
        mm = v[i_lo:i_lo + 1].tobytes(), v[i_hi:i_hi + 1].tobytes()
    else:
        ba = v if isinstance(v, ByteArrays) else fixed_as_bytes(v)
        base = ba.offsets[0]
        i_lo, i_hi = _kernels.bytes_minmax(ba.offsets - base, ba.data[base:])
        lo = ba.data[ba.offsets[i_lo]:ba.offsets[i_lo + 1]].tobytes()
        hi = ba.data[ba.offsets[i_hi]:ba.offsets[i_hi + 1]].tobytes()
        if len(lo) <= max_len and len(hi) <= max_len:
            mm = lo, hi
    if mm is not None:
        stats.update(min_value=mm[0], max_value=mm[1], is_min_value_exact=True, is_max_value_exact=True)
    return stats


# -- trials --------------------------------------------------------------------


class _PageLayout:
    """Level bytes and value slices per page, shared by every trial."""

    def __init__(self, col: ColumnData, page_row_limit: int):
        self.col = col
        desc = col.descriptor
        self.ranges = page_ranges(col, page_row_limit)
        self.levels: list[bytes] = []
        self.value_ranges: list[tuple[int, int]] = []
        self.level_counts: list[int] = []
        for a, b in self.ranges:
            l0, l1 = col.level_range(a, b) if (desc.max_def or desc.max_rep) else (a, b)
            parts = []
            if desc.max_rep:
                parts.append(encode_levels_v1(col.rep_levels[l0:l1], desc.max_rep))
            if desc.max_def:
                parts.append(encode_levels_v1(col.def_levels[l0:l1], desc.max_def))
            self.levels.append(b"".join(parts))
            self.value_ranges.append(col.value_range(a, b))
            self.level_counts.append(l1 - l0)


def _data_pages(layout: _PageLayout, encoding: Encoding, bodies: Iterable[bytes]) -> list[SerializedPage]:
    pages = []
    for lev, body, n in zip(layout.levels, bodies, layout.level_counts):
        raw = lev + body
        header = _data_page_header(n, encoding.value, len(raw), len(raw))
        pages.append(SerializedPage(PageType.DATA_V1, header, raw, n, encoding, len(raw)))
    return pages


def _encode_candidate(layout: _PageLayout, encoding: Encoding, dictionary_size_limit: int):
    """Returns (pages, dictionary_used) or None when the dictionary overflowed."""
    col = layout.col
    desc = col.descriptor
    values = col.values

    if encoding is Encoding.RLE_DICTIONARY:
        built = build_dictionary(values, desc, dictionary_size_limit)
        if built is None:
            return None
        dict_values, codes = built
        dict_size = len(dict_values) if isinstance(dict_values, ByteArrays) else dict_values.shape[0]
        dict_body = encode_plain(dict_values, desc)
        dict_page = SerializedPage(
            PageType.DICTIONARY,
            _dict_page_header(dict_size, len(dict_body), len(dict_body)),
            dict_body, dict_size, Encoding.PLAIN, len(dict_body),
        )
        bodies = (encode_dict_indices(codes[v0:v1], dict_size) for v0, v1 in layout.value_ranges)
        return [dict_page] + _data_pages(layout, encoding, bodies), True
    bodies = (encode_values(encoding, values_slice(values, v0, v1), desc) for v0, v1 in layout.value_ranges)
    return _data_pages(layout, encoding, bodies), False


def _chunk(col: ColumnData, pages, candidates) -> EncodedChunk:
    return EncodedChunk(
        descriptor=col.descriptor,
        pages=tuple(pages),
        codec=UNCOMPRESSED,
        num_values=col.num_levels,
        num_rows=col.num_rows,
        statistics=chunk_statistics(col),
        trial_candidates=tuple(candidates),
    )


def trial_encode(values: ColumnData, candidates: Iterable[Encoding], page_row_limit: int,
                 dictionary_size_limit: int = 1 << 20) -> EncodingChoice:
    """Encode the whole chunk with every candidate and keep the smallest.

    Ties go to V1 encodings, then to declaration order, so the result does not
    depend on the order of ``candidates``.  A dictionary trial whose PLAIN
    dictionary would exceed ``dictionary_size_limit`` falls back to PLAIN
    pages and is marked as such.
    """
    cands = sort_encodings(set(candidates))
    if not cands:
        raise TranscodeError("no candidate encodings")
    t = values.descriptor.physical_type
    bad = [e.name for e in cands if not encoding_applicable(e, t)]
    if bad:
        raise TranscodeError(f"{', '.join(bad)} not applicable to {t.name}")
    layout = _PageLayout(values, page_row_limit)
    results: list[TrialResult] = []
    best: tuple | None = None
    plain_pages = None
    for enc in cands:
        if enc is Encoding.PLAIN and plain_pages is not None:
            pages, used, fallback = plain_pages, False, False
        else:
            out = _encode_candidate(layout, enc, dictionary_size_limit)
            if out is None:
                if plain_pages is None:
                    plain_pages, _ = _encode_candidate(layout, Encoding.PLAIN, dictionary_size_limit)
                pages, used, fallback = plain_pages, False, True
            else:
                pages, used = out
                fallback = False
                if enc is Encoding.PLAIN:
                    plain_pages = pages
        size = sum(p.size for p in pages)
        results.append(TrialResult(enc, size, used, fallback))
        key = (size, enc.order)
        if best is None or key < best[0]:
            best = (key, enc, pages)
    _, chosen, pages = best
    return EncodingChoice(chosen, tuple(results), _chunk(values, pages, cands))


def encode_fixed(values: ColumnData, encoding: Encoding, page_row_limit: int,
                 dictionary_size_limit: int = 1 << 20) -> EncodingChoice:
    return trial_encode(values, [encoding], page_row_limit, dictionary_size_limit)


# -- compression gate ------------------------------------------------------------


def _compress_pages(chunk: EncodedChunk, codec: Codec) -> EncodedChunk:
    pages = tuple(_reheader(p, codecs.compress(p.body, codec)) for p in chunk.pages)
    return EncodedChunk(chunk.descriptor, pages, codec, chunk.num_values, chunk.num_rows,
                        chunk.statistics, chunk.trial_candidates)


def gate_compress(encoded, candidate: Codec, threshold: float, *, forced: bool = False):
    """Compress, then keep the result only if it shrinks the chunk by >= threshold.

    ``encoded`` is an EncodedChunk (pages compressed individually, sizes
    include page headers) or a plain byte string.  Returns
    (CompressionDecision, output) where output has the same type as the input.
    """
    if candidate.kind is CodecKind.UNCOMPRESSED:
        raise ValueError("the candidate codec must compress")
    if not 0 <= threshold < 1:
        raise ValueError("threshold must be in [0, 1)")
    if not isinstance(encoded, EncodedChunk):
        raw = bytes(encoded)
        try:
            comp = codecs.compress(raw, candidate)
        except Exception as exc:  # codec failure: keep the bytes, record why
            log.warning("compression with %s failed: %s", candidate, exc)
            return CompressionDecision(candidate, len(raw), len(raw), 0.0, False, threshold, forced, str(exc)), raw
        r = reduction_of(len(raw), len(comp))
        applied = forced or meets_threshold(len(raw), len(comp), threshold)
        return CompressionDecision(candidate, len(raw), len(comp), r, applied, threshold, forced), (comp if applied else raw)
    try:
        compressed = _compress_pages(encoded, candidate)
    except Exception as exc:
        log.warning("compression of %s with %s failed: %s", encoded.descriptor.dotted, candidate, exc)
        size = encoded.total_uncompressed_size
        return CompressionDecision(candidate, size, size, 0.0, False, threshold, forced, str(exc)), encoded
    tu = compressed.total_uncompressed_size
    tc = compressed.size
    r = reduction_of(tu, tc)
    applied = forced or meets_threshold(tu, tc, threshold)
    decision = CompressionDecision(candidate, tu, tc, r, applied, threshold, forced)
    return decision, (compressed if applied else encoded)


@dataclass(frozen=True)
class ChunkOutcome:
    chunk: EncodedChunk
    choice: EncodingChoice
    decision: CompressionDecision | None


def transcode(values: ColumnData, encoding_mode: EncodingMode, compression_mode: CompressionMode,
              page_row_limit: int, dictionary_size_limit: int = 1 << 20) -> ChunkOutcome:
    """Run the trial and then the gate for one chunk according to its directive."""
    choice = trial_encode(values, encoding_mode.encodings, page_row_limit, dictionary_size_limit)
    chunk = choice.chunk
    decision = None
    if compression_mode.kind == "GATED":
        decision, chunk = gate_compress(chunk, compression_mode.codec, compression_mode.threshold)
    elif compression_mode.kind == "FORCED" and compression_mode.codec.kind is not CodecKind.UNCOMPRESSED:
        decision, chunk = gate_compress(chunk, compression_mode.codec, 0.0, forced=True)
    return ChunkOutcome(chunk, choice, decision)
