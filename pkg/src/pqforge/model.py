"""Domain vocabulary: physical layout census types, rewrite policy and plan."""

from __future__ import annotations

import enum
import json
import math
import statistics
from collections import Counter
from dataclasses import MISSING, dataclass, field, fields, replace
from fractions import Fraction
from typing import Any, Iterable, Mapping

from . import _meta


class ColumnPhysicalType(enum.Enum):
    BOOLEAN = _meta.BOOLEAN
    INT32 = _meta.INT32
    INT64 = _meta.INT64
    INT96 = _meta.INT96
    FLOAT = _meta.FLOAT
    DOUBLE = _meta.DOUBLE
    BYTE_ARRAY = _meta.BYTE_ARRAY
    FIXED_LEN_BYTE_ARRAY = _meta.FIXED_LEN_BYTE_ARRAY


class Generation(enum.Enum):
    V1 = "V1"
    V2 = "V2"


class Encoding(enum.Enum):
    # declaration order is the tie-break order within a generation
    PLAIN = _meta.ENC_PLAIN
    RLE = _meta.ENC_RLE
    RLE_DICTIONARY = _meta.ENC_RLE_DICTIONARY
    DELTA_BINARY_PACKED = _meta.ENC_DELTA_BINARY_PACKED
    DELTA_LENGTH_BYTE_ARRAY = _meta.ENC_DELTA_LENGTH_BYTE_ARRAY
    DELTA_BYTE_ARRAY = _meta.ENC_DELTA_BYTE_ARRAY
    BYTE_STREAM_SPLIT = _meta.ENC_BYTE_STREAM_SPLIT

    @property
    def generation(self) -> Generation:
        return Generation.V1 if self in V1_ENCODINGS else Generation.V2

    @property
    def order(self) -> tuple[int, int]:
        """Deterministic preference key: V1 first, then declaration order."""
        return (0 if self.generation is Generation.V1 else 1, _ENCODING_ORDER[self])

    @classmethod
    def from_parquet(cls, encoding_id: int) -> "Encoding | None":
        if encoding_id == _meta.ENC_PLAIN_DICTIONARY:
            return cls.RLE_DICTIONARY
        try:
            return cls(encoding_id)
        except ValueError:
            return None


_ENCODING_ORDER = {e: i for i, e in enumerate(Encoding)}
V1_ENCODINGS = frozenset({Encoding.PLAIN, Encoding.RLE, Encoding.RLE_DICTIONARY})
V2_ENCODINGS = frozenset(Encoding) - V1_ENCODINGS

_T = ColumnPhysicalType
APPLICABILITY: Mapping[Encoding, frozenset[ColumnPhysicalType]] = {
    Encoding.PLAIN: frozenset(_T),
    Encoding.RLE: frozenset({_T.BOOLEAN}),
    Encoding.RLE_DICTIONARY: frozenset(_T) - {_T.BOOLEAN},
    Encoding.DELTA_BINARY_PACKED: frozenset({_T.INT32, _T.INT64}),
    Encoding.DELTA_LENGTH_BYTE_ARRAY: frozenset({_T.BYTE_ARRAY}),
    Encoding.DELTA_BYTE_ARRAY: frozenset({_T.BYTE_ARRAY, _T.FIXED_LEN_BYTE_ARRAY}),
    Encoding.BYTE_STREAM_SPLIT: frozenset({_T.FLOAT, _T.DOUBLE, _T.INT32, _T.INT64, _T.FIXED_LEN_BYTE_ARRAY}),
}


def encoding_applicable(e: Encoding, t: ColumnPhysicalType) -> bool:
    return t in APPLICABILITY[e]


def applicable_encodings(t: ColumnPhysicalType) -> frozenset[Encoding]:
    return frozenset(e for e in Encoding if encoding_applicable(e, t))


def sort_encodings(encodings: Iterable[Encoding]) -> list[Encoding]:
    return sorted(encodings, key=lambda e: e.order)


class CodecKind(enum.Enum):
    UNCOMPRESSED = "UNCOMPRESSED"
    SNAPPY = "SNAPPY"
    ZSTD = "ZSTD"
    LZ4 = "LZ4"
    GZIP = "GZIP"  # read-only
    BROTLI = "BROTLI"  # read-only


ZSTD_MIN_LEVEL = -131072
ZSTD_MAX_LEVEL = 22
ZSTD_DEFAULT_LEVEL = 3

_WRITE_IDS = {
    CodecKind.UNCOMPRESSED: _meta.CODEC_UNCOMPRESSED,
    CodecKind.SNAPPY: _meta.CODEC_SNAPPY,
    CodecKind.ZSTD: _meta.CODEC_ZSTD,
    CodecKind.LZ4: _meta.CODEC_LZ4_RAW,
}
_READ_IDS = {
    _meta.CODEC_UNCOMPRESSED: CodecKind.UNCOMPRESSED,
    _meta.CODEC_SNAPPY: CodecKind.SNAPPY,
    _meta.CODEC_ZSTD: CodecKind.ZSTD,
    _meta.CODEC_LZ4: CodecKind.LZ4,
    _meta.CODEC_LZ4_RAW: CodecKind.LZ4,
    _meta.CODEC_GZIP: CodecKind.GZIP,
    _meta.CODEC_BROTLI: CodecKind.BROTLI,
}


@dataclass(frozen=True)
class Codec:
    kind: CodecKind
    level: int | None = None

    def __post_init__(self):
        if self.level is not None:
            if self.kind is not CodecKind.ZSTD:
                raise ValueError(f"{self.kind.value} takes no compression level")
            if not ZSTD_MIN_LEVEL <= self.level <= ZSTD_MAX_LEVEL:
                raise ValueError(f"zstd level must be in [{ZSTD_MIN_LEVEL}, {ZSTD_MAX_LEVEL}]")

    @property
    def writable(self) -> bool:
        return self.kind in _WRITE_IDS

    @property
    def parquet_id(self) -> int:
        return _WRITE_IDS[self.kind]

    @classmethod
    def from_parquet(cls, codec_id: int) -> "Codec | None":
        kind = _READ_IDS.get(codec_id)
        return cls(kind) if kind else None

    @classmethod
    def parse(cls, text: str) -> "Codec":
        name, _, level = text.strip().partition(":")
        name = name.upper()
        if name == "LZ4_RAW":
            name = "LZ4"
        if name in ("NONE", ""):
            name = "UNCOMPRESSED"
        return cls(CodecKind(name), int(level) if level else None)

    def __str__(self) -> str:
        return self.kind.value if self.level is None else f"{self.kind.value}:{self.level}"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "level": self.level}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Codec":
        return cls(CodecKind(d["kind"]), d.get("level"))


UNCOMPRESSED = Codec(CodecKind.UNCOMPRESSED)


def meets_threshold(uncompressed_size: int, compressed_size: int, threshold: float) -> bool:
    """Exact test of 1 - compressed/uncompressed >= threshold.

    The threshold is taken at its shortest decimal spelling, so 0.10 means
    one tenth and 100 -> 90 bytes passes (float division says 0.0999...).
    """
    if uncompressed_size <= 0:
        return Fraction(0) >= Fraction(repr(float(threshold)))
    saved = Fraction(uncompressed_size - compressed_size, uncompressed_size)
    return saved >= Fraction(repr(float(threshold)))


class PageType(enum.Enum):
    DICTIONARY = "DICTIONARY"
    DATA_V1 = "DATA_V1"
    DATA_V2 = "DATA_V2"


@dataclass(frozen=True)
class PageMeta:
    page_type: PageType
    num_values: int
    encoding: Encoding | None
    compressed_size: int
    uncompressed_size: int
    header_size: int = 0

    def __post_init__(self):
        if self.page_type is not PageType.DICTIONARY and self.num_values <= 0:
            raise ValueError("data pages must hold at least one value")
        if min(self.compressed_size, self.uncompressed_size, self.header_size) < 0:
            raise ValueError("page sizes must be non-negative")


@dataclass(frozen=True)
class ColumnSchema:
    path: str
    physical_type: ColumnPhysicalType
    type_length: int | None
    max_definition_level: int
    max_repetition_level: int
    logical_type: str | None = None


@dataclass(frozen=True)
class ColumnChunkMeta:
    column_path: str
    physical_type: ColumnPhysicalType
    codec: Codec | None
    pages: tuple[PageMeta, ...]
    data_page_count: int
    total_compressed_size: int
    total_uncompressed_size: int
    encodings_present: frozenset[Encoding]
    num_values: int = 0
    header_bytes: int = 0
    approximate: bool = False
    unreadable: str | None = None
    trial_candidates: tuple[Encoding, ...] | None = None

    def __post_init__(self):
        if self.approximate:
            return
        n_data = sum(p.page_type is not PageType.DICTIONARY for p in self.pages)
        if self.data_page_count != n_data:
            raise ValueError("data_page_count must count the non-dictionary pages")
        dicts = [i for i, p in enumerate(self.pages) if p.page_type is PageType.DICTIONARY]
        if len(dicts) > 1 or (dicts and dicts[0] != 0):
            raise ValueError("at most one dictionary page, and only in first position")
        if self.header_bytes != sum(p.header_size for p in self.pages):
            raise ValueError("header_bytes must equal the summed page header sizes")
        if self.total_compressed_size != self.header_bytes + sum(p.compressed_size for p in self.pages):
            raise ValueError("total_compressed_size must equal page bytes plus headers")
        if self.total_uncompressed_size != self.header_bytes + sum(p.uncompressed_size for p in self.pages):
            raise ValueError("total_uncompressed_size must equal page bytes plus headers")

    @property
    def compressed(self) -> bool:
        return self.codec is not None and self.codec.kind is not CodecKind.UNCOMPRESSED

    @property
    def reduction(self) -> float | None:
        if not self.total_uncompressed_size:
            return None
        return 1.0 - self.total_compressed_size / self.total_uncompressed_size


@dataclass(frozen=True)
class RowGroupMeta:
    num_rows: int
    chunks: tuple[ColumnChunkMeta, ...]
    total_byte_size: int

    def __post_init__(self):
        if self.num_rows < 0:
            raise ValueError("num_rows must be non-negative")


def _minmedmax(values: list[int]) -> dict | None:
    if not values:
        return None
    # upper median: for [full, remainder] the full group size is reported
    return {"min": min(values), "median": statistics.median_high(values), "max": max(values)}


@dataclass(frozen=True)
class FileSummary:
    rows_per_row_group: dict | None
    data_pages_per_chunk: dict | None
    encoding_histogram: dict[str, int]
    codec_histogram: dict[str, int]
    compression_ratio: float | None

    @classmethod
    def compute(cls, row_groups: Iterable[RowGroupMeta], file_size: int) -> "FileSummary":
        row_groups = list(row_groups)
        chunks = [c for rg in row_groups for c in rg.chunks]
        enc = Counter(e.name for c in chunks for e in c.encodings_present)
        codecs = Counter(c.codec.kind.value if c.codec else "UNSUPPORTED" for c in chunks)
        uncompressed = sum(c.total_uncompressed_size for c in chunks)
        ratio = uncompressed / file_size if chunks and file_size else None
        return cls(
            rows_per_row_group=_minmedmax([rg.num_rows for rg in row_groups]),
            data_pages_per_chunk=_minmedmax([c.data_page_count for c in chunks]),
            encoding_histogram=dict(sorted(enc.items())),
            codec_histogram=dict(sorted(codecs.items())),
            compression_ratio=ratio,
        )


@dataclass(frozen=True)
class FileReport:
    schema: tuple[ColumnSchema, ...]
    row_groups: tuple[RowGroupMeta, ...]
    total_rows: int
    file_size: int
    summary: FileSummary
    created_by: str | None = None

    def __post_init__(self):
        if self.total_rows != sum(rg.num_rows for rg in self.row_groups):
            raise ValueError("total_rows must equal the sum of row group sizes")

    def to_dict(self) -> dict:
        return to_jsonable(self)


# -- policy ------------------------------------------------------------------


def default_candidates() -> dict[ColumnPhysicalType, frozenset[Encoding]]:
    out = {t: applicable_encodings(t) for t in ColumnPhysicalType}
    out[ColumnPhysicalType.INT96] = frozenset({Encoding.PLAIN})
    return out


COMPRESSION_MODES = ("gated", "forced", "none")


class PolicyError(ValueError):
    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in violations))


@dataclass(frozen=True)
class RewritePolicy:
    target_rg_rows: int = 10_000_000
    target_pages_per_chunk: int = 100
    encoding_candidates: Mapping[ColumnPhysicalType, frozenset[Encoding]] = field(default_factory=default_candidates)
    flexible_encodings: bool = True
    compression_candidate: Codec = Codec(CodecKind.ZSTD)
    compression_threshold: float = 0.10
    dictionary_size_limit: int = 1 << 20
    page_size_floor_rows: int = 1
    compression_mode: str = "gated"

    def __post_init__(self):
        problems = policy_violations(self)
        if problems:
            raise PolicyError(problems)

    def candidates_for(self, t: ColumnPhysicalType) -> frozenset[Encoding]:
        cands = frozenset(self.encoding_candidates[t])
        if not self.flexible_encodings:
            cands &= V1_ENCODINGS
        return cands

    def to_dict(self) -> dict:
        return to_jsonable(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "RewritePolicy":
        return validate_policy(d)


def policy_violations(p: Any) -> list[tuple[str, str]]:
    """Every broken policy invariant as (field path, message); no short-circuit."""
    out: list[tuple[str, str]] = []

    def _int(name: str, minimum: int):
        v = getattr(p, name)
        if isinstance(v, bool) or not isinstance(v, int):
            out.append((name, "must be an integer"))
        elif v < minimum:
            out.append((name, f"must be >= {minimum}"))

    _int("target_rg_rows", 1)
    _int("target_pages_per_chunk", 1)
    _int("page_size_floor_rows", 1)
    _int("dictionary_size_limit", 0)
    thr = p.compression_threshold
    if isinstance(thr, bool) or not isinstance(thr, (int, float)) or math.isnan(thr):
        out.append(("compression_threshold", "must be a number"))
    elif thr < 0:
        out.append(("compression_threshold", "threshold must be >= 0"))
    elif thr >= 1:
        out.append(("compression_threshold", "threshold must be < 1"))
    if p.compression_mode not in COMPRESSION_MODES:
        out.append(("compression_mode", f"must be one of {', '.join(COMPRESSION_MODES)}"))
    codec = p.compression_candidate
    if not isinstance(codec, Codec):
        out.append(("compression_candidate", "must be a Codec"))
    elif codec.kind is CodecKind.UNCOMPRESSED and p.compression_mode != "none":
        out.append(("compression_candidate", "candidate codec must not be UNCOMPRESSED"))
    elif not codec.writable:
        out.append(("compression_candidate", f"{codec.kind.value} can be read but not written"))
    cands = p.encoding_candidates
    for t in ColumnPhysicalType:
        path = f"encoding_candidates.{t.name}"
        got = cands.get(t) if isinstance(cands, Mapping) else None
        if not got:
            out.append((path, "candidate set must be non-empty"))
            continue
        for e in sort_encodings(got):
            if not encoding_applicable(e, t):
                out.append((path, f"{e.name} is not applicable to {t.name}"))
        if Encoding.PLAIN not in got:
            out.append((path, "PLAIN must always be a candidate"))
    return out


def _coerce_policy_fields(d: Mapping) -> dict:
    out = dict(d)
    if "encoding_candidates" in out:
        raw = out["encoding_candidates"]
        cands = default_candidates()
        for k, v in raw.items():
            t = k if isinstance(k, ColumnPhysicalType) else ColumnPhysicalType[str(k)]
            cands[t] = frozenset(e if isinstance(e, Encoding) else Encoding[str(e)] for e in v)
        out["encoding_candidates"] = cands
    codec = out.get("compression_candidate")
    if isinstance(codec, str):
        out["compression_candidate"] = Codec.parse(codec)
    elif isinstance(codec, Mapping):
        out["compression_candidate"] = Codec.from_dict(codec)
    return out


def validate_policy(p: "RewritePolicy | Mapping") -> RewritePolicy:
    """Return a valid policy or raise PolicyError listing every violation.

    Accepts an existing policy or a mapping of field overrides on top of the
    defaults (unknown keys are violations too).
    """
    if isinstance(p, RewritePolicy):
        problems = policy_violations(p)
        if problems:
            raise PolicyError(problems)
        return p
    known = {f.name for f in fields(RewritePolicy)}
    unknown = [(k, "unknown policy field") for k in p if k not in known]
    try:
        values = _coerce_policy_fields(p)
    except (KeyError, ValueError) as exc:
        raise PolicyError(unknown + [("policy", f"unparseable value: {exc}")]) from None
    merged = object.__new__(RewritePolicy)
    for f in fields(RewritePolicy):
        default = f.default_factory() if f.default_factory is not MISSING else f.default
        object.__setattr__(merged, f.name, values.get(f.name, default))
    problems = unknown + policy_violations(merged)
    if problems:
        raise PolicyError(problems)
    return merged


def with_overrides(policy: RewritePolicy, **changes) -> RewritePolicy:
    return replace(policy, **_coerce_policy_fields(changes))


# -- plan --------------------------------------------------------------------


@dataclass(frozen=True)
class EncodingMode:
    kind: str  # "TRIAL" | "FIXED"
    encodings: tuple[Encoding, ...]

    def __post_init__(self):
        if self.kind not in ("TRIAL", "FIXED"):
            raise ValueError("encoding mode must be TRIAL or FIXED")
        if not self.encodings or (self.kind == "FIXED" and len(self.encodings) != 1):
            raise ValueError("TRIAL needs candidates, FIXED exactly one encoding")
        object.__setattr__(self, "encodings", tuple(sort_encodings(set(self.encodings))))


@dataclass(frozen=True)
class CompressionMode:
    kind: str  # "GATED" | "FORCED" | "NONE"
    codec: Codec | None = None
    threshold: float | None = None

    def __post_init__(self):
        if self.codec is not None and not self.codec.writable:
            raise ValueError(f"{self.codec.kind.value} cannot be written")
        if self.kind == "GATED":
            if self.codec is None or self.threshold is None or not 0 <= self.threshold < 1:
                raise ValueError("GATED compression needs a codec and a threshold in [0, 1)")
            if self.codec.kind is CodecKind.UNCOMPRESSED:
                raise ValueError("GATED compression needs a real codec")
        elif self.kind == "FORCED":
            if self.codec is None:
                raise ValueError("FORCED compression needs a codec")
        elif self.kind != "NONE":
            raise ValueError("compression mode must be GATED, FORCED or NONE")


@dataclass(frozen=True)
class ChunkDirective:
    row_group: int
    column: str
    page_row_limit: int
    encoding_mode: EncodingMode
    compression_mode: CompressionMode

    def __post_init__(self):
        if self.page_row_limit < 1:
            raise ValueError("page_row_limit must be >= 1")


@dataclass(frozen=True)
class RewritePlan:
    source_total_rows: int
    target_rg_rows: int
    target_pages_per_chunk: int
    row_group_boundaries: tuple[int, ...]
    columns: tuple[str, ...]
    directives: tuple[ChunkDirective, ...]
    dictionary_size_limit: int = 1 << 20
    page_size_floor_rows: int = 1

    def __post_init__(self):
        b = self.row_group_boundaries
        if sum(b) != self.source_total_rows:
            raise ValueError("row group boundaries must conserve the source row count")
        if any(x != self.target_rg_rows for x in b[:-1]):
            raise ValueError("all row groups but the last must have target_rg_rows rows")
        if b and not 1 <= b[-1] <= self.target_rg_rows:
            raise ValueError("last row group must hold between 1 and target_rg_rows rows")
        if len(self.directives) != len(b) * len(self.columns):
            raise ValueError("one directive per (row group, column) is required")
        for d in self.directives:
            rows = b[d.row_group]
            if d.page_row_limit > self.page_size_floor_rows:
                if -(-rows // d.page_row_limit) < min(self.target_pages_per_chunk, rows):
                    raise ValueError("page_row_limit too large to reach the page target")

    def directive(self, row_group: int, column_index: int) -> ChunkDirective:
        return self.directives[row_group * len(self.columns) + column_index]

    def to_dict(self) -> dict:
        return to_jsonable(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "RewritePlan":
        def enc_mode(m):
            return EncodingMode(m["kind"], tuple(Encoding[e] for e in m["encodings"]))

        def comp_mode(m):
            codec = Codec.from_dict(m["codec"]) if m.get("codec") else None
            return CompressionMode(m["kind"], codec, m.get("threshold"))

        directives = tuple(
            ChunkDirective(
                row_group=x["row_group"],
                column=x["column"],
                page_row_limit=x["page_row_limit"],
                encoding_mode=enc_mode(x["encoding_mode"]),
                compression_mode=comp_mode(x["compression_mode"]),
            )
            for x in d["directives"]
        )
        return cls(
            source_total_rows=d["source_total_rows"],
            target_rg_rows=d["target_rg_rows"],
            target_pages_per_chunk=d["target_pages_per_chunk"],
            row_group_boundaries=tuple(d["row_group_boundaries"]),
            columns=tuple(d["columns"]),
            directives=directives,
            dictionary_size_limit=d.get("dictionary_size_limit", 1 << 20),
            page_size_floor_rows=d.get("page_size_floor_rows", 1),
        )

    @classmethod
    def from_json(cls, text: str) -> "RewritePlan":
        return cls.from_dict(json.loads(text))


# -- JSON --------------------------------------------------------------------


def to_jsonable(obj: Any) -> Any:
    """Recursively convert model objects to JSON-ready values (stable order)."""
    if isinstance(obj, enum.Enum):
        return obj.name
    if isinstance(obj, Codec):
        return obj.to_dict()
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, Mapping):
        return {(k.name if isinstance(k, enum.Enum) else str(k)): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        items = list(obj)
        if items and isinstance(items[0], Encoding):
            return [e.name for e in sort_encodings(items)]
        return sorted(to_jsonable(x) for x in items)
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj
