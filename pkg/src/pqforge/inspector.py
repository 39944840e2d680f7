"""Physical-layout census of a Parquet file, and grading against a policy."""

from __future__ import annotations

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import _meta
from .model import (
    V2_ENCODINGS,
    Codec,
    ColumnChunkMeta,
    ColumnPhysicalType,
    Encoding,
    FileReport,
    FileSummary,
    PageMeta,
    PageType,
    RewritePolicy,
    RowGroupMeta,
    meets_threshold,
    to_jsonable,
)
from .reader import ParquetFile
from .transcoder import TRIAL_KEY

_PAGE_TYPES = {
    _meta.DATA_PAGE: PageType.DATA_V1,
    _meta.DICTIONARY_PAGE: PageType.DICTIONARY,
    _meta.DATA_PAGE_V2: PageType.DATA_V2,
}


@dataclass(frozen=True)
class InspectOptions:
    scan_pages: bool = True
    columns: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(self.columns))
            if not self.columns:
                raise ValueError("columns filter must not be empty")


def _trial_candidates(meta: dict) -> tuple[Encoding, ...] | None:
    for kv in meta.get("key_value_metadata") or ():
        if kv.get("key") == TRIAL_KEY and kv.get("value"):
            try:
                return tuple(Encoding[n] for n in kv["value"].split(","))
            except KeyError:
                return None
    return None


def _value_encoding(header: dict, page_type: PageType) -> Encoding | None:
    if page_type is PageType.DICTIONARY:
        return None
    sub = header.get("data_page_header" if page_type is PageType.DATA_V1 else "data_page_header_v2") or {}
    return Encoding.from_parquet(sub.get("encoding", -1))


def _scan_chunk(pf: ParquetFile, rg: int, ci: int) -> ColumnChunkMeta:
    desc = pf.columns[ci]
    meta = pf.chunk_meta(rg, ci)
    codec = Codec.from_parquet(meta["codec"])
    unreadable = pf.chunk_support(rg, ci)
    pages = []
    present = set()
    for info in pf.iter_page_headers(rg, ci):
        ptype = _PAGE_TYPES.get(info.page_type)
        if ptype is None:
            continue  # index pages carry no values
        enc = _value_encoding(info.header, ptype)
        if enc is not None:
            present.add(enc)
        if ptype is PageType.DICTIONARY:
            n = (info.header.get("dictionary_page_header") or {}).get("num_values", 0)
        else:
            sub = info.header.get("data_page_header" if ptype is PageType.DATA_V1 else "data_page_header_v2") or {}
            n = sub.get("num_values", 0)
        pages.append(PageMeta(ptype, n, enc, info.compressed_size, info.uncompressed_size, info.header_size))
    headers = sum(p.header_size for p in pages)
    return ColumnChunkMeta(
        column_path=desc.dotted,
        physical_type=desc.physical_type,
        codec=codec,
        pages=tuple(pages),
        data_page_count=sum(p.page_type is not PageType.DICTIONARY for p in pages),
        total_compressed_size=headers + sum(p.compressed_size for p in pages),
        total_uncompressed_size=headers + sum(p.uncompressed_size for p in pages),
        encodings_present=frozenset(present),
        num_values=meta.get("num_values", 0),
        header_bytes=headers,
        unreadable=unreadable,
        trial_candidates=_trial_candidates(meta),
    )


def _estimate_chunk(pf: ParquetFile, rg: int, ci: int) -> ColumnChunkMeta:
    desc = pf.columns[ci]
    meta = pf.chunk_meta(rg, ci)
    stats = meta.get("encoding_stats")
    present = set()
    if stats:
        data_pages = 0
        for s in stats:
            if s["page_type"] in (_meta.DATA_PAGE, _meta.DATA_PAGE_V2):
                data_pages += s["count"]
                enc = Encoding.from_parquet(s["encoding"])
                if enc is not None:
                    present.add(enc)
    else:
        data_pages = 1
        for e in meta.get("encodings", []):
            enc = Encoding.from_parquet(e)
            # level encodings show up as RLE in this list
            if enc is None or (enc is Encoding.RLE and desc.physical_type is not ColumnPhysicalType.BOOLEAN):
                continue
            present.add(enc)
    return ColumnChunkMeta(
        column_path=desc.dotted,
        physical_type=desc.physical_type,
        codec=Codec.from_parquet(meta["codec"]),
        pages=(),
        data_page_count=data_pages,
        total_compressed_size=meta["total_compressed_size"],
        total_uncompressed_size=meta["total_uncompressed_size"],
        encodings_present=frozenset(present),
        num_values=meta.get("num_values", 0),
        approximate=True,
        unreadable=pf.chunk_support(rg, ci),
        trial_candidates=_trial_candidates(meta),
    )


def inspect(source, opts: InspectOptions = InspectOptions(), workers: int = 1) -> FileReport:
    """Census of row groups, chunks and pages; reads footers and page headers only."""
    own = not isinstance(source, ParquetFile)
    pf = ParquetFile(source) if own else source
    try:
        names = [c.dotted for c in pf.columns]
        if opts.columns is not None:
            missing = [c for c in opts.columns if c not in names]
            if missing:
                raise KeyError(f"unknown column(s): {', '.join(missing)}")
            keep = [i for i, n in enumerate(names) if n in opts.columns]
        else:
            keep = list(range(len(names)))
        scan = _scan_chunk if opts.scan_pages else _estimate_chunk
        jobs = [(rg, ci) for rg in range(len(pf.row_groups)) for ci in keep]
        if workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(workers) as ex:
                chunks = list(ex.map(lambda j: scan(pf, *j), jobs))
        else:
            chunks = [scan(pf, rg, ci) for rg, ci in jobs]
        groups = []
        for rg_index, rg in enumerate(pf.row_groups):
            mine = tuple(chunks[rg_index * len(keep):(rg_index + 1) * len(keep)])
            groups.append(RowGroupMeta(rg["num_rows"], mine, rg.get("total_byte_size", 0)))
        return FileReport(
            schema=tuple(pf.columns[i].to_schema() for i in keep),
            row_groups=tuple(groups),
            total_rows=pf.num_rows,
            file_size=pf.file_size,
            summary=FileSummary.compute(groups, pf.file_size),
            created_by=pf.metadata.get("created_by"),
        )
    finally:
        if own:
            pf.close()


# -- grading -------------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    insight: str  # "I1".."I4"
    scope: str
    measured: float
    target: float
    message: str

    def to_dict(self) -> dict:
        return to_jsonable(self)


def full_size_threshold(report: FileReport, policy: RewritePolicy) -> float:
    """Row count at or above which a group counts as full-sized.

    Half of the policy target, except that a file whose groups are all
    smaller than the target is judged against its own largest group;
    otherwise a file of tiny groups would be exempt from the page rule.
    """
    largest = max((rg.num_rows for rg in report.row_groups), default=0)
    return 0.5 * min(policy.target_rg_rows, largest)


def grade(report: FileReport, policy: RewritePolicy) -> list[Finding]:
    out: list[Finding] = []
    full = full_size_threshold(report, policy)
    t = policy.target_pages_per_chunk
    for gi, rg in enumerate(report.row_groups):
        if rg.num_rows == 0 or rg.num_rows < full:
            continue
        need = min(t, -(-rg.num_rows // policy.page_size_floor_rows))
        for c in rg.chunks:
            if c.data_page_count < need:
                out.append(Finding("I1", f"row_group[{gi}].{c.column_path}", c.data_page_count, need,
                                   f"{c.data_page_count} data pages < {need}"))
    if report.row_groups:
        median = statistics.median_high(rg.num_rows for rg in report.row_groups)
        target = min(policy.target_rg_rows, report.total_rows)
        if median < target:
            out.append(Finding("I2", "file", median, target, f"median rows/RG {median:,} < {target:,}"))
    if policy.flexible_encodings:
        for gi, rg in enumerate(report.row_groups):
            for c in rg.chunks:
                v2 = policy.candidates_for(c.physical_type) & V2_ENCODINGS
                if not v2 or c.encodings_present & V2_ENCODINGS:
                    continue
                if c.trial_candidates and set(c.trial_candidates) & v2:
                    continue  # V2 encodings were tried and lost
                if c.num_values == 0:
                    continue
                out.append(Finding("I3", f"row_group[{gi}].{c.column_path}", 0, len(v2),
                                   "V1-only encodings without a V2 trial"))
    thr = policy.compression_threshold
    for gi, rg in enumerate(report.row_groups):
        for c in rg.chunks:
            if not c.compressed:
                continue
            r = c.reduction
            if r is not None and not meets_threshold(c.total_uncompressed_size, c.total_compressed_size, thr):
                out.append(Finding("I4", f"row_group[{gi}].{c.column_path}", r, thr,
                                   f"compression saves {r:.1%} < {thr:.0%}"))
    return out
