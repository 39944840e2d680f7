"""Streaming rewrite of a Parquet file according to a plan.

Source row groups are decoded one column at a time and regrouped to the
plan's boundaries; chunks are transcoded in parallel and written in order.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .column import ColumnData
from .model import RewritePlan, to_jsonable
from .reader import ParquetFile
from .transcoder import ChunkOutcome, transcode
from .writer import ParquetWriter, RawChunk

log = logging.getLogger(__name__)


class RewriteError(RuntimeError):
    pass


class PlanMismatch(RewriteError):
    """The plan was derived from a different file."""


@dataclass(frozen=True)
class ChunkRecord:
    row_group: int
    column: str
    rows: int
    data_pages: int
    size: int
    encoding: dict | None
    compression: dict | None
    untranscoded: bool = False


@dataclass(frozen=True)
class RewriteReport:
    input_file_size: int
    output_file_size: int
    rows_written: int
    chunks: tuple[ChunkRecord, ...]
    untranscoded_chunks: tuple[dict, ...]
    wall_time: float
    row_group_boundaries: tuple[int, ...] = ()
    num_columns: int = 0

    def __post_init__(self):
        if len(self.chunks) != len(self.row_group_boundaries) * self.num_columns:
            raise ValueError("one chunk record per output group and column is required")
        if self.rows_written != sum(self.row_group_boundaries):
            raise ValueError("rows_written must equal the summed group sizes")

    @property
    def size_ratio(self) -> float | None:
        return self.output_file_size / self.input_file_size if self.input_file_size else None

    @property
    def throughput(self) -> float:
        """Input bytes per second of wall time."""
        return self.input_file_size / self.wall_time if self.wall_time > 0 else 0.0

    def to_dict(self, include_time: bool = True) -> dict:
        d = to_jsonable(self)
        if not include_time:
            d.pop("wall_time")
        return d


class _Rebuffer:
    """Iterator state kept in attributes so a returned batch is not retained."""

    def __init__(self, batches: Iterable[ColumnData], boundaries: Sequence[int]):
        self._it = iter(batches)
        self._bounds = iter(boundaries)
        self._pending: list[ColumnData] = []
        self._have = 0
        self._desc = None
        self._done = False

    def __iter__(self):
        return self

    def __next__(self) -> ColumnData:
        if self._done:
            raise StopIteration
        want = next(self._bounds, None)
        if want is None:
            self._done = True
            self._finish()
            raise StopIteration
        while self._have < want:
            b = next(self._it, None)
            if b is None:
                raise RewriteError(f"source ran out of rows: needed {want}, had {self._have}")
            self._desc = b.descriptor
            if b.num_rows:
                self._pending.append(b)
                self._have += b.num_rows
        if not self._pending:
            if self._desc is None:
                raise RewriteError("cannot emit an empty batch without a column descriptor")
            return ColumnData.empty(self._desc)
        parts, self._pending = self._pending, []
        whole = ColumnData.concat(parts)
        del parts
        if whole.num_rows == want:
            self._have = 0
            return whole
        # copy so the leftover does not pin the whole concatenation
        rest = whole.slice_rows(want, whole.num_rows).copy()
        self._pending, self._have = [rest], rest.num_rows
        return whole.slice_rows(0, want)

    def _finish(self) -> None:
        for b in self._it:
            if b.num_rows:
                raise RewriteError("source has more rows than the boundaries account for")
        if self._have:
            raise RewriteError("source has more rows than the boundaries account for")


def rebuffer(batches: Iterable[ColumnData], boundaries: Sequence[int]) -> Iterator[ColumnData]:
    """Regroup a stream of column batches into batches of exactly ``boundaries`` rows.

    Exhausting the iterator checks that the source had no rows left over.
    """
    return _Rebuffer(batches, boundaries)


def default_parallelism() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def _check_plan(pf: ParquetFile, plan: RewritePlan) -> None:
    if plan.source_total_rows != pf.num_rows:
        raise PlanMismatch(f"plan expects {plan.source_total_rows} rows, source has {pf.num_rows}")
    names = tuple(c.dotted for c in pf.columns)
    if plan.columns != names:
        raise PlanMismatch("plan columns do not match the source schema")


def rewrite(source, plan: RewritePlan, sink, parallelism: int | None = None) -> RewriteReport:
    """Rewrite ``source`` into ``sink`` (a path or a writable binary file).

    With a path the output appears atomically on success and nothing is left
    behind on failure.
    """
    t0 = time.perf_counter()
    workers = parallelism or default_parallelism()
    own = not isinstance(source, ParquetFile)
    pf = ParquetFile(source) if own else source
    try:
        _check_plan(pf, plan)
        ncols = len(pf.columns)
        same_grouping = tuple(pf.row_group_rows()) == plan.row_group_boundaries
        unsupported = {
            (rg, ci): reason
            for rg in range(len(pf.row_groups))
            for ci in range(ncols)
            if (reason := pf.chunk_support(rg, ci))
        }
        if unsupported and not same_grouping:
            (rg, ci), reason = min(unsupported.items())
            raise RewriteError(
                f"chunk {pf.columns[ci].dotted} in row group {rg} cannot be decoded ({reason}) "
                "and the plan changes the row grouping, so it cannot be copied"
            )
        if same_grouping:
            # Identical grouping: read each chunk directly, no regrouping needed.
            streams = None
        else:
            streams = [rebuffer(pf.iter_column(ci), plan.row_group_boundaries) for ci in range(ncols)]

        def work(g: int, ci: int):
            d = plan.directive(g, ci)
            if (g, ci) in unsupported:
                return RawChunk(pf.chunk_meta(g, ci), pf.read_chunk_bytes(g, ci)), None
            col = pf.read_column(g, ci) if streams is None else next(streams[ci])
            if col.num_rows != plan.row_group_boundaries[g]:
                raise RewriteError(f"column {d.column} produced {col.num_rows} rows for group {g}")
            return None, transcode(col, d.encoding_mode, d.compression_mode, d.page_row_limit,
                                   plan.dictionary_size_limit)

        records: list[ChunkRecord] = []
        skipped: list[dict] = []
        writer = ParquetWriter(sink, pf.schema_elements, pf.columns, pf.key_value_metadata)
        try:
            with ThreadPoolExecutor(workers) as ex:
                for g, rows in enumerate(plan.row_group_boundaries):
                    writer.begin_row_group(rows)
                    if workers > 1:
                        results = ex.map(lambda ci: work(g, ci), range(ncols))
                    else:
                        results = (work(g, ci) for ci in range(ncols))
                    for ci, (raw, outcome) in enumerate(results):
                        name = pf.columns[ci].dotted
                        if raw is not None:
                            writer.write_chunk(raw)
                            reason = unsupported[(g, ci)]
                            skipped.append({"row_group": g, "column": name, "reason": reason})
                            records.append(ChunkRecord(g, name, rows, 0, len(raw.data), None, None, True))
                            continue
                        writer.write_chunk(outcome.chunk)
                        records.append(_record(g, name, rows, outcome))
                        outcome = None  # free the chunk before the next column decodes
                    writer.end_row_group()
            out_size = writer.close()
        except BaseException:
            writer.abort()
            raise
        rows_written = sum(plan.row_group_boundaries)
        if rows_written != pf.num_rows:
            raise RewriteError("row count changed during rewrite")
        return RewriteReport(
            input_file_size=pf.file_size,
            output_file_size=out_size,
            rows_written=rows_written,
            chunks=tuple(records),
            untranscoded_chunks=tuple(skipped),
            wall_time=time.perf_counter() - t0,
            row_group_boundaries=plan.row_group_boundaries,
            num_columns=ncols,
        )
    finally:
        if own:
            pf.close()


def _record(g: int, name: str, rows: int, o: ChunkOutcome) -> ChunkRecord:
    return ChunkRecord(
        row_group=g,
        column=name,
        rows=rows,
        data_pages=o.chunk.data_page_count,
        size=o.chunk.size,
        encoding=o.choice.digest(),
        compression=o.decision.to_dict() if o.decision else None,
    )
