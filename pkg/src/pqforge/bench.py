"""Full-scan decode benchmark with effective and storage bandwidth."""

from __future__ import annotations

import csv
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TextIO

from .model import to_jsonable
from .reader import ParquetFile

RAW_SIZE_ACCOUNTING = (
    "sum over non-null decoded values: fixed-width types count their byte width "
    "(BOOLEAN 1, INT96 12, FIXED_LEN_BYTE_ARRAY its length); byte arrays count "
    "their bytes plus a 4-byte offset each; levels are not counted"
)
CLOCK_FLOOR = time.get_clock_info("perf_counter").resolution

CSV_COLUMNS = (
    "file", "file_size", "raw_decoded_size", "scan_runtime", "storage_bandwidth",
    "effective_bandwidth", "repetitions", "cold_cache", "parallelism", "clock_floor_applied",
)


@dataclass(frozen=True)
class BenchReport:
    file_size: int
    raw_decoded_size: int
    scan_runtime: float
    storage_bandwidth: float
    effective_bandwidth: float
    repetitions: int
    cold_cache: bool
    parallelism: int = 1
    projection: tuple[str, ...] | None = None
    runtimes: tuple[float, ...] = ()
    warmup_discarded: bool = False
    clock_floor_applied: bool = False
    file: str | None = None
    raw_size_accounting: str = RAW_SIZE_ACCOUNTING

    def to_dict(self) -> dict:
        return to_jsonable(self)

    def csv_row(self) -> list:
        d = self.to_dict()
        return [d[c] for c in CSV_COLUMNS]


def bandwidths(file_size: int, raw_decoded_size: int, runtime: float) -> tuple[float, float]:
    """(storage, effective) bandwidth in bytes per second."""
    if runtime <= 0:
        raise ValueError("runtime must be positive")
    return file_size / runtime, raw_decoded_size / runtime


def report_from_measurements(file_size: int, raw_decoded_size: int, runtimes: Sequence[float], *,
                             cold_cache: bool = False, parallelism: int = 1, projection=None,
                             warmup_discarded: bool = False, file: str | None = None,
                             clock_floor: float = CLOCK_FLOOR) -> BenchReport:
    """Build a report from measured (or injected) runtimes."""
    if not runtimes:
        raise ValueError("at least one repetition is required")
    median = statistics.median(runtimes)
    floored = median < clock_floor or median <= 0
    runtime = max(median, clock_floor) if floored else median
    if runtime <= 0:
        raise ValueError("runtime must be positive")
    storage, effective = bandwidths(file_size, raw_decoded_size, runtime)
    return BenchReport(
        file_size=file_size,
        raw_decoded_size=raw_decoded_size,
        scan_runtime=runtime,
        storage_bandwidth=storage,
        effective_bandwidth=effective,
        repetitions=len(runtimes),
        cold_cache=cold_cache,
        parallelism=parallelism,
        projection=tuple(projection) if projection else None,
        runtimes=tuple(runtimes),
        warmup_discarded=warmup_discarded,
        clock_floor_applied=floored,
        file=file,
    )


def drop_file_cache(path) -> bool:
    """Ask the kernel to evict the file's clean pages; best effort."""
    if not hasattr(os, "posix_fadvise"):
        return False
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
        os.posix_fadvise(fd, 0, 0, os.POSIX_FADV_DONTNEED)
        return True
    except OSError:
        return False
    finally:
        os.close(fd)


def scan(path, projection: Iterable[str] | None = None, parallelism: int = 1) -> int:
    """Decode every selected chunk once; returns the raw decoded size."""
    with ParquetFile(path) as pf:
        cols = range(len(pf.columns)) if projection is None else [pf.column_index(c) for c in projection]
        jobs = [(rg, ci) for rg in range(len(pf.row_groups)) for ci in cols]
        if parallelism > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(parallelism) as ex:
                sizes = list(ex.map(lambda j: pf.read_column(*j).raw_size(), jobs))
        else:
            sizes = [pf.read_column(rg, ci).raw_size() for rg, ci in jobs]
        return sum(sizes)


def bench_scan(path, repetitions: int = 3, projection: Sequence[str] | None = None, *,
               cold_cache: bool = False, warmup: bool = True, parallelism: int = 1,
               clock: Callable[[], float] = time.perf_counter) -> BenchReport:
    """Time ``repetitions`` full decodes of ``path`` and report the median.

    Without ``cold_cache`` one extra untimed warm-up scan runs first when
    ``warmup`` is set.  Cold-cache runs evict the file's pages before every
    repetition via posix_fadvise, which only drops clean, unmapped pages.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    file_size = os.path.getsize(path)
    raw = None
    discarded = False
    if warmup and not cold_cache:
        raw = scan(path, projection, parallelism)
        discarded = True
    runtimes = []
    for _ in range(repetitions):
        if cold_cache:
            drop_file_cache(path)
        t0 = clock()
        size = scan(path, projection, parallelism)
        runtimes.append(clock() - t0)
        if raw is not None and size != raw:
            raise RuntimeError("decoded size changed between repetitions")
        raw = size
    return report_from_measurements(
        file_size, raw, runtimes, cold_cache=cold_cache, parallelism=parallelism,
        projection=projection, warmup_discarded=discarded, file=os.fspath(path),
    )


@dataclass(frozen=True)
class BenchComparison:
    file_size_ratio: float | None
    runtime_ratio: float | None
    storage_bandwidth_ratio: float | None
    effective_bandwidth_ratio: float | None
    raw_size_ratio: float | None
    raw_size_mismatch: bool

    def to_dict(self) -> dict:
        return to_jsonable(self)


def _ratio(candidate: float, baseline: float) -> float | None:
    return candidate / baseline if baseline else None


def compare_bench(baseline: BenchReport, candidate: BenchReport) -> BenchComparison:
    """Candidate over baseline ratios; differing raw sizes are flagged, not raised."""
    return BenchComparison(
        file_size_ratio=_ratio(candidate.file_size, baseline.file_size),
        runtime_ratio=_ratio(candidate.scan_runtime, baseline.scan_runtime),
        storage_bandwidth_ratio=_ratio(candidate.storage_bandwidth, baseline.storage_bandwidth),
        effective_bandwidth_ratio=_ratio(candidate.effective_bandwidth, baseline.effective_bandwidth),
        raw_size_ratio=_ratio(candidate.raw_decoded_size, baseline.raw_decoded_size),
        raw_size_mismatch=candidate.raw_decoded_size != baseline.raw_decoded_size,
    )


def write_csv(reports: Iterable[BenchReport], fh: TextIO, header: bool = True) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.csv_row())
