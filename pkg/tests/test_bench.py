from __future__ import annotations

import csv
import io
import itertools
from fractions import Fraction

import numpy as np
import pyarrow as pa
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import write_table
from pqforge.bench import (
    CSV_COLUMNS,
    bandwidths,
    bench_scan,
    compare_bench,
    report_from_measurements,
    scan,
    write_csv,
)


def test_bandwidth_arithmetic():
    assert bandwidths(1_000, 4_000, 2.0) == (500.0, 2_000.0)
    with pytest.raises(ValueError):
        bandwidths(1, 1, 0.0)


@given(st.integers(0, 10**13), st.integers(0, 10**13),
       st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=9))
def test_report_uses_the_median(file_size, raw, runtimes):
    r = report_from_measurements(file_size, raw, runtimes)
    med = sorted(runtimes)[len(runtimes) // 2] if len(runtimes) % 2 else \
        (sorted(runtimes)[len(runtimes) // 2 - 1] + sorted(runtimes)[len(runtimes) // 2]) / 2
    assert r.scan_runtime == pytest.approx(med, rel=1e-12)
    assert Fraction(r.effective_bandwidth) == pytest.approx(Fraction(raw) / Fraction(r.scan_runtime), rel=1e-12)
    assert r.repetitions == len(runtimes)


def test_clock_floor_is_applied_and_flagged():
    r = report_from_measurements(10, 20, [0.0, 0.0, 0.0], clock_floor=1e-6)
    assert r.clock_floor_applied and r.scan_runtime == 1e-6
    assert r.effective_bandwidth == pytest.approx(20 / 1e-6)
    assert not report_from_measurements(10, 20, [1.0], clock_floor=1e-6).clock_floor_applied
    with pytest.raises(ValueError):
        report_from_measurements(10, 20, [])


def test_comparison_ratios():
    base = report_from_measurements(1000, 5000, [2.0])
    cand = report_from_measurements(500, 5000, [1.0])
    c = compare_bench(base, cand)
    assert (c.file_size_ratio, c.runtime_ratio) == (0.5, 0.5)
    assert c.effective_bandwidth_ratio == pytest.approx(2.0)
    assert c.storage_bandwidth_ratio == pytest.approx(1.0)
    assert c.raw_size_ratio == 1.0 and not c.raw_size_mismatch
    odd = compare_bench(base, report_from_measurements(500, 4000, [1.0]))
    assert odd.raw_size_mismatch


def test_csv_columns():
    buf = io.StringIO()
    write_csv([report_from_measurements(1, 2, [1.0], file="a.parquet")], buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert tuple(rows[0]) == CSV_COLUMNS
    row = dict(zip(rows[0], rows[1]))
    assert row["file"] == "a.parquet" and float(row["effective_bandwidth"]) == 2.0


def _raw_oracle(table: pa.Table) -> int:
    total = 0
    for col in table.columns:
        valid = [v for v in col.to_pylist() if v is not None]
        if pa.types.is_string(col.type) or pa.types.is_binary(col.type):
            total += sum(len(v.encode() if isinstance(v, str) else v) + 4 for v in valid)
        elif pa.types.is_boolean(col.type):
            total += len(valid)
        else:
            total += len(valid) * (col.type.bit_width // 8)
    return total


def test_raw_size_accounting(tmp_path):
    rng = np.random.default_rng(0)
    t = pa.table({
        "i": pa.array(rng.integers(0, 100, 1000), mask=rng.random(1000) < 0.25),
        "f": pa.array(rng.random(1000).astype(np.float32)),
        "b": pa.array(rng.random(1000) < 0.5),
        "s": pa.array(["", "ab", None, "héllo"] * 250),
    })
    path = write_table(t, tmp_path / "t.parquet")
    assert scan(path) == _raw_oracle(t)
    assert scan(path, ["s"]) == _raw_oracle(t.select(["s"]))


def test_raw_size_is_layout_invariant(tmp_path):
    t = pa.table({"x": np.arange(20_000), "s": [str(i % 97) for i in range(20_000)]})
    a = write_table(t, tmp_path / "a.parquet", row_group_size=1000, compression="snappy")
    b = write_table(t, tmp_path / "b.parquet", compression="zstd", use_dictionary=False, data_page_version="2.0")
    assert scan(a) == scan(b) == scan(a, parallelism=4)


def test_bench_scan_with_injected_clock(tmp_path):
    path = write_table(pa.table({"x": np.arange(1000)}), tmp_path / "t.parquet")
    ticks = itertools.count(0.0, 0.5)
    r = bench_scan(path, repetitions=3, clock=lambda: next(ticks))
    assert r.runtimes == (0.5, 0.5, 0.5) and r.warmup_discarded
    assert r.effective_bandwidth == 8000 / 0.5
    assert r.storage_bandwidth == path.stat().st_size / 0.5


def test_cold_cache_has_no_warmup(tmp_path):
    path = write_table(pa.table({"x": np.arange(10)}), tmp_path / "t.parquet")
    r = bench_scan(path, repetitions=2, cold_cache=True)
    assert r.cold_cache and not r.warmup_discarded and r.repetitions == 2


def test_empty_file_reports_zero_effective_bandwidth(tmp_path):
    path = write_table(pa.table({"x": pa.array([], pa.int64())}), tmp_path / "t.parquet")
    r = bench_scan(path, repetitions=1)
    assert r.raw_decoded_size == 0 and r.effective_bandwidth == 0.0 and r.scan_runtime > 0
