"""End-to-end acceptance checks, one test group per criterion.

The terminal summary prints one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import os
import time
from fractions import Fraction

import duckdb
import numpy as np
import polars as pl
import pyarrow as pa
import pyarrow.parquet as pq
import pytest

from conftest import random_table, sha256, write_table
from pqforge import (
    Codec,
    CodecKind,
    Encoding,
    RewritePolicy,
    bench_scan,
    derive_plan,
    grade,
    inspect,
    report_from_measurements,
    rewrite,
    verify_equal,
)
from pqforge.bench import bandwidths, scan
from pqforge.fixtures import FixtureSpec, gen_fixture
from pqforge.model import PageType, with_overrides
from pqforge.reader import ParquetFile
from pqforge.transcoder import encode_fixed

DEFAULT = RewritePolicy()
V1_SNAPPY = with_overrides(DEFAULT, flexible_encodings=False, compression_mode="forced",
                           compression_candidate=Codec(CodecKind.SNAPPY))
V1_ZSTD = with_overrides(V1_SNAPPY, compression_candidate=Codec(CodecKind.ZSTD))
RANDOM_TABLES = 200


def _rewrite(src, dst, policy=DEFAULT, parallelism=1):
    plan = derive_plan(inspect(src), policy)
    return plan, rewrite(src, plan, dst, parallelism=parallelism)


@pytest.fixture(scope="module")
def lineitem_rw(lineitem_01, tmp_path_factory):
    out = tmp_path_factory.mktemp("acc") / "lineitem_default.parquet"
    plan, report = _rewrite(lineitem_01, out)
    return out, plan, report


@pytest.fixture(scope="module")
def mixed_rw(mixed_small, tmp_path_factory):
    out = tmp_path_factory.mktemp("acc") / "mixed_default.parquet"
    plan, report = _rewrite(mixed_small, out)
    return out, plan, report


@pytest.fixture(scope="module")
def random_corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("random")
    out = []
    for seed in range(RANDOM_TABLES):
        t = random_table(seed)
        src = write_table(t, d / f"t{seed}.parquet", row_group_size=int(np.random.default_rng(seed).integers(1, 300)))
        dst = d / f"t{seed}_rw.parquet"
        _, report = _rewrite(src, dst)
        out.append((src, dst, report))
    return out


@pytest.fixture(scope="module")
def gigabyte(tmp_path_factory):
    """A ~1 GB baseline-shaped input and its timed default rewrite."""
    d = tmp_path_factory.mktemp("gigabyte")
    src = d / "lineitem_1gb.parquet"
    gen_fixture(src, FixtureSpec("lineitem", scale=4.6, seed=11))
    dst = d / "lineitem_1gb_rw.parquet"
    t0 = time.perf_counter()
    plan, report = _rewrite(src, dst, parallelism=None)
    elapsed = time.perf_counter() - t0
    yield src, dst, plan, report, elapsed
    src.unlink(missing_ok=True)
    dst.unlink(missing_ok=True)


# -- 1: round-trip fidelity ---------------------------------------------------------


@pytest.mark.criterion(1)
def test_lineitem_round_trip(lineitem_01, lineitem_rw, record_property):
    out, _, report = lineitem_rw
    eq = verify_equal(lineitem_01, out)
    assert eq.equal, eq
    assert eq.rows_compared == report.rows_written == pq.ParquetFile(lineitem_01).metadata.num_rows
    record_property("note", f"lineitem {eq.rows_compared:,} rows equal")


@pytest.mark.criterion(1)
def test_random_tables_round_trip(random_corpus, record_property):
    failures = [str(src) for src, dst, _ in random_corpus if not verify_equal(src, dst).equal]
    assert not failures, failures
    record_property("note", f"{len(random_corpus)} random tables equal")


# -- 2: layout conformance -------------------------------------------------------------


def _assert_layout(path, policy=DEFAULT):
    rep = inspect(path)
    groups = [rg.num_rows for rg in rep.row_groups]
    assert all(n == policy.target_rg_rows for n in groups[:-1])
    assert not groups or 1 <= groups[-1] <= policy.target_rg_rows
    for rg in rep.row_groups[:-1]:
        assert all(c.data_page_count >= policy.target_pages_per_chunk for c in rg.chunks)
    findings = grade(rep, policy)
    assert findings == [], findings[:5]
    return groups


@pytest.mark.criterion(2)
def test_lineitem_rewrite_has_no_findings(lineitem_rw):
    out, _, _ = lineitem_rw
    groups = _assert_layout(out)
    # one group below target: it is the last one and still gets >= 100 pages
    assert len(groups) == 1
    assert all(c.data_page_count >= 100 for c in inspect(out).row_groups[0].chunks)


@pytest.mark.criterion(2)
def test_mixed_and_random_rewrites_have_no_findings(mixed_rw, random_corpus):
    _assert_layout(mixed_rw[0])
    for _, dst, _ in random_corpus:
        _assert_layout(dst)


@pytest.mark.criterion(2)
def test_gigabyte_rewrite_has_ten_million_row_groups(gigabyte, record_property):
    _, dst, _, _, _ = gigabyte
    groups = _assert_layout(dst)
    assert len(groups) > 1 and groups[0] == 10_000_000
    record_property("note", f"groups {groups}")


# -- 3: encoding argmin oracle ----------------------------------------------------------


def _data_encoding(chunk) -> Encoding:
    data = {p.encoding for p in chunk.pages if p.page_type is not PageType.DICTIONARY}
    assert len(data) == 1
    return data.pop()


@pytest.mark.criterion(3)
def test_chosen_encoding_is_argmin(lineitem_rw, record_property):
    out, plan, report = lineitem_rw
    rep = inspect(out)
    checked = 0
    with ParquetFile(out) as pf:
        for g, rg in enumerate(rep.row_groups):
            for ci, chunk in enumerate(rg.chunks):
                d = plan.directive(g, ci)
                values = pf.read_column(g, ci)
                # each candidate encoded on its own, not through the trial loop
                sizes = {
                    e: encode_fixed(values, e, d.page_row_limit, plan.dictionary_size_limit).chunk.size
                    for e in d.encoding_mode.encodings
                }
                best = min(sizes, key=lambda e: (sizes[e], e.order))
                assert _data_encoding(chunk) is best, (chunk.column_path, sizes)
                rec = report.chunks[g * len(rg.chunks) + ci]
                recorded = {t["encoding"]: t["encoded_size"] for t in rec.encoding["trials"]}
                assert recorded == {e.name: s for e, s in sizes.items()}
                if chunk.codec.kind is CodecKind.UNCOMPRESSED:
                    # the file holds exactly the bytes that were measured
                    assert chunk.total_compressed_size == sizes[best]
                checked += 1
    assert checked == 16
    record_property("note", f"{checked} chunks")


@pytest.mark.criterion(3)
def test_plain_size_matches_closed_form(lineitem_rw):
    """PLAIN sizes from the encoder agree with width*n (or bytes + 4n)."""
    out, plan, _ = lineitem_rw
    with ParquetFile(out) as pf:
        for ci, desc in enumerate(pf.columns):
            values = pf.read_column(0, ci)
            chunk = encode_fixed(values, Encoding.PLAIN, plan.directive(0, ci).page_row_limit).chunk
            body = sum(len(p.body) for p in chunk.pages)
            assert body == values.raw_size(), desc.dotted  # no levels: required columns


# -- 4: compression gate soundness -----------------------------------------------------


def _assert_gate(path, report, threshold=DEFAULT.compression_threshold):
    rep = inspect(path)
    compressed = 0
    ncols = len(rep.schema)
    for g, rg in enumerate(rep.row_groups):
        for ci, chunk in enumerate(rg.chunks):
            decision = report.chunks[g * ncols + ci].compression
            if chunk.compressed:
                compressed += 1
                assert chunk.reduction >= threshold, chunk.column_path
                assert decision["applied"] and decision["reduction"] >= threshold
                assert decision["compressed_size"] == chunk.total_compressed_size
                assert decision["uncompressed_size"] == chunk.total_uncompressed_size
            else:
                assert not decision["applied"]
                assert decision["reduction"] < threshold or decision["error"], chunk.column_path
    return rep, compressed


@pytest.mark.criterion(4)
def test_gate_soundness_lineitem(lineitem_rw, record_property):
    out, _, report = lineitem_rw
    rep, compressed = _assert_gate(out, report)
    total = sum(len(rg.chunks) for rg in rep.row_groups)
    record_property("note", f"lineitem {compressed}/{total} chunks compressed")


@pytest.mark.criterion(4)
def test_gate_soundness_mixed_random_bytes_stay_raw(mixed_rw):
    out, _, report = mixed_rw
    rep, _ = _assert_gate(out, report)
    random_chunks = [c for rg in rep.row_groups for c in rg.chunks if c.column_path == "x_random_bytes"]
    assert random_chunks and all(not c.compressed for c in random_chunks)


@pytest.mark.criterion(4)
def test_gate_soundness_random_tables(random_corpus):
    for _, dst, report in random_corpus:
        _assert_gate(dst, report)


# -- 5: size direction ------------------------------------------------------------------


@pytest.mark.criterion(5)
def test_flexible_gated_beats_v1_forced(lineitem_01, lineitem_rw, tmp_path, record_property):
    flexible = lineitem_rw[2].output_file_size
    _, snappy = _rewrite(lineitem_01, tmp_path / "v1_snappy.parquet", V1_SNAPPY)
    _, zstd = _rewrite(lineitem_01, tmp_path / "v1_zstd.parquet", V1_ZSTD)
    ratio = flexible / snappy.output_file_size
    record_property("note", f"{flexible:,} B vs {snappy.output_file_size:,} B V1+snappy = {ratio:.3f}x; "
                            f"vs V1+zstd {flexible / zstd.output_file_size:.3f}x")
    assert ratio <= 1.0
    assert 1 - ratio >= 0.05
    assert flexible <= zstd.output_file_size


# -- 6: rewrite throughput --------------------------------------------------------------


@pytest.mark.criterion(6)
def test_gigabyte_rewrite_within_budget(gigabyte, record_property):
    src, _, _, report, elapsed = gigabyte
    size = os.path.getsize(src)
    assert size >= 1_000_000_000
    record_property("note", f"{size / 1e9:.2f} GB in {elapsed:.1f} s = {size / elapsed / 1e6:.1f} MB/s "
                            f"on {os.cpu_count()} CPU(s)")
    print(f"rewrite throughput: {size / elapsed / 1e6:.1f} MB/s ({elapsed:.1f} s)")
    assert report.rows_written == pq.ParquetFile(src).metadata.num_rows
    assert elapsed <= 120


# -- 7: interoperability ----------------------------------------------------------------


def _arrow_equal(a: pa.Table, b: pa.Table) -> bool:
    """Value equality with NaN payloads compared as bits."""
    if a.schema.remove_metadata() != b.schema.remove_metadata() or a.num_rows != b.num_rows:
        return False
    for name in a.column_names:
        x, y = a[name].combine_chunks(), b[name].combine_chunks()
        if pa.types.is_floating(x.type):
            if not x.is_null().equals(y.is_null()):
                return False
            bits = {pa.float32(): np.uint32, pa.float64(): np.uint64, pa.float16(): np.uint16}[x.type]
            xv = x.fill_null(0).to_numpy(zero_copy_only=False).view(bits)
            yv = y.fill_null(0).to_numpy(zero_copy_only=False).view(bits)
            if not np.array_equal(xv, yv):
                return False
        elif not x.equals(y):
            return False
    return True


@pytest.mark.criterion(7)
def test_pyarrow_reads_identical_contents(lineitem_01, lineitem_rw, mixed_small, mixed_rw, random_corpus):
    pairs = [(lineitem_01, lineitem_rw[0]), (mixed_small, mixed_rw[0])]
    pairs += [(s, d) for s, d, _ in random_corpus]
    bad = [str(d) for s, d in pairs if not _arrow_equal(pq.read_table(s), pq.read_table(d))]
    assert not bad, bad


def _has_fixed_len(path) -> bool:
    return any(c.physical_type.name == "FIXED_LEN_BYTE_ARRAY" for c in inspect(path).schema)


@pytest.mark.criterion(7)
def test_polars_reads_identical_contents(lineitem_01, lineitem_rw, mixed_small, mixed_rw, random_corpus,
                                          record_property):
    pairs = [(lineitem_01, lineitem_rw[0]), (mixed_small, mixed_rw[0])]
    # polars cannot read DELTA_BYTE_ARRAY / BYTE_STREAM_SPLIT on fixed-length pages
    pairs += [(s, d) for s, d, _ in random_corpus if not _has_fixed_len(d)]
    for s, d in pairs:
        assert pl.read_parquet(s).equals(pl.read_parquet(d), null_equal=True), d
    record_property("note", f"polars {len(pairs)} files")


@pytest.mark.criterion(7)
def test_duckdb_reads_lineitem_rewrite(lineitem_01, lineitem_rw):
    con = duckdb.connect()
    q = "SELECT * FROM read_parquet('{}') ORDER BY l_orderkey, l_linenumber"
    a = con.execute(q.format(lineitem_01)).to_arrow_table()
    b = con.execute(q.format(lineitem_rw[0])).to_arrow_table()
    assert a.num_rows == b.num_rows and a.equals(b)


# -- 8: bench metric correctness --------------------------------------------------------


@pytest.mark.criterion(8)
@pytest.mark.parametrize("size,runtime", [
    (1_073_741_824, 2.0),
    (125_000_000_000, 1.0),
    (1, 3.0),
    (10**15 + 7, 0.1),
    (987_654_321, 1.234567),
])
def test_bandwidth_arithmetic(size, runtime):
    exact = float(Fraction(size) / Fraction(runtime))  # correctly rounded quotient
    storage, effective = bandwidths(size, size, runtime)
    assert storage == effective == exact
    rep = report_from_measurements(size // 2 + 1, size, [runtime], clock_floor=0.0)
    assert rep.effective_bandwidth == exact
    assert rep.storage_bandwidth == float(Fraction(size // 2 + 1) / Fraction(runtime))


@pytest.mark.criterion(8)
def test_headline_magnitude_check():
    rep = report_from_measurements(1_000, 125 * 10**9, [1.0], clock_floor=0.0)
    assert rep.effective_bandwidth == 125e9
    rep = report_from_measurements(1_000, 1_073_741_824, [2.0], clock_floor=0.0)
    assert rep.effective_bandwidth == 536_870_912.0


@pytest.mark.criterion(8)
def test_raw_size_invariant_across_rewrites(lineitem_01, lineitem_rw, mixed_small, mixed_rw, tmp_path,
                                            random_corpus):
    _rewrite(lineitem_01, tmp_path / "v1.parquet", V1_SNAPPY)
    sizes = {scan(p) for p in (lineitem_01, lineitem_rw[0], tmp_path / "v1.parquet")}
    assert len(sizes) == 1
    assert scan(mixed_small) == scan(mixed_rw[0])
    for s, d, _ in random_corpus[:50]:
        assert scan(s) == scan(d)
    b = bench_scan(lineitem_rw[0], repetitions=2)
    assert b.raw_decoded_size == sizes.pop()
    assert (b.effective_bandwidth >= b.storage_bandwidth) == (b.raw_decoded_size >= b.file_size)


# -- 9: determinism ---------------------------------------------------------------------


@pytest.mark.criterion(9)
@pytest.mark.parametrize("which", ["lineitem", "mixed"])
def test_parallelism_does_not_change_output(which, lineitem_01, mixed_small, tmp_path):
    src = lineitem_01 if which == "lineitem" else mixed_small
    policy = DEFAULT if which == "lineitem" else with_overrides(DEFAULT, target_rg_rows=40_000)
    outputs, reports = [], []
    for i, workers in enumerate((1, 4, 1, 8)):
        dst = tmp_path / f"out{i}.parquet"
        _, r = _rewrite(src, dst, policy, parallelism=workers)
        outputs.append(sha256(dst))
        reports.append(r.to_dict(include_time=False))
    assert len(set(outputs)) == 1
    assert all(r == reports[0] for r in reports)
