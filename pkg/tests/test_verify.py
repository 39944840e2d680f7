from __future__ import annotations

import numpy as np
import pyarrow as pa
import pyarrow.parquet as pq
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_table, write_table
from pqforge import verify_equal
from pqforge.verify import WINDOW_ROWS


def _write(tmp_path, name, table, **kw):
    return write_table(table, tmp_path / name, **kw)


def test_reflexive(tmp_path):
    t = random_table(4, 2000)
    p = _write(tmp_path, "a.parquet", t)
    r = verify_equal(p, p)
    assert r.equal and r.rows_compared == t.num_rows


def test_layout_changes_are_invisible(tmp_path):
    t = pa.table({"x": np.arange(5000), "s": [str(i % 13) for i in range(5000)]})
    a = _write(tmp_path, "a.parquet", t, row_group_size=100, compression="snappy")
    b = _write(tmp_path, "b.parquet", t, row_group_size=4000, compression="zstd", use_dictionary=False,
               data_page_version="2.0")
    assert verify_equal(a, b).equal


def test_single_flipped_value_is_located(tmp_path):
    n = WINDOW_ROWS + 1000
    x = np.arange(n)
    y = x.copy()
    y[WINDOW_ROWS + 17] += 1
    a = _write(tmp_path, "a.parquet", pa.table({"k": x, "v": x}))
    b = _write(tmp_path, "b.parquet", pa.table({"k": x, "v": y}))
    r = verify_equal(a, b)
    assert not r.equal
    assert (r.first_mismatch.row, r.first_mismatch.column) == (WINDOW_ROWS + 17, "v")
    assert r.first_mismatch.left_digest != r.first_mismatch.right_digest


def test_earliest_row_wins_across_columns(tmp_path):
    x = np.arange(100)
    v1, v2 = x.copy(), x.copy()
    v1[50] = -1
    v2[10] = -1
    a = _write(tmp_path, "a.parquet", pa.table({"p": x, "q": x}))
    b = _write(tmp_path, "b.parquet", pa.table({"p": v1, "q": v2}))
    m = verify_equal(a, b).first_mismatch
    assert (m.row, m.column) == (10, "q")


def test_nan_payloads_compare_by_bits(tmp_path):
    quiet = np.array([np.nan], np.float64)
    other = np.frombuffer(np.uint64(0x7FF8000000000001).tobytes(), np.float64)
    a = _write(tmp_path, "a.parquet", pa.table({"d": quiet}))
    b = _write(tmp_path, "b.parquet", pa.table({"d": other}))
    c = _write(tmp_path, "c.parquet", pa.table({"d": quiet.copy()}))
    assert not verify_equal(a, b).equal
    assert verify_equal(a, c).equal


def test_signed_zero_differs(tmp_path):
    a = _write(tmp_path, "a.parquet", pa.table({"d": [0.0]}))
    b = _write(tmp_path, "b.parquet", pa.table({"d": [-0.0]}))
    assert not verify_equal(a, b).equal


def test_null_is_not_a_value(tmp_path):
    a = _write(tmp_path, "a.parquet", pa.table({"s": pa.array(["", "x"])}))
    b = _write(tmp_path, "b.parquet", pa.table({"s": pa.array([None, "x"])}))
    r = verify_equal(a, b)
    assert not r.equal and r.first_mismatch.row == 0


def test_nested_lists_compare_structure(tmp_path):
    a = _write(tmp_path, "a.parquet", pa.table({"l": pa.array([[1, 2], [], None], pa.list_(pa.int64()))}))
    b = _write(tmp_path, "b.parquet", pa.table({"l": pa.array([[1], [2], None], pa.list_(pa.int64()))}))
    assert verify_equal(a, b).first_mismatch.row == 0


def test_schema_difference_is_structural(tmp_path):
    a = _write(tmp_path, "a.parquet", pa.table({"x": pa.array([1, 2], pa.int64())}))
    b = _write(tmp_path, "b.parquet", pa.table({"x": pa.array([1, 2], pa.int32())}))
    c = _write(tmp_path, "c.parquet", pa.table({"y": pa.array([1, 2], pa.int64())}))
    for other in (b, c):
        r = verify_equal(a, other)
        assert not r.equal and r.structural and r.first_mismatch is None


def test_row_count_difference(tmp_path):
    a = _write(tmp_path, "a.parquet", pa.table({"x": np.arange(10)}))
    b = _write(tmp_path, "b.parquet", pa.table({"x": np.arange(12)}))
    r = verify_equal(a, b)
    assert not r.equal and r.first_mismatch.row == 10


def test_empty_files_are_equal(tmp_path):
    t = pa.table({"x": pa.array([], pa.int64())})
    assert verify_equal(_write(tmp_path, "a.parquet", t), _write(tmp_path, "b.parquet", t)).equal


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000), st.booleans())
def test_agrees_with_arrow_equality(tmp_path_factory, seed_a, seed_b, same):
    d = tmp_path_factory.mktemp("eq")
    ta = random_table(seed_a, 200)
    tb = ta if same else random_table(seed_b, 200)
    a, b = _write(d, "a.parquet", ta), _write(d, "b.parquet", tb, row_group_size=37)
    ours = verify_equal(a, b).equal
    ra, rb = pq.read_table(a), pq.read_table(b)
    # arrow's equality treats NaN as unequal to itself; compare the Python values on the bit level instead
    ref = ra.schema == rb.schema and ra.num_rows == rb.num_rows and _bits(ra) == _bits(rb)
    assert ours == ref
    # symmetric
    assert verify_equal(b, a).equal == ours


def _bits(t: pa.Table):
    out = []
    for col in t.columns:
        if pa.types.is_floating(col.type):
            width = col.type.bit_width // 8
            vals = col.to_numpy(zero_copy_only=False)
            valid = col.is_valid().to_numpy(zero_copy_only=False)
            out.append([v.tobytes() if ok else None for v, ok in zip(vals.astype(f"<f{width}"), valid)])
        else:
            out.append(col.to_pylist())
    return out


@pytest.mark.parametrize("n", [0, 1, WINDOW_ROWS, WINDOW_ROWS + 1])
def test_window_edges(tmp_path, n):
    t = pa.table({"x": np.arange(n, dtype=np.int64)})
    assert verify_equal(_write(tmp_path, "a.parquet", t, row_group_size=max(1, n // 3)),
                        _write(tmp_path, "b.parquet", t)).equal
