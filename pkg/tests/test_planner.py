from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqforge.model import (
    Codec,
    CodecKind,
    ColumnSchema,
    ColumnPhysicalType as PT,
    Encoding,
    FileReport,
    FileSummary,
    RewritePlan,
    RewritePolicy,
    RowGroupMeta,
)
from pqforge.planner import derive_plan, page_row_limit, plan_summary, row_group_boundaries


def _report(total_rows: int, types=(PT.INT64, PT.BYTE_ARRAY)) -> FileReport:
    schema = tuple(ColumnSchema(f"c{i}", t, None, 0, 0) for i, t in enumerate(types))
    groups = (RowGroupMeta(total_rows, (), 0),) if total_rows else ()
    return FileReport(schema, groups, total_rows, 0, FileSummary.compute(groups, 0))


def test_sixty_million_rows_default():
    plan = derive_plan(_report(60_000_000), RewritePolicy())
    assert plan.row_group_boundaries == (10_000_000,) * 6
    assert {d.page_row_limit for d in plan.directives} == {100_000}
    assert plan_summary(plan).text().splitlines()[0] == "6 row groups × 10,000,000 rows; ≥100 pages/chunk"


def test_baseline_shape_reconstruction():
    policy = RewritePolicy(target_rg_rows=122_880, target_pages_per_chunk=1, flexible_encodings=False)
    plan = derive_plan(_report(122_880), policy)
    assert plan.row_group_boundaries == (122_880,)
    assert {d.page_row_limit for d in plan.directives} == {122_880}
    assert plan.directives[0].encoding_mode.encodings == (Encoding.PLAIN, Encoding.RLE_DICTIONARY)
    assert plan.directives[1].encoding_mode.encodings == (Encoding.PLAIN, Encoding.RLE_DICTIONARY)
    summary = plan_summary(plan, RewritePolicy())
    assert "below policy targets" in summary.text()


def test_empty_plan():
    plan = derive_plan(_report(0), RewritePolicy())
    assert plan.row_group_boundaries == () and plan.directives == ()
    assert plan_summary(plan).text().startswith("0 row groups")


def test_compression_modes():
    forced = derive_plan(_report(10), RewritePolicy(compression_mode="forced",
                                                    compression_candidate=Codec(CodecKind.SNAPPY)))
    assert forced.directives[0].compression_mode.kind == "FORCED"
    none = derive_plan(_report(10), RewritePolicy(compression_mode="none"))
    assert none.directives[0].compression_mode.kind == "NONE"
    gated = derive_plan(_report(10), RewritePolicy())
    cm = gated.directives[0].compression_mode
    assert (cm.kind, cm.codec, cm.threshold) == ("GATED", Codec(CodecKind.ZSTD), 0.10)


@pytest.mark.parametrize("g,t,expected", [
    (10_000_000, 100, 100_000),
    (150, 100, 1),  # ceil(150/100) = 2 would give only 75 pages
    (250, 100, 2),
    (50, 100, 1),
    (7, 1, 7),
    (1, 100, 1),
])
def test_page_row_limit_examples(g, t, expected):
    assert page_row_limit(g, t) == expected


@given(st.integers(1, 10**8).flatmap(lambda t: st.tuples(st.integers(0, 1000 * t), st.just(t))))
def test_boundaries_conserve_rows(case):
    total, target = case
    b = row_group_boundaries(total, target)
    assert sum(b) == total
    assert all(x == target for x in b[:-1])
    assert not b or 1 <= b[-1] <= target


@given(st.integers(1, 10**8), st.integers(1, 10**4), st.integers(1, 10**4))
def test_page_target_is_satisfiable(g, t, floor):
    limit = page_row_limit(g, t, floor)
    pages = -(-g // limit)
    assert limit >= floor
    assert pages <= g
    if limit > floor:
        assert pages >= min(t, g)
    else:
        # the floor binds: as many pages as the floor allows
        assert pages == -(-g // floor) or pages >= min(t, g)


@given(st.integers(1, 10**8), st.integers(1, 10**4), st.integers(1, 10**4), st.integers(1, 100))
def test_more_pages_never_larger_limit(g, t, extra, floor):
    assert page_row_limit(g, t + extra, floor) <= page_row_limit(g, t, floor)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 2 * 10**7).flatmap(lambda t: st.tuples(st.integers(0, 50 * t), st.just(t))),
       st.integers(1, 500))
def test_derive_plan_properties(case, pages):
    total, target = case
    policy = RewritePolicy(target_rg_rows=target, target_pages_per_chunk=pages)
    report = _report(total)
    plan = derive_plan(report, policy)
    assert plan == derive_plan(report, policy)  # referentially transparent
    assert sum(plan.row_group_boundaries) == total
    assert RewritePlan.from_json(plan.to_json()) == plan
    for d in plan.directives:
        rows = plan.row_group_boundaries[d.row_group]
        n_pages = -(-rows // d.page_row_limit)
        assert n_pages <= rows
        if rows == target:
            assert n_pages >= min(pages, rows)
