"""Parquet layout inspection and rewriting for scan-heavy readers."""

from __future__ import annotations

from .bench import BenchComparison, BenchReport, bench_scan, compare_bench, report_from_measurements
from .fixtures import FixtureSpec, gen_fixture
from .inspector import Finding, InspectOptions, grade, inspect
from .model import (
    Codec,
    CodecKind,
    ColumnPhysicalType,
    Encoding,
    FileReport,
    PolicyError,
    RewritePlan,
    RewritePolicy,
    encoding_applicable,
    validate_policy,
)
from .planner import derive_plan, plan_summary
from .reader import ParquetFile
from .rewriter import RewriteReport, rebuffer, rewrite
from .transcoder import CompressionDecision, EncodingChoice, TrialResult, decide, gate_compress, trial_encode
from .verify import EqualityReport, verify_equal

__version__ = "0.1.0"

__all__ = [
    "BenchComparison", "BenchReport", "Codec", "CodecKind", "ColumnPhysicalType", "CompressionDecision",
    "Encoding", "EncodingChoice", "EqualityReport", "FileReport", "Finding", "FixtureSpec", "InspectOptions",
    "ParquetFile", "PolicyError", "RewritePlan", "RewritePolicy", "RewriteReport", "TrialResult",
    "bench_scan", "compare_bench", "decide", "derive_plan", "encoding_applicable", "gate_compress",
    "gen_fixture", "grade", "inspect", "plan_summary", "rebuffer", "report_from_measurements", "rewrite",
    "trial_encode", "validate_policy", "verify_equal",
]
