"""Turn a file report and a policy into a concrete rewrite plan.

Planning never touches column data: row-group boundaries and page row limits
follow from row counts alone.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    ChunkDirective,
    CompressionMode,
    EncodingMode,
    FileReport,
    RewritePlan,
    RewritePolicy,
    V2_ENCODINGS,
    validate_policy,
)


class PlanError(ValueError):
    pass


def row_group_boundaries(total_rows: int, target_rg_rows: int) -> tuple[int, ...]:
    full, rest = divmod(total_rows, target_rg_rows)
    return (target_rg_rows,) * full + ((rest,) if rest else ())


def page_row_limit(group_rows: int, target_pages: int, floor: int = 1) -> int:
    """Largest row limit that still yields at least ``target_pages`` pages.

    ceil(g/t) alone can undershoot the page count (g=150, t=100 gives 75
    pages of 2 rows), so it is capped by floor((g-1)/(t-1)), the largest L
    with ceil(g/L) >= t.  Groups smaller than the target get one row per
    page.  The floor always wins.
    """
    if group_rows <= 0:
        return max(floor, 1)
    if target_pages <= 1:
        limit = group_rows
    elif group_rows < target_pages:
        limit = 1
    else:
        limit = min(-(-group_rows // target_pages), (group_rows - 1) // (target_pages - 1))
    return max(floor, limit)


def _compression_mode(policy: RewritePolicy) -> CompressionMode:
    if policy.compression_mode == "none":
        return CompressionMode("NONE")
    if policy.compression_mode == "forced":
        return CompressionMode("FORCED", policy.compression_candidate)
    return CompressionMode("GATED", policy.compression_candidate, policy.compression_threshold)


def derive_plan(report: FileReport, policy: RewritePolicy) -> RewritePlan:
    policy = validate_policy(policy)
    if not report.schema:
        raise PlanError("the source file has no columns")
    bounds = row_group_boundaries(report.total_rows, policy.target_rg_rows)
    comp = _compression_mode(policy)
    modes = [EncodingMode("TRIAL", tuple(policy.candidates_for(c.physical_type))) for c in report.schema]
    directives = []
    for g, rows in enumerate(bounds):
        limit = page_row_limit(rows, policy.target_pages_per_chunk, policy.page_size_floor_rows)
        for col, mode in zip(report.schema, modes):
            directives.append(ChunkDirective(g, col.path, limit, mode, comp))
    return RewritePlan(
        source_total_rows=report.total_rows,
        target_rg_rows=policy.target_rg_rows,
        target_pages_per_chunk=policy.target_pages_per_chunk,
        row_group_boundaries=bounds,
        columns=tuple(c.path for c in report.schema),
        directives=tuple(directives),
        dictionary_size_limit=policy.dictionary_size_limit,
        page_size_floor_rows=policy.page_size_floor_rows,
    )


@dataclass(frozen=True)
class PlanSummary:
    row_groups: int
    rows_per_group: int
    last_group_rows: int
    pages_per_full_chunk: int
    candidates: dict
    compression: dict
    below_policy: list

    def text(self) -> str:
        lines = []
        if not self.row_groups:
            lines.append("0 row groups")
        else:
            head = f"{self.row_groups} row groups × {self.rows_per_group:,} rows"
            if self.last_group_rows != self.rows_per_group:
                head += f" (last {self.last_group_rows:,})"
            lines.append(f"{head}; ≥{self.pages_per_full_chunk} pages/chunk")
        c = self.compression
        if c["kind"] == "GATED":
            lines.append(f"compression: {c['codec']} when reduction ≥ {c['threshold']:.2f}")
        elif c["kind"] == "FORCED":
            lines.append(f"compression: {c['codec']} on every chunk")
        else:
            lines.append("compression: none")
        for col, encs in self.candidates.items():
            lines.append(f"  {col}: {', '.join(encs)}")
        if self.below_policy:
            lines.append("below policy targets: " + "; ".join(self.below_policy))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "row_groups": self.row_groups,
            "rows_per_group": self.rows_per_group,
            "last_group_rows": self.last_group_rows,
            "pages_per_full_chunk": self.pages_per_full_chunk,
            "candidates": self.candidates,
            "compression": self.compression,
            "below_policy": self.below_policy,
        }


def plan_summary(plan: RewritePlan, policy: RewritePolicy | None = None) -> PlanSummary:
    """Digest of a plan; with a policy, also note where it falls short of it."""
    b = plan.row_group_boundaries
    ncols = len(plan.columns)
    pages = 0
    candidates: dict = {}
    comp = {"kind": "NONE", "codec": None, "threshold": None}
    if b:
        d0 = plan.directives[0]
        pages = -(-b[0] // d0.page_row_limit)
        for d in plan.directives[:ncols]:
            candidates[d.column] = [e.name for e in d.encoding_mode.encodings]
        cm = d0.compression_mode
        comp = {"kind": cm.kind, "codec": str(cm.codec) if cm.codec else None, "threshold": cm.threshold}
    below = []
    if policy is not None and b:
        if plan.target_rg_rows < policy.target_rg_rows:
            below.append(f"rows/RG {plan.target_rg_rows:,} < {policy.target_rg_rows:,}")
        if pages < min(policy.target_pages_per_chunk, b[0]):
            below.append(f"pages/chunk {pages} < {policy.target_pages_per_chunk}")
        if policy.flexible_encodings and not any(
            set(encs) & {e.name for e in V2_ENCODINGS} for encs in candidates.values()
        ):
            below.append("V1-only encoding candidates")
    return PlanSummary(len(b), b[0] if b else 0, b[-1] if b else 0, pages, candidates, comp, below)
