"""Show the per-column trial encodings the rewriter weighed and which one won.

    python demos/encoding_trials.py --rows 200000
"""

from __future__ import annotations

import argparse
from pathlib import Path

from pqforge import RewritePolicy, derive_plan, inspect, rewrite
from pqforge.fixtures import FixtureSpec, gen_fixture


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profile", default="mixed", choices=("lineitem", "mixed"))
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--workdir", default="/tmp/pqforge-demo")
    args = ap.parse_args()

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    src, dst = work / f"{args.profile}.parquet", work / f"{args.profile}_trials.parquet"
    gen_fixture(src, FixtureSpec(args.profile, rows=args.rows, seed=5))
    plan = derive_plan(inspect(src), RewritePolicy())
    report = rewrite(src, plan, dst, parallelism=1)

    for rec in report.chunks:
        if rec.row_group != 0 or rec.encoding is None:
            continue
        trials = sorted(rec.encoding["trials"], key=lambda t: t["encoded_size"])
        cells = "  ".join(f"{t['encoding']}={t['encoded_size']:,}" + ("*" if t["fallback"] else "")
                          for t in trials)
        print(f"{rec.column:<22} -> {rec.encoding['chosen']:<24} {cells}")
    print("(* dictionary overflowed and fell back to PLAIN)")


if __name__ == "__main__":
    main()
