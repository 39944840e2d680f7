"""Compare gated compression with forced compression, chunk by chunk.

    python demos/compression_gate.py --rows 200000 --codec zstd
"""

from __future__ import annotations

import argparse
from pathlib import Path

from pqforge import Codec, RewritePolicy, derive_plan, inspect, rewrite
from pqforge.fixtures import FixtureSpec, gen_fixture
from pqforge.model import with_overrides


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--codec", default="zstd")
    ap.add_argument("--threshold", type=float, default=0.10)
    ap.add_argument("--workdir", default="/tmp/pqforge-demo")
    args = ap.parse_args()

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    src = work / "gate_src.parquet"
    gen_fixture(src, FixtureSpec("mixed", rows=args.rows, seed=7))
    report = inspect(src)
    gated = RewritePolicy(compression_candidate=Codec.parse(args.codec), compression_threshold=args.threshold)
    forced = with_overrides(gated, compression_mode="forced")

    sizes = {}
    for name, policy in (("gated", gated), ("forced", forced)):
        out = work / f"gate_{name}.parquet"
        rw = rewrite(src, derive_plan(report, policy), out, parallelism=1)
        sizes[name] = rw.output_file_size
        if name == "gated":
            for rec in rw.chunks:
                d = rec.compression
                if rec.row_group == 0 and d:
                    verdict = "kept" if d["applied"] else "left uncompressed"
                    print(f"{rec.column:<22} saves {d['reduction']:7.1%} -> {verdict}")
    print(f"file size gated {sizes['gated']:,} vs forced {sizes['forced']:,} bytes")


if __name__ == "__main__":
    main()
