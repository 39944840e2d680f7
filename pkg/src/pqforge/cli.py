"""Command-line interface: inspect, grade, plan, rewrite, verify, bench, gen-fixture.

Settings resolve as flag > PQFORGE_* environment variable > config file
([pqforge] section of an INI file) > built-in default.  Exit codes: 0 ok,
1 internal error (or files differ, for ``verify``), 2 bad input file,
3 bad arguments.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .bench import bench_scan, compare_bench, write_csv
from .column import SchemaError
from .fixtures import BASELINE_RG_ROWS, FixtureError, FixtureSpec, gen_fixture
from .inspector import InspectOptions, grade, inspect
from .model import (
    Codec,
    CodecKind,
    ColumnPhysicalType,
    Encoding,
    PolicyError,
    RewritePlan,
    RewritePolicy,
    validate_policy,
)
from .planner import PlanError, derive_plan, plan_summary
from .reader import ParquetFormatError
from .rewriter import PlanMismatch, RewriteError, default_parallelism, rewrite
from .verify import verify_equal

log = logging.getLogger("pqforge")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_ARGS = 0, 1, 2, 3
ENV_PREFIX = "PQFORGE_"
CONFIG_SECTION = "pqforge"


class UsageError(Exception):
    """Bad arguments or configuration (exit 3)."""


class InputError(Exception):
    """Unusable input file (exit 2)."""


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Setting:
    name: str
    parse: Callable[[Any], Any]
    default: Any
    help: str


# Settings that may come from flags, PQFORGE_<NAME> or the config file.
SETTINGS = {
    s.name: s for s in [
        Setting("rg_rows", int, 10_000_000, "target rows per row group"),
        Setting("pages_per_chunk", int, 100, "target data pages per column chunk"),
        Setting("v1_only", _bool, False, "restrict encodings to PLAIN, RLE and RLE_DICTIONARY"),
        Setting("candidates", str, None, "encoding candidates, e.g. 'INT64=PLAIN,DELTA_BINARY_PACKED;DOUBLE=PLAIN'"),
        Setting("codec", str, "zstd", "gated compression codec (zstd, snappy, lz4)"),
        Setting("zstd_level", int, None, "ZSTD level (default 3)"),
        Setting("threshold", float, 0.10, "minimum size reduction for compression to be kept"),
        Setting("dict_limit_bytes", int, 1 << 20, "largest dictionary page tried, in bytes"),
        Setting("page_floor_rows", int, 1, "minimum rows per data page"),
        Setting("force_codec", str, None, "compress every chunk with this codec, no gate"),
        Setting("no_compression", _bool, False, "never compress"),
        Setting("parallelism", int, None, "worker threads (default: available CPUs)"),
        Setting("log_level", str, "WARNING", "logging level"),
        Setting("format", str, "human", "output format: human or json"),
    ]
}
POLICY_SETTINGS = (
    "rg_rows", "pages_per_chunk", "v1_only", "candidates", "codec", "zstd_level",
    "threshold", "dict_limit_bytes", "page_floor_rows", "force_codec", "no_compression",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _common_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--format", choices=("human", "json"), default=None, help=SETTINGS["format"].help)
    g.add_argument("--config", metavar="FILE", help="INI file with a [pqforge] section")
    g.add_argument("--show-config", action="store_true", help="print the effective settings and exit")
    g.add_argument("--parallelism", type=int, default=None, metavar="N", help=SETTINGS["parallelism"].help)
    g.add_argument("--log-level", default=None, help=SETTINGS["log_level"].help)
    return p


def _policy_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("policy options")
    for name in ("rg_rows", "pages_per_chunk", "zstd_level", "dict_limit_bytes", "page_floor_rows"):
        g.add_argument(_flag(name), type=int, default=None, metavar="N", help=SETTINGS[name].help)
    g.add_argument("--threshold", type=float, default=None, metavar="FRACTION", help=SETTINGS["threshold"].help)
    g.add_argument("--codec", default=None, help=SETTINGS["codec"].help)
    g.add_argument("--force-codec", default=None, metavar="CODEC", help=SETTINGS["force_codec"].help)
    g.add_argument("--no-compression", action="store_const", const=True, default=None,
                   help=SETTINGS["no_compression"].help)
    g.add_argument("--v1-only", dest="v1_only", action="store_const", const=True, default=None,
                   help=SETTINGS["v1_only"].help)
    g.add_argument("--flexible-encodings", dest="v1_only", action="store_const", const=False,
                   help="allow V2 encodings (default)")
    g.add_argument("--candidates", default=None, metavar="SPEC", help=SETTINGS["candidates"].help)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    policy = _policy_options()
    parser = _Parser(prog="pqforge", description="Inspect and rewrite Parquet files for wide, fast scans.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("inspect", parents=[common], help="report row groups, chunks and pages")
    p.add_argument("path")
    p.add_argument("--no-scan-pages", action="store_true", help="use footer metadata only (approximate)")
    p.add_argument("--columns", default=None, help="comma-separated column filter")

    p = sub.add_parser("grade", parents=[common, policy], help="list policy findings for a file")
    p.add_argument("path")

    p = sub.add_parser("plan", parents=[common, policy], help="derive a rewrite plan")
    p.add_argument("path")
    p.add_argument("-o", "--output", default=None, help="write the plan JSON to this file")

    p = sub.add_parser("rewrite", parents=[common, policy], help="rewrite a file under a policy or plan")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--plan", default=None, metavar="FILE", help="use a plan produced by 'plan'")
    p.add_argument("--verify", action="store_true", help="compare output with input after writing")

    p = sub.add_parser("verify", parents=[common], help="check two files hold the same table")
    p.add_argument("left")
    p.add_argument("right")

    p = sub.add_parser("bench", parents=[common], help="time full decodes of a file")
    p.add_argument("path")
    p.add_argument("--repetitions", type=int, default=3, metavar="N")
    p.add_argument("--columns", default=None, help="comma-separated projection")
    p.add_argument("--cold-cache", action="store_true", help="evict the file from the page cache per run")
    p.add_argument("--no-warmup", action="store_true", help="skip the untimed warm-up scan")
    p.add_argument("--baseline", default=None, metavar="FILE", help="also bench FILE and report ratios")
    p.add_argument("--csv", default=None, metavar="FILE", help="append CSV rows to FILE")

    p = sub.add_parser("gen-fixture", parents=[common], help="write a synthetic baseline-layout table")
    p.add_argument("output")
    p.add_argument("--profile", default="lineitem", help="lineitem or mixed")
    size = p.add_mutually_exclusive_group()
    size.add_argument("--scale", type=float, default=None, help="scale factor (1.5M orders per unit)")
    size.add_argument("--rows", type=int, default=None, help="exact row count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rg-rows", type=int, default=BASELINE_RG_ROWS, help="rows per row group")
    return parser


# -- settings resolution -----------------------------------------------------------


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    except configparser.Error as exc:
        raise UsageError(f"bad config file: {exc}") from None
    if not cp.has_section(CONFIG_SECTION):
        return {}
    out = {}
    for key, value in cp.items(CONFIG_SECTION):
        name = key.replace("-", "_")
        if name not in SETTINGS:
            raise UsageError(f"unknown config key {key!r}")
        out[name] = value
    return out


def resolve_settings(args: argparse.Namespace, environ=os.environ) -> dict:
    """Effective settings with the source of each value."""
    config = load_config(getattr(args, "config", None) or environ.get(ENV_PREFIX + "CONFIG"))
    out = {}
    for name, s in SETTINGS.items():
        raw, source = None, "default"
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            raw, source = flag_value, "flag"
        elif ENV_PREFIX + name.upper() in environ:
            raw, source = environ[ENV_PREFIX + name.upper()], "env"
        elif name in config:
            raw, source = config[name], "config"
        if raw is None:
            value = s.default
        else:
            try:
                value = s.parse(raw)
            except ValueError as exc:
                raise UsageError(f"{name} ({source}): {exc}") from None
        out[name] = (value, source)
    return out


def _parse_candidates(text: str) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        if "=" not in part:
            raise UsageError(f"candidate spec {part!r} must look like TYPE=ENC,ENC")
        t, encs = part.split("=", 1)
        try:
            out[ColumnPhysicalType[t.strip().upper()]] = frozenset(
                Encoding[e.strip().upper()] for e in encs.split(",") if e.strip()
            )
        except KeyError as exc:
            raise UsageError(f"unknown type or encoding {exc}") from None
    return out


def _codec(text: str, level: int | None) -> Codec:
    try:
        codec = Codec.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if level is not None:
        if codec.kind is not CodecKind.ZSTD:
            raise UsageError("--zstd-level only applies to zstd")
        codec = Codec(CodecKind.ZSTD, level)
    return codec


def policy_from_settings(st: dict) -> RewritePolicy:
    v = {k: val for k, (val, _) in st.items()}
    if v["force_codec"] and v["no_compression"]:
        raise UsageError("--force-codec and --no-compression are mutually exclusive")
    fields: dict = {
        "target_rg_rows": v["rg_rows"],
        "target_pages_per_chunk": v["pages_per_chunk"],
        "flexible_encodings": not v["v1_only"],
        "compression_threshold": v["threshold"],
        "dictionary_size_limit": v["dict_limit_bytes"],
        "page_size_floor_rows": v["page_floor_rows"],
    }
    if v["candidates"]:
        fields["encoding_candidates"] = _parse_candidates(v["candidates"])
    if v["no_compression"]:
        fields["compression_mode"] = "none"
        fields["compression_candidate"] = _codec(v["codec"], v["zstd_level"])
    elif v["force_codec"]:
        fields["compression_mode"] = "forced"
        fields["compression_candidate"] = _codec(v["force_codec"], v["zstd_level"])
    else:
        fields["compression_candidate"] = _codec(v["codec"], v["zstd_level"])
    return validate_policy(fields)


# -- rendering -----------------------------------------------------------------


def _emit(fmt: str, payload: dict | list, human: str) -> None:
    if fmt == "json":
        sys.stdout.write(json.dumps(payload, indent=2, allow_nan=False) + "\n")
    else:
        sys.stdout.write(human.rstrip("\n") + "\n")


def _human_report(rep) -> str:
    s = rep.summary
    lines = [
        f"rows: {rep.total_rows:,} in {len(rep.row_groups)} row groups; file {rep.file_size:,} bytes",
    ]
    if s.rows_per_row_group:
        r = s.rows_per_row_group
        lines.append(f"rows/RG: min {r['min']:,} median {r['median']:,} max {r['max']:,}")
    if s.data_pages_per_chunk:
        p = s.data_pages_per_chunk
        approx = any(c.approximate for rg in rep.row_groups for c in rg.chunks)
        lines.append(f"data pages/chunk: min {p['min']} median {p['median']} max {p['max']}"
                     + (" (approximate)" if approx else ""))
    lines.append("encodings: " + (", ".join(f"{k}×{n}" for k, n in s.encoding_histogram.items()) or "-"))
    lines.append("codecs: " + (", ".join(f"{k}×{n}" for k, n in s.codec_histogram.items()) or "-"))
    ratio = "n/a" if s.compression_ratio is None else f"{s.compression_ratio:.3f}"
    lines.append(f"compression ratio (uncompressed/file): {ratio}")
    bad = [(gi, c.column_path, c.unreadable) for gi, rg in enumerate(rep.row_groups) for c in rg.chunks if c.unreadable]
    for gi, col, why in bad:
        lines.append(f"unreadable: row_group[{gi}].{col}: {why}")
    return "\n".join(lines)


def _human_rewrite(r) -> str:
    lines = [
        f"rows written: {r.rows_written:,} in {len(r.row_group_boundaries)} row groups",
        f"size: {r.input_file_size:,} -> {r.output_file_size:,} bytes"
        + (f" ({r.size_ratio:.3f}x)" if r.size_ratio else ""),
        f"time: {r.wall_time:.2f} s ({r.throughput / 1e6:.1f} MB/s)",
    ]
    compressed = sum(1 for c in r.chunks if c.compression and c.compression["applied"])
    lines.append(f"chunks compressed: {compressed}/{len(r.chunks)}")
    for u in r.untranscoded_chunks:
        lines.append(f"copied untranscoded: row_group[{u['row_group']}].{u['column']} ({u['reason']})")
    return "\n".join(lines)


def _human_bench(b) -> str:
    return (
        f"file {b.file_size:,} B, decoded {b.raw_decoded_size:,} B, median {b.scan_runtime:.4f} s "
        f"over {b.repetitions} runs\n"
        f"effective bandwidth {b.effective_bandwidth / 1e6:.1f} MB/s, "
        f"storage bandwidth {b.storage_bandwidth / 1e6:.1f} MB/s"
        + (" (clock floor applied)" if b.clock_floor_applied else "")
    )


# -- commands ------------------------------------------------------------------


def _open_report(path: str, opts: InspectOptions = InspectOptions(), workers: int = 1):
    if not Path(path).is_file():
        raise InputError(f"no such file: {path}")
    return inspect(path, opts, workers)


def cmd_inspect(args, st) -> int:
    cols = tuple(c for c in args.columns.split(",") if c) if args.columns else None
    try:
        opts = InspectOptions(scan_pages=not args.no_scan_pages, columns=cols)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        rep = _open_report(args.path, opts, st["parallelism"][0] or 1)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    _emit(st["format"][0], rep.to_dict(), _human_report(rep))
    return EXIT_OK


def cmd_grade(args, st) -> int:
    policy = policy_from_settings(st)
    rep = _open_report(args.path)
    findings = grade(rep, policy)
    human = "\n".join(f"{f.insight} {f.scope}: {f.message}" for f in findings) or "no findings"
    _emit(st["format"][0], [f.to_dict() for f in findings], human)
    return EXIT_OK


def cmd_plan(args, st) -> int:
    policy = policy_from_settings(st)
    plan = derive_plan(_open_report(args.path), policy)
    if args.output:
        Path(args.output).write_text(plan.to_json())
    if st["format"][0] == "json":
        sys.stdout.write(plan.to_json())
    else:
        sys.stdout.write(plan_summary(plan, RewritePolicy()).text() + "\n")
    return EXIT_OK


def cmd_rewrite(args, st) -> int:
    if args.plan:
        try:
            plan = RewritePlan.from_json(Path(args.plan).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read plan: {exc}") from None
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"invalid plan file: {exc}") from None
    else:
        plan = derive_plan(_open_report(args.input), policy_from_settings(st))
    if not Path(args.input).is_file():
        raise InputError(f"no such file: {args.input}")
    if Path(args.output).resolve() == Path(args.input).resolve():
        raise UsageError("output must differ from input (no in-place rewrite)")
    workers = st["parallelism"][0] or default_parallelism()
    report = rewrite(args.input, plan, args.output, parallelism=workers)
    payload = report.to_dict()
    human = _human_rewrite(report)
    code = EXIT_OK
    if args.verify:
        eq = verify_equal(args.input, args.output)
        payload = {"rewrite": payload, "verify": eq.to_dict()}
        if eq.equal:
            human += "\nverified equal"
        else:
            Path(args.output).unlink(missing_ok=True)
            human += f"\nVERIFY FAILED: {eq.first_mismatch or eq.structural}; output removed"
            code = EXIT_INTERNAL
    _emit(st["format"][0], payload, human)
    return code


def cmd_verify(args, st) -> int:
    for p in (args.left, args.right):
        if not Path(p).is_file():
            raise InputError(f"no such file: {p}")
    eq = verify_equal(args.left, args.right)
    if eq.equal:
        human = f"equal ({eq.rows_compared:,} rows, {len(eq.columns_compared)} columns)"
    elif eq.structural:
        human = f"not equal: {eq.structural}"
    else:
        m = eq.first_mismatch
        human = f"not equal: first difference at row {m.row}, column {m.column} ({m.left_digest} vs {m.right_digest})"
    _emit(st["format"][0], eq.to_dict(), human)
    return EXIT_OK if eq.equal else EXIT_INTERNAL


def cmd_bench(args, st) -> int:
    if args.repetitions < 1:
        raise UsageError("--repetitions must be >= 1")
    cols = [c for c in args.columns.split(",") if c] if args.columns else None
    workers = st["parallelism"][0] or 1

    def run(path):
        if not Path(path).is_file():
            raise InputError(f"no such file: {path}")
        try:
            return bench_scan(path, args.repetitions, cols, cold_cache=args.cold_cache,
                              warmup=not args.no_warmup, parallelism=workers)
        except KeyError as exc:
            raise UsageError(f"unknown column {exc}") from None

    report = run(args.path)
    reports = [report]
    payload: dict = report.to_dict()
    human = _human_bench(report)
    if args.baseline:
        base = run(args.baseline)
        reports.insert(0, base)
        cmp = compare_bench(base, report)
        payload = {"baseline": base.to_dict(), "candidate": report.to_dict(), "comparison": cmp.to_dict()}
        human = "baseline: " + _human_bench(base) + "\ncandidate: " + human + (
            f"\neffective bandwidth ratio {cmp.effective_bandwidth_ratio:.3f}, "
            f"file size ratio {cmp.file_size_ratio:.3f}"
            + (" (raw sizes differ!)" if cmp.raw_size_mismatch else "")
        )
    if args.csv:
        new = not Path(args.csv).exists() or Path(args.csv).stat().st_size == 0
        with open(args.csv, "a", newline="") as fh:
            write_csv(reports, fh, header=new)
    _emit(st["format"][0], payload, human)
    return EXIT_OK


def cmd_gen_fixture(args, st) -> int:
    scale, rows = args.scale, args.rows
    if scale is None and rows is None:
        scale = 0.1
    try:
        spec = FixtureSpec(args.profile, scale, rows, args.seed, args.rg_rows)
    except FixtureError as exc:
        raise UsageError(str(exc)) from None
    n = gen_fixture(args.output, spec)
    size = os.path.getsize(args.output)
    _emit(st["format"][0], {"output": args.output, "rows": n, "file_size": size, "profile": spec.profile,
                            "seed": spec.seed},
          f"wrote {n:,} rows ({size:,} bytes) to {args.output}")
    return EXIT_OK


COMMANDS = {
    "inspect": cmd_inspect,
    "grade": cmd_grade,
    "plan": cmd_plan,
    "rewrite": cmd_rewrite,
    "verify": cmd_verify,
    "bench": cmd_bench,
    "gen-fixture": cmd_gen_fixture,
}


def _show_config(args, st) -> int:
    body = {name: {"value": v, "source": src} for name, (v, src) in st.items()}
    if args.command in ("grade", "plan", "rewrite"):
        body["policy"] = {"value": policy_from_settings(st).to_dict(), "source": "derived"}
    if st["format"][0] == "json":
        sys.stdout.write(json.dumps(body, indent=2) + "\n")
    else:
        for name, entry in body.items():
            if name != "policy":
                sys.stdout.write(f"{name} = {entry['value']!r}  ({entry['source']})\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        st = resolve_settings(args)
        if st["format"][0] not in ("human", "json"):
            raise UsageError("format must be human or json")
        level = str(st["log_level"][0]).upper()
        if not isinstance(logging.getLevelName(level), int):
            raise UsageError(f"unknown log level {level!r}")
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        if st["parallelism"][0] is not None and st["parallelism"][0] < 1:
            raise UsageError("parallelism must be >= 1")
        if args.show_config:
            return _show_config(args, st)
        return COMMANDS[args.command](args, st)
    except (UsageError, PolicyError) as exc:
        print(f"pqforge: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (InputError, ParquetFormatError, SchemaError, PlanMismatch, PlanError, RewriteError,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"pqforge: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as exc:  # anything else is our bug
        log.debug("internal error", exc_info=True)
        print(f"pqforge: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
