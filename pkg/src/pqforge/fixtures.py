"""Deterministic synthetic tables written in a CPU-tuned baseline layout.

The ``lineitem`` profile follows the shape of the TPC-H lineitem table:
1.5M orders per unit of scale with 1 to 7 lines each, sparse order keys,
and the usual column mix.  ``mixed`` appends columns that stress the
encoding trials and the compression gate.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _meta
from .column import ByteArrays, ColumnData, leaf_columns
from .model import (
    V1_ENCODINGS,
    Codec,
    CodecKind,
    CompressionMode,
    EncodingMode,
    applicable_encodings,
)
from .transcoder import transcode
from .writer import ParquetWriter

BASELINE_RG_ROWS = 122_880
ORDERS_PER_SCALE = 1_500_000
PROFILES = ("lineitem", "mixed")

_EPOCH_1992 = 8035  # 1992-01-01 as days since 1970-01-01
_CURRENT = 9298  # 1995-06-17
_LAST_ORDER = 10440 - 151  # 1998-08-02 minus the longest ship/receipt lag

_INSTRUCT = [b"DELIVER IN PERSON", b"COLLECT COD", b"NONE", b"TAKE BACK RETURN"]
_MODES = [b"REG AIR", b"AIR", b"RAIL", b"SHIP", b"TRUCK", b"MAIL", b"FOB"]
_WORDS = (
    b"furiously quickly carefully blithely slyly ironic regular final express pending "
    b"special bold even unusual silent close idle busy ruthless daring fluffy packages "
    b"requests accounts deposits foxes ideas theodolites pinto beans instructions "
    b"dependencies excuses platelets asymptotes courts dolphins multipliers sauternes "
    b"warthogs frets dinos attainments somas tithes sheaves braids hockey players "
    b"sleep wake are cajole haggle nag use boost affix detect integrate maintain "
    b"nod was lose sublate solve thrash print doze among across along above after "
    b"against according to about the of fluffily permanently"
).split()


class FixtureError(ValueError):
    pass


@dataclass(frozen=True)
class FixtureSpec:
    profile: str = "lineitem"
    scale: float | None = None
    rows: int | None = None
    seed: int = 0
    rg_rows: int = BASELINE_RG_ROWS

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise FixtureError(f"profile must be one of {', '.join(PROFILES)}")
        if (self.scale is None) == (self.rows is None):
            raise FixtureError("give exactly one of scale or rows")
        if self.scale is not None and not self.scale >= 0:
            raise FixtureError("scale must be >= 0")
        if self.rows is not None and self.rows < 0:
            raise FixtureError("rows must be >= 0")
        if self.rg_rows < 1:
            raise FixtureError("rg_rows must be >= 1")


def _leaf(name: str, ptype: int, logical: dict | None = None, converted: int | None = None,
          optional: bool = False, type_length: int | None = None) -> dict:
    el = {"type": ptype, "repetition_type": _meta.OPTIONAL if optional else _meta.REQUIRED, "name": name}
    if type_length is not None:
        el["type_length"] = type_length
    if converted is not None:
        el["converted_type"] = converted
    if logical is not None:
        el["logical_type"] = logical
    return el


def _string(name: str) -> dict:
    return _leaf(name, _meta.BYTE_ARRAY, {"string": {}}, 0)


def _date(name: str) -> dict:
    return _leaf(name, _meta.INT32, {"date": {}}, 6)


LINEITEM_SCHEMA = [
    _leaf("l_orderkey", _meta.INT64),
    _leaf("l_partkey", _meta.INT64),
    _leaf("l_suppkey", _meta.INT64),
    _leaf("l_linenumber", _meta.INT32),
    _leaf("l_quantity", _meta.DOUBLE),
    _leaf("l_extendedprice", _meta.DOUBLE),
    _leaf("l_discount", _meta.DOUBLE),
    _leaf("l_tax", _meta.DOUBLE),
    _string("l_returnflag"),
    _string("l_linestatus"),
    _date("l_shipdate"),
    _date("l_commitdate"),
    _date("l_receiptdate"),
    _string("l_shipinstruct"),
    _string("l_shipmode"),
    _string("l_comment"),
]
MIXED_EXTRA = [
    _leaf("x_constant", _meta.INT64),
    _leaf("x_sorted", _meta.INT64),
    _leaf("x_random_bytes", _meta.BYTE_ARRAY),
    _leaf("x_mostly_null", _meta.DOUBLE, optional=True),
]


def schema_elements(profile: str) -> list[dict]:
    leaves = LINEITEM_SCHEMA + (MIXED_EXTRA if profile == "mixed" else [])
    return [{"name": "schema", "num_children": len(leaves)}] + [dict(x) for x in leaves]


def _exclusive_cumsum(x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.size, np.int64)
    if x.size > 1:
        np.cumsum(x[:-1], out=out[1:])
    return out


def _gather_strings(ids: np.ndarray, row_tokens: np.ndarray, vocab: list[bytes]) -> ByteArrays:
    """Join vocabulary entries into one space-separated string per row."""
    vlen = np.array([len(w) for w in vocab], np.int64)
    voff = _exclusive_cumsum(vlen)
    vdata = np.frombuffer(b"".join(vocab), np.uint8)
    offsets = np.zeros(row_tokens.size + 1, np.int64)
    if ids.size == 0:
        return ByteArrays(offsets, np.zeros(0, np.uint8))
    wl = vlen[ids]
    sep = np.ones(ids.size, np.int64)
    nonempty = row_tokens > 0
    sep[(np.cumsum(row_tokens) - 1)[nonempty]] = 0
    tok_len = wl + sep
    out_start = _exclusive_cumsum(tok_len)
    wl_start = _exclusive_cumsum(wl)
    k = np.arange(int(wl.sum()), dtype=np.int64)
    dst = np.repeat(out_start - wl_start, wl) + k
    src = np.repeat(voff[ids] - wl_start, wl) + k
    data = np.full(int(tok_len.sum()), ord(" "), np.uint8)
    data[dst] = vdata[src]
    # per-row byte length = sum of its token lengths
    tok_cum = np.concatenate(([0], np.cumsum(tok_len)))
    row_end_tok = np.cumsum(row_tokens)
    np.copyto(offsets[1:], tok_cum[row_end_tok])
    return ByteArrays(offsets, data)


def _categorical(codes: np.ndarray, vocab: list[bytes]) -> ByteArrays:
    return _gather_strings(codes.astype(np.int64), np.ones(codes.size, np.int64), vocab)


def _orderkey(order_index: np.ndarray) -> np.ndarray:
    # only the first 8 of every 32 keys are used
    return (order_index // 8) * 32 + order_index % 8 + 1


def _retail_price(partkey: np.ndarray) -> np.ndarray:
    return (90000 + (partkey // 10) % 20001 + 100 * (partkey % 1000)) / 100.0


class _LineitemSource:
    """Generates lineitem rows in order-sized blocks from one seeded stream."""

    BLOCK_ORDERS = 1 << 15

    def __init__(self, spec: FixtureSpec):
        self.rng = np.random.default_rng(spec.seed)
        scale = spec.scale if spec.scale is not None else max(spec.rows / (4 * ORDERS_PER_SCALE), 0.01)
        self.scale = scale
        self.max_orders = int(round(ORDERS_PER_SCALE * spec.scale)) if spec.scale is not None else None
        self.parts = max(int(200_000 * scale), 1)
        self.supps = max(int(10_000 * scale), 1)
        self.next_order = 0
        self.mixed = spec.profile == "mixed"
        self.row_base = 0

    def block(self) -> dict | None:
        n_orders = self.BLOCK_ORDERS
        if self.max_orders is not None:
            n_orders = min(n_orders, self.max_orders - self.next_order)
            if n_orders <= 0:
                return None
        rng = self.rng
        orders = np.arange(self.next_order, self.next_order + n_orders, dtype=np.int64)
        self.next_order += n_orders
        lines = rng.integers(1, 8, n_orders)
        n = int(lines.sum())
        okey = np.repeat(_orderkey(orders), lines)
        first = np.repeat(np.cumsum(lines) - lines, lines)
        linenumber = (np.arange(n) - first + 1).astype(np.int32)
        orderdate = np.repeat(rng.integers(_EPOCH_1992, _LAST_ORDER + 1, n_orders), lines)
        partkey = rng.integers(1, self.parts + 1, n)
        suppkey = (partkey + rng.integers(0, 4, n) * (self.supps // 4 + (partkey - 1) // self.supps)) % self.supps + 1
        quantity = rng.integers(1, 51, n).astype(np.float64)
        price = np.round(quantity * _retail_price(partkey), 2)
        discount = rng.integers(0, 11, n) / 100.0
        tax = rng.integers(0, 9, n) / 100.0
        ship = orderdate + rng.integers(1, 122, n)
        commit = orderdate + rng.integers(30, 91, n)
        receipt = ship + rng.integers(1, 31, n)
        returned = receipt <= _CURRENT
        flag = np.where(returned, rng.integers(0, 2, n), 2)  # R, A, N
        status = (ship > _CURRENT).astype(np.int64)  # F, O
        instruct = rng.integers(0, len(_INSTRUCT), n)
        mode = rng.integers(0, len(_MODES), n)
        words = rng.integers(2, 7, n)
        word_ids = rng.integers(0, len(_WORDS), int(words.sum()))
        cols = {
            "l_orderkey": okey,
            "l_partkey": partkey.astype(np.int64),
            "l_suppkey": suppkey.astype(np.int64),
            "l_linenumber": linenumber,
            "l_quantity": quantity,
            "l_extendedprice": price,
            "l_discount": discount,
            "l_tax": tax,
            "l_returnflag": _categorical(flag, [b"R", b"A", b"N"]),
            "l_linestatus": _categorical(status, [b"F", b"O"]),
            "l_shipdate": ship.astype(np.int32),
            "l_commitdate": commit.astype(np.int32),
            "l_receiptdate": receipt.astype(np.int32),
            "l_shipinstruct": _categorical(instruct, _INSTRUCT),
            "l_shipmode": _categorical(mode, _MODES),
            "l_comment": _gather_strings(word_ids, words, _WORDS),
        }
        if self.mixed:
            cols["x_constant"] = np.full(n, 42, np.int64)
            cols["x_sorted"] = np.arange(self.row_base, self.row_base + n, dtype=np.int64)
            cols["x_random_bytes"] = ByteArrays(
                np.arange(n + 1, dtype=np.int64) * 16, rng.integers(0, 256, 16 * n, dtype=np.uint8)
            )
            present = rng.random(n) < 0.05
            cols["x_mostly_null"] = (rng.random(int(present.sum())), present)
        self.row_base += n
        return {"rows": n, "cols": cols}


def _slice_value(v, a: int, b: int):
    if isinstance(v, ByteArrays):
        return v.slice(a, b)
    if isinstance(v, tuple):  # (non-null values, present mask)
        vals, mask = v
        before = int(np.count_nonzero(mask[:a]))
        inside = int(np.count_nonzero(mask[a:b]))
        return vals[before:before + inside], mask[a:b]
    return v[a:b]


def _concat_value(parts):
    if isinstance(parts[0], ByteArrays):
        return ByteArrays.concat(parts)
    if isinstance(parts[0], tuple):
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
    return np.concatenate(parts)


def iter_row_groups(spec: FixtureSpec) -> Iterator[list[ColumnData]]:
    """Yield each row group of the fixture as a list of columns."""
    descs = leaf_columns(schema_elements(spec.profile))
    src = _LineitemSource(spec)
    limit = spec.rows
    produced = 0
    pending: list[dict] = []
    have = 0

    def emit(k: int) -> list[ColumnData]:
        nonlocal pending, have
        out = []
        merged = {name: _concat_value([p["cols"][name] for p in pending]) for name in pending[0]["cols"]}
        total = sum(p["rows"] for p in pending)
        for d in descs:
            v = merged[d.dotted]
            head = _slice_value(v, 0, k)
            if isinstance(head, tuple):
                vals, mask = head
                out.append(ColumnData(d, vals, mask.astype(np.int16)))
            else:
                out.append(ColumnData(d, head))
        rest = {name: _slice_value(v, k, total) for name, v in merged.items()}
        pending = [{"rows": total - k, "cols": rest}] if total > k else []
        have = total - k
        return out

    while True:
        target = spec.rg_rows if limit is None else min(spec.rg_rows, limit - produced)
        if target <= 0:
            break
        while have < target:
            blk = src.block()
            if blk is None:
                break
            pending.append(blk)
            have += blk["rows"]
        if have == 0:
            break
        k = min(target, have)
        produced += k
        yield emit(k)


def _baseline_modes(desc):
    cands = tuple(applicable_encodings(desc.physical_type) & V1_ENCODINGS)
    return EncodingMode("TRIAL", cands), CompressionMode("FORCED", Codec(CodecKind.SNAPPY))


def gen_fixture(path, spec: FixtureSpec) -> int:
    """Write the fixture in baseline layout (one page per chunk, V1, SNAPPY).

    Returns the number of rows written.
    """
    elements = schema_elements(spec.profile)
    descs = leaf_columns(elements)
    rows = 0
    with ParquetWriter(path, elements, descs) as w:
        for cols in iter_row_groups(spec):
            n = cols[0].num_rows
            w.begin_row_group(n)
            for col in cols:
                enc, comp = _baseline_modes(col.descriptor)
                chunk = transcode(col, enc, comp, max(n, 1)).chunk
                w.write_chunk(dataclasses.replace(chunk, trial_candidates=()))
            w.end_row_group()
            rows += n
    return rows


def expected_rows(scale: float) -> float:
    """Mean row count for a scale: 4 lines per order on average."""
    return 4.0 * ORDERS_PER_SCALE * scale
