"""Compiled inner loops for the encoders and decoders.

All bit packing is LSB-first, as used by both the RLE/bit-packed hybrid and
the delta-binary-packed miniblocks.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)

MASK32 = np.uint64(0xFFFFFFFF)


@njit(**_JIT)
def bit_width(v):
    n = 0
    while v:
        v >>= 1
        n += 1
    return n


@njit(**_JIT)
def _put_uvarint(out, pos, v):
    v = np.uint64(v)
    while True:
        b = v & np.uint64(0x7F)
        v >>= np.uint64(7)
        if v:
            out[pos] = np.uint8(b | np.uint64(0x80))
            pos += 1
        else:
            out[pos] = np.uint8(b)
            return pos + 1


@njit(**_JIT)
def _put_zigzag(out, pos, v):
    v = np.int64(v)
    z = (np.uint64(v) << np.uint64(1)) ^ np.uint64(v >> np.int64(63))
    return _put_uvarint(out, pos, z)


@njit(**_JIT)
def _get_uvarint(buf, pos):
    result = np.uint64(0)
    shift = np.uint64(0)
    while True:
        if pos >= buf.size:
            raise ValueError("truncated varint")
        b = np.uint64(buf[pos])
        pos += 1
        result |= (b & np.uint64(0x7F)) << shift
        if b < 128:
            return result, pos
        shift += np.uint64(7)
        if shift > 63:
            raise ValueError("varint too long")


@njit(**_JIT)
def _get_zigzag(buf, pos):
    z, pos = _get_uvarint(buf, pos)
    v = np.int64(z >> np.uint64(1)) ^ -np.int64(z & np.uint64(1))
    return v, pos


@njit(**_JIT)
def _pack(out, bitpos, v, width):
    remaining = width
    v = np.uint64(v)
    while remaining > 0:
        byte = bitpos >> 3
        off = bitpos & 7
        take = 8 - off
        if take > remaining:
            take = remaining
        out[byte] |= np.uint8((v & np.uint64((1 << take) - 1)) << np.uint64(off))
        v >>= np.uint64(take)
        bitpos += take
        remaining -= take
    return bitpos


@njit(**_JIT)
def _unpack(buf, bitpos, width):
    v = np.uint64(0)
    got = 0
    while got < width:
        byte = bitpos >> 3
        off = bitpos & 7
        take = 8 - off
        if take > width - got:
            take = width - got
        chunk = (np.uint64(buf[byte]) >> np.uint64(off)) & np.uint64((1 << take) - 1)
        v |= chunk << np.uint64(got)
        got += take
        bitpos += take
    return v


@njit(**_JIT)
def unpack_bits(buf, pos, count, width):
    out = np.zeros(count, np.uint64)
    if width == 0:
        return out
    bitpos = pos * 8
    for i in range(count):
        out[i] = _unpack(buf, bitpos, width)
        bitpos += width
    return out


# -- RLE / bit-packed hybrid -------------------------------------------------


@njit(**_JIT)
def _emit_bitpacked(out, pos, values, start, count, width):
    done = 0
    while done < count:
        n = count - done
        if n > 504:
            n = 504
        groups = (n + 7) // 8
        pos = _put_uvarint(out, pos, (groups << 1) | 1)
        nbytes = groups * width
        for k in range(nbytes):
            out[pos + k] = 0
        bitpos = pos * 8
        for k in range(n):
            bitpos = _pack(out, bitpos, values[start + done + k], width)
        pos += nbytes
        done += n
    return pos


@njit(**_JIT)
def _emit_rle(out, pos, value, run, width):
    pos = _put_uvarint(out, pos, run << 1)
    v = np.uint64(value)
    for _ in range((width + 7) // 8):
        out[pos] = np.uint8(v & np.uint64(0xFF))
        v >>= np.uint64(8)
        pos += 1
    return pos


@njit(**_JIT)
def rle_encode(values, width):
    n = values.size
    out = np.zeros(16 + (n // 8 + 2) * (width + 16), np.uint8)
    pos = 0
    i = 0
    bp_start = 0
    while i < n:
        v = values[i]
        j = i + 1
        while j < n and values[j] == v:
            j += 1
        r = j - i
        if r >= 8:
            pend = i - bp_start
            rem = pend % 8
            if rem:
                take = 8 - rem
                i += take
                r -= take
                pend += take
            if r >= 8:
                if pend:
                    pos = _emit_bitpacked(out, pos, values, bp_start, pend, width)
                pos = _emit_rle(out, pos, v, r, width)
                i += r
                bp_start = i
            else:
                i += r
        else:
            i = j
    if n - bp_start:
        pos = _emit_bitpacked(out, pos, values, bp_start, n - bp_start, width)
    return out[:pos].copy()


@njit(**_JIT)
def rle_decode(buf, pos, end, width, count):
    out = np.empty(count, np.int32)
    got = 0
    vbytes = (width + 7) // 8
    while got < count:
        if pos >= end:
            raise ValueError("RLE data exhausted before all values were read")
        header, pos = _get_uvarint(buf, pos)
        if header & np.uint64(1):
            groups = np.int64(header >> np.uint64(1))
            n = groups * 8
            if n > count - got:
                n = count - got
            if pos + groups * width > end and width > 0:
                # trailing groups may be truncated when they only carry padding
                if pos + (n * width + 7) // 8 > end:
                    raise ValueError("truncated bit-packed run")
            bitpos = pos * 8
            if width == 0:
                for k in range(n):
                    out[got + k] = 0
            else:
                for k in range(n):
                    out[got + k] = np.int32(_unpack(buf, bitpos, width))
                    bitpos += width
            got += n
            pos += groups * width
        else:
            run = np.int64(header >> np.uint64(1))
            if pos + vbytes > end:
                raise ValueError("truncated RLE run")
            v = np.uint64(0)
            for k in range(vbytes):
                v |= np.uint64(buf[pos + k]) << np.uint64(8 * k)
            pos += vbytes
            if run > count - got:
                run = count - got
            vi = np.int32(v)
            for k in range(run):
                out[got + k] = vi
            got += run
    return out


# -- delta binary packed -----------------------------------------------------

BLOCK = 128
MINIBLOCKS = 4
MINI = BLOCK // MINIBLOCKS


@njit(**_JIT)
def dbp_encode(values, is32):
    n = values.size
    out = np.zeros(64 + (n // BLOCK + 1) * (MINIBLOCKS + 10 + BLOCK * 8), np.uint8)
    pos = _put_uvarint(out, 0, BLOCK)
    pos = _put_uvarint(out, pos, MINIBLOCKS)
    pos = _put_uvarint(out, pos, n)
    first = np.int64(values[0]) if n else np.int64(0)
    pos = _put_zigzag(out, pos, first)
    deltas = np.empty(BLOCK, np.uint64)
    i = 1
    while i < n:
        m = n - i
        if m > BLOCK:
            m = BLOCK
        min_d = np.int64(0)
        for k in range(m):
            d = np.uint64(np.int64(values[i + k])) - np.uint64(np.int64(values[i + k - 1]))
            if is32:
                d &= MASK32
                sd = np.int64(d)
                if sd >= 2147483648:
                    sd -= 4294967296
            else:
                sd = np.int64(d)
            deltas[k] = np.uint64(sd)
            if k == 0 or sd < min_d:
                min_d = sd
        pos = _put_zigzag(out, pos, min_d)
        wpos = pos
        pos += MINIBLOCKS
        needed = (m + MINI - 1) // MINI
        for mb in range(MINIBLOCKS):
            if mb >= needed:
                out[wpos + mb] = 0
                continue
            lo = mb * MINI
            hi = lo + MINI
            if hi > m:
                hi = m
            mx = np.uint64(0)
            for k in range(lo, hi):
                a = deltas[k] - np.uint64(min_d)
                if is32:
                    a &= MASK32
                deltas[k] = a
                if a > mx:
                    mx = a
            w = bit_width(mx)
            out[wpos + mb] = w
            nbytes = MINI * w // 8
            for k in range(nbytes):
                out[pos + k] = 0
            bitpos = pos * 8
            for k in range(lo, hi):
                bitpos = _pack(out, bitpos, deltas[k], w)
            pos += nbytes
        i += m
    return out[:pos].copy()


@njit(**_JIT)
def dbp_decode(buf, pos, is32):
    block, pos = _get_uvarint(buf, pos)
    nmini, pos = _get_uvarint(buf, pos)
    count, pos = _get_uvarint(buf, pos)
    first, pos = _get_zigzag(buf, pos)
    block = np.int64(block)
    nmini = np.int64(nmini)
    count = np.int64(count)
    if nmini == 0 or block % nmini != 0:
        raise ValueError("bad delta block header")
    mini = block // nmini
    if mini % 32 != 0:
        raise ValueError("miniblock size must be a multiple of 32")
    out = np.empty(count, np.int64)
    if count == 0:
        return out, pos
    out[0] = first
    got = 1
    last = np.uint64(first)
    while got < count:
        min_d, pos = _get_zigzag(buf, pos)
        wpos = pos
        pos += nmini
        if pos > buf.size:
            raise ValueError("truncated delta block")
        for mb in range(nmini):
            if got >= count:
                break
            w = np.int64(buf[wpos + mb])
            if w > 64 or (is32 and w > 32):
                raise ValueError("delta bit width out of range")
            n = mini
            if n > count - got:
                n = count - got
            if pos + (n * w + 7) // 8 > buf.size:
                raise ValueError("truncated delta miniblock")
            bitpos = pos * 8
            for k in range(n):
                a = _unpack(buf, bitpos, w) if w else np.uint64(0)
                bitpos += w
                last = last + np.uint64(min_d) + a
                if is32:
                    last &= MASK32
                    sv = np.int64(last)
                    if sv >= 2147483648:
                        sv -= 4294967296
                    out[got] = sv
                else:
                    out[got] = np.int64(last)
                got += 1
            pos += mini * w // 8
    return out, pos


# -- hashing -----------------------------------------------------------------


@njit(**_JIT)
def _mix64(x):
    x ^= x >> np.uint64(33)
    x *= np.uint64(0xFF51AFD7ED558CCD)
    x ^= x >> np.uint64(33)
    x *= np.uint64(0xC4CEB9FE1A85EC53)
    x ^= x >> np.uint64(33)
    return x


@njit(**_JIT)
def _table_size(n):
    cap = 16
    while cap < 2 * n:
        cap <<= 1
    return cap


@njit(**_JIT)
def factorize_u64(keys, width, limit_bytes):
    """First-occurrence dictionary codes; gives up once the plain dictionary
    would exceed ``limit_bytes``.  Returns (codes, first_index, ok)."""
    n = keys.size
    cap_n = n
    if width > 0 and limit_bytes // width + 1 < cap_n:
        cap_n = limit_bytes // width + 1
    cap = _table_size(cap_n)
    mask = np.uint64(cap - 1)
    table = np.full(cap, -1, np.int64)
    codes = np.empty(n, np.int32)
    firsts = np.empty(cap_n + 1, np.int64)
    k = 0
    size = 0
    for i in range(n):
        key = keys[i]
        h = _mix64(key) & mask
        while True:
            slot = table[h]
            if slot < 0:
                size += width
                if size > limit_bytes:
                    return codes, firsts[:0], False
                table[h] = k
                firsts[k] = i
                codes[i] = k
                k += 1
                break
            if keys[firsts[slot]] == key:
                codes[i] = slot
                break
            h = (h + np.uint64(1)) & mask
    return codes, firsts[:k].copy(), True


@njit(**_JIT)
def _bytes_equal(data, a0, a1, b0, b1):
    if a1 - a0 != b1 - b0:
        return False
    for k in range(a1 - a0):
        if data[a0 + k] != data[b0 + k]:
            return False
    return True


@njit(**_JIT)
def factorize_bytes(offsets, data, limit_bytes):
    n = offsets.size - 1
    cap_n = n
    if limit_bytes // 4 + 1 < cap_n:
        cap_n = limit_bytes // 4 + 1
    cap = _table_size(cap_n)
    mask = np.uint64(cap - 1)
    table = np.full(cap, -1, np.int64)
    codes = np.empty(n, np.int32)
    firsts = np.empty(cap_n + 1, np.int64)
    k = 0
    size = 0
    for i in range(n):
        a0 = offsets[i]
        a1 = offsets[i + 1]
        h = np.uint64(0xCBF29CE484222325)
        for p in range(a0, a1):
            h = (h ^ np.uint64(data[p])) * np.uint64(0x100000001B3)
        h = _mix64(h) & mask
        while True:
            slot = table[h]
            if slot < 0:
                size += 4 + (a1 - a0)
                if size > limit_bytes:
                    return codes, firsts[:0], False
                table[h] = k
                firsts[k] = i
                codes[i] = k
                k += 1
                break
            f = firsts[slot]
            if _bytes_equal(data, offsets[f], offsets[f + 1], a0, a1):
                codes[i] = slot
                break
            h = (h + np.uint64(1)) & mask
    return codes, firsts[:k].copy(), True


# -- byte arrays -------------------------------------------------------------


@njit(**_JIT)
def take_bytes(offsets, data, idx):
    """Gather ``idx`` rows of a (offsets, data) byte-array column."""
    m = idx.size
    new_off = np.empty(m + 1, np.int64)
    new_off[0] = 0
    for j in range(m):
        i = idx[j]
        new_off[j + 1] = new_off[j] + offsets[i + 1] - offsets[i]
    out = np.empty(new_off[m], np.uint8)
    for j in range(m):
        i = idx[j]
        s = offsets[i]
        d = new_off[j]
        for k in range(offsets[i + 1] - s):
            out[d + k] = data[s + k]
    return new_off, out


@njit(**_JIT)
def plain_bytes_encode(offsets, data):
    n = offsets.size - 1
    total = offsets[n] - offsets[0]
    out = np.empty(4 * n + total, np.uint8)
    pos = 0
    for i in range(n):
        s = offsets[i]
        ln = offsets[i + 1] - s
        out[pos] = ln & 0xFF
        out[pos + 1] = (ln >> 8) & 0xFF
        out[pos + 2] = (ln >> 16) & 0xFF
        out[pos + 3] = (ln >> 24) & 0xFF
        pos += 4
        for k in range(ln):
            out[pos + k] = data[s + k]
        pos += ln
    return out


@njit(**_JIT)
def plain_bytes_decode(buf, pos, end, count):
    offsets = np.empty(count + 1, np.int64)
    offsets[0] = 0
    p = pos
    for i in range(count):
        if p + 4 > end:
            raise ValueError("truncated PLAIN byte array")
        ln = (np.int64(buf[p]) | (np.int64(buf[p + 1]) << 8)
              | (np.int64(buf[p + 2]) << 16) | (np.int64(buf[p + 3]) << 24))
        p += 4 + ln
        if p > end:
            raise ValueError("truncated PLAIN byte array")
        offsets[i + 1] = offsets[i] + ln
    data = np.empty(offsets[count], np.uint8)
    p = pos
    for i in range(count):
        ln = offsets[i + 1] - offsets[i]
        p += 4
        d = offsets[i]
        for k in range(ln):
            data[d + k] = buf[p + k]
        p += ln
    return offsets, data, p


@njit(**_JIT)
def prefix_lengths(offsets, data):
    n = offsets.size - 1
    out = np.zeros(n, np.int64)
    for i in range(1, n):
        a = offsets[i - 1]
        la = offsets[i] - a
        b = offsets[i]
        lb = offsets[i + 1] - b
        m = la if la < lb else lb
        k = 0
        while k < m and data[a + k] == data[b + k]:
            k += 1
        out[i] = k
    return out


@njit(**_JIT)
def suffixes(offsets, data, prefixes):
    n = offsets.size - 1
    new_off = np.empty(n + 1, np.int64)
    new_off[0] = 0
    for i in range(n):
        new_off[i + 1] = new_off[i] + (offsets[i + 1] - offsets[i]) - prefixes[i]
    out = np.empty(new_off[n], np.uint8)
    for i in range(n):
        s = offsets[i] + prefixes[i]
        d = new_off[i]
        for k in range(new_off[i + 1] - d):
            out[d + k] = data[s + k]
    return new_off, out


@njit(**_JIT)
def unprefix(prefixes, suf_offsets, suf_data):
    n = prefixes.size
    offsets = np.empty(n + 1, np.int64)
    offsets[0] = 0
    for i in range(n):
        p = prefixes[i]
        if p < 0 or (i == 0 and p != 0) or (i > 0 and p > offsets[i] - offsets[i - 1]):
            raise ValueError("invalid DELTA_BYTE_ARRAY prefix length")
        offsets[i + 1] = offsets[i] + p + suf_offsets[i + 1] - suf_offsets[i]
    data = np.empty(offsets[n], np.uint8)
    for i in range(n):
        d = offsets[i]
        p = prefixes[i]
        if p:
            s = offsets[i - 1]
            for k in range(p):
                data[d + k] = data[s + k]
        s = suf_offsets[i]
        for k in range(suf_offsets[i + 1] - s):
            data[d + p + k] = suf_data[s + k]
    return offsets, data


@njit(**_JIT)
def _bytes_less(data, a0, a1, b0, b1):
    la = a1 - a0
    lb = b1 - b0
    m = la if la < lb else lb
    for k in range(m):
        x = data[a0 + k]
        y = data[b0 + k]
        if x != y:
            return x < y
    return la < lb


@njit(**_JIT)
def bytes_minmax(offsets, data):
    n = offsets.size - 1
    lo = 0
    hi = 0
    for i in range(1, n):
        if _bytes_less(data, offsets[i], offsets[i + 1], offsets[lo], offsets[lo + 1]):
            lo = i
        if _bytes_less(data, offsets[hi], offsets[hi + 1], offsets[i], offsets[i + 1]):
            hi = i
    return lo, hi


@njit(**_JIT)
def bytes_first_mismatch(off_a, data_a, off_b, data_b):
    n = off_a.size - 1
    for i in range(n):
        la = off_a[i + 1] - off_a[i]
        if la != off_b[i + 1] - off_b[i]:
            return i
        sa = off_a[i]
        sb = off_b[i]
        for k in range(la):
            if data_a[sa + k] != data_b[sb + k]:
                return i
    return -1
