"""Online interactive operations over additive shares.

Every operation here is data-oblivious: the number, order, and size of the
messages it produces depend only on vector widths, never on share values.
All primitives are vectorized; element-wise steps open their masked values
in one round per internal layer, so a width-w call costs the same rounds as
a width-1 call.

Protocol notes (semi-honest, trusted dealer):
  multiplication   Beaver: open (x-a, y-b), z = c + d*b + e*a + d*e.
  truncation       probabilistic: open x + 2^(lt-1) + r, drop the masked low
                   part; error is one ulp (the unknown carry bit).
  comparison       sign extraction via masked opening plus a bitwise
                   borrow-chain on dealer bits (statistical kappa = 40).
  division         normalize divisor to [0.5, 1) via its shared bit-length,
                   reciprocal by Newton iteration, shared power-of-two
                   rescale folded into the final truncation.
  logarithm        same normalization, then a fixed degree-7 polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ring import FRAC_BITS, KAPPA, MAG_BITS, Q, pow2_inv
from .runtime import PartyCtx

# Comparison operates on signed differences |x - y| < 2^(k+f).
CMP_ELL = MAG_BITS + FRAC_BITS + 1
# Default truncation range covers products of standard values (scale 2f).
TRUNC_ELL = 2 * FRAC_BITS + MAG_BITS + 1
# Bit width of positive values fed to bit decomposition (division, log).
DEC_ELL = MAG_BITS + FRAC_BITS
# Guard scale for reciprocal / polynomial internals.
GUARD = 22

_NR_ITERS = 5

# Degree-7 polynomial for log2 on [0.5, 1), monomial basis, c0 first.
_LOG2_COEFFS = (
    -4.2358549111088575,
    14.172271944167678,
    -29.575535701919193,
    45.32716212804387,
    -46.49451090275522,
    30.2690684195843,
    -11.310965895769186,
    1.8483651190181263,
)


class ScaleMismatchError(ValueError):
    pass


class EmptyVectorError(ValueError):
    pass


@dataclass(slots=True)
class SharedVector:
    """One party's share row of a logical vector (common scale and session)."""

    values: list[int]
    scale: int = FRAC_BITS
    session: str = ""

    def __len__(self) -> int:
        return len(self.values)

    def copy(self) -> "SharedVector":
        return SharedVector(list(self.values), self.scale, self.session)


SharedBit = SharedVector  # reconstruction in {0, 1}, scale 0


def _check_same(a: SharedVector, b: SharedVector) -> None:
    if a.scale != b.scale:
        raise ScaleMismatchError(f"scale {a.scale} != {b.scale}")
    if len(a) != len(b):
        raise ValueError(f"width {len(a)} != {len(b)}")


# ---------------------------------------------------------------------------
# local (non-interactive) operations
# ---------------------------------------------------------------------------

def sv_add(a: SharedVector, b: SharedVector) -> SharedVector:
    _check_same(a, b)
    return SharedVector([(x + y) % Q for x, y in zip(a.values, b.values)], a.scale, a.session)


def sv_sub(a: SharedVector, b: SharedVector) -> SharedVector:
    _check_same(a, b)
    return SharedVector([(x - y) % Q for x, y in zip(a.values, b.values)], a.scale, a.session)


def sv_neg(a: SharedVector) -> SharedVector:
    return SharedVector([-x % Q for x in a.values], a.scale, a.session)


def sv_add_public(ctx: PartyCtx, a: SharedVector, consts: list[int]) -> SharedVector:
    """Add public field constants (party 0 carries them)."""
    if ctx.party_id != 0:
        return a.copy()
    return SharedVector([(x + c) % Q for x, c in zip(a.values, consts)], a.scale, a.session)


def sv_mul_public(a: SharedVector, c: int, scale_delta: int = 0) -> SharedVector:
    return SharedVector([x * c % Q for x in a.values], a.scale + scale_delta, a.session)


def sv_sum(a: SharedVector) -> SharedVector:
    return SharedVector([sum(a.values) % Q], a.scale, a.session)


def sv_concat(parts: list[SharedVector]) -> SharedVector:
    scale = parts[0].scale
    if any(p.scale != scale for p in parts):
        raise ScaleMismatchError("concat requires a common scale")
    vals: list[int] = []
    for p in parts:
        vals.extend(p.values)
    return SharedVector(vals, scale, parts[0].session)


def sv_slice(a: SharedVector, start: int, stop: int) -> SharedVector:
    return SharedVector(a.values[start:stop], a.scale, a.session)


def sv_repeat(a: SharedVector, index: int, count: int) -> SharedVector:
    """Broadcast one element of the vector to the given width."""
    return SharedVector([a.values[index]] * count, a.scale, a.session)


def sv_const(ctx: PartyCtx, consts: list[int], scale: int) -> SharedVector:
    """Trivial share of public constants (party 0 holds them)."""
    return SharedVector(ctx.public_share(consts), scale)


def sv_open(ctx: PartyCtx, a: SharedVector) -> list[int]:
    return ctx.open_vec(a.values)


# ---------------------------------------------------------------------------
# core interactive primitives (unmetered; callers account for op kinds)
# ---------------------------------------------------------------------------

def _mul_raw(ctx: PartyCtx, xs: list[int], ys: list[int]) -> list[int]:
    """Beaver multiplication, one batched opening round for the whole width."""
    w = len(xs)
    triples = ctx.take_triples(w)
    masked = [0] * (2 * w)
    for i in range(w):
        a, b, _c = triples[i]
        masked[i] = (xs[i] - a) % Q
        masked[w + i] = (ys[i] - b) % Q
    opened = ctx.open_vec(masked)
    first = ctx.party_id == 0
    out = [0] * w
    for i in range(w):
        a, b, c = triples[i]
        d = opened[i]
        e = opened[w + i]
        z = (c + d * b + e * a) % Q
        if first:
            z = (z + d * e) % Q
        out[i] = z
    return out


def _compose_random(ctx: PartyCtx, width: int, nbits: int) -> list[int]:
    """Shares of uniform values in [0, 2^nbits), one per element."""
    flat = ctx.take_bits(width * nbits)
    out = [0] * width
    for j in range(width):
        base = j * nbits
        acc = 0
        for i in range(nbits):
            acc += flat[base + i] << i
        out[j] = acc % Q
    return out


def _random_bit_columns(ctx: PartyCtx, width: int, nbits: int) -> tuple[list[list[int]], list[int]]:
    """Bit-share columns plus the composed value shares r = sum 2^i b_i."""
    flat = ctx.take_bits(width * nbits)
    cols = [[0] * width for _ in range(nbits)]
    composed = [0] * width
    for j in range(width):
        base = j * nbits
        acc = 0
        for i in range(nbits):
            v = flat[base + i]
            cols[i][j] = v
            acc += v << i
        composed[j] = acc % Q
    return cols, composed


def _trunc_raw(ctx: PartyCtx, xs: list[int], m: int, lt: int) -> list[int]:
    """Probabilistic truncation by 2^m for values in (-2^(lt-1), 2^(lt-1))."""
    if lt + KAPPA > 126:
        raise ValueError(f"truncation range too wide for the field: lt={lt}")
    w = len(xs)
    r_low = _compose_random(ctx, w, m)
    r_high = _compose_random(ctx, w, lt + KAPPA - m)
    offset = 1 << (lt - 1)
    first = ctx.party_id == 0
    masked = [0] * w
    for j in range(w):
        v = (xs[j] + r_low[j] + (r_high[j] << m)) % Q
        if first:
            v = (v + offset) % Q
        masked[j] = v
    opened = ctx.open_vec(masked)
    inv = pow2_inv(m)
    mask_m = (1 << m) - 1
    out_off = offset >> m
    out = [0] * w
    for j in range(w):
        c_low = opened[j] & mask_m
        t = (xs[j] + r_low[j]) % Q
        if first:
            t = (t + offset - c_low) % Q
        t = t * inv % Q
        if first:
            t = (t - out_off) % Q
        out[j] = t
    return out


def _bitlt_pub(ctx: PartyCtx, c_pub: list[int], cols: list[list[int]]) -> list[int]:
    """Borrow bits [c < r] for public c against bit-shared r (per element)."""
    m = len(cols)
    w = len(c_pub)
    one = 1 if ctx.party_id == 0 else 0
    # xor of public and shared bits, then 1 - xor, all local
    not_x = [[0] * w for _ in range(m)]
    for i in range(m):
        col = cols[i]
        for j in range(w):
            if (c_pub[j] >> i) & 1:
                not_x[i][j] = col[j]                # 1 - (1 - r) = r
            else:
                not_x[i][j] = (one - col[j]) % Q    # 1 - r
    # prefix products from the most significant bit: f_i = prod_{t>=i}(1 - x_t)
    fs = [None] * (m + 1)
    fs[m] = [one] * w
    fs[m - 1] = not_x[m - 1]
    for i in range(m - 2, -1, -1):
        fs[i] = _mul_raw(ctx, fs[i + 1], not_x[i])
    out = [0] * w
    for j in range(w):
        acc = 0
        cj = c_pub[j]
        for i in range(m):
            if not (cj >> i) & 1:
                acc += fs[i + 1][j] - fs[i][j]
        out[j] = acc % Q
    return out


def _ltz_raw(ctx: PartyCtx, xs: list[int], ell: int = CMP_ELL) -> list[int]:
    """Shares of [x < 0] for signed values |x| < 2^(ell-1)."""
    w = len(xs)
    m = ell - 1
    cols, r_low = _random_bit_columns(ctx, w, m)
    r_high = _compose_random(ctx, w, ell + KAPPA - m)
    offset = 1 << (ell - 1)
    first = ctx.party_id == 0
    masked = [0] * w
    for j in range(w):
        v = (xs[j] + r_low[j] + (r_high[j] << m)) % Q
        if first:
            v = (v + offset) % Q
        masked[j] = v
    opened = ctx.open_vec(masked)
    mask_m = (1 << m) - 1
    c_low = [v & mask_m for v in opened]
    borrow = _bitlt_pub(ctx, c_low, cols)
    inv = pow2_inv(m)
    out = [0] * w
    one = 1 if first else 0
    for j in range(w):
        # low part of x + offset, then its high bit; x < 0 iff the bit is 0
        b_low = (-r_low[j] + (borrow[j] << m)) % Q
        if first:
            b_low = (b_low + c_low[j]) % Q
        b_high = ((xs[j] - b_low + (offset if first else 0)) % Q) * inv % Q
        out[j] = (one - b_high) % Q
    return out


def _bitdec_raw(ctx: PartyCtx, xs: list[int], ell: int = DEC_ELL) -> list[list[int]]:
    """Bit-share columns of non-negative values x < 2^ell (LSB first)."""
    w = len(xs)
    cols, r_low = _random_bit_columns(ctx, w, ell)
    r_high = _compose_random(ctx, w, KAPPA)
    masked = [(xs[j] + r_low[j] + (r_high[j] << ell)) % Q for j in range(w)]
    opened = ctx.open_vec(masked)
    mask = (1 << ell) - 1
    c_low = [v & mask for v in opened]
    one = 1 if ctx.party_id == 0 else 0
    # x = c_low - r mod 2^ell, computed as c_low + NOT(r) + 1 with a carry chain
    out_cols: list[list[int]] = []
    carry: list[int] | None = None  # None means public carry-in of 1
    for i in range(ell):
        s_i = [(one - cols[i][j]) % Q for j in range(w)]
        if carry is None:
            prod = s_i  # s * 1
            carry_vals = [one] * w
        else:
            prod = _mul_raw(ctx, s_i, carry)
            carry_vals = carry
        sum_i = [0] * w
        next_carry = [0] * w
        for j in range(w):
            s = s_i[j]
            cy = carry_vals[j]
            p = prod[j]
            if (c_low[j] >> i) & 1:
                sum_i[j] = (one - (s + cy - 2 * p)) % Q
                next_carry[j] = (s + cy - p) % Q
            else:
                sum_i[j] = (s + cy - 2 * p) % Q
                next_carry[j] = p
        out_cols.append(sum_i)
        carry = next_carry
    return out_cols


def _msb_indicators(ctx: PartyCtx, cols: list[list[int]]) -> list[list[int]]:
    """m_i = [bit-length == i + 1] from bit columns, via a suffix-OR chain."""
    ell = len(cols)
    w = len(cols[0])
    ors = [None] * ell
    ors[ell - 1] = cols[ell - 1]
    for i in range(ell - 2, -1, -1):
        prod = _mul_raw(ctx, ors[i + 1], cols[i])
        ors[i] = [(ors[i + 1][j] + cols[i][j] - prod[j]) % Q for j in range(w)]
    ms = []
    for i in range(ell):
        if i == ell - 1:
            ms.append(list(cols[ell - 1]))
        else:
            ms.append([(ors[i][j] - ors[i + 1][j]) % Q for j in range(w)])
    return ms


def _weighted_sum(ms: list[list[int]], weights: list[int], w: int) -> list[int]:
    out = [0] * w
    for i, col in enumerate(ms):
        wt = weights[i]
        if wt == 0:
            continue
        for j in range(w):
            out[j] = (out[j] + wt * col[j]) % Q
    return out


def _normalize(ctx: PartyCtx, xs: list[int]) -> tuple[list[int], list[list[int]]]:
    """Map positive x to xh in [0.5, 1) at the guard scale; also return m_i.

    xh = x * 2^(ell-1-i) truncated to GUARD bits, where i is the shared MSB
    position.  The caller folds the exponent back with the m_i columns.
    """
    w = len(xs)
    cols = _bitdec_raw(ctx, xs, DEC_ELL)
    ms = _msb_indicators(ctx, cols)
    tn = _weighted_sum(ms, [1 << (DEC_ELL - 1 - i) for i in range(DEC_ELL)], w)
    xh_full = _mul_raw(ctx, xs, tn)           # in [2^(ell-1), 2^ell)
    xh = _trunc_raw(ctx, xh_full, DEC_ELL - GUARD, DEC_ELL + 1)
    return xh, ms


# ---------------------------------------------------------------------------
# metered operations (the public protocol surface)
# ---------------------------------------------------------------------------

def sec_add(a: SharedVector, b: SharedVector) -> SharedVector:
    """Non-interactive addition (zero messages)."""
    return sv_add(a, b)


def sec_mul(ctx: PartyCtx, a: SharedVector, b: SharedVector) -> SharedVector:
    """Secure multiplication; one Beaver triple and one round per element."""
    if len(a) != len(b):
        raise ValueError("width mismatch")
    ctx.count_op("mul", len(a))
    return SharedVector(_mul_raw(ctx, a.values, b.values), a.scale + b.scale, a.session)


def sec_trunc(ctx: PartyCtx, a: SharedVector, m: int | None = None,
              lt: int = TRUNC_ELL) -> SharedVector:
    """Truncate by 2^m (default: back to the standard scale); error <= 1 ulp."""
    if m is None:
        m = a.scale - FRAC_BITS
    if m <= 0:
        raise ValueError("truncation amount must be positive")
    ctx.count_op("trunc", len(a))
    return SharedVector(_trunc_raw(ctx, a.values, m, lt), a.scale - m, a.session)


def sec_lt(ctx: PartyCtx, a: SharedVector, b: SharedVector,
           ell: int = CMP_ELL) -> SharedVector:
    """Shares of [a < b] with signed semantics; requires |a - b| < 2^(ell-1)."""
    _check_same(a, b)
    ctx.count_op("cmp", len(a))
    diff = [(x - y) % Q for x, y in zip(a.values, b.values)]
    return SharedVector(_ltz_raw(ctx, diff, ell), 0, a.session)


def sec_le(ctx: PartyCtx, a: SharedVector, b: SharedVector,
           ell: int = CMP_ELL) -> SharedVector:
    """Shares of [a <= b] = 1 - [b < a]; still a single comparison."""
    _check_same(a, b)
    ctx.count_op("cmp", len(a))
    diff = [(y - x) % Q for x, y in zip(a.values, b.values)]
    lt = _ltz_raw(ctx, diff, ell)
    one = 1 if ctx.party_id == 0 else 0
    return SharedVector([(one - v) % Q for v in lt], 0, a.session)


def sec_select(ctx: PartyCtx, bit: SharedVector, x: SharedVector,
               y: SharedVector) -> SharedVector:
    """z = x if bit else y, oblivious:  b*(x - y) + y."""
    _check_same(x, y)
    if len(bit) != len(x):
        raise ValueError("width mismatch")
    ctx.count_op("select", len(bit))
    diff = [(a - b) % Q for a, b in zip(x.values, y.values)]
    prod = _mul_raw(ctx, bit.values, diff)
    return SharedVector([(p + b) % Q for p, b in zip(prod, y.values)], x.scale, x.session)


def _swap_rows(ctx: PartyCtx, bits: list[int],
               rows: list[tuple[list[int], list[int]]]) -> list[tuple[list[int], list[int]]]:
    """Conditionally swap (x, y) pairs across several aligned rows.

    One 'select' per control bit regardless of row count; the complementary
    side is x + y - chosen (local).
    """
    ctx.count_op("select", len(bits))
    w = len(bits)
    big_bits: list[int] = []
    big_diff: list[int] = []
    for xs, ys in rows:
        big_bits.extend(bits)
        big_diff.extend((x - y) % Q for x, y in zip(xs, ys))
    prod = _mul_raw(ctx, big_bits, big_diff)
    out = []
    for r, (xs, ys) in enumerate(rows):
        base = r * w
        lo = [(prod[base + j] + ys[j]) % Q for j in range(w)]       # b ? x : y
        hi = [(xs[j] + ys[j] - lo[j]) % Q for j in range(w)]        # the other one
        out.append((lo, hi))
    return out


def sec_min_argmin(ctx: PartyCtx, v: SharedVector) -> tuple[SharedVector, SharedVector]:
    """(min value, index of first minimum); len-1 comparisons and selections."""
    if len(v) == 0:
        raise EmptyVectorError("min of empty vector")
    one = 1 if ctx.party_id == 0 else 0
    cur = [v.values[0]]
    cur_idx = [0]
    for j in range(1, len(v)):
        cand = SharedVector([v.values[j]], v.scale, v.session)
        b = sec_lt(ctx, cand, SharedVector(cur, v.scale, v.session))
        (lo_val, _), (lo_idx, _) = _swap_rows(
            ctx, b.values,
            [(cand.values, cur), ([(j * one) % Q], cur_idx)],
        )
        cur = lo_val
        cur_idx = lo_idx
    return (SharedVector(cur, v.scale, v.session), SharedVector(cur_idx, 0, v.session))


def sec_min(ctx: PartyCtx, v: SharedVector) -> SharedVector:
    """Minimum only; len-1 comparisons and len-1 selections."""
    if len(v) == 0:
        raise EmptyVectorError("min of empty vector")
    cur = SharedVector([v.values[0]], v.scale, v.session)
    for j in range(1, len(v)):
        cand = SharedVector([v.values[j]], v.scale, v.session)
        b = sec_lt(ctx, cand, cur)
        cur = sec_select(ctx, b, cand, cur)
    return cur


def sec_max(ctx: PartyCtx, v: SharedVector) -> SharedVector:
    if len(v) == 0:
        raise EmptyVectorError("max of empty vector")
    cur = SharedVector([v.values[0]], v.scale, v.session)
    for j in range(1, len(v)):
        cand = SharedVector([v.values[j]], v.scale, v.session)
        b = sec_lt(ctx, cur, cand)
        cur = sec_select(ctx, b, cand, cur)
    return cur


def sec_topk(ctx: PartyCtx, v: SharedVector, k: int,
             ids: SharedVector | None = None, return_values: bool = False):
    """Index shares of the k largest values, descending, ties to lower index.

    Selection by k bubble passes over (value, index) pairs: strict-less
    comparisons leave equal neighbours in place, so earlier indices win.
    """
    length = len(v)
    if not 1 <= k <= length:
        raise ValueError(f"k={k} out of range for length {length}")
    if ids is None:
        one = 1 if ctx.party_id == 0 else 0
        ids = SharedVector([(j * one) % Q for j in range(length)], 0, v.session)
    vals = list(v.values)
    idx = list(ids.values)
    for p in range(k):
        for j in range(length - 1, p, -1):
            left = SharedVector([vals[j - 1]], v.scale, v.session)
            right = SharedVector([vals[j]], v.scale, v.session)
            b = sec_lt(ctx, left, right)  # swap only when strictly larger on the right
            (lv, rv), (li, ri) = _swap_rows(
                ctx, b.values,
                [([vals[j]], [vals[j - 1]]), ([idx[j]], [idx[j - 1]])],
            )
            vals[j - 1], vals[j] = lv[0], rv[0]
            idx[j - 1], idx[j] = li[0], ri[0]
    top_ids = SharedVector(idx[:k], 0, v.session)
    if return_values:
        return top_ids, SharedVector(vals[:k], v.scale, v.session)
    return top_ids


# ---------------------------------------------------------------------------
# oblivious sorting network (Batcher odd-even mergesort)
# ---------------------------------------------------------------------------

def batcher_layers(size: int) -> list[list[tuple[int, int]]]:
    """Compare-exchange layers for a power-of-two input size."""
    if size & (size - 1):
        raise ValueError("size must be a power of two")
    layers = []
    span = 1
    while span < size:
        step = span
        while step >= 1:
            pairs = []
            for block in range(0, size, 2 * span):
                if step == span:
                    for c in range(span):
                        pairs.append((block + c, block + c + span))
                else:
                    for c in range(span - step):
                        i = block + step + 2 * step * (c // step) + (c % step)
                        pairs.append((i, i + step))
            layers.append(pairs)
            step //= 2
        span *= 2
    return layers


def batcher_gate_count(size: int) -> int:
    padded = 1
    while padded < size:
        padded *= 2
    return sum(len(layer) for layer in batcher_layers(padded)) if padded > 1 else 0


# Sentinel key for padding: above any valid encoded value, still comparable.
SORT_SENTINEL = (1 << (MAG_BITS + FRAC_BITS)) - 1
# sentinel minus a negative key can reach 2^61, one bit past the default range
SORT_CMP_ELL = CMP_ELL + 1


def oblivious_sort(ctx: PartyCtx, keys: SharedVector,
                   payloads: list[SharedVector]) -> tuple[SharedVector, list[SharedVector]]:
    """Sort keys ascending and permute payloads consistently.

    Data-independent: pads to the next power of two with maximal sentinel
    keys and zero payloads, runs the full Batcher network, then strips the
    padding (sentinels always sort to the tail).
    """
    n = len(keys)
    for p in payloads:
        if len(p) != n:
            raise ValueError("payload width mismatch")
    if n == 0:
        return keys.copy(), [p.copy() for p in payloads]
    padded = 1
    while padded < n:
        padded *= 2
    pad = padded - n
    one = 1 if ctx.party_id == 0 else 0
    key_vals = list(keys.values) + [(SORT_SENTINEL * one) % Q] * pad
    rows = [list(p.values) + [0] * pad for p in payloads]
    for layer in batcher_layers(padded):
        lo_idx = [i for i, _ in layer]
        hi_idx = [j for _, j in layer]
        lo_keys = SharedVector([key_vals[i] for i in lo_idx], keys.scale, keys.session)
        hi_keys = SharedVector([key_vals[j] for j in hi_idx], keys.scale, keys.session)
        b = sec_lt(ctx, hi_keys, lo_keys, ell=SORT_CMP_ELL)  # out of order -> swap
        swap_args = [(hi_keys.values, lo_keys.values)]
        for row in rows:
            swap_args.append(([row[j] for j in hi_idx], [row[i] for i in lo_idx]))
        swapped = _swap_rows(ctx, b.values, swap_args)
        new_lo, new_hi = swapped[0]
        for pos, (i, j) in enumerate(layer):
            key_vals[i] = new_lo[pos]
            key_vals[j] = new_hi[pos]
        for r, row in enumerate(rows):
            new_lo, new_hi = swapped[r + 1]
            for pos, (i, j) in enumerate(layer):
                row[i] = new_lo[pos]
                row[j] = new_hi[pos]
    sorted_keys = SharedVector(key_vals[:n], keys.scale, keys.session)
    sorted_payloads = [SharedVector(row[:n], p.scale, p.session)
                       for row, p in zip(rows, payloads)]
    return sorted_keys, sorted_payloads


# ---------------------------------------------------------------------------
# division and logarithm
# ---------------------------------------------------------------------------

def sec_div(ctx: PartyCtx, x: SharedVector, y: SharedVector,
            out_scale: int = FRAC_BITS) -> SharedVector:
    """x / y for y in [2^-f, 2^20) with |x| and |x / y| below 2^20.

    The divisor is normalized to [0.5, 1) through its shared bit length,
    inverted by Newton iteration at the guard scale, and the power-of-two
    rescale is folded into the final truncation (public amount).
    """
    if len(x) != len(y):
        raise ValueError("width mismatch")
    w = len(x)
    ctx.count_op("div", w)
    yh, ms = _normalize(ctx, y.values)
    one = 1 if ctx.party_id == 0 else 0
    # initial estimate 3 - 2*yh (integer coefficients; |1 - yh*w0| <= 1/8)
    c0 = 3 << GUARD
    rec = [((c0 * one) - 2 * yh[j]) % Q for j in range(w)]
    two = 2 << GUARD
    for _ in range(_NR_ITERS):
        t = _mul_raw(ctx, yh, rec)
        t = _trunc_raw(ctx, t, GUARD, 2 * GUARD + 10)
        corr = [((two * one) - t[j]) % Q for j in range(w)]
        rec = _mul_raw(ctx, rec, corr)
        rec = _trunc_raw(ctx, rec, GUARD, 2 * GUARD + 10)
    # u = x * (1 / yh) at scale x.scale + GUARD
    u = _mul_raw(ctx, x.values, rec)
    t1 = _trunc_raw(ctx, u, GUARD - 4, 66)          # scale x.scale + 4
    # fold 2^(y.scale - 1 - i) into one shared power, all exponents >= 1
    pp = _weighted_sum(ms, [1 << max(0, 20 + y.scale - i) for i in range(DEC_ELL)], w)
    v = _mul_raw(ctx, t1, pp)
    out = _trunc_raw(ctx, v, x.scale + 25 - out_scale, 86)
    return SharedVector(out, out_scale, x.session)


def sec_div_checked(ctx: PartyCtx, x: SharedVector, y: SharedVector,
                    out_scale: int = FRAC_BITS) -> tuple[SharedVector, SharedVector]:
    """Division plus a shared poison bit (1 when the divisor is out of range).

    The protocol cannot branch on secret data, so a domain violation flows
    through as a flagged result instead of an exception.
    """
    q = sec_div(ctx, x, y, out_scale)
    lo = sv_const(ctx, [1] * len(y), y.scale)                        # 2^-f at scale f is raw 1
    hi = sv_const(ctx, [(1 << 20) << y.scale] * len(y), y.scale)
    ok_lo = sec_le(ctx, lo, y)
    ok_hi = sec_lt(ctx, y, hi)
    both = sec_mul(ctx, ok_lo, ok_hi)
    one = 1 if ctx.party_id == 0 else 0
    poison = SharedVector([(one - v) % Q for v in both.values], 0, y.session)
    return q, poison


def sec_log2(ctx: PartyCtx, x: SharedVector) -> SharedVector:
    """log2(x) for x in (0, 2^k), absolute error well under 1e-3.

    Splits x into 2^e * xh with xh in [0.5, 1), evaluates a fixed degree-7
    polynomial at the guard scale, and adds the shared exponent back.
    Non-positive inputs yield bounded garbage (callers gate by a zero factor).
    """
    w = len(x)
    ctx.count_op("log", w)
    xh, ms = _normalize(ctx, x.values)
    one = 1 if ctx.party_id == 0 else 0
    coeffs = [round(c * (1 << GUARD)) for c in _LOG2_COEFFS]
    acc = [(coeffs[-1] * one) % Q] * w
    for c in reversed(coeffs[:-1]):
        prod = _mul_raw(ctx, acc, xh)
        prod = _trunc_raw(ctx, prod, GUARD, 2 * GUARD + 14)
        cc = (c * one) % Q
        acc = [(prod[j] + cc) % Q for j in range(w)]
    frac = _trunc_raw(ctx, acc, GUARD - FRAC_BITS, GUARD + 6)
    expo = _weighted_sum(ms, [(i + 1 - x.scale) % Q for i in range(DEC_ELL)], w)
    out = [(frac[j] + (expo[j] << FRAC_BITS)) % Q for j in range(w)]
    return SharedVector(out, FRAC_BITS, x.session)


def sec_log2_checked(ctx: PartyCtx, x: SharedVector) -> tuple[SharedVector, SharedVector]:
    """Logarithm plus a shared poison bit (1 when x <= 0)."""
    res = sec_log2(ctx, x)
    zero = sv_const(ctx, [0] * len(x), x.scale)
    pos = sec_lt(ctx, zero, x)
    one = 1 if ctx.party_id == 0 else 0
    poison = SharedVector([(one - v) % Q for v in pos.values], 0, x.session)
    return res, poison


# ---------------------------------------------------------------------------
# declared pool costs (asserted by the metering tests)
# ---------------------------------------------------------------------------

def mul_cost(width: int) -> dict[str, int]:
    return {"triples": width, "bits": 0}


def trunc_cost(width: int, lt: int = TRUNC_ELL) -> dict[str, int]:
    return {"triples": 0, "bits": width * (lt + KAPPA)}


def cmp_cost(width: int, ell: int = CMP_ELL) -> dict[str, int]:
    return {"triples": width * (ell - 2), "bits": width * (ell + KAPPA)}


def select_cost(width: int, rows: int = 1) -> dict[str, int]:
    return {"triples": width * rows, "bits": 0}


def bitdec_cost(width: int, ell: int = DEC_ELL) -> dict[str, int]:
    return {"triples": width * (ell - 1), "bits": width * (ell + KAPPA)}


def _normalize_cost(width: int) -> dict[str, int]:
    dec = bitdec_cost(width)
    return {
        "triples": dec["triples"] + width * (DEC_ELL - 1) + width,
        "bits": dec["bits"] + trunc_cost(width, DEC_ELL + 1)["bits"],
    }


def log_cost(width: int) -> dict[str, int]:
    norm = _normalize_cost(width)
    horner = len(_LOG2_COEFFS) - 1
    return {
        "triples": norm["triples"] + width * horner,
        "bits": norm["bits"]
        + horner * trunc_cost(width, 2 * GUARD + 14)["bits"]
        + trunc_cost(width, GUARD + 6)["bits"],
    }


def div_cost(width: int) -> dict[str, int]:
    norm = _normalize_cost(width)
    return {
        "triples": norm["triples"] + width * (2 * _NR_ITERS + 2),
        "bits": norm["bits"]
        + 2 * _NR_ITERS * trunc_cost(width, 2 * GUARD + 10)["bits"]
        + trunc_cost(width, 66)["bits"]
        + trunc_cost(width, 86)["bits"],
    }
