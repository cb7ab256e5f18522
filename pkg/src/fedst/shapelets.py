"""Time series model, candidate generation, and the distance paths.

The distance between a candidate subsequence and a series is the minimum
squared Euclidean norm over all aligned windows (no square root and no
normalization of any kind).  Three implementations must agree:

  * a plaintext oracle (exhaustive scan, float),
  * the basic secure path: both operands secret-shared, one multiplication
    per element pair, one truncation per window, then a secure minimum,
  * the accelerated path: per-window dot products through the masked
    two-party protocol, local squared norms shared non-interactively, the
    same truncation and minimum.

Fixed-point contract: series values must satisfy |t| < 2^8 so that squared
distances never overflow the k = 40 magnitude bits before truncation.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .ring import FRAC_BITS, Q, encode_raw
from .runtime import PartyCtx
from .mpc import (
    SharedVector,
    sec_lt,
    sec_mul,
    sec_trunc,
    _swap_rows,
)
from . import dotprod

VALUE_BOUND = 256.0  # |t| < 2^8 keeps the overflow analysis valid
MIN_CANDIDATE_LEN = 3


class ValueRangeError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    """One labelled series; length >= 3, finite values."""

    values: tuple
    label: int

    def __post_init__(self):
        if len(self.values) < 3:
            raise ValueError("series must have at least 3 observations")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("series values must be finite")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ShapeletCandidate:
    """A subsequence extracted verbatim from one of party 0's samples."""

    values: tuple
    source_class: int
    source: tuple  # (sample index, start position) within party 0's data

    def __len__(self) -> int:
        return len(self.values)


def check_value_range(series_list) -> None:
    for ts in series_list:
        for v in ts.values:
            if abs(v) >= VALUE_BOUND:
                raise ValueRangeError(f"|{v}| >= {VALUE_BOUND}")


def generate_candidates(td0: list[TimeSeries], count: int,
                        rng: random.Random) -> list[ShapeletCandidate]:
    """Randomly sample candidate subsequences from party 0's data.

    Lengths are uniform between the sampling floor (3) and N, positions
    uniform; sampling is without replacement while the subsequence space
    allows distinct draws.
    """
    if not td0:
        raise ValueError("dataset is empty")
    if count < 1:
        raise ValueError("count must be positive")
    n_len = len(td0[0])
    lo = max(MIN_CANDIDATE_LEN, min(MIN_CANDIDATE_LEN, n_len // 4))
    space = len(td0) * sum(n_len - length + 1 for length in range(lo, n_len + 1))
    distinct = count <= space
    seen: set[tuple[int, int, int]] = set()
    out: list[ShapeletCandidate] = []
    attempts = 0
    while len(out) < count:
        si = rng.randrange(len(td0))
        length = rng.randint(lo, n_len)
        start = rng.randrange(n_len - length + 1)
        key = (si, start, length)
        attempts += 1
        if distinct and key in seen and attempts < 100 * count:
            continue
        seen.add(key)
        ts = td0[si]
        out.append(ShapeletCandidate(tuple(ts.values[start : start + length]),
                                     ts.label, (si, start)))
    return out


# ---------------------------------------------------------------------------
# plaintext oracle
# ---------------------------------------------------------------------------

def shapelet_distance_plain(s_values, t_values) -> float:
    """min over alignments of the squared Euclidean norm (exhaustive scan)."""
    s = np.asarray(s_values, dtype=float)
    t = np.asarray(t_values, dtype=float)
    length = len(s)
    if length > len(t):
        raise ValueError("candidate longer than series")
    best = math.inf
    for p in range(len(t) - length + 1):
        d = t[p : p + length] - s
        best = min(best, float(np.dot(d, d)))
    return best


def encode_series(values) -> list[int]:
    return [encode_raw(v) for v in values]


def shapelet_distance_fixed(s_enc: list[int], t_enc: list[int]) -> int:
    """Integer-domain distance at scale f, mirroring the secure paths.

    Windows are summed at scale 2f then floor-truncated, exactly like the
    shared computation (minus its random carry), so locally computed
    distances stay within one ulp of the federated ones.
    """
    length = len(s_enc)
    if length > len(t_enc):
        raise ValueError("candidate longer than series")
    s_signed = [v if v <= Q // 2 else v - Q for v in s_enc]
    t_signed = [v if v <= Q // 2 else v - Q for v in t_enc]
    best = None
    for p in range(len(t_enc) - length + 1):
        acc = 0
        for i in range(length):
            d = t_signed[p + i] - s_signed[i]
            acc += d * d
        if best is None or acc < best:
            best = acc
    return (best >> FRAC_BITS) % Q


# ---------------------------------------------------------------------------
# secure distance paths
# ---------------------------------------------------------------------------

def _min_over_windows(ctx: PartyCtx, window_rows: list[list[int]],
                      scale: int) -> SharedVector:
    """Column-wise minimum across W rows of width `num`.

    Tournament reduction: per column still exactly W-1 comparisons and W-1
    selections, but only ceil(log2 W) interactive levels, each one batched
    round group.  Left operands win ties, so the first minimum survives.
    """
    rows = window_rows
    while len(rows) > 1:
        half = len(rows) // 2
        lefts: list[int] = []
        rights: list[int] = []
        for i in range(half):
            lefts.extend(rows[2 * i])
            rights.extend(rows[2 * i + 1])
        b = sec_lt(ctx, SharedVector(rights, scale), SharedVector(lefts, scale))
        (lo, _), = _swap_rows(ctx, b.values, [(rights, lefts)])
        num = len(rows[0])
        merged = [lo[i * num : (i + 1) * num] for i in range(half)]
        if len(rows) % 2:
            merged.append(rows[-1])
        rows = merged
    return SharedVector(rows[0], scale)


def fed_distance_basic(ctx: PartyCtx, s_shared: SharedVector,
                       t_shared: SharedVector) -> SharedVector:
    """Distance over fully shared operands; L*(N-L+1) multiplications."""
    return fed_distance_basic_sweep(ctx, s_shared, [t_shared])


def fed_distance_basic_sweep(ctx: PartyCtx, s_shared: SharedVector,
                             series: list[SharedVector]) -> SharedVector:
    """Distances from one shared candidate to several shared series.

    All samples' squared differences are batched into a single opening
    round; per sample the cost is exactly L*(N-L+1) multiplications,
    N-L+1 truncations, and N-L of both comparisons and selections.
    """
    length = len(s_shared)
    num = len(series)
    n_len = len(series[0])
    windows = n_len - length + 1
    if windows < 1:
        raise ValueError("candidate longer than series")
    s_vals = s_shared.values
    diffs: list[int] = []
    for t in series:
        tv = t.values
        for p in range(windows):
            for i in range(length):
                diffs.append((tv[p + i] - s_vals[i]) % Q)
    dv = SharedVector(diffs, FRAC_BITS)
    sq = sec_mul(ctx, dv, dv)
    sums: list[int] = []
    k = 0
    vals = sq.values
    for _t in range(num):
        for _p in range(windows):
            acc = 0
            for _i in range(length):
                acc += vals[k]
                k += 1
            sums.append(acc % Q)
    norms = sec_trunc(ctx, SharedVector(sums, 2 * FRAC_BITS))
    # rows[p][t] = norm of window p of sample t
    rows = [[norms.values[t * windows + p] for t in range(num)] for p in range(windows)]
    return _min_over_windows(ctx, rows, FRAC_BITS)


def fed_distance_dp_sweep(ctx: PartyCtx, participant: int, num: int, n_len: int,
                          length: int, s_values=None,
                          t_series=None) -> SharedVector:
    """Distances via the masked dot-product: one multiplication per window.

    Party 0 holds the plaintext candidate, the participant its plaintext
    series; window cross terms come from one dot-product batch, both squared
    norms are shared non-interactively, and the minimum is as in the basic
    path.  Only valid for participants' samples (party 0 computes its own
    distances locally).
    """
    windows = n_len - length + 1
    if windows < 1:
        raise ValueError("candidate longer than series")
    total = num * windows
    if ctx.party_id == 0:
        s_enc = encode_series(s_values)
        cross = dotprod.dp_batch(ctx, participant, x_enc=s_enc, batch=total)
        s2 = sum((v if v <= Q // 2 else v - Q) ** 2 for v in s_enc) % Q
        s2_sh = ctx.share_from(0, [s2], 1)
        t2_sh = ctx.share_from(participant, None, total)
    elif ctx.party_id == participant:
        ys: list[list[int]] = []
        t2: list[int] = []
        for ts in t_series:
            t_enc = encode_series(getattr(ts, "values", ts))
            t_signed = [v if v <= Q // 2 else v - Q for v in t_enc]
            for p in range(windows):
                win = t_enc[p : p + length]
                ys.append(win)
                t2.append(sum(v * v for v in t_signed[p : p + length]) % Q)
        cross = dotprod.dp_batch(ctx, participant, ys_enc=ys)
        s2_sh = ctx.share_from(0, None, 1)
        t2_sh = ctx.share_from(participant, t2, total)
    else:
        cross = dotprod.dp_batch(ctx, participant, batch=total)
        s2_sh = ctx.share_from(0, None, 1)
        t2_sh = ctx.share_from(participant, None, total)

    s2v = s2_sh[0]
    sums = [(s2v + t2_sh[i] - 2 * cross.values[i]) % Q for i in range(total)]
    norms = sec_trunc(ctx, SharedVector(sums, 2 * FRAC_BITS))
    rows = [[norms.values[t * windows + p] for t in range(num)] for p in range(windows)]
    return _min_over_windows(ctx, rows, FRAC_BITS)


def share_local_distances(ctx: PartyCtx, candidate_enc: list[int] | None,
                          own_series_enc: list[list[int]] | None,
                          m0: int) -> SharedVector:
    """Party 0 computes distances to its own samples locally and shares them."""
    if ctx.party_id == 0:
        vals = [shapelet_distance_fixed(candidate_enc, t) for t in own_series_enc]
        return SharedVector(ctx.share_from(0, vals, m0), FRAC_BITS)
    return SharedVector(ctx.share_from(0, None, m0), FRAC_BITS)


def candidate_distances(ctx: PartyCtx, use_dp: bool, party_sizes: list[int],
                        n_len: int, length: int,
                        candidate_values=None,
                        own_series_enc: list[list[int]] | None = None,
                        shared_series: list[list[SharedVector]] | None = None,
                        local_series=None) -> SharedVector:
    """Full distance vector for one candidate, rows in party order.

    Party 0 passes the plaintext candidate and its encoded series; in the
    basic path participants' series must have been shared beforehand, in the
    accelerated path each participant passes its plaintext series.
    """
    parts: list[SharedVector] = []
    cand_enc = encode_series(candidate_values) if ctx.party_id == 0 else None
    parts.append(share_local_distances(ctx, cand_enc, own_series_enc, party_sizes[0]))
    s_sh = None
    if not use_dp:  # the candidate itself is shared once for all participants
        s_sh = SharedVector(ctx.share_from(0, cand_enc, length), FRAC_BITS)
    for p in range(1, ctx.n):
        num = party_sizes[p]
        if num == 0:
            continue
        if use_dp:
            parts.append(fed_distance_dp_sweep(
                ctx, p, num, n_len, length,
                s_values=candidate_values if ctx.party_id == 0 else None,
                t_series=local_series if ctx.party_id == p else None))
        else:
            parts.append(fed_distance_basic_sweep(ctx, s_sh, shared_series[p]))
    vals: list[int] = []
    for part in parts:
        vals.extend(part.values)
    return SharedVector(vals, FRAC_BITS)


def share_all_series(ctx: PartyCtx, party_sizes: list[int], n_len: int,
                     local_series=None) -> list[list[SharedVector]]:
    """Each participant shares its raw series (basic path preparation)."""
    shared: list[list[SharedVector]] = [[] for _ in range(ctx.n)]
    for p in range(1, ctx.n):
        for idx in range(party_sizes[p]):
            if ctx.party_id == p:
                enc = encode_series(local_series[idx].values)
                row = ctx.share_from(p, enc, n_len)
            else:
                row = ctx.share_from(p, None, n_len)
            shared[p].append(SharedVector(row, FRAC_BITS))
    return shared


def fed_transform(ctx: PartyCtx, use_dp: bool, party_sizes: list[int], n_len: int,
                  shapelet_lengths: list[int], shapelets=None,
                  own_series_enc=None, shared_series=None,
                  local_series=None) -> list[SharedVector]:
    """Secret-shared M x K distance table, one shared column per shapelet."""
    cols = []
    for k, length in enumerate(shapelet_lengths):
        cols.append(candidate_distances(
            ctx, use_dp, party_sizes, n_len, length,
            candidate_values=shapelets[k].values if ctx.party_id == 0 else None,
            own_series_enc=own_series_enc,
            shared_series=shared_series,
            local_series=local_series))
    return cols


def share_labels(ctx: PartyCtx, party_sizes: list[int],
                 local_labels=None) -> SharedVector:
    """Every party shares its labels (integers at scale 0), party order."""
    vals: list[int] = []
    for p in range(ctx.n):
        num = party_sizes[p]
        if ctx.party_id == p:
            row = ctx.share_from(p, [v % Q for v in local_labels], num)
        else:
            row = ctx.share_from(p, None, num)
        vals.extend(row)
    return SharedVector(vals, 0)
