"""Shapelet quality scoring: information gain and the F statistic.

Plaintext oracles come first; the secure paths must agree with them within
the stated tolerances.  Class membership is carried by indicating vectors
(secret-shared 0/1 entries), so every statistic reduces to sums and inner
products over shares.

Information gain uses the binary strategy: classes collapse to "same as the
candidate's class" versus "other".  Every sample's distance is a splitting
threshold (duplicates included) and partitions use d <= tau, so the
threshold's own sample always lands left.  The secure computation evaluates
the weighted gain through count * log2(count) terms:

    M * IG(tau) = M log M - nDy log nDy - nDo log nDo
                  - nL log nL + nLy log nLy + nLo log nLo
                  - nR log nR + nRy log nRy + nRo log nRo

which needs no secure division; empty-partition terms vanish exactly because
the count factor is an exact shared zero (the logarithm's bounded garbage is
multiplied away), which realizes the empty-entropy-is-zero rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ring import FRAC_BITS, Q, encode_raw
from .runtime import PartyCtx
from .mpc import (
    SharedVector,
    oblivious_sort,
    sec_div,
    sec_le,
    sec_log2,
    sec_lt,
    sec_max,
    sec_mul,
    sec_select,
    sec_trunc,
    sv_concat,
    sv_const,
    sv_repeat,
    sv_slice,
)


# ---------------------------------------------------------------------------
# plaintext oracles
# ---------------------------------------------------------------------------

def entropy_binary(p: float) -> float:
    """Binary entropy with p*log2(p) = 0 at p in {0, 1}."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


def _ig_from_counts(m: int, n_dy: int, n_l: int, n_ly: int) -> float:
    parent = entropy_binary(n_dy / m)
    n_r = m - n_l
    n_ry = n_dy - n_ly
    left = entropy_binary(n_ly / n_l) if n_l else 0.0
    right = entropy_binary(n_ry / n_r) if n_r else 0.0
    return parent - (n_l / m) * left - (n_r / m) * right


def ig_plain(distances, labels, y_s: int) -> float:
    """Maximum weighted information gain over all distance thresholds."""
    d = np.asarray(distances, dtype=float)
    y = np.asarray(labels)
    m = len(d)
    if m < 2:
        raise ValueError("need at least two samples")
    same = (y == y_s)
    n_dy = int(same.sum())
    best = 0.0
    for tau in d:
        left = d <= tau
        gain = _ig_from_counts(m, n_dy, int(left.sum()), int((left & same).sum()))
        best = max(best, gain)
    return best


def ig_prefix_plain(distances, labels, y_s: int) -> float:
    """Gain maximized over prefixes of the sorted multiset.

    This is the oracle for the sorting-based path: with duplicate distances
    a prefix may split between equal values, which an explicit threshold
    cannot; on distinct values it coincides with ig_plain.
    """
    d = np.asarray(distances, dtype=float)
    order = np.argsort(d, kind="stable")
    same = (np.asarray(labels)[order] == y_s)
    m = len(d)
    n_dy = int(same.sum())
    best = 0.0
    run = 0
    for j in range(m):
        run += int(same[j])
        best = max(best, _ig_from_counts(m, n_dy, j + 1, run))
    return best


def fstat_plain(distances, labels) -> float:
    """Between-class over within-class variance ratio; NaN when degenerate."""
    d = np.asarray(distances, dtype=float)
    y = np.asarray(labels)
    classes = sorted(set(y.tolist()))
    c = len(classes)
    m = len(d)
    if not m > c >= 2:
        raise ValueError("need M > C >= 2")
    overall = d.mean()
    between = 0.0
    within = 0.0
    for cls in classes:
        grp = d[y == cls]
        if len(grp) == 0:
            raise ValueError("every class must be non-empty")
        between += (grp.mean() - overall) ** 2
        within += float(((grp - grp.mean()) ** 2).sum())
    between /= c - 1
    within /= m - c
    if within == 0.0:
        return math.nan  # poisoned: no within-class spread
    return between / within


# ---------------------------------------------------------------------------
# shared building blocks
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class SplitStats:
    """Shares of the six cardinalities of one threshold split."""

    total: SharedVector
    total_y: SharedVector
    left: SharedVector
    left_y: SharedVector
    right: SharedVector
    right_y: SharedVector


def build_class_vectors(ctx: PartyCtx, party_sizes: list[int], n_classes: int,
                        local_labels=None) -> list[SharedVector]:
    """Shared indicating vectors gamma_c, concatenated in party order."""
    cols: list[list[int]] = [[] for _ in range(n_classes)]
    for p in range(ctx.n):
        num = party_sizes[p]
        for c in range(1, n_classes + 1):
            if ctx.party_id == p:
                bits = [1 if lab == c else 0 for lab in local_labels]
                if any(not 1 <= lab <= n_classes for lab in local_labels):
                    raise ValueError("label out of range")
                row = ctx.share_from(p, bits, num)
            else:
                row = ctx.share_from(p, None, num)
            cols[c - 1].extend(row)
    return [SharedVector(col, 0) for col in cols]


def share_candidate_class(ctx: PartyCtx, n_classes: int,
                          y_s: int | None = None) -> SharedVector:
    """Party 0 shares the one-hot class vector of the candidate."""
    if ctx.party_id == 0:
        onehot = [1 if c == y_s else 0 for c in range(1, n_classes + 1)]
        return SharedVector(ctx.share_from(0, onehot, n_classes), 0)
    return SharedVector(ctx.share_from(0, None, n_classes), 0)


def _membership_weights(ctx: PartyCtx, class_vecs: list[SharedVector],
                        y_vec: SharedVector) -> SharedVector:
    """w[j] = [sample j belongs to the candidate's class], C*M multiplications."""
    m = len(class_vecs[0])
    acc = [0] * m
    for c, gamma in enumerate(class_vecs):
        prod = sec_mul(ctx, sv_repeat(y_vec, c, m), gamma)
        for j in range(m):
            acc[j] = (acc[j] + prod.values[j]) % Q
    return SharedVector(acc, 0)


def _count_log_terms(ctx: PartyCtx, counts: SharedVector) -> SharedVector:
    """n * log2(n) for shared non-negative integers (exact zero at n = 0)."""
    logs = sec_log2(ctx, counts)
    return sec_mul(ctx, counts, logs)


def _ig_from_count_vectors(ctx: PartyCtx, m: int, n_dy: SharedVector,
                           left: list[int] | SharedVector, left_y: SharedVector,
                           public_left: bool) -> SharedVector:
    """Max over thresholds of M * IG, then one public scaling by 1/M.

    `left` is the per-threshold left-partition size: a public list for the
    sorted path (prefix lengths), a shared vector for the naive one.
    """
    width = len(left_y)
    one = 1 if ctx.party_id == 0 else 0
    n_dy_v = n_dy.values[0]
    left_y_o = [0] * width
    right_y = [(n_dy_v - left_y.values[j]) % Q for j in range(width)]
    right_yo = [0] * width
    if public_left:
        for j in range(width):
            left_y_o[j] = (left[j] * one - left_y.values[j]) % Q
            right_yo[j] = ((m - left[j]) * one - right_y[j]) % Q
        blocks = [left_y.values, left_y_o, right_y, right_yo]
    else:
        right_counts = [(m * one - v) % Q for v in left.values]
        for j in range(width):
            left_y_o[j] = (left.values[j] - left_y.values[j]) % Q
            right_yo[j] = (right_counts[j] - right_y[j]) % Q
        blocks = [left_y.values, left_y_o, right_y, right_yo,
                  left.values, right_counts]
    # parent-class counts once, appended as a trailing pair
    n_do = (m * one - n_dy_v) % Q
    flat: list[int] = []
    for b in blocks:
        flat.extend(b)
    flat.extend([n_dy_v, n_do])
    terms = _count_log_terms(ctx, SharedVector(flat, 0))
    t = terms.values
    nblocks = len(blocks)
    parent = (t[nblocks * width] + t[nblocks * width + 1]) % Q
    log_m_total = encode_raw(m * math.log2(m)) if m > 1 else 0
    bracket = [0] * width
    for j in range(width):
        # M*IG = M log M - nDy log nDy - nDo log nDo - nL log nL + nLy log nLy
        #        + nLo log nLo - nR log nR + nRy log nRy + nRo log nRo
        acc = (t[j] + t[width + j] + t[2 * width + j] + t[3 * width + j]
               - parent)
        if public_left:
            n_l = left[j]
            n_r = m - n_l
            pub = log_m_total
            pub -= encode_raw(n_l * math.log2(n_l)) if n_l > 1 else 0
            pub -= encode_raw(n_r * math.log2(n_r)) if n_r > 1 else 0
            if one:
                acc += pub
        else:
            acc -= t[4 * width + j] + t[5 * width + j]
            if one:
                acc += log_m_total
        bracket[j] = acc % Q
    best = sec_max(ctx, SharedVector(bracket, FRAC_BITS))
    inv_m = encode_raw(1.0 / m)
    scaled = SharedVector([v * inv_m % Q for v in best.values], 2 * FRAC_BITS)
    return sec_trunc(ctx, scaled, lt=2 * FRAC_BITS + 22)


def split_stats_naive(ctx: PartyCtx, dists: SharedVector,
                      class_vecs: list[SharedVector], y_vec: SharedVector,
                      tau_index: int) -> SplitStats:
    """The six shared cardinalities for one threshold (testing hook)."""
    m = len(dists)
    w = _membership_weights(ctx, class_vecs, y_vec)
    tau = sv_repeat(dists, tau_index, m)
    gamma_l = sec_le(ctx, dists, tau)
    left_y = sec_mul(ctx, w, gamma_l)
    one = 1 if ctx.party_id == 0 else 0
    total = SharedVector([(m * one) % Q], 0)
    total_y = SharedVector([sum(w.values) % Q], 0)
    left = SharedVector([sum(gamma_l.values) % Q], 0)
    left_y_s = SharedVector([sum(left_y.values) % Q], 0)
    right = SharedVector([(total.values[0] - left.values[0]) % Q], 0)
    right_y = SharedVector([(total_y.values[0] - left_y_s.values[0]) % Q], 0)
    return SplitStats(total, total_y, left, left_y_s, right, right_y)


# ---------------------------------------------------------------------------
# secure information gain
# ---------------------------------------------------------------------------

def ig_secure_naive(ctx: PartyCtx, dists: SharedVector,
                    class_vecs: list[SharedVector],
                    y_vec: SharedVector) -> SharedVector:
    """Straightforward gain: every threshold against every distance.

    Exactly M^2 comparisons build the left indicating vectors (the final
    maximum over thresholds adds its own M - 1).
    """
    m = len(dists)
    w = _membership_weights(ctx, class_vecs, y_vec)
    n_dy = SharedVector([sum(w.values) % Q], 0)
    left_counts = [0] * m
    left_y_counts = [0] * m
    # thresholds processed in groups so each comparison round stays wide
    group = max(1, 4096 // m)
    for start in range(0, m, group):
        taus = range(start, min(start + group, m))
        tile = sv_concat([sv_repeat(dists, j, m) for j in taus])
        all_d = sv_concat([dists] * len(taus))
        gamma_l = sec_le(ctx, all_d, tile)
        masked = sec_mul(ctx, sv_concat([w] * len(taus)), gamma_l)
        for pos, j in enumerate(taus):
            left_counts[j] = sum(gamma_l.values[pos * m : (pos + 1) * m]) % Q
            left_y_counts[j] = sum(masked.values[pos * m : (pos + 1) * m]) % Q
    return _ig_from_count_vectors(
        ctx, m, n_dy,
        SharedVector(left_counts, 0), SharedVector(left_y_counts, 0),
        public_left=False)


def ig_secure_sorted(ctx: PartyCtx, dists: SharedVector,
                     class_vecs: list[SharedVector],
                     y_vec: SharedVector) -> SharedVector:
    """Sorting-accelerated gain.

    One oblivious sort of the distances with the class vectors as payloads;
    after that the left-partition sizes are public prefix lengths and the
    per-class counts are share-local prefix sums, so each threshold costs
    C multiplications for the candidate-class projection.
    """
    m = len(dists)
    n_classes = len(class_vecs)
    _keys, sorted_gammas = oblivious_sort(ctx, dists, class_vecs)
    prefix: list[list[int]] = []
    for gamma in sorted_gammas:
        acc = 0
        col = [0] * m
        for j in range(m):
            acc = (acc + gamma.values[j]) % Q
            col[j] = acc
        prefix.append(col)
    left_y = [0] * m
    for c in range(n_classes):
        prod = sec_mul(ctx, sv_repeat(y_vec, c, m), SharedVector(prefix[c], 0))
        for j in range(m):
            left_y[j] = (left_y[j] + prod.values[j]) % Q
    n_dy = SharedVector([left_y[m - 1]], 0)
    return _ig_from_count_vectors(
        ctx, m, n_dy,
        list(range(1, m + 1)), SharedVector(left_y, 0),
        public_left=True)


# ---------------------------------------------------------------------------
# secure F statistic
# ---------------------------------------------------------------------------

def fstat_secure(ctx: PartyCtx, dists: SharedVector,
                 class_vecs: list[SharedVector]) -> SharedVector:
    """Eq-style variance ratio over shares: O(M) multiplications, C+1 divisions.

    The denominator is floored at one fixed-point ulp so degenerate inputs
    return a (huge) ratio instead of dividing by zero.
    """
    m = len(dists)
    n_classes = len(class_vecs)
    if not m > n_classes >= 2:
        raise ValueError("need M > C >= 2")
    one = 1 if ctx.party_id == 0 else 0

    counts = SharedVector([sum(g.values) % Q for g in class_vecs], 0)
    sums = []
    for gamma in class_vecs:
        prod = sec_mul(ctx, gamma, dists)
        sums.append(sum(prod.values) % Q)
    means = sec_div(ctx, SharedVector(sums, FRAC_BITS), counts)  # C divisions

    inv_m = encode_raw(1.0 / m)
    total = sum(dists.values) % Q
    mean_all = sec_trunc(ctx, SharedVector([total * inv_m % Q], 2 * FRAC_BITS),
                         lt=2 * FRAC_BITS + 22)

    # between-class numerator
    diffs = SharedVector([(means.values[c] - mean_all.values[0]) % Q
                          for c in range(n_classes)], FRAC_BITS)
    sq = sec_mul(ctx, diffs, diffs)
    sq = sec_trunc(ctx, sq)
    num_raw = sum(sq.values) % Q
    if n_classes > 2:
        inv = encode_raw(1.0 / (n_classes - 1))
        num = sec_trunc(ctx, SharedVector([num_raw * inv % Q], 2 * FRAC_BITS),
                        lt=2 * FRAC_BITS + 22)
    else:
        num = SharedVector([num_raw], FRAC_BITS)

    # within-class denominator: mask deviations by class, then square
    masked: list[int] = []
    for c, gamma in enumerate(class_vecs):
        dev = SharedVector([(dists.values[j] - means.values[c]) % Q
                            for j in range(m)], FRAC_BITS)
        prod = sec_mul(ctx, gamma, dev)
        masked.extend(prod.values)
    big = SharedVector(masked, FRAC_BITS)
    sq_all = sec_mul(ctx, big, big)
    within = sec_trunc(ctx, SharedVector([sum(sq_all.values) % Q], 2 * FRAC_BITS))
    inv_mc = encode_raw(1.0 / (m - n_classes))
    den = sec_trunc(ctx, SharedVector([within.values[0] * inv_mc % Q], 2 * FRAC_BITS),
                    lt=2 * FRAC_BITS + 22)

    floor = sv_const(ctx, [1], FRAC_BITS)  # one ulp
    low = sec_lt(ctx, den, floor)
    den_floored = sec_select(ctx, low, floor, den)
    return sec_div(ctx, num, den_floored)  # the +1 division
