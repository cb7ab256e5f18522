"""Masked two-party dot products.

Two protocols compute x . y for a vector x held by party 0 and y held by a
participant.  The *raw* protocol sends both response scalars (a, h) back to
party 0; the pair (a, h) admits a mask-independent linear combination that
leaks a deterministic function of y, so it is quarantined for differential
testing only (see leakage_combination).  The *secure* variant keeps `a`
private: the participant returns only the uniformly masked scalar h, and the
result is assembled under secret sharing with a single Beaver multiplication.

All mask material lives in Z_q; encoded fixed-point inputs at scale f yield
an exact field result at scale 2f (truncation is the caller's job).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .ring import Q
from .runtime import PartyCtx
from .mpc import SharedVector, sec_mul
from .sharing import rand_element


def _rand_nonzero(rng: random.Random) -> int:
    while True:
        v = rand_element(rng)
        if v != 0:
            return v


@dataclass(slots=True)
class DpMask:
    """Party 0's one-time masking material for one dot-product batch.

    qmat is d x d, xmat is d x (L+1) with row `r` equal to (x, 1); the other
    rows and f_vec, r1..r3 are uniform masks.  b = sum_j qmat[j][r] is
    resampled to be invertible.  Row index is 0-based internally.
    """

    qmat: list[list[int]]
    r: int
    xmat: list[list[int]]
    f_vec: list[int]
    r1: int
    r2: int
    r3: int
    b: int

    @property
    def length(self) -> int:
        return len(self.f_vec) - 1

    @property
    def d(self) -> int:
        return len(self.qmat)


def make_mask(x_enc: list[int], rng: random.Random, d: int = 2) -> DpMask:
    """Sample the masking material for input vector x (already in Z_q)."""
    if d < 2:
        raise ValueError("d must be at least 2")
    length = len(x_enc)
    if length < 1:
        raise ValueError("empty input vector")
    r = rng.randrange(d)
    while True:
        qmat = [[rand_element(rng) for _ in range(d)] for _ in range(d)]
        b = sum(qmat[j][r] for j in range(d)) % Q
        if b != 0:
            break
    xmat = []
    for i in range(d):
        if i == r:
            xmat.append(list(x_enc) + [1])
        else:
            xmat.append([rand_element(rng) for _ in range(length + 1)])
    # nonzero scalars keep every g entry invertible (h stays uniform)
    f_vec = [_rand_nonzero(rng) for _ in range(length + 1)]
    r1 = _rand_nonzero(rng)
    r2 = _rand_nonzero(rng)
    r3 = _rand_nonzero(rng)
    return DpMask(qmat, r, xmat, f_vec, r1, r2, r3, b)


def message1(mask: DpMask) -> tuple[list[list[int]], list[int], list[int]]:
    """(U, c, g): U = Q*X; c = sum_{i != r} colsum_i * x_i + R1R2 f; g = R1R3 f."""
    d = mask.d
    width = mask.length + 1
    u = [[0] * width for _ in range(d)]
    for j in range(d):
        qrow = mask.qmat[j]
        urow = u[j]
        for col in range(width):
            urow[col] = sum(qrow[i] * mask.xmat[i][col] for i in range(d)) % Q
    r1r2 = mask.r1 * mask.r2 % Q
    c = [r1r2 * fv % Q for fv in mask.f_vec]
    for i in range(d):
        if i == mask.r:
            continue
        colsum = sum(mask.qmat[j][i] for j in range(d)) % Q
        xi = mask.xmat[i]
        for col in range(width):
            c[col] = (c[col] + colsum * xi[col]) % Q
    r1r3 = mask.r1 * mask.r3 % Q
    g = [r1r3 * fv % Q for fv in mask.f_vec]
    return u, c, g


def respond(u: list[list[int]], c: list[int], g: list[int],
            y_enc: list[int], alpha: int) -> tuple[int, int]:
    """Participant side: a = (colsum(U) - c) . y', h = g . y' with y' = (y, alpha)."""
    width = len(c)
    if len(y_enc) + 1 != width:
        raise ValueError("length mismatch")
    yp = list(y_enc) + [alpha]
    colsum = [sum(u[j][col] for j in range(len(u))) % Q for col in range(width)]
    a = sum((colsum[col] - c[col]) * yp[col] for col in range(width)) % Q
    h = sum(g[col] * yp[col] for col in range(width)) % Q
    return a, h


def beta_from(mask: DpMask, a: int, h: int) -> int:
    """Party 0's raw-protocol output: beta = a/b + h R2 / (b R3)."""
    inv_b = pow(mask.b, Q - 2, Q)
    inv_r3 = pow(mask.r3, Q - 2, Q)
    return (a * inv_b + h * mask.r2 % Q * inv_b % Q * inv_r3) % Q


def leakage_combination(mask: DpMask, u, c, g) -> tuple[int, int, list[int]]:
    """Coefficients making g_{L+1} * a - w * h a deterministic function of y.

    Returns (g_last, w, coeffs) with
        g_last * a - w * h  ==  sum_j coeffs[j] * y[j]  (mod q)
    for every choice of the participant's alpha - the leak that quarantines
    the raw protocol.
    """
    width = len(c)
    colsum = [sum(u[j][col] for j in range(len(u))) % Q for col in range(width)]
    e1 = [(colsum[col] - c[col]) % Q for col in range(width - 1)]
    w = (colsum[width - 1] - c[width - 1]) % Q
    e2 = g[: width - 1]
    g_last = g[width - 1]
    coeffs = [(g_last * e1[j] - w * e2[j]) % Q for j in range(width - 1)]
    return g_last, w, coeffs


# ---------------------------------------------------------------------------
# wire helpers (Message1 layout: U row-major, then c, then g)
# ---------------------------------------------------------------------------

def _encode_msg1(u, c, g) -> bytes:
    from .ring import vec_to_wire

    flat: list[int] = []
    for row in u:
        flat.extend(row)
    flat.extend(c)
    flat.extend(g)
    return vec_to_wire(flat)


def _decode_msg1(payload: bytes, d: int) -> tuple[list[list[int]], list[int], list[int]]:
    from .ring import vec_from_wire

    flat = vec_from_wire(payload)
    if len(flat) % (d + 2):
        raise ValueError("malformed message")
    width = len(flat) // (d + 2)
    u = [flat[j * width : (j + 1) * width] for j in range(d)]
    c = flat[d * width : (d + 1) * width]
    g = flat[(d + 1) * width :]
    return u, c, g


# ---------------------------------------------------------------------------
# runtime protocols
# ---------------------------------------------------------------------------

def dp_raw_insecure(ctx: PartyCtx, participant: int, x_enc: list[int] | None = None,
                    y_enc: list[int] | None = None, d: int = 2):
    """INSECURE reference dot product; leaks a function of y to party 0.

    Kept only as a differential-testing baseline.  Returns beta at party 0,
    alpha at the participant, None elsewhere.
    """
    ses = ctx.session
    if ctx.party_id == 0:
        mask = make_mask(x_enc, ctx.rng, d)
        u, c, g = message1(mask)
        ses.send(participant, _encode_msg1(u, c, g), ctx.stage)
        from .ring import vec_from_wire

        a, h = vec_from_wire(ses.recv(participant))
        return beta_from(mask, a, h)
    if ctx.party_id == participant:
        u, c, g = _decode_msg1(ses.recv(0), d)
        if y_enc is None or len(y_enc) + 1 != len(c):
            raise ValueError("length mismatch")
        alpha = rand_element(ctx.rng)
        a, h = respond(u, c, g, y_enc, alpha)
        from .ring import vec_to_wire

        ses.send(0, vec_to_wire([a, h]), ctx.stage)
        return alpha
    return None


def dp_batch(ctx: PartyCtx, participant: int, x_enc: list[int] | None = None,
             ys_enc: list[list[int]] | None = None, batch: int | None = None,
             d: int = 2) -> SharedVector:
    """Shares of x . y_t for one x at party 0 and many y_t at the participant.

    Message1 (U, c, g) is sent once for the whole batch; each extra vector
    costs one masked scalar h, three scalar sharings, and one secure
    multiplication.  Every party must pass the public batch size.
    """
    ses = ctx.session
    from .ring import vec_from_wire, vec_to_wire

    local_adjust = None  # values only this party knows fold into its own share
    if ctx.party_id == 0:
        if x_enc is None:
            raise ValueError("party 0 must supply x")
        m = len(ys_enc) if ys_enc is not None else batch
        mask = make_mask(x_enc, ctx.rng, d)
        u, c, g = message1(mask)
        ses.send(participant, _encode_msg1(u, c, g), ctx.stage)
        hs = vec_from_wire(ses.recv(participant))
        if len(hs) != m:
            raise ValueError("batch size mismatch")
        inv_b = pow(mask.b, Q - 2, Q)
        scale_h = mask.r2 * inv_b % Q * pow(mask.r3, Q - 2, Q) % Q
        local_adjust = [h * scale_h % Q for h in hs]  # + h R2/(b R3)
        inv_b_sh = ctx.share_from(0, [inv_b], 1)
        a_sh = ctx.share_from(participant, None, m)
    elif ctx.party_id == participant:
        if ys_enc is None:
            raise ValueError("participant must supply the y vectors")
        m = len(ys_enc)
        u, c, g = _decode_msg1(ses.recv(0), d)
        if any(len(y) + 1 != len(c) for y in ys_enc):
            raise ValueError("length mismatch")
        alphas = [rand_element(ctx.rng) for _ in range(m)]
        res = [respond(u, c, g, y, alpha) for y, alpha in zip(ys_enc, alphas)]
        ses.send(0, vec_to_wire([h for _a, h in res]), ctx.stage)
        local_adjust = [-alpha % Q for alpha in alphas]  # - alpha
        inv_b_sh = ctx.share_from(0, None, 1)
        a_sh = ctx.share_from(participant, [a for a, _h in res], m)
    else:
        if batch is None:
            raise ValueError("bystanders must pass the public batch size")
        m = batch
        inv_b_sh = ctx.share_from(0, None, 1)
        a_sh = ctx.share_from(participant, None, m)

    # z = (1/b) * a + h R2/(b R3) - alpha: one multiplication per entry; the
    # two correction terms are each known in full to one party and added to
    # that party's share locally.
    inv_vec = SharedVector(inv_b_sh * m, 0)
    prod = sec_mul(ctx, inv_vec, SharedVector(a_sh, 0))
    if local_adjust is None:
        values = prod.values
    else:
        values = [(prod.values[t] + local_adjust[t]) % Q for t in range(m)]
    # scale 2f: inputs at scale f, modular product of encodings
    from .ring import FRAC_BITS

    return SharedVector(values, 2 * FRAC_BITS)


def dp_secure(ctx: PartyCtx, participant: int, x_enc: list[int] | None = None,
              y_enc: list[int] | None = None, d: int = 2) -> SharedVector:
    """Single secure dot product (batch of one)."""
    ys = [y_enc] if y_enc is not None else None
    return dp_batch(ctx, participant, x_enc, ys, batch=1, d=d)
