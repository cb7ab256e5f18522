import random

import pytest
from scipy import stats

from conftest import run_protocol
from fedst import dotprod
from fedst.ring import FRAC_BITS, Q, decode_raw, encode_raw
from fedst.mpc import SharedVector, sec_trunc, sv_open


def test_mask_math_raw_correctness(rng):
    """beta - alpha = x . y exactly in the field, over 1000 random pairs."""
    for _ in range(1000):
        length = rng.randrange(1, 12)
        x = [rng.randrange(Q) for _ in range(length)]
        y = [rng.randrange(Q) for _ in range(length)]
        mask = dotprod.make_mask(x, rng)
        u, c, g = dotprod.message1(mask)
        alpha = rng.randrange(Q)
        a, h = dotprod.respond(u, c, g, y, alpha)
        beta = dotprod.beta_from(mask, a, h)
        assert (beta - alpha) % Q == sum(p * q for p, q in zip(x, y)) % Q


def test_mask_b_nonzero(rng):
    for _ in range(50):
        assert dotprod.make_mask([1, 2, 3], rng, d=rng.randrange(2, 5)).b != 0


def test_raw_protocol_example():
    def proto(ctx):
        x = [1, 2, 3]
        y = [4, 5, 6]
        return dotprod.dp_raw_insecure(
            ctx, 1, x if ctx.party_id == 0 else None,
            y if ctx.party_id == 1 else None)

    res, _, _ = run_protocol(proto)
    assert (res[0] - res[1]) % Q == 32


def test_raw_protocol_zero_vector():
    def proto(ctx):
        return dotprod.dp_raw_insecure(
            ctx, 1, [7, 8] if ctx.party_id == 0 else None,
            [0, 0] if ctx.party_id == 1 else None)

    res, _, _ = run_protocol(proto)
    assert (res[0] - res[1]) % Q == 0


def test_raw_leakage_identity(rng):
    """The quarantine witness: g_last*a - w*h is a fixed linear map of y."""
    for _ in range(100):
        length = rng.randrange(1, 16)
        x = [rng.randrange(Q) for _ in range(length)]
        y = [rng.randrange(Q) for _ in range(length)]
        mask = dotprod.make_mask(x, rng)
        u, c, g = dotprod.message1(mask)
        g_last, w, coeffs = dotprod.leakage_combination(mask, u, c, g)
        # the combination is independent of the participant's fresh alpha
        for alpha in (rng.randrange(Q), rng.randrange(Q)):
            a, h = dotprod.respond(u, c, g, y, alpha)
            lhs = (g_last * a - w * h) % Q
            assert lhs == sum(cf * yv for cf, yv in zip(coeffs, y)) % Q


def test_dp_secure_example():
    def proto(ctx):
        xe = [encode_raw(v) for v in (1.0, 2.0, 3.0)]
        ye = [encode_raw(v) for v in (4.0, 5.0, 6.0)]
        z = dotprod.dp_secure(ctx, 1, xe if ctx.party_id == 0 else None,
                              ye if ctx.party_id == 1 else None)
        assert z.scale == 2 * FRAC_BITS
        t = sec_trunc(ctx, z)
        return sv_open(ctx, t)[0]

    res, _, _ = run_protocol(proto)
    assert abs(decode_raw(res[0]) - 32.0) <= 2.0**-19


def test_dp_secure_zero_y():
    def proto(ctx):
        xe = [encode_raw(1.5), encode_raw(-2.0)]
        ye = [0, 0]
        z = dotprod.dp_secure(ctx, 1, xe if ctx.party_id == 0 else None,
                              ye if ctx.party_id == 1 else None)
        return sv_open(ctx, z)[0]

    res, _, _ = run_protocol(proto)
    assert res[0] == 0


def test_dp_secure_exact_and_one_triple():
    rng = random.Random(20)
    cases = []
    for _ in range(20):
        length = rng.randrange(1, 30)
        cases.append((
            [rng.randrange(Q) for _ in range(length)],
            [rng.randrange(Q) for _ in range(length)],
        ))

    def proto(ctx):
        out = []
        before = ctx.pools.triples.consumed
        for x, y in cases:
            z = dotprod.dp_secure(ctx, 2, x if ctx.party_id == 0 else None,
                                  y if ctx.party_id == 2 else None)
            out.append(sv_open(ctx, z)[0])
        return out, ctx.pools.triples.consumed - before

    res, _, _ = run_protocol(proto)
    values, triples = res[0]
    assert triples == len(cases)  # exactly one multiplication each
    for got, (x, y) in zip(values, cases):
        assert got == sum(p * q for p, q in zip(x, y)) % Q


def test_dp_participant_sends_only_h_before_sharing():
    """The first frame back to party 0 is a single masked scalar."""
    def proto(ctx):
        xe = [encode_raw(1.0)] * 6
        ye = [encode_raw(2.0)] * 6
        dotprod.dp_secure(ctx, 1, xe if ctx.party_id == 0 else None,
                          ye if ctx.party_id == 1 else None)
        return True

    _res, sessions, _ = run_protocol(proto, n=2)
    from_p1 = [r for r in sorted(sessions[0].trace._records,
                                 key=lambda r: r.chan_seq)
               if r.sender == 1 and r.receiver == 0]
    assert from_p1[0].nbytes == 16 + 5  # h and nothing else


def test_dp_batch_matches_oracle_and_amortizes():
    rng = random.Random(21)
    length = 64
    x = [rng.uniform(-4, 4) for _ in range(length)]
    ys = [[rng.uniform(-4, 4) for _ in range(length)] for _ in range(100)]

    def proto(ctx, m):
        xe = [encode_raw(v) for v in x] if ctx.party_id == 0 else None
        yse = [[encode_raw(v) for v in yy] for yy in ys[:m]] \
            if ctx.party_id == 1 else None
        z = dotprod.dp_batch(ctx, 1, xe, yse, batch=m)
        t = sec_trunc(ctx, z)
        return sv_open(ctx, t)

    res1, sessions1, _ = run_protocol(lambda ctx: proto(ctx, 1), seed=1)
    res100, sessions100, _ = run_protocol(lambda ctx: proto(ctx, 100), seed=1)
    for got, yy in zip(res100[0], ys):
        want = sum(decode_raw(encode_raw(a)) * decode_raw(encode_raw(b))
                   for a, b in zip(x, yy))
        assert abs(decode_raw(got) - want) <= 2.0**-18
    t1 = sessions1[0].trace.total_bytes()
    t100 = sessions100[0].trace.total_bytes()
    assert t100 - t1 < 100 * t1 / 10  # message-1 amortizes across the batch


def test_dp_batch_of_one_equals_single():
    x = [encode_raw(0.5), encode_raw(2.0)]
    y = [encode_raw(3.0), encode_raw(-1.0)]

    def single(ctx):
        z = dotprod.dp_secure(ctx, 1, x if ctx.party_id == 0 else None,
                              y if ctx.party_id == 1 else None)
        return sv_open(ctx, z)[0]

    def batch(ctx):
        z = dotprod.dp_batch(ctx, 1, x if ctx.party_id == 0 else None,
                             [y] if ctx.party_id == 1 else None, batch=1)
        return sv_open(ctx, z)[0]

    r1, _, _ = run_protocol(single, seed=5)
    r2, _, _ = run_protocol(batch, seed=5)
    assert r1[0] == r2[0]  # both are the exact field dot product


def test_length_mismatch_rejected():
    def proto(ctx):
        with pytest.raises(ValueError):
            dotprod.dp_batch(ctx, 1, [1, 2] if ctx.party_id == 0 else None,
                             [[1, 2, 3]] if ctx.party_id == 1 else None, batch=1)
        return True

    with pytest.raises(ValueError):
        run_protocol(proto, n=2)


def test_message1_wire_layout(rng):
    length = 5
    mask = dotprod.make_mask([rng.randrange(Q) for _ in range(length)], rng)
    u, c, g = dotprod.message1(mask)
    payload = dotprod._encode_msg1(u, c, g)
    assert len(payload) == (mask.d + 2) * (length + 1) * 16
    u2, c2, g2 = dotprod._decode_msg1(payload, mask.d)
    assert (u2, c2, g2) == (u, c, g)


def test_h_is_uniform_chi_square(rng):
    """Party 0's view of the secure protocol is a uniform scalar."""
    length = 4
    x = [rng.randrange(Q) for _ in range(length)]
    y = [rng.randrange(Q) for _ in range(length)]  # fixed secrets
    bins = 64
    counts = [0] * bins
    runs = 10**4
    for _ in range(runs):
        mask = dotprod.make_mask(x, rng)
        u, c, g = dotprod.message1(mask)
        _a, h = dotprod.respond(u, c, g, y, rng.randrange(Q))
        counts[h * bins // Q] += 1
    _chi, p = stats.chisquare(counts)
    assert p > 1e-4, f"h not uniform (p={p})"
