import random

import pytest

from conftest import run_protocol
from fedst import mpc
from fedst.ring import FRAC_BITS, Q, decode_raw, encode_raw
from fedst.mpc import (CMP_ELL, EmptyVectorError, SharedVector, batcher_gate_count,
                       batcher_layers, cmp_cost, div_cost, log_cost, mul_cost,
                       oblivious_sort, sec_add, sec_div, sec_div_checked, sec_le,
                       sec_log2, sec_log2_checked, sec_lt, sec_min, sec_min_argmin,
                       sec_mul, sec_select, sec_topk, sec_trunc, select_cost,
                       sv_const, sv_open, trunc_cost)
from fedst.sharing import PoolExhaustedError


def open_one(results):
    return results[0]


def const_vec(ctx, values, scale=FRAC_BITS):
    return sv_const(ctx, [encode_raw(v, scale) if scale else v % Q for v in values],
                    scale)


def test_sec_add_examples():
    def proto(ctx):
        two = const_vec(ctx, [2.0])
        three = const_vec(ctx, [3.0])
        zero = const_vec(ctx, [0.0])
        s = sec_add(two, three)
        ident = sec_add(two, zero)
        return sv_open(ctx, s)[0], sv_open(ctx, ident)[0]

    res, sessions, _ = run_protocol(proto)
    assert decode_raw(res[0][0]) == 5.0
    assert decode_raw(res[0][1]) == 2.0


def test_sec_mul_examples_and_triple_count():
    def proto(ctx):
        two = const_vec(ctx, [2.0])
        three = const_vec(ctx, [3.0])
        zero = const_vec(ctx, [0.0])
        p1 = sec_mul(ctx, two, three)
        p2 = sec_mul(ctx, two, zero)
        before = ctx.pools.triples.consumed
        big = SharedVector(ctx.rand_vec(1000), FRAC_BITS)
        sec_mul(ctx, big, big)
        used = ctx.pools.triples.consumed - before
        return sv_open(ctx, p1)[0], sv_open(ctx, p2)[0], used, ctx.meter.kind_total("mul")

    res, _, _ = run_protocol(proto)
    v1, v2, used, metered = res[0]
    assert decode_raw(v1, 2 * FRAC_BITS) == 6.0
    assert decode_raw(v2, 2 * FRAC_BITS) == 0.0
    assert used == 1000 == mul_cost(1000)["triples"]
    assert metered == 1002


def test_sec_trunc_examples():
    def proto(ctx):
        six = const_vec(ctx, [6.0])
        prod = sec_mul(ctx, six, const_vec(ctx, [1.0]))  # scale 40
        t = sec_trunc(ctx, prod)
        z = sec_trunc(ctx, sv_const(ctx, [0], 2 * FRAC_BITS))
        return sv_open(ctx, t)[0], sv_open(ctx, z)[0], t.scale

    res, _, _ = run_protocol(proto)
    assert abs(decode_raw(res[0][0]) - 6.0) <= 2.0**-20
    assert res[0][1] == 0  # multiples of 2^f truncate exactly
    assert res[0][2] == FRAC_BITS


def test_sec_trunc_error_bound_many():
    cases = 10**4
    rng = random.Random(9)
    xs = [rng.uniform(-500.0, 500.0) for _ in range(cases)]
    ys = [rng.uniform(-500.0, 500.0) for _ in range(cases)]

    def proto(ctx):
        xe = [encode_raw(v) for v in xs] if ctx.party_id == 0 else None
        ye = [encode_raw(v) for v in ys] if ctx.party_id == 0 else None
        x = SharedVector(ctx.share_from(0, xe, cases), FRAC_BITS)
        y = SharedVector(ctx.share_from(0, ye, cases), FRAC_BITS)
        t = sec_trunc(ctx, sec_mul(ctx, x, y))
        return sv_open(ctx, t)

    res, _, _ = run_protocol(proto)
    for got, x, y in zip(res[0], xs, ys):
        want = decode_raw(encode_raw(x)) * decode_raw(encode_raw(y))
        assert abs(decode_raw(got) - want) <= 2.0**-(FRAC_BITS - 1)


def test_sec_lt_examples():
    def proto(ctx):
        a = const_vec(ctx, [3.0, 5.0, -1.0, 2.0])
        b = const_vec(ctx, [5.0, 3.0, 1.0, 2.0])
        lt = sec_lt(ctx, a, b)
        le = sec_le(ctx, a, b)
        return sv_open(ctx, lt), sv_open(ctx, le)

    res, _, _ = run_protocol(proto)
    assert res[0][0] == [1, 0, 1, 0]
    assert res[0][1] == [1, 0, 1, 1]


def test_sec_lt_random_oracle():
    cases = 1000
    rng = random.Random(10)
    xs = [rng.uniform(-800, 800) for _ in range(cases)]
    ys = [rng.uniform(-800, 800) for _ in range(cases)]

    def proto(ctx):
        x = SharedVector(ctx.share_from(
            0, [encode_raw(v) for v in xs] if ctx.party_id == 0 else None, cases),
            FRAC_BITS)
        y = SharedVector(ctx.share_from(
            0, [encode_raw(v) for v in ys] if ctx.party_id == 0 else None, cases),
            FRAC_BITS)
        return sv_open(ctx, sec_lt(ctx, x, y))

    res, _, _ = run_protocol(proto)
    for got, x, y in zip(res[0], xs, ys):
        assert got == int(encode_raw(x) != encode_raw(y)
                          and decode_raw(encode_raw(x)) < decode_raw(encode_raw(y)))


def test_sec_select():
    def proto(ctx):
        one = sv_const(ctx, [1], 0)
        zero = sv_const(ctx, [0], 0)
        seven = const_vec(ctx, [7.0])
        nine = const_vec(ctx, [9.0])
        a = sec_select(ctx, one, seven, nine)
        b = sec_select(ctx, zero, seven, nine)
        rnd = SharedVector(ctx.share_from(
            0, [random.Random(4).randint(0, 1)] if ctx.party_id == 0 else None, 1), 0)
        c = sec_select(ctx, rnd, seven, seven)
        return sv_open(ctx, a)[0], sv_open(ctx, b)[0], sv_open(ctx, c)[0]

    res, _, _ = run_protocol(proto)
    assert decode_raw(res[0][0]) == 7.0
    assert decode_raw(res[0][1]) == 9.0
    assert decode_raw(res[0][2]) == 7.0


def test_sec_div_examples():
    def proto(ctx):
        x = const_vec(ctx, [6.0, 5.5, 1.0])
        y = const_vec(ctx, [3.0, 1.0, 3.0])
        return sv_open(ctx, sec_div(ctx, x, y))

    res, _, _ = run_protocol(proto)
    got = [decode_raw(v) for v in res[0]]
    assert abs(got[0] - 2.0) <= 2.0**-18
    assert abs(got[1] - 5.5) <= 2.0**-18
    assert abs(got[2] - 1 / 3) <= 2.0**-18


def test_sec_div_random_oracle():
    cases = 1000
    rng = random.Random(11)
    ys, xs = [], []
    for _ in range(cases):
        y = 2.0 ** rng.uniform(-2, 9.8)
        r = 2.0 ** rng.uniform(-1.3, 9.0) * rng.choice([-1, 1])
        ys.append(y)
        xs.append(y * r)

    def proto(ctx):
        x = SharedVector(ctx.share_from(
            0, [encode_raw(v) for v in xs] if ctx.party_id == 0 else None, cases),
            FRAC_BITS)
        y = SharedVector(ctx.share_from(
            0, [encode_raw(v) for v in ys] if ctx.party_id == 0 else None, cases),
            FRAC_BITS)
        return sv_open(ctx, sec_div(ctx, x, y))

    res, _, _ = run_protocol(proto)
    for got, x, y in zip(res[0], xs, ys):
        want = decode_raw(encode_raw(x)) / decode_raw(encode_raw(y))
        assert abs(decode_raw(got) - want) <= abs(want) * 2.0**-18


def test_sec_div_checked_poison():
    def proto(ctx):
        x = const_vec(ctx, [1.0, 1.0, 1.0])
        y = SharedVector(
            ctx.share_from(0, [encode_raw(2.0), 0, encode_raw(2.0**20 + 5)]
                           if ctx.party_id == 0 else None, 3), FRAC_BITS)
        _q, poison = sec_div_checked(ctx, x, y)
        return sv_open(ctx, poison)

    res, _, _ = run_protocol(proto)
    assert res[0] == [0, 1, 1]


def test_sec_log2_examples():
    def proto(ctx):
        x = const_vec(ctx, [8.0, 1.0, 0.5])
        return sv_open(ctx, sec_log2(ctx, x))

    res, _, _ = run_protocol(proto)
    got = [decode_raw(v) for v in res[0]]
    assert abs(got[0] - 3.0) <= 1e-3
    assert abs(got[1] - 0.0) <= 1e-3
    assert abs(got[2] + 1.0) <= 1e-3


def test_sec_log2_random_oracle():
    import math

    cases = 1000
    rng = random.Random(12)
    xs = [2.0 ** rng.uniform(-18, 38) for _ in range(cases)]

    def proto(ctx):
        x = SharedVector(ctx.share_from(
            0, [encode_raw(v) for v in xs] if ctx.party_id == 0 else None, cases),
            FRAC_BITS)
        return sv_open(ctx, sec_log2(ctx, x))

    res, _, _ = run_protocol(proto)
    for got, x in zip(res[0], xs):
        want = math.log2(decode_raw(encode_raw(x)))
        assert abs(decode_raw(got) - want) <= 1e-3


def test_sec_log2_checked_poison():
    def proto(ctx):
        x = SharedVector(ctx.share_from(
            0, [encode_raw(4.0), 0] if ctx.party_id == 0 else None, 2), FRAC_BITS)
        _r, poison = sec_log2_checked(ctx, x)
        return sv_open(ctx, poison)

    res, _, _ = run_protocol(proto)
    assert res[0] == [0, 1]


def test_min_argmin():
    def proto(ctx):
        v = const_vec(ctx, [2.0, 0.0, 5.0])
        mn, am = sec_min_argmin(ctx, v)
        single, sidx = sec_min_argmin(ctx, const_vec(ctx, [7.0]))
        ties, tidx = sec_min_argmin(ctx, const_vec(ctx, [3.0, 3.0, 3.0]))
        return (sv_open(ctx, mn)[0], sv_open(ctx, am)[0],
                sv_open(ctx, single)[0], sv_open(ctx, sidx)[0],
                sv_open(ctx, ties)[0], sv_open(ctx, tidx)[0],
                ctx.meter.kind_total("cmp"), ctx.meter.kind_total("select"))

    res, _, _ = run_protocol(proto)
    mn, am, single, sidx, ties, tidx, cmps, sels = res[0]
    assert decode_raw(mn) == 0.0 and am == 1
    assert decode_raw(single) == 7.0 and sidx == 0
    assert decode_raw(ties) == 3.0 and tidx == 0
    assert cmps == 2 + 0 + 2  # len-1 comparisons per call
    assert sels == 2 + 0 + 2


def test_min_empty_vector():
    def proto(ctx):
        with pytest.raises(EmptyVectorError):
            sec_min(ctx, SharedVector([], FRAC_BITS))
        return True

    run_protocol(proto)


def test_topk_examples():
    def proto(ctx):
        v = const_vec(ctx, [0.1, 0.9, 0.5])
        top2 = sec_topk(ctx, v, 2)
        alls = sec_topk(ctx, v, 3)
        tie = sec_topk(ctx, const_vec(ctx, [0.4, 0.4]), 1)
        with pytest.raises(ValueError):
            sec_topk(ctx, v, 4)
        return sv_open(ctx, top2), sv_open(ctx, alls), sv_open(ctx, tie)

    res, _, _ = run_protocol(proto)
    assert res[0][0] == [1, 2]
    assert res[0][1] == [1, 2, 0]
    assert res[0][2] == [0]


def test_topk_random_oracle():
    rng = random.Random(13)
    for trial in range(5):
        vals = [rng.uniform(-5, 5) for _ in range(9)]
        k = rng.randint(1, 9)

        def proto(ctx, vals=vals, k=k):
            v = SharedVector(ctx.share_from(
                0, [encode_raw(x) for x in vals] if ctx.party_id == 0 else None,
                len(vals)), FRAC_BITS)
            return sv_open(ctx, sec_topk(ctx, v, k))

        res, _, _ = run_protocol(proto, seed=trial)
        want = sorted(range(len(vals)), key=lambda i: (-vals[i], i))[:k]
        assert res[0] == want


def test_batcher_gate_counts():
    assert batcher_gate_count(8) == 19
    assert batcher_gate_count(5) == 19     # padded to 8
    assert batcher_gate_count(16) == 63
    # closed form for 2^p: (p^2 - p + 4) * 2^(p-2) - 1
    for p in range(1, 10):
        n = 2**p
        assert batcher_gate_count(n) == (p * p - p + 4) * 2 ** (p - 2) - 1
    for layer in batcher_layers(16):
        touched = [i for pair in layer for i in pair]
        assert len(touched) == len(set(touched))  # disjoint within a layer


def test_oblivious_sort_examples():
    def proto(ctx):
        keys = const_vec(ctx, [3.0, 1.0, 2.0])
        payload = sv_const(ctx, [10, 20, 30], 0)
        sk, sp = oblivious_sort(ctx, keys, [payload])
        pre = ctx.meter.kind_total("cmp")
        sorted_in = const_vec(ctx, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
        sk2, _ = oblivious_sort(ctx, sorted_in, [])
        gates = ctx.meter.kind_total("cmp") - pre
        return sv_open(ctx, sk), sv_open(ctx, sp[0]), sv_open(ctx, sk2), gates

    res, _, _ = run_protocol(proto)
    keys, payload, sorted_out, gates = res[0]
    assert [decode_raw(v) for v in keys] == [1.0, 2.0, 3.0]
    assert payload == [20, 30, 10]
    assert [decode_raw(v) for v in sorted_out] == [1.0, 2.0, 3.0, 4.0,
                                                   5.0, 6.0, 7.0, 8.0]
    assert gates == 19  # size-8 input: exactly the Batcher gate count


def test_oblivious_sort_random_oracle():
    rng = random.Random(14)
    for trial in range(4):
        n = rng.randint(2, 12)
        keys = [rng.uniform(-50, 50) for _ in range(n)]
        pay = [rng.randrange(100) for _ in range(n)]

        def proto(ctx, keys=keys, pay=pay):
            kv = SharedVector(ctx.share_from(
                0, [encode_raw(v) for v in keys] if ctx.party_id == 0 else None,
                len(keys)), FRAC_BITS)
            pv = SharedVector(ctx.share_from(
                0, list(pay) if ctx.party_id == 0 else None, len(pay)), 0)
            sk, sp = oblivious_sort(ctx, kv, [pv])
            return sv_open(ctx, sk), sv_open(ctx, sp[0])

        res, _, _ = run_protocol(proto, seed=trial)
        got_keys = [decode_raw(v) for v in res[0][0]]
        order = sorted(range(n), key=lambda i: keys[i])
        assert got_keys == sorted(decode_raw(encode_raw(v)) for v in keys)
        assert res[0][1] == [pay[i] for i in order]


def test_sort_length_mismatch():
    def proto(ctx):
        keys = const_vec(ctx, [1.0, 2.0])
        bad = sv_const(ctx, [1], 0)
        with pytest.raises(ValueError):
            oblivious_sort(ctx, keys, [bad])
        return True

    run_protocol(proto)


def test_pool_cost_formulas():
    """Triple/bit consumption matches each op's declared closed form."""
    def proto(ctx):
        out = {}

        def snap():
            return ctx.pools.triples.consumed, ctx.pools.bits.consumed

        w = 7
        x = SharedVector(ctx.rand_vec(w), FRAC_BITS)
        t0, b0 = snap()
        sec_mul(ctx, x, x)
        out["mul"] = (ctx.pools.triples.consumed - t0, ctx.pools.bits.consumed - b0)

        y = SharedVector(ctx.rand_vec(w), 2 * FRAC_BITS)
        t0, b0 = snap()
        sec_trunc(ctx, y)
        out["trunc"] = (ctx.pools.triples.consumed - t0, ctx.pools.bits.consumed - b0)

        small = const_vec(ctx, [1.0] * w)
        t0, b0 = snap()
        sec_lt(ctx, small, small)
        out["cmp"] = (ctx.pools.triples.consumed - t0, ctx.pools.bits.consumed - b0)

        bit = sv_const(ctx, [1] * w, 0)
        t0, b0 = snap()
        sec_select(ctx, bit, small, small)
        out["select"] = (ctx.pools.triples.consumed - t0, ctx.pools.bits.consumed - b0)

        t0, b0 = snap()
        sec_div(ctx, small, small)
        out["div"] = (ctx.pools.triples.consumed - t0, ctx.pools.bits.consumed - b0)

        t0, b0 = snap()
        sec_log2(ctx, small)
        out["log"] = (ctx.pools.triples.consumed - t0, ctx.pools.bits.consumed - b0)
        return out

    res, _, _ = run_protocol(proto)
    got = res[0]
    w = 7
    for kind, cost in (("mul", mul_cost(w)), ("trunc", trunc_cost(w)),
                       ("cmp", cmp_cost(w)), ("select", select_cost(w)),
                       ("div", div_cost(w)), ("log", log_cost(w))):
        assert got[kind] == (cost["triples"], cost["bits"]), kind


def test_obliviousness_of_op_traces():
    """Same widths, different secrets: identical message counts and sizes."""
    def make_proto(vals):
        def proto(ctx):
            x = SharedVector(ctx.share_from(
                0, [encode_raw(v) for v in vals] if ctx.party_id == 0 else None,
                len(vals)), FRAC_BITS)
            y = sec_mul(ctx, x, x)
            y = sec_trunc(ctx, y)
            b = sec_lt(ctx, x, y)
            sec_select(ctx, b, x, y)
            keys, _ = oblivious_sort(ctx, x, [b])
            sec_min_argmin(ctx, keys)
            return True
        return proto

    traces = []
    for vals in ([1.0, 5.0, -3.0, 2.0], [100.0, -7.5, 0.0, 64.2]):
        _res, sessions, _ = run_protocol(make_proto(vals), seed=17)
        traces.append(sessions[0].trace.canonical())
    assert traces[0] == traces[1]


def test_pool_exhaustion_is_an_error():
    from fedst.runtime import PartyConfig, start_mem_session, run_parties, PartyCtx
    from fedst.sharing import Dealer

    dealer = Dealer(2, seed=0, auto_refill=False)
    dealer.deal_triples(1)
    dealer.deal_random_bits(0)
    sessions = start_mem_session([PartyConfig(i, 2) for i in range(2)])

    def proto(ctx):
        x = SharedVector(ctx.rand_vec(2), FRAC_BITS)
        sec_mul(ctx, x, x)
        return True

    with pytest.raises(PoolExhaustedError):
        run_parties(sessions, dealer.pools_for, proto)
