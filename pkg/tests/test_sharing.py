import random

import pytest
from scipy import stats

from fedst.ring import Q, RingElement
from fedst.sharing import (Dealer, MissingShareError, PoolExhaustedError,
                           SessionMismatchError, Share, load_bits, load_triples,
                           reconstruct, share, share_raw)


def test_share_reconstruct_roundtrip():
    rng = random.Random(0)
    assert reconstruct(share(RingElement(5, 0), 3, rng)).value == 5


def test_share_zero_two_parties():
    rng = random.Random(0)
    s = share(RingElement(0, 0), 2, rng)
    assert s[0].element.value == -s[1].element.value % Q


def test_share_deterministic_under_seed():
    a = share_raw(5, 3, random.Random(42))
    b = share_raw(5, 3, random.Random(42))
    assert a == b


def test_reconstruct_wraparound():
    shares = [Share(RingElement(Q - 1, 0), 0), Share(RingElement(2, 0), 1)]
    assert reconstruct(shares).value == 1


def test_reconstruct_missing_share():
    rng = random.Random(0)
    s = share(RingElement(7, 0), 3, rng)
    assert reconstruct(s).value == 7
    with pytest.raises(MissingShareError):
        reconstruct(s[:2], n=3)
    with pytest.raises(MissingShareError):
        reconstruct([])


def test_reconstruct_session_mismatch():
    shares = [Share(RingElement(1, 0), 0, "a"), Share(RingElement(2, 0), 1, "b")]
    with pytest.raises(SessionMismatchError):
        reconstruct(shares)


def test_share_reconstruct_identity_many():
    rng = random.Random(4)
    for _ in range(10**4):
        x = rng.randrange(Q)
        assert sum(share_raw(x, 3, rng)) % Q == x


def test_share_uniformity_chi_square():
    # 10^4 sharings of the same secret: each share index is uniform on Z_q
    rng = random.Random(5)
    bins = 32
    for index in (0, 1):
        counts = [0] * bins
        for _ in range(10**4):
            v = share_raw(123456789, 3, rng)[index]
            counts[v * bins // Q] += 1
        _chi, p = stats.chisquare(counts)
        assert p > 1e-4, f"share index {index} not uniform (p={p})"


def test_dealer_triples_valid():
    dealer = Dealer(3, seed=7, auto_refill=False)
    dealer.deal_triples(5)
    pools = [dealer.pools_for(i) for i in range(3)]
    rows = [p.triples.take(5) for p in pools]
    for t in range(5):
        a = sum(rows[i][t][0] for i in range(3)) % Q
        b = sum(rows[i][t][1] for i in range(3)) % Q
        c = sum(rows[i][t][2] for i in range(3)) % Q
        assert c == a * b % Q


def test_dealer_deterministic():
    d1 = Dealer(3, seed=11, auto_refill=False)
    d2 = Dealer(3, seed=11, auto_refill=False)
    d1.deal_triples(4)
    d2.deal_triples(4)
    for i in range(3):
        assert d1.pools_for(i).triples.take(4) == d2.pools_for(i).triples.take(4)


def test_empty_pool_exhausts():
    dealer = Dealer(2, seed=0, auto_refill=False)
    dealer.deal_triples(0)
    with pytest.raises(PoolExhaustedError):
        dealer.pools_for(0).triples.take(1)
    dealer.deal_random_bits(0)
    with pytest.raises(PoolExhaustedError):
        dealer.pools_for(0).bits.take(1)


def test_dealt_bits_are_bits():
    dealer = Dealer(3, seed=13, auto_refill=False)
    count = 10**4
    dealer.deal_random_bits(count)
    rows = [dealer.pools_for(i).bits.take(count) for i in range(3)]
    total = 0
    for t in range(count):
        bit = sum(rows[i][t] for i in range(3)) % Q
        assert bit in (0, 1)
        total += bit
    assert 0.45 <= total / count <= 0.55


def test_pool_files_roundtrip(tmp_path):
    n = 3
    dealer = Dealer(n, seed=21)
    tfile = tmp_path / "triples.fstd"
    bfile = tmp_path / "bits.fstb"
    dealer.save_triples(tfile, 10)
    dealer.save_bits(bfile, 16)
    triple_rows = [load_triples(tfile, i, n) for i in range(n)]
    for t in range(10):
        a = sum(triple_rows[i][t][0] for i in range(n)) % Q
        b = sum(triple_rows[i][t][1] for i in range(n)) % Q
        c = sum(triple_rows[i][t][2] for i in range(n)) % Q
        assert c == a * b % Q
    bit_rows = [load_bits(bfile, i, n) for i in range(n)]
    for t in range(16):
        assert sum(bit_rows[i][t] for i in range(n)) % Q in (0, 1)
    assert tfile.read_bytes()[:4] == b"FSTD"
    assert bfile.read_bytes()[:4] == b"FSTB"
    with pytest.raises(ValueError):
        load_triples(bfile, 0, n)
