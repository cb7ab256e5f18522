import random

import pytest
from hypothesis import given, settings, strategies as st

from fedst import ring
from fedst.ring import (FRAC_BITS, MAG_BITS, Q, FixedPointOverflowError,
                        RingElement, SecurityParams, decode_fixed, encode_fixed,
                        ring_add, ring_mul, ring_sub, signed)


def test_encode_examples():
    assert encode_fixed(1.5, 20).value == 1572864
    assert encode_fixed(0, 20).value == 0
    assert encode_fixed(-1, 20).value == Q - 1048576


def test_decode_examples():
    assert decode_fixed(RingElement(1572864, 20)) == 1.5
    assert decode_fixed(RingElement(0, 20)) == 0.0
    assert decode_fixed(RingElement(Q - 1048576, 20)) == -1.0


def test_ring_op_examples():
    assert ring_add(RingElement(3, 0), RingElement(Q - 1, 0)).value == 2
    prod = ring_mul(encode_fixed(2, 20), encode_fixed(3, 20))
    assert prod.scale == 40
    assert prod.value == 6 * 2**40 % Q
    x = RingElement(123456, 20)
    assert ring_sub(x, x).value == 0


def test_scale_mismatch_rejected():
    with pytest.raises(ValueError):
        ring_add(RingElement(1, 20), RingElement(1, 40))


def test_overflow_error():
    with pytest.raises(FixedPointOverflowError):
        encode_fixed(2.0**MAG_BITS, 20)
    encode_fixed(2.0**MAG_BITS - 1, 20)  # just inside the bound


def test_roundtrip_many():
    rng = random.Random(1)
    for _ in range(10**5):
        x = rng.uniform(-1000.0, 1000.0)
        assert abs(decode_fixed(encode_fixed(x)) - x) <= 2.0**-FRAC_BITS


def test_modular_ops_match_reference():
    rng = random.Random(2)
    for _ in range(10**5):
        a = rng.randrange(Q)
        b = rng.randrange(Q)
        assert ring_add(RingElement(a, 0), RingElement(b, 0)).value == (a + b) % Q
        assert ring_mul(RingElement(a, 0), RingElement(b, 0)).value == a * b % Q


def test_negative_embedding_exact():
    rng = random.Random(3)
    for _ in range(1000):
        # representable: an exact multiple of the quantum
        x = rng.randrange(1, 1 << 30) / (1 << 10)
        assert decode_fixed(encode_fixed(-x)) == -decode_fixed(encode_fixed(x))


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-2.0**30, max_value=2.0**30,
                 allow_nan=False, allow_infinity=False))
def test_roundtrip_property(x):
    assert abs(decode_fixed(encode_fixed(x)) - x) <= 2.0**-FRAC_BITS


def test_security_params():
    SecurityParams()  # defaults valid
    assert SecurityParams().kappa == 40
    with pytest.raises(ValueError):
        SecurityParams(kappa=60, f=24, k=44)


def test_wire_roundtrip():
    v = encode_fixed(-3.25).value
    w = ring.to_wire(v)
    assert len(w) == 16
    assert ring.from_wire(w) == v
    vec = [1, Q - 1, 12345]
    assert ring.vec_from_wire(ring.vec_to_wire(vec)) == vec
    with pytest.raises(ValueError):
        ring.from_wire((Q + 1).to_bytes(16, "little"))


def test_signed_mapping():
    assert signed(5) == 5
    assert signed(Q - 5) == -5


def test_ring_element_validation():
    with pytest.raises(ValueError):
        RingElement(Q, 0)
    with pytest.raises(ValueError):
        RingElement(-1, 0)
