"""Exact arithmetic in Z_q and the fixed-point encoding used on the wire.

Every value exchanged between parties is an element of Z_q for the fixed
Mersenne prime q = 2^127 - 1.  Reals are embedded as fixed-point integers:
a real x at scale s is stored as round(x * 2^s) mod q, with negative values
in the upper half of the field (q - |round(x * 2^s)|).

Default precision is f = 20 fractional bits and k = 40 magnitude bits, so
any encoded value satisfies |x| < 2^40 and products at scale 2f stay well
below the statistical-masking headroom (2f + k + kappa < 127).
"""

from __future__ import annotations

from dataclasses import dataclass

# Field modulus: Mersenne prime, large enough for 2f + k + kappa headroom.
MODULUS = 2**127 - 1
Q = MODULUS

# Fixed-point layout.
FRAC_BITS = 20          # f: fractional bits of standard values
MAG_BITS = 40           # k: |x| < 2^k for any encoded real
KAPPA = 40              # statistical security parameter (bits)

SCALE_ONE = 1 << FRAC_BITS
WIRE_BYTES = 16         # ring element wire width, little-endian

_HALF_Q = Q // 2


class FixedPointOverflowError(ValueError):
    """Raised when a real is too large for the fixed-point magnitude bound."""


@dataclass(frozen=True, slots=True)
class SecurityParams:
    """Statistical security and precision knobs shared by all protocols."""

    kappa: int = KAPPA
    f: int = FRAC_BITS
    k: int = MAG_BITS

    def __post_init__(self) -> None:
        if 2 * self.f + self.k + self.kappa >= 127:
            raise ValueError("2f + k + kappa must stay below the field width")


@dataclass(frozen=True, slots=True)
class RingElement:
    """An integer in [0, q) tagged with its fixed-point scale."""

    value: int
    scale: int = FRAC_BITS

    def __post_init__(self) -> None:
        if not 0 <= self.value < Q:
            raise ValueError(f"ring value out of range: {self.value}")


def encode_fixed(x: float, scale: int = FRAC_BITS) -> RingElement:
    """Encode a real as a fixed-point ring element at the given scale.

    Raises FixedPointOverflowError if |x| >= 2^k.
    """
    if abs(x) >= (1 << MAG_BITS):
        raise FixedPointOverflowError(f"|{x}| >= 2^{MAG_BITS}")
    return RingElement(round(x * (1 << scale)) % Q, scale)


def decode_fixed(e: RingElement) -> float:
    """Inverse of encode_fixed up to 2^-scale quantization."""
    return signed(e.value) / (1 << e.scale)


def encode_raw(x: float, scale: int = FRAC_BITS) -> int:
    """encode_fixed without the wrapper object; returns the bare field value."""
    if abs(x) >= (1 << MAG_BITS):
        raise FixedPointOverflowError(f"|{x}| >= 2^{MAG_BITS}")
    return round(x * (1 << scale)) % Q

def decode_raw(v: int, scale: int = FRAC_BITS) -> float:
    return signed(v) / (1 << scale)


def signed(v: int) -> int:
    """Map a field element to its signed representative in (-q/2, q/2]."""
    return v - Q if v > _HALF_Q else v


def ring_add(a: RingElement, b: RingElement) -> RingElement:
    if a.scale != b.scale:
        raise ValueError(f"scale mismatch: {a.scale} != {b.scale}")
    return RingElement((a.value + b.value) % Q, a.scale)


def ring_sub(a: RingElement, b: RingElement) -> RingElement:
    if a.scale != b.scale:
        raise ValueError(f"scale mismatch: {a.scale} != {b.scale}")
    return RingElement((a.value - b.value) % Q, a.scale)


def ring_mul(a: RingElement, b: RingElement) -> RingElement:
    # Product scale is the sum of input scales; truncation is the caller's job.
    return RingElement(a.value * b.value % Q, a.scale + b.scale)


def ring_neg(a: RingElement) -> RingElement:
    return RingElement(-a.value % Q, a.scale)


def to_wire(v: int) -> bytes:
    """16-byte little-endian wire form of a field value."""
    return v.to_bytes(WIRE_BYTES, "little")


def from_wire(b: bytes) -> int:
    v = int.from_bytes(b, "little")
    if v >= Q:
        raise ValueError("wire value outside Z_q")
    return v


def vec_to_wire(values: list[int]) -> bytes:
    return b"".join(v.to_bytes(WIRE_BYTES, "little") for v in values)


def vec_from_wire(payload: bytes) -> list[int]:
    if len(payload) % WIRE_BYTES:
        raise ValueError("payload is not a whole number of ring elements")
    return [
        int.from_bytes(payload[i : i + WIRE_BYTES], "little")
        for i in range(0, len(payload), WIRE_BYTES)
    ]


def derive_seed(label: str, *parts) -> int:
    """Stable integer seed from a label and parts (process-independent)."""
    import hashlib

    h = hashlib.sha256(label.encode())
    for p in parts:
        h.update(b"\x00" + repr(p).encode())
    return int.from_bytes(h.digest()[:8], "big")


# Modular inverses of powers of two, used by truncation.  pow2_inv(m) is the
# field element that divides by 2^m exactly when the argument is a multiple.
_INV2 = pow(2, Q - 2, Q)
_inv_pow2_cache: dict[int, int] = {0: 1}


def pow2_inv(m: int) -> int:
    v = _inv_pow2_cache.get(m)
    if v is None:
        v = pow(_INV2, m, Q)
        _inv_pow2_cache[m] = v
    return v
