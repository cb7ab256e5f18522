"""Additive secret sharing over Z_q and the trusted dealer.

A secret x is split into n uniformly random shares summing to x mod q; any
n-1 of them are jointly uniform.  The dealer runs strictly before the online
phase (semi-honest setting) and pre-distributes the correlated randomness the
interactive operations consume: Beaver triples for multiplication and shared
random bits for truncation/comparison.  Pools are sized up-front and refill
in deterministic chunks so operation costs can be metered exactly.
"""

from __future__ import annotations

import random
import struct
import threading
from collections import deque
from dataclasses import dataclass

from .ring import Q, RingElement, WIRE_BYTES, derive_seed


class MissingShareError(ValueError):
    """Reconstruction attempted without one share per party."""


class SessionMismatchError(ValueError):
    """Shares from different sessions were mixed."""


class PoolExhaustedError(RuntimeError):
    """A party consumed more pre-dealt randomness than was provisioned."""


@dataclass(frozen=True, slots=True)
class Share:
    """One party's additive share of a ring element."""

    element: RingElement
    owner: int
    session: str = ""


@dataclass(frozen=True, slots=True)
class BeaverTriple:
    """Shares of a multiplication triple c = a * b (consumed once)."""

    a: Share
    b: Share
    c: Share


def rand_element(rng: random.Random) -> int:
    # getrandbits(127) covers [0, 2^127); only the single value q itself is
    # out of range, so fold it back (bias 2^-127, far below kappa).
    v = rng.getrandbits(127)
    return 0 if v == Q else v


def share_raw(value: int, n: int, rng: random.Random) -> list[int]:
    """Split a field value into n additive shares (bare ints, hot path)."""
    if n < 2:
        raise ValueError("need at least 2 parties")
    others = [rand_element(rng) for _ in range(n - 1)]
    adjust = (value - sum(others)) % Q
    return [adjust] + others


def share(x: RingElement, n: int, rng: random.Random, session: str = "") -> list[Share]:
    """Secret-share a ring element among n parties.

    The owner's share is the adjustment x - sum(others); every other share is
    uniform in Z_q, so the shares sum to x and any n-1 are jointly uniform.
    """
    vals = share_raw(x.value, n, rng)
    return [Share(RingElement(v, x.scale), owner=i, session=session) for i, v in enumerate(vals)]


def reconstruct(shares: list[Share], n: int | None = None) -> RingElement:
    """Sum one share per party mod q.  Requires exactly n shares, one each."""
    if not shares:
        raise MissingShareError("no shares given")
    if n is None:
        n = len(shares)
    sessions = {s.session for s in shares}
    if len(sessions) != 1:
        raise SessionMismatchError(f"mixed sessions: {sorted(sessions)}")
    owners = sorted(s.owner for s in shares)
    if owners != list(range(n)):
        raise MissingShareError(f"expected one share per party 0..{n - 1}, got owners {owners}")
    scale = shares[0].element.scale
    total = sum(s.element.value for s in shares) % Q
    return RingElement(total, scale)


class _Pool:
    """Per-party FIFO of pre-dealt randomness with an optional refill hook."""

    def __init__(self, refill=None):
        self._items: deque = deque()
        self._refill = refill
        self.consumed = 0

    def __len__(self) -> int:
        return len(self._items)

    def extend(self, items) -> None:
        self._items.extend(items)

    def take(self, count: int) -> list:
        if len(self._items) < count:
            if self._refill is None or not self._refill(count - len(self._items)):
                raise PoolExhaustedError(
                    f"pool has {len(self._items)} items, {count} requested"
                )
        self.consumed += count
        items = self._items
        return [items.popleft() for _ in range(count)]


class PartyPools:
    """The triple and bit pools held by a single party."""

    def __init__(self, triples: _Pool, bits: _Pool):
        self.triples = triples
        self.bits = bits


class Dealer:
    """Trusted dealer for the offline phase.

    Deterministic in its seed: two dealers with equal (n, seed) produce
    identical pools.  Refills are generated in chunks for every party at once
    so the per-party FIFOs stay aligned with the lock-step online phase.
    """

    REFILL_CHUNK = 1 << 14

    def __init__(self, n: int, seed: int = 0, auto_refill: bool = True):
        if n < 2:
            raise ValueError("need at least 2 parties")
        self.n = n
        self._rng = random.Random(derive_seed("fedst-dealer", seed))
        self._lock = threading.Lock()
        refill_t = self._refill_triples if auto_refill else None
        refill_b = self._refill_bits if auto_refill else None
        self._triple_pools = [_Pool(refill_t) for _ in range(n)]
        self._bit_pools = [_Pool(refill_b) for _ in range(n)]
        self.triples_dealt = 0
        self.bits_dealt = 0

    # -- generation -------------------------------------------------------

    def _gen_triples(self, count: int) -> list[list[tuple[int, int, int]]]:
        gb = self._rng.getrandbits
        n = self.n
        per_party: list[list] = [[None] * count for _ in range(n)]
        for t in range(count):
            a = gb(127)
            b = gb(127)
            if a == Q:
                a = 0
            if b == Q:
                b = 0
            c = a * b % Q
            sa = sb = sc = 0
            for i in range(1, n):
                ra = gb(127)
                rb = gb(127)
                rc = gb(127)
                per_party[i][t] = (ra, rb, rc)
                sa += ra
                sb += rb
                sc += rc
            per_party[0][t] = ((a - sa) % Q, (b - sb) % Q, (c - sc) % Q)
        self.triples_dealt += count
        return per_party

    def _gen_bits(self, count: int) -> list[list[int]]:
        gb = self._rng.getrandbits
        n = self.n
        per_party: list[list] = [[None] * count for _ in range(n)]
        for t in range(count):
            s = 0
            for i in range(1, n):
                r = gb(127)
                per_party[i][t] = r
                s += r
            per_party[0][t] = (gb(1) - s) % Q
        self.bits_dealt += count
        return per_party

    def _refill_triples(self, need: int = 0) -> bool:
        with self._lock:
            chunk = self._gen_triples(max(self.REFILL_CHUNK, need))
            for i in range(self.n):
                self._triple_pools[i].extend(chunk[i])
        return True

    def _refill_bits(self, need: int = 0) -> bool:
        with self._lock:
            chunk = self._gen_bits(max(self.REFILL_CHUNK, need))
            for i in range(self.n):
                self._bit_pools[i].extend(chunk[i])
        return True

    # -- public API --------------------------------------------------------

    def deal_triples(self, count: int) -> None:
        with self._lock:
            chunk = self._gen_triples(count)
            for i in range(self.n):
                self._triple_pools[i].extend(chunk[i])

    def deal_random_bits(self, count: int) -> None:
        with self._lock:
            chunk = self._gen_bits(count)
            for i in range(self.n):
                self._bit_pools[i].extend(chunk[i])

    def pools_for(self, party_id: int) -> PartyPools:
        return PartyPools(self._triple_pools[party_id], self._bit_pools[party_id])

    # -- persistence -------------------------------------------------------
    # Triple file: magic "FSTD", version u8, count u32 big-endian, then per
    # triple, per party in party order, the (a, b, c) shares as 3 x 16-byte
    # little-endian elements.  Bit files use magic "FSTB" and one element per
    # party per bit.

    TRIPLE_MAGIC = b"FSTD"
    BIT_MAGIC = b"FSTB"
    _VERSION = 1

    def save_triples(self, path, count: int) -> None:
        chunk = self._gen_triples(count)
        with open(path, "wb") as fh:
            fh.write(self.TRIPLE_MAGIC + struct.pack(">BI", self._VERSION, count))
            for t in range(count):
                for i in range(self.n):
                    a, b, c = chunk[i][t]
                    for v in (a, b, c):
                        fh.write(v.to_bytes(WIRE_BYTES, "little"))

    def save_bits(self, path, count: int) -> None:
        chunk = self._gen_bits(count)
        with open(path, "wb") as fh:
            fh.write(self.BIT_MAGIC + struct.pack(">BI", self._VERSION, count))
            for t in range(count):
                for i in range(self.n):
                    fh.write(chunk[i][t].to_bytes(WIRE_BYTES, "little"))


def load_triples(path, party_id: int, n: int) -> list[tuple[int, int, int]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != Dealer.TRIPLE_MAGIC:
        raise ValueError("not a triple pool file")
    _version, count = struct.unpack(">BI", data[4:9])
    body = data[9:]
    stride = 3 * WIRE_BYTES
    if len(body) != count * n * stride:
        raise ValueError("triple pool file size does not match header")
    out = []
    for t in range(count):
        off = (t * n + party_id) * stride
        a = int.from_bytes(body[off : off + 16], "little")
        b = int.from_bytes(body[off + 16 : off + 32], "little")
        c = int.from_bytes(body[off + 32 : off + 48], "little")
        out.append((a, b, c))
    return out


def load_bits(path, party_id: int, n: int) -> list[int]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != Dealer.BIT_MAGIC:
        raise ValueError("not a bit pool file")
    _version, count = struct.unpack(">BI", data[4:9])
    body = data[9:]
    if len(body) != count * n * WIRE_BYTES:
        raise ValueError("bit pool file size does not match header")
    return [
        int.from_bytes(body[(t * n + party_id) * 16 : (t * n + party_id) * 16 + 16], "little")
        for t in range(count)
    ]
