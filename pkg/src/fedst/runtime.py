"""The n-party execution environment.

Parties run the same protocol code on one logical thread each (SPMD style)
and exchange frames over a full mesh of reliable ordered channels.  Two
backends are provided: an in-memory queue transport and a TCP transport;
both use the same frame format, so traces are byte-for-byte comparable.

Frame format: 4-byte big-endian payload length, 1-byte stage tag, payload.
Every frame is metered into a CommTrace at the sender.  Trace equality is
defined over the canonical order (sender, receiver, per-channel sequence),
which is deterministic regardless of thread scheduling.
"""

from __future__ import annotations

import csv
import queue
import socket
import struct
import threading
from dataclasses import dataclass, field

from .ring import Q, derive_seed, vec_from_wire, vec_to_wire
from .sharing import Dealer, PartyPools, rand_element, share_raw

MAX_FRAME = 2**31
FRAME_OVERHEAD = 5  # 4-byte length + 1-byte stage tag

STAGES = ("other", "distance", "quality", "topk")
STAGE_TAG = {name: i for i, name in enumerate(STAGES)}

# Interactive operation kinds tracked by the meter.
OP_KINDS = ("mul", "trunc", "cmp", "select", "div", "log")


class TransportError(RuntimeError):
    pass


class SessionAborted(RuntimeError):
    """Another party failed; the blocking receive was abandoned."""


@dataclass(frozen=True, slots=True)
class PartyConfig:
    party_id: int
    n: int
    seed: int = 0
    endpoints: tuple | None = None  # ((host, port), ...) for TCP, None for mem


@dataclass(slots=True)
class TraceRecord:
    sender: int
    receiver: int
    nbytes: int
    stage: str
    chan_seq: int
    round_tag: int


class CommTrace:
    """Append-only record of every frame, one entry per message."""

    def __init__(self):
        self._lock = threading.Lock()
        self._records: list[TraceRecord] = []

    def append(self, rec: TraceRecord) -> None:
        with self._lock:
            self._records.append(rec)

    def canonical(self) -> list[tuple[int, int, int, str]]:
        """Deterministic view: sorted by (sender, receiver, channel sequence)."""
        recs = sorted(self._records, key=lambda r: (r.sender, r.receiver, r.chan_seq))
        return [(r.sender, r.receiver, r.nbytes, r.stage) for r in recs]

    def message_count(self) -> int:
        return len(self._records)

    def total_bytes(self) -> int:
        return sum(r.nbytes for r in self._records)

    def stage_totals(self) -> dict[str, dict[str, int]]:
        out = {s: {"messages": 0, "bytes": 0} for s in STAGES}
        for r in self._records:
            out[r.stage]["messages"] += 1
            out[r.stage]["bytes"] += r.nbytes
        return out

    def received_by(self, party_id: int) -> list[TraceRecord]:
        return [r for r in self._records if r.receiver == party_id]

    def export_csv(self, path) -> None:
        recs = sorted(self._records, key=lambda r: (r.sender, r.receiver, r.chan_seq))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seq", "from", "to", "bytes", "stage"])
            for i, r in enumerate(recs):
                w.writerow([i, r.sender, r.receiver, r.nbytes, r.stage])


class _MemChannel:
    """One directed FIFO channel backed by a queue."""

    def __init__(self, failed: threading.Event):
        self._q: queue.SimpleQueue = queue.SimpleQueue()
        self._failed = failed

    def send(self, stage_tag: int, payload: bytes) -> None:
        self._q.put((stage_tag, payload))

    def recv(self) -> tuple[int, bytes]:
        while True:
            try:
                return self._q.get(timeout=0.5)
            except queue.Empty:
                if self._failed.is_set():
                    raise SessionAborted("peer failed") from None

    def close(self) -> None:
        pass


class _TcpChannel:
    """One directed channel over a connected socket (send or recv side)."""

    def __init__(self, sock: socket.socket, failed: threading.Event):
        self._sock = sock
        self._failed = failed
        self._lock = threading.Lock()

    def send(self, stage_tag: int, payload: bytes) -> None:
        frame = struct.pack(">IB", len(payload), stage_tag) + payload
        with self._lock:
            self._sock.sendall(frame)

    def _recv_exact(self, count: int) -> bytes:
        buf = bytearray()
        while len(buf) < count:
            try:
                chunk = self._sock.recv(count - len(buf))
            except OSError as exc:
                raise SessionAborted(str(exc)) from None
            if not chunk:
                if self._failed.is_set():
                    raise SessionAborted("peer failed")
                raise TransportError("channel closed")
            buf.extend(chunk)
        return bytes(buf)

    def recv(self) -> tuple[int, bytes]:
        header = self._recv_exact(FRAME_OVERHEAD)
        length, tag = struct.unpack(">IB", header)
        return tag, self._recv_exact(length)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class Session:
    """One party's handle on the connected mesh."""

    def __init__(self, party_id: int, n: int, channels: dict, trace: CommTrace,
                 failed: threading.Event):
        self.party_id = party_id
        self.n = n
        self._channels = channels  # peer id -> (send channel, recv channel)
        self.trace = trace
        self._failed = failed
        self._send_seq = {peer: 0 for peer in channels}
        self.round_no = 0
        self.capture_received = False
        self.received_payloads: list[bytes] = []
        # bandwidth shaping: seconds of delay added per sent byte
        self.delay_per_byte = 0.0

    def peers(self) -> list[int]:
        return [p for p in range(self.n) if p != self.party_id]

    def send(self, to: int, payload: bytes, stage: str) -> None:
        if len(payload) + FRAME_OVERHEAD > MAX_FRAME:
            raise TransportError("frame oversize")
        if self.delay_per_byte:
            import time

            time.sleep(self.delay_per_byte * (len(payload) + FRAME_OVERHEAD))
        send_ch, _ = self._channels[to]
        seq = self._send_seq[to]
        self._send_seq[to] = seq + 1
        send_ch.send(STAGE_TAG[stage], payload)
        self.trace.append(TraceRecord(self.party_id, to, len(payload) + FRAME_OVERHEAD,
                                      stage, seq, self.round_no))

    def recv(self, frm: int) -> bytes:
        _, recv_ch = self._channels[frm]
        tag, payload = recv_ch.recv()
        if self.capture_received:
            self.received_payloads.append(payload)
        return payload

    def fail(self) -> None:
        self._failed.set()

    def close(self) -> None:
        for send_ch, recv_ch in self._channels.values():
            send_ch.close()
            if recv_ch is not send_ch:
                recv_ch.close()


def _validate_configs(configs: list[PartyConfig]) -> int:
    n = configs[0].n
    ids = [c.party_id for c in configs]
    if sorted(ids) != list(range(n)):
        raise ValueError(f"party ids must be 0..{n - 1} without duplicates, got {ids}")
    if any(c.n != n for c in configs):
        raise ValueError("inconsistent party counts")
    return n


def start_mem_session(configs: list[PartyConfig]) -> list[Session]:
    """Full mesh of in-memory channels; returns one session handle per party."""
    n = _validate_configs(configs)
    failed = threading.Event()
    trace = CommTrace()
    # chan[i][j]: directed channel i -> j
    chan = {i: {j: _MemChannel(failed) for j in range(n) if j != i} for i in range(n)}
    sessions = []
    for cfg in sorted(configs, key=lambda c: c.party_id):
        i = cfg.party_id
        channels = {j: (chan[i][j], chan[j][i]) for j in range(n) if j != i}
        sessions.append(Session(i, n, channels, trace, failed))
    return sessions


def _tcp_connect_party(cfg: PartyConfig, trace: CommTrace, failed: threading.Event,
                       timeout: float) -> Session:
    """Connect one party's mesh: listen for higher ids, dial lower ids."""
    i, n = cfg.party_id, cfg.n
    host, port = cfg.endpoints[i]
    listener = socket.create_server((host, port))
    listener.settimeout(timeout)
    socks: dict[int, socket.socket] = {}
    try:
        for j in range(i):  # dial every lower id
            peer_host, peer_port = cfg.endpoints[j]
            s = socket.create_connection((peer_host, peer_port), timeout=timeout)
            s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            s.sendall(bytes([i]))
            socks[j] = s
        for _ in range(n - 1 - i):  # accept every higher id
            s, _addr = listener.accept()
            s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            peer = s.recv(1)[0]
            if peer in socks or not i < peer < n:
                raise TransportError(f"unexpected peer id {peer}")
            socks[peer] = s
    except socket.timeout:
        raise TransportError("connection timeout") from None
    finally:
        listener.close()
    channels = {}
    for j, s in socks.items():
        ch = _TcpChannel(s, failed)
        channels[j] = (ch, ch)  # sockets are bidirectional
    return Session(i, n, channels, trace, failed)


def start_tcp_session(configs: list[PartyConfig], timeout: float = 10.0) -> list[Session]:
    """Connect all parties over loopback TCP from one process (thread each)."""
    n = _validate_configs(configs)
    failed = threading.Event()
    trace = CommTrace()
    results: list = [None] * n
    errors: list = []

    def worker(cfg: PartyConfig):
        try:
            results[cfg.party_id] = _tcp_connect_party(cfg, trace, failed, timeout)
        except Exception as exc:  # noqa: BLE001 - surfaced below
            errors.append(exc)
            failed.set()

    threads = [threading.Thread(target=worker, args=(c,)) for c in configs]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout + 5)
    if errors:
        raise errors[0]
    return [results[i] for i in range(n)]


def start_session(configs: list[PartyConfig], timeout: float = 10.0) -> list[Session]:
    """Connect every party; TCP when configs carry endpoints, queues otherwise."""
    if configs[0].endpoints is not None:
        return start_tcp_session(configs, timeout=timeout)
    return start_mem_session(configs)


def free_endpoints(n: int) -> tuple:
    """Reserve n distinct loopback ports for a local TCP session."""
    socks = []
    eps = []
    for _ in range(n):
        s = socket.socket()
        s.bind(("127.0.0.1", 0))
        eps.append(("127.0.0.1", s.getsockname()[1]))
        socks.append(s)
    for s in socks:
        s.close()
    return tuple(eps)


class Meter:
    """Per-stage counts of interactive operations and pool consumption."""

    def __init__(self):
        self.ops = {s: {k: 0 for k in OP_KINDS} for s in STAGES}
        self.rounds = {s: 0 for s in STAGES}
        self.triples = {s: 0 for s in STAGES}
        self.bits = {s: 0 for s in STAGES}

    def count(self, stage: str, kind: str, width: int) -> None:
        self.ops[stage][kind] += width

    def op_total(self, stage: str | None = None) -> int:
        stages = [stage] if stage else STAGES
        return sum(self.ops[s][k] for s in stages for k in OP_KINDS)

    def kind_total(self, kind: str) -> int:
        return sum(self.ops[s][kind] for s in STAGES)


class PartyCtx:
    """Everything one party's protocol thread needs: session, pools, rng, meter."""

    def __init__(self, session: Session, pools: PartyPools, seed: int = 0,
                 session_id: str = ""):
        self.session = session
        self.party_id = session.party_id
        self.n = session.n
        self.pools = pools
        self.rng = __import__("random").Random(derive_seed("fedst-party", seed, session.party_id))
        self.meter = Meter()
        self.stage = "other"
        self.session_id = session_id

    # -- staging / metering -------------------------------------------------

    def set_stage(self, stage: str) -> None:
        if stage not in STAGE_TAG:
            raise ValueError(f"unknown stage {stage}")
        self.stage = stage

    def count_op(self, kind: str, width: int) -> None:
        self.meter.count(self.stage, kind, width)

    def take_triples(self, count: int) -> list[tuple[int, int, int]]:
        self.meter.triples[self.stage] += count
        return self.pools.triples.take(count)

    def take_bits(self, count: int) -> list[int]:
        self.meter.bits[self.stage] += count
        return self.pools.bits.take(count)

    # -- collectives ---------------------------------------------------------
    # Each collective is one lock-step round: every involved party sends to
    # its peers, then receives in fixed peer order.  Message sizes depend only
    # on vector widths, never on values.

    def open_vec(self, shares: list[int]) -> list[int]:
        """Open shared values to all parties; returns the plaintext vector."""
        ses = self.session
        ses.round_no += 1
        self.meter.rounds[self.stage] += 1
        payload = vec_to_wire(shares)
        for peer in ses.peers():
            ses.send(peer, payload, self.stage)
        totals = list(shares)
        for peer in ses.peers():
            other = vec_from_wire(ses.recv(peer))
            if len(other) != len(totals):
                raise TransportError("open width mismatch")
            for idx, v in enumerate(other):
                totals[idx] = (totals[idx] + v) % Q
        return totals

    def reveal_to(self, shares: list[int], target: int) -> list[int] | None:
        """Open shared values toward one party only."""
        ses = self.session
        ses.round_no += 1
        self.meter.rounds[self.stage] += 1
        if self.party_id != target:
            ses.send(target, vec_to_wire(shares), self.stage)
            return None
        totals = list(shares)
        for peer in ses.peers():
            other = vec_from_wire(ses.recv(peer))
            for idx, v in enumerate(other):
                totals[idx] = (totals[idx] + v) % Q
        return totals

    def share_from(self, owner: int, values: list[int] | None, width: int) -> list[int]:
        """Owner secret-shares a plaintext vector; everyone gets its share row."""
        ses = self.session
        ses.round_no += 1
        self.meter.rounds[self.stage] += 1
        if self.party_id == owner:
            if values is None or len(values) != width:
                raise ValueError("owner must supply the plaintext vector")
            rows = {p: [0] * width for p in range(self.n)}
            rng = self.rng
            for idx, v in enumerate(values):
                parts = share_raw(v, self.n, rng)
                # keep the adjusting share, hand out the uniform ones
                rows[owner][idx] = parts[0]
                k = 1
                for p in range(self.n):
                    if p != owner:
                        rows[p][idx] = parts[k]
                        k += 1
            for peer in ses.peers():
                ses.send(peer, vec_to_wire(rows[peer]), self.stage)
            return rows[owner]
        return vec_from_wire(ses.recv(owner))

    def broadcast_from(self, owner: int, payload: bytes | None) -> bytes:
        """Owner sends identical public metadata to every peer."""
        ses = self.session
        if self.party_id == owner:
            if payload is None:
                raise ValueError("owner must supply the payload")
            for peer in ses.peers():
                ses.send(peer, payload, self.stage)
            return payload
        return ses.recv(owner)

    def zero_share(self, width: int) -> list[int]:
        return [0] * width

    def public_share(self, values: list[int]) -> list[int]:
        """Trivial sharing of public constants: party 0 holds them, rest zero."""
        if self.party_id == 0:
            return [v % Q for v in values]
        return [0] * len(values)

    def rand_vec(self, width: int) -> list[int]:
        return [rand_element(self.rng) for _ in range(width)]


def run_parties(sessions: list[Session], pools_for, fn, args_for=None, seed: int = 0):
    """Run fn(ctx, *args) on one thread per party; returns per-party results.

    pools_for(party_id) supplies each party's dealer pools; args_for(party_id)
    supplies per-party positional arguments.  The first raised exception is
    re-raised after all threads stop.
    """
    n = len(sessions)
    results: list = [None] * n
    errors: list = []

    def worker(session: Session):
        ctx = PartyCtx(session, pools_for(session.party_id), seed=seed)
        try:
            args = args_for(session.party_id) if args_for else ()
            results[session.party_id] = fn(ctx, *args)
        except BaseException as exc:  # noqa: BLE001 - stored and re-raised
            errors.append(exc)
            session.fail()

    threads = [threading.Thread(target=worker, args=(s,)) for s in sessions]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    return results


def comm_stats(sessions: list[Session], meters: list[Meter] | None = None) -> dict:
    """Aggregate per-stage traffic totals (and op counts when meters given)."""
    trace = sessions[0].trace
    totals = trace.stage_totals()
    out = {"stages": totals,
           "messages": trace.message_count(),
           "bytes": trace.total_bytes()}
    if meters:
        ops = {s: {k: 0 for k in OP_KINDS} for s in STAGES}
        rounds = {s: 0 for s in STAGES}
        for s in STAGES:
            for k in OP_KINDS:
                # SPMD: every party performs the same ops; report party 0's view
                ops[s][k] = meters[0].ops[s][k]
            rounds[s] = meters[0].rounds[s]
        out["ops"] = ops
        out["rounds"] = rounds
    return out


def make_group(n: int, seed: int = 0, transport: str = "mem",
               dealer: Dealer | None = None):
    """Convenience bundle: sessions plus a dealer for pools."""
    if dealer is None:
        dealer = Dealer(n, seed=seed)
    configs = [PartyConfig(i, n, seed=seed) for i in range(n)]
    if transport == "mem":
        sessions = start_mem_session(configs)
    elif transport == "tcp":
        eps = free_endpoints(n)
        configs = [PartyConfig(i, n, seed=seed, endpoints=eps) for i in range(n)]
        sessions = start_tcp_session(configs)
    else:
        raise ValueError(f"unknown transport {transport}")
    return sessions, dealer
