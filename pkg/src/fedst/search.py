"""End-to-end federated shapelet search.

Party 0 generates the candidate pool; all parties jointly compute each
candidate's distance vector (basic or accelerated path), score it (naive or
sorting-accelerated information gain, or the F statistic), and finally
retrieve the top-K indices, revealed to party 0 only.

Candidates are evaluated in a seeded random order so a wall-clock contract
can stop the run at any candidate boundary and still approximate uniform
sampling; at least K candidates are always evaluated so the result stays
well-formed.  A continue/stop flag is broadcast at every boundary in both
modes, keeping the message pattern shape-only.
"""

from __future__ import annotations

import random
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .ring import FRAC_BITS, decode_raw, derive_seed, encode_raw
from .runtime import PartyCtx, comm_stats
from .mpc import SharedVector, sec_topk, sv_open
from . import quality, shapelets

MEASURE_IG = "ig"
MEASURE_FSTAT = "fstat"


@dataclass(frozen=True)
class SearchConfig:
    k: int
    candidate_count: int
    measure: str = MEASURE_IG
    use_dp: bool = False
    use_sorted_ig: bool = False
    contract_seconds: float | None = None
    seed: int = 0
    reveal_qualities: bool = False

    def __post_init__(self):
        if self.k > self.candidate_count:
            raise ValueError("k cannot exceed the candidate count")
        if self.measure not in (MEASURE_IG, MEASURE_FSTAT):
            raise ValueError(f"unknown measure {self.measure}")


@dataclass
class SearchResult:
    shapelets: list | None              # plaintext candidates, party 0 only
    revealed_indices: list[int] | None  # indices into the candidate pool
    qualities: list[float] | None       # revealed only on explicit opt-in
    comm_stats: dict = field(default_factory=dict)
    evaluated_count: int = 0
    candidates: list | None = None      # party 0 only, for stage two
    table: "np.ndarray | None" = None   # revealed transform, party 0 only
    table_labels: list[int] | None = None


def evaluation_order(count: int, seed: int) -> list[int]:
    order = list(range(count))
    random.Random(derive_seed("fedst-order", seed)).shuffle(order)
    return order


def _exchange_shapes(ctx: PartyCtx, m_local: int, c_local: int,
                     n_local: int) -> tuple[list[int], int, int]:
    sizes = [0] * ctx.n
    c_max = 0
    n_len = None
    for p in range(ctx.n):
        mine = struct.pack(">III", m_local, c_local, n_local)
        raw = ctx.broadcast_from(p, mine if ctx.party_id == p else None)
        m_p, c_p, n_p = struct.unpack(">III", raw)
        sizes[p] = m_p
        c_max = max(c_max, c_p)
        if n_len is None:
            n_len = n_p
        elif n_len != n_p:
            raise ValueError("all parties must hold series of equal length")
    return sizes, c_max, n_len


def retrieve_topk_reveal(ctx: PartyCtx, qualities: SharedVector,
                         ids: SharedVector, k: int,
                         reveal_values: bool = False):
    """Top-k by quality; index shares are opened toward party 0 only."""
    if k > len(qualities):
        raise ValueError("k out of range")
    idx_shares, val_shares = sec_topk(ctx, qualities, k, ids=ids,
                                      return_values=True)
    opened = ctx.reveal_to(idx_shares.values, 0)
    values = None
    if reveal_values:
        vals = ctx.reveal_to(val_shares.values, 0)
        if vals is not None:
            values = [decode_raw(v, FRAC_BITS) for v in vals]
    if opened is None:
        return None, None
    return [int(v) for v in opened], values


def fedss_run(ctx: PartyCtx, local_samples: list, config: SearchConfig,
              transform_after: bool = False) -> SearchResult:
    """Run the full search protocol; every party calls this with its data.

    With transform_after, the selected shapelets are also applied to every
    party's samples (stage two) and the resulting table plus labels are
    revealed to party 0 for classifier training.
    """
    t_start = time.perf_counter()
    labels = [ts.label for ts in local_samples]
    c_local = max(labels) if labels else 0
    n_local = len(local_samples[0]) if local_samples else 0
    sizes, n_classes, n_len = _exchange_shapes(
        ctx, len(local_samples), c_local, n_local)
    for p, m_p in enumerate(sizes):
        if m_p < 2:
            raise ValueError(f"party {p} holds fewer than 2 samples")

    # candidate pool at party 0; lengths are public metadata
    candidates = None
    if ctx.party_id == 0:
        cand_rng = random.Random(derive_seed("fedst-candidates", config.seed))
        candidates = shapelets.generate_candidates(
            local_samples, config.candidate_count, cand_rng)
        lengths_payload = struct.pack(f">{config.candidate_count}H",
                                      *[len(c) for c in candidates])
        ctx.broadcast_from(0, lengths_payload)
        lengths = [len(c) for c in candidates]
    else:
        raw = ctx.broadcast_from(0, None)
        lengths = list(struct.unpack(f">{config.candidate_count}H", raw))

    ctx.set_stage("quality")
    class_vecs = quality.build_class_vectors(ctx, sizes, n_classes, labels)

    ctx.set_stage("distance")
    own_enc = None
    if ctx.party_id == 0:
        own_enc = [shapelets.encode_series(ts.values) for ts in local_samples]
    shared_series = None
    if not config.use_dp:
        shared_series = shapelets.share_all_series(
            ctx, sizes, n_len, local_samples if ctx.party_id != 0 else None)

    order = evaluation_order(config.candidate_count, config.seed)
    quality_shares: list[int] = []
    evaluated_ids: list[int] = []
    for step, cand_idx in enumerate(order):
        ctx.set_stage("other")
        if ctx.party_id == 0:
            over_budget = (config.contract_seconds is not None
                           and time.perf_counter() - t_start > config.contract_seconds)
            go = not (over_budget and len(evaluated_ids) >= config.k)
            ctx.broadcast_from(0, b"\x01" if go else b"\x00")
        else:
            go = ctx.broadcast_from(0, None) == b"\x01"
        if not go:
            break

        length = lengths[cand_idx]
        cand_vals = candidates[cand_idx].values if ctx.party_id == 0 else None
        ctx.set_stage("distance")
        dists = shapelets.candidate_distances(
            ctx, config.use_dp, sizes, n_len, length,
            candidate_values=cand_vals,
            own_series_enc=own_enc,
            shared_series=shared_series,
            local_series=local_samples if ctx.party_id != 0 else None)

        ctx.set_stage("quality")
        y_s = candidates[cand_idx].source_class if ctx.party_id == 0 else None
        y_vec = quality.share_candidate_class(ctx, n_classes, y_s)
        if config.measure == MEASURE_FSTAT:
            q = quality.fstat_secure(ctx, dists, class_vecs)
        elif config.use_sorted_ig:
            q = quality.ig_secure_sorted(ctx, dists, class_vecs, y_vec)
        else:
            q = quality.ig_secure_naive(ctx, dists, class_vecs, y_vec)
        quality_shares.append(q.values[0])
        evaluated_ids.append(cand_idx)

    ctx.set_stage("topk")
    qual_vec = SharedVector(quality_shares, FRAC_BITS)
    id_vec = SharedVector(ctx.public_share(evaluated_ids), 0)
    indices, values = retrieve_topk_reveal(
        ctx, qual_vec, id_vec, config.k, reveal_values=config.reveal_qualities)
    ctx.set_stage("other")

    result = SearchResult(
        shapelets=None, revealed_indices=None, qualities=values,
        evaluated_count=len(evaluated_ids))
    if ctx.party_id == 0:
        result.revealed_indices = indices
        result.shapelets = [candidates[i] for i in indices]
        result.candidates = candidates

    if transform_after:
        # stage two: shapelet lengths are public; values stay at party 0
        ctx.set_stage("other")
        if ctx.party_id == 0:
            ctx.broadcast_from(0, struct.pack(
                f">{config.k}H", *[len(s) for s in result.shapelets]))
            shap_lengths = [len(s) for s in result.shapelets]
        else:
            raw = ctx.broadcast_from(0, None)
            shap_lengths = list(struct.unpack(f">{config.k}H", raw))
        ctx.set_stage("distance")
        cols = shapelets.fed_transform(
            ctx, config.use_dp, sizes, n_len, shap_lengths,
            shapelets=result.shapelets,
            own_series_enc=own_enc,
            shared_series=shared_series,
            local_series=local_samples if ctx.party_id != 0 else None)
        labels_sv = shapelets.share_labels(ctx, sizes, labels)
        ctx.set_stage("other")
        opened_cols = [ctx.reveal_to(col.values, 0) for col in cols]
        opened_labels = ctx.reveal_to(labels_sv.values, 0)
        if ctx.party_id == 0:
            result.table = np.array(
                [[decode_raw(opened_cols[kk][j], FRAC_BITS)
                  for kk in range(config.k)] for j in range(sum(sizes))])
            result.table_labels = [int(decode_raw(v, 0)) for v in opened_labels]
    return result


# ---------------------------------------------------------------------------
# plaintext references (centralized search; also the LocalST baseline)
# ---------------------------------------------------------------------------

@dataclass
class PlainSearchResult:
    indices: list[int]
    qualities: list[float]
    candidates: list
    shapelets: list


def plaintext_qualities(candidates, pool_samples, measure: str) -> list[float]:
    dists_all = []
    labels = [ts.label for ts in pool_samples]
    out = []
    for cand in candidates:
        d = [shapelets.shapelet_distance_plain(cand.values, ts.values)
             for ts in pool_samples]
        dists_all.append(d)
        if measure == MEASURE_FSTAT:
            q = quality.fstat_plain(d, labels)
            out.append(0.0 if np.isnan(q) else q)
        else:
            out.append(quality.ig_plain(d, labels, cand.source_class))
    return out


def centralized_search(p0_samples: list, pool_samples: list,
                       config: SearchConfig) -> PlainSearchResult:
    """Reference pipeline in the clear: same candidates, pooled data."""
    cand_rng = random.Random(derive_seed("fedst-candidates", config.seed))
    candidates = shapelets.generate_candidates(
        p0_samples, config.candidate_count, cand_rng)
    quals = plaintext_qualities(candidates, pool_samples, config.measure)
    order = sorted(range(len(candidates)), key=lambda i: (-quals[i], i))
    indices = order[: config.k]
    return PlainSearchResult(indices, quals, candidates,
                             [candidates[i] for i in indices])


def top_gap(qualities: list[float], k: int) -> float:
    """Quality gap between the k-th and (k+1)-th best candidates."""
    s = sorted(qualities, reverse=True)
    if len(s) <= k:
        return float("inf")
    return s[k - 1] - s[k]


def min_pairwise_top_gap(qualities: list[float], k: int) -> float:
    """Smallest pairwise gap among the top k+1 qualities."""
    s = sorted(qualities, reverse=True)[: k + 1]
    return min(s[i] - s[i + 1] for i in range(len(s) - 1)) if len(s) > 1 else float("inf")


def compare_configurations(run_one, grid: list[SearchConfig]) -> list[dict]:
    """Run a callback per configuration and collect cost/accuracy rows."""
    rows = []
    for cfg in grid:
        rows.append(run_one(cfg))
    return rows
