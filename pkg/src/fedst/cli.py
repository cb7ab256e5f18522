"""Batch command-line tool.

Single-process runs (the default) execute every party in one process over
the in-memory or loopback-TCP transport and write one metrics row per run.
For genuinely distributed runs, start one process per party with --party-id,
--listen, and --connect; pre-dealt randomness is then loaded from the
directory named by FEDST_POOL_DIR (create it with --deal-pools).
"""

from __future__ import annotations

import argparse
import os
import sys
import threading

from .data import load_ucr_tsv, partition_stratified
from .experiment import (CSV_COLUMNS, ExperimentSpec, resolve_datasets,
                         run_experiment, write_rows)
from .classify import train_eval_classifier
from .runtime import CommTrace, PartyConfig, PartyCtx, _tcp_connect_party
from .search import SearchConfig, fedss_run
from .sharing import Dealer, PartyPools, _Pool, load_bits, load_triples

POOL_DIR_ENV = "FEDST_POOL_DIR"
TRIPLE_FILE = "triples.fstd"
BIT_FILE = "bits.fstb"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fedst",
        description="Federated shapelet search and transformation")
    p.add_argument("--mode", choices=["local", "federated", "centralized"],
                   default="federated")
    p.add_argument("--dataset", default="synthetic:24,32",
                   help="TSV path or synthetic:<M>,<N>")
    p.add_argument("--test", default=None, help="optional held-out TSV path")
    p.add_argument("--parties", type=int, default=3)
    p.add_argument("--candidates", type=int, default=500)
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--measure", choices=["ig", "fstat"], default="ig")
    p.add_argument("--opt", default="",
                   help="comma list of accelerations: dp,sort")
    p.add_argument("--contract", type=float, default=None,
                   help="wall-clock budget in seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--transport", choices=["mem", "tcp"], default="mem")
    p.add_argument("--party-id", type=int, default=None,
                   help="run a single party (distributed TCP mode)")
    p.add_argument("--listen", default=None, help="host:port this party binds")
    p.add_argument("--connect", default=None,
                   help="comma list id=host:port for every party")
    p.add_argument("--deal-pools", default=None, metavar="TRIPLES,BITS",
                   help="write dealer pools into FEDST_POOL_DIR and exit")
    return p


def _parse_opts(opt: str) -> tuple[bool, bool]:
    parts = {s.strip() for s in opt.split(",") if s.strip()}
    unknown = parts - {"dp", "sort"}
    if unknown:
        raise SystemExit(f"unknown --opt entries: {sorted(unknown)}")
    return "dp" in parts, "sort" in parts


def _pool_dir() -> str:
    return os.environ.get(POOL_DIR_ENV, "pools")


def _deal_pools(args) -> int:
    triples, bits = (int(v) for v in args.deal_pools.split(","))
    out_dir = _pool_dir()
    os.makedirs(out_dir, exist_ok=True)
    dealer = Dealer(args.parties, seed=args.seed)
    dealer.save_triples(os.path.join(out_dir, TRIPLE_FILE), triples)
    dealer.save_bits(os.path.join(out_dir, BIT_FILE), bits)
    print(f"dealt {triples} triples and {bits} bits for {args.parties} parties "
          f"into {out_dir}")
    return 0


def _parse_endpoints(args, n: int):
    eps: list = [None] * n
    for item in args.connect.split(","):
        pid, addr = item.split("=", 1)
        host, port = addr.rsplit(":", 1)
        eps[int(pid)] = (host, int(port))
    if args.listen:
        host, port = args.listen.rsplit(":", 1)
        eps[args.party_id] = (host, int(port))
    if any(e is None for e in eps):
        raise SystemExit("--connect must name every party id")
    return tuple(eps)


def _run_single_party(args, config: SearchConfig) -> int:
    n = args.parties
    endpoints = _parse_endpoints(args, n)
    cfg = PartyConfig(args.party_id, n, seed=args.seed, endpoints=endpoints)
    session = _tcp_connect_party(cfg, CommTrace(), threading.Event(), timeout=30.0)
    pool_dir = _pool_dir()
    pools = PartyPools(_Pool(), _Pool())
    pools.triples.extend(load_triples(os.path.join(pool_dir, TRIPLE_FILE),
                                      args.party_id, n))
    pools.bits.extend(load_bits(os.path.join(pool_dir, BIT_FILE),
                                args.party_id, n))
    train = load_ucr_tsv(args.dataset)
    parts = partition_stratified(train, n, args.seed)
    test = load_ucr_tsv(args.test) if args.test else None
    ctx = PartyCtx(session, pools, seed=args.seed)
    res = fedss_run(ctx, parts[args.party_id].samples, config,
                    transform_after=test is not None)
    if args.party_id == 0:
        if test is not None:
            acc = train_eval_classifier(res.table, res.table_labels,
                                        res.shapelets, test, seed=args.seed)
            print(f"accuracy {acc:.4f}")
        print(f"revealed indices: {res.revealed_indices}")
    session.close()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.deal_pools:
        return _deal_pools(args)
    use_dp, use_sort = _parse_opts(args.opt)
    config = SearchConfig(
        k=args.k, candidate_count=args.candidates, measure=args.measure,
        use_dp=use_dp, use_sorted_ig=use_sort,
        contract_seconds=args.contract, seed=args.seed)
    if args.party_id is not None:
        return _run_single_party(args, config)
    spec = ExperimentSpec(
        mode=args.mode, config=config, n=args.parties, dataset=args.dataset,
        test=args.test, partition_seed=args.seed, transport=args.transport)
    rows = run_experiment(spec)
    if args.out:
        write_rows(args.out, rows)
        print(f"wrote {len(rows)} row(s) to {args.out}")
    else:
        print(",".join(CSV_COLUMNS))
        for row in rows:
            print(",".join(str(row.get(c, "")) for c in CSV_COLUMNS))
    return 0


if __name__ == "__main__":
    sys.exit(main())
