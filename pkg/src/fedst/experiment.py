"""Experiment execution: local / centralized / federated pipelines to CSV."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .classify import train_eval_classifier, transform_plain
from .data import Dataset, load_ucr_tsv, make_synthetic_motif, partition_stratified
from .runtime import comm_stats, make_group, run_parties
from .search import SearchConfig, centralized_search, fedss_run
from .sharing import Dealer

CSV_COLUMNS = ["mode", "dataset", "seed", "n", "M", "N", "SC", "K", "measure",
               "use_dp", "use_sorted_ig", "contract_s", "accuracy", "wall_s",
               "mul_count", "cmp_count", "div_count", "log_count", "bytes_total"]


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str                       # local | federated | centralized
    config: SearchConfig
    n: int = 3
    dataset: str = "synthetic:24,32"
    test: str | None = None
    partition_seed: int = 0
    transport: str = "mem"
    classifier_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("local", "federated", "centralized"):
            raise ValueError(f"unknown mode {self.mode}")
        if self.mode == "federated" and self.n < 2:
            raise ValueError("federated mode requires at least 2 parties")


def resolve_datasets(spec: ExperimentSpec) -> tuple[Dataset, Dataset | None]:
    """Load train/test data; synthetic specs auto-generate a test set."""
    if spec.dataset.startswith("synthetic:"):
        m, n = (int(v) for v in spec.dataset.split(":", 1)[1].split(","))
        train = make_synthetic_motif(m, n, spec.config.seed)
        test = make_synthetic_motif(60, n, spec.config.seed + 1000,
                                    self_check=False)
        return train, test
    train = load_ucr_tsv(spec.dataset)
    test = load_ucr_tsv(spec.test) if spec.test else None
    return train, test


def run_federated(spec: ExperimentSpec, train: Dataset, test: Dataset | None,
                  dealer: Dealer | None = None) -> dict:
    parts = partition_stratified(train, spec.n, spec.partition_seed)
    sessions, dealer = make_group(spec.n, seed=spec.config.seed,
                                  transport=spec.transport, dealer=dealer)
    meters = [None] * spec.n

    def worker(ctx, samples):
        res = fedss_run(ctx, samples, spec.config, transform_after=test is not None)
        meters[ctx.party_id] = ctx.meter
        return res

    t0 = time.perf_counter()
    results = run_parties(sessions, dealer.pools_for, worker,
                          args_for=lambda p: (parts[p].samples,),
                          seed=spec.config.seed)
    wall = time.perf_counter() - t0
    p0 = results[0]
    accuracy = None
    if test is not None:
        accuracy = train_eval_classifier(p0.table, p0.table_labels,
                                         p0.shapelets, test,
                                         seed=spec.classifier_seed)
    stats = comm_stats(sessions, meters)
    return {"result": p0, "accuracy": accuracy, "wall_s": wall,
            "stats": stats, "sessions": sessions, "meters": meters,
            "parts": parts}


def run_plain(spec: ExperimentSpec, train: Dataset, test: Dataset | None) -> dict:
    parts = partition_stratified(train, spec.n, spec.partition_seed) \
        if spec.n > 1 else [train]
    p0 = parts[0]
    pool = p0 if spec.mode == "local" else train
    t0 = time.perf_counter()
    res = centralized_search(p0.samples, pool.samples, spec.config)
    accuracy = None
    if test is not None:
        table = transform_plain(res.shapelets, pool.samples)
        accuracy = train_eval_classifier(table, pool.labels(), res.shapelets,
                                         test, seed=spec.classifier_seed)
    wall = time.perf_counter() - t0
    return {"result": res, "accuracy": accuracy, "wall_s": wall, "stats": None}


def run_experiment(spec: ExperimentSpec, dealer: Dealer | None = None) -> list[dict]:
    """Execute one experiment; returns CSV-ready rows."""
    train, test = resolve_datasets(spec)
    if spec.mode == "federated":
        out = run_federated(spec, train, test, dealer=dealer)
    else:
        out = run_plain(spec, train, test)
    cfg = spec.config
    stats = out["stats"]
    ops = stats["ops"] if stats else None
    row = {
        "mode": spec.mode,
        "dataset": spec.dataset,
        "seed": cfg.seed,
        "n": spec.n if spec.mode == "federated" else 1,
        "M": train.size,
        "N": train.series_length,
        "SC": cfg.candidate_count,
        "K": cfg.k,
        "measure": cfg.measure,
        "use_dp": int(cfg.use_dp),
        "use_sorted_ig": int(cfg.use_sorted_ig),
        "contract_s": cfg.contract_seconds if cfg.contract_seconds else "",
        "accuracy": "" if out["accuracy"] is None else f"{out['accuracy']:.4f}",
        "wall_s": f"{out['wall_s']:.3f}",
        "mul_count": sum(ops[s]["mul"] for s in ops) if ops else 0,
        "cmp_count": sum(ops[s]["cmp"] for s in ops) if ops else 0,
        "div_count": sum(ops[s]["div"] for s in ops) if ops else 0,
        "log_count": sum(ops[s]["log"] for s in ops) if ops else 0,
        "bytes_total": stats["bytes"] if stats else 0,
    }
    return [row]


def write_rows(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in CSV_COLUMNS})
