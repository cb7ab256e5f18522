"""Dataset loading, partitioning, and the synthetic motif generator."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .shapelets import TimeSeries, VALUE_BOUND, ValueRangeError
from .ring import derive_seed


class DatasetFormatError(ValueError):
    pass


class InsufficientClassSupportError(ValueError):
    pass


@dataclass
class Dataset:
    """Uniform-length labelled series with labels remapped to 1..C."""

    samples: list[TimeSeries]
    name: str = ""

    def __post_init__(self):
        if self.samples:
            n = len(self.samples[0])
            if any(len(s) != n for s in self.samples):
                raise DatasetFormatError("series lengths differ")

    @property
    def n_classes(self) -> int:
        return max(s.label for s in self.samples)

    @property
    def series_length(self) -> int:
        return len(self.samples[0])

    @property
    def size(self) -> int:
        return len(self.samples)

    def labels(self) -> list[int]:
        return [s.label for s in self.samples]


def load_ucr_tsv(path) -> Dataset:
    """Parse the archive TSV convention: label, then N tab-separated values."""
    rows: list[tuple[float, list[float]]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise DatasetFormatError(f"line {lineno}: no values after the label")
            try:
                label = float(fields[0])
                values = [float(v) for v in fields[1:]]
            except ValueError as exc:
                raise DatasetFormatError(f"line {lineno}: non-numeric field") from exc
            if rows and len(values) != len(rows[0][1]):
                raise DatasetFormatError(
                    f"line {lineno}: expected {len(rows[0][1])} values, got {len(values)}")
            for v in values:
                if abs(v) >= VALUE_BOUND:
                    raise ValueRangeError(f"line {lineno}: |{v}| >= {VALUE_BOUND}")
            rows.append((label, values))
    if not rows:
        raise DatasetFormatError("empty dataset")
    raw_labels = sorted({label for label, _ in rows})
    if len(raw_labels) < 2:
        raise DatasetFormatError("fewer than 2 classes")
    remap = {lab: i + 1 for i, lab in enumerate(raw_labels)}
    samples = [TimeSeries(tuple(values), remap[label]) for label, values in rows]
    import os

    return Dataset(samples, name=os.path.basename(str(path)))


def partition_stratified(dataset: Dataset, n: int, seed: int) -> list[Dataset]:
    """Split into n near-equal parts with at least 2 samples per class each."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = random.Random(derive_seed("fedst-partition", seed))
    by_class: dict[int, list[int]] = {}
    for idx, s in enumerate(dataset.samples):
        by_class.setdefault(s.label, []).append(idx)
    for label, idxs in sorted(by_class.items()):
        if len(idxs) < 2 * n:
            raise InsufficientClassSupportError(
                f"class {label} has {len(idxs)} samples, needs at least {2 * n}")
    parts: list[list[int]] = [[] for _ in range(n)]
    cursor = 0
    for label in sorted(by_class):
        idxs = list(by_class[label])
        rng.shuffle(idxs)
        for idx in idxs:
            parts[cursor % n].append(idx)
            cursor += 1
    out = []
    for p, idxs in enumerate(parts):
        idxs.sort()
        out.append(Dataset([dataset.samples[i] for i in idxs],
                           name=f"{dataset.name}#p{p}"))
    return out


def _motif(length: int, amplitude: float = 2.0) -> np.ndarray:
    t = np.linspace(0.0, 1.0, length)
    return amplitude * np.sin(math.pi * t) ** 2


def make_synthetic_motif(m: int, n: int, seed: int, sigma: float = 0.1,
                         self_check: bool = True) -> Dataset:
    """Two-class series: class 1 embeds a smooth motif, class 2 is noise only.

    The generator sanity-checks itself: a plaintext shapelet pipeline must
    reach at least 0.95 accuracy on fresh data from the same distribution.
    """
    if m % 2 or m < 4:
        raise ValueError("M must be even and at least 4")
    if n < 16:
        raise ValueError("N must be at least 16")
    rng = np.random.default_rng(derive_seed("fedst-motif", seed))
    motif = _motif(n // 4)
    samples = []
    for j in range(m):
        label = 1 if j < m // 2 else 2
        values = rng.normal(0.0, sigma, n) if sigma > 0 else np.zeros(n)
        if label == 1:
            # offsets stay within the first quarter so partial-overlap
            # candidates still discriminate reliably
            off = rng.integers(0, n // 4 + 1)
            values[off : off + len(motif)] += motif
        samples.append(TimeSeries(tuple(float(v) for v in values), label))
    ds = Dataset(samples, name=f"motif-M{m}-N{n}-s{seed}")
    if self_check:
        acc = _plaintext_pipeline_accuracy(ds, seed)
        if acc < 0.95:
            raise AssertionError(f"motif generator self-check failed: {acc:.3f} < 0.95")
    return ds


def _plaintext_pipeline_accuracy(train: Dataset, seed: int) -> float:
    from .search import SearchConfig, centralized_search
    from .classify import train_eval_classifier

    test = make_synthetic_motif(60, train.series_length, seed + 7919,
                                self_check=False)
    cfg = SearchConfig(k=5, candidate_count=30, seed=seed)
    res = centralized_search(train.samples, train.samples, cfg)
    from .shapelets import shapelet_distance_plain

    table = np.array([[shapelet_distance_plain(s.values, ts.values)
                       for s in res.shapelets] for ts in train.samples])
    return train_eval_classifier(table, train.labels(), res.shapelets, test,
                                 seed=seed)
