"""Downstream plaintext classifier over the shapelet-transformed table.

Training happens in the clear at party 0 once the transformed table has been
revealed; the classifier itself is deliberately simple (a bagged-tree
ensemble with fixed hyper-parameters, 40 trees by default) so accuracy
comparisons isolate the shapelet-search stage.
"""

from __future__ import annotations

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from .shapelets import shapelet_distance_plain

N_TREES = 40
MAX_DEPTH = 10


def transform_plain(shapelet_list, samples) -> np.ndarray:
    """Distances from every sample to every shapelet (plaintext path)."""
    return np.array([[shapelet_distance_plain(s.values, ts.values)
                      for s in shapelet_list] for ts in samples])


def train_eval_classifier(train_table, train_labels, shapelet_list, test_dataset,
                          n_trees: int = N_TREES, max_depth: int = MAX_DEPTH,
                          seed: int = 0) -> float:
    """Fit the ensemble on the transformed rows, evaluate on a held-out set."""
    labels = np.asarray(train_labels)
    if len(set(labels.tolist())) < 2:
        raise ValueError("training data is single-class")
    clf = RandomForestClassifier(n_estimators=n_trees, max_depth=max_depth,
                                 random_state=seed)
    clf.fit(np.asarray(train_table, dtype=float), labels)
    test_table = transform_plain(shapelet_list, test_dataset.samples)
    pred = clf.predict(test_table)
    truth = np.asarray(test_dataset.labels())
    return float((pred == truth).mean())
