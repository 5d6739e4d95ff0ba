"""ROC evaluation of a trained model (or weights file) on a dataset file.

Emits the same row schema as the simulator's ROC campaigns:
label, threshold, false_alarm, recall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import WindowDataset
from .model import BoundaryCnn, import_weights
from .train import LABEL_NAMES


@dataclass(frozen=True)
class RocRow:
    label: str
    threshold: float
    false_alarm: float
    recall: float


def evaluate(model_or_path, data_path, thresholds) -> list:
    model = (model_or_path if isinstance(model_or_path, BoundaryCnn)
             else import_weights(model_or_path))
    ds = WindowDataset(data_path)
    idx = np.arange(len(ds))
    scores = np.empty((len(ds), 2))
    labels = np.empty((len(ds), 2), dtype=np.float32)
    for lo in range(0, len(ds), 8192):
        rows = idx[lo:lo + 8192]
        y1, y2, batch_labels, _ = ds.batch(rows)
        scores[rows] = model.scores(y1, y2)
        labels[rows] = batch_labels

    table = []
    for col, name in enumerate(LABEL_NAMES):
        positive = labels[:, col] > 0.5
        n_pos, n_neg = int(positive.sum()), int((~positive).sum())
        points = []
        for t in np.asarray(thresholds, dtype=float):
            fired = scores[:, col] >= t
            points.append(RocRow(
                name, float(t),
                float((fired & ~positive).sum() / n_neg) if n_neg else 0.0,
                float((fired & positive).sum() / n_pos) if n_pos else 0.0))
        points.sort(key=lambda p: (p.false_alarm, p.recall))
        table.extend(points)
    return table


def recall_at(table, label: str, target_f: float) -> float:
    """Best swept recall with false alarm at or below the target."""
    feasible = [row.recall for row in table
                if row.label == label and row.false_alarm <= target_f]
    return max(feasible) if feasible else 0.0
