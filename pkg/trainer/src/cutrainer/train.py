"""Training loop: Adam on the summed per-label binary cross-entropies,
70/30 split, early stopping on validation loss."""

from __future__ import annotations

import copy
import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .data import WindowDataset, split_indices
from .model import BoundaryCnn

LABEL_NAMES = ("start", "tail")


@dataclass
class TrainConfig:
    dropout: float = 0.2
    batch: int = 50
    lr: float = 1e-3
    split: float = 0.7      # training fraction
    epochs: int = 50
    patience: int = 5       # early-stopping patience, in epochs
    monitor: str = "recall"  # "recall" (worst-label recall@F=0.1) or "loss"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if not 0.0 < self.split < 1.0:
            raise ValueError("split must be in (0, 1)")


@dataclass
class TrainResult:
    model: BoundaryCnn
    val_loss: float
    val_recall_at_f01: dict
    history: list = field(default_factory=list)
    val_indices: np.ndarray = None


def _label_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Sum of the two per-label binary cross-entropies, batch-averaged."""
    per_label = torch.nn.functional.binary_cross_entropy_with_logits(
        logits, labels, reduction="none")
    return per_label.sum(dim=1).mean()


def recall_at_false_alarm(scores: np.ndarray, positives: np.ndarray,
                          target_f: float = 0.1) -> float:
    """Best recall subject to an exact false-alarm budget on the negatives."""
    neg = np.sort(scores[~positives])[::-1]
    pos = scores[positives]
    if neg.size == 0 or pos.size == 0:
        return float("nan")
    allowed = int(math.floor(target_f * neg.size))
    if allowed >= neg.size:
        return 1.0
    threshold = np.nextafter(neg[allowed], np.inf)
    return float((pos >= threshold).mean())


def _validation_metrics(model: BoundaryCnn, ds: WindowDataset,
                        idx: np.ndarray, batch: int = 4096):
    y1, y2, labels, _ = ds.batch(np.sort(idx))
    scores = model.scores(y1, y2, batch=batch)
    loss = 0.0
    with torch.no_grad():
        for lo in range(0, idx.size, batch):
            hi = min(lo + batch, idx.size)
            logits = model(torch.from_numpy(y1[lo:hi]),
                           torch.from_numpy(y2[lo:hi]))
            loss += float(_label_loss(logits, torch.from_numpy(labels[lo:hi]))
                          ) * (hi - lo)
    recalls = {name: recall_at_false_alarm(scores[:, col], labels[:, col] > 0.5)
               for col, name in enumerate(LABEL_NAMES)}
    return loss / idx.size, recalls


def train(data_path, config: TrainConfig = TrainConfig(),
          log=print) -> TrainResult:
    ds = WindowDataset(data_path)
    train_idx, val_idx = split_indices(len(ds), config.split, config.seed)
    torch.manual_seed(config.seed)
    model = BoundaryCnn(dropout=config.dropout)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    # only the initial rate is pinned; halve it when the monitored score
    # stalls so late epochs can keep refining the hard overlap windows
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, mode="max", factor=0.5, patience=2)
    shuffler = np.random.default_rng(config.seed + 1)

    # early stopping tracks the deployment metric by default: stopping on
    # the plateauing BCE loss discards epochs in which recall at the fixed
    # false-alarm budget is still climbing
    best_score, best_state, best_epoch = -math.inf, None, -1
    history = []
    for epoch in range(config.epochs):
        t0 = time.time()
        model.train()
        order = shuffler.permutation(train_idx)
        for lo in range(0, order.size, config.batch):
            rows = order[lo:lo + config.batch]
            y1, y2, labels, _ = ds.batch(np.sort(rows))
            optimizer.zero_grad()
            loss = _label_loss(model(torch.from_numpy(y1),
                                     torch.from_numpy(y2)),
                               torch.from_numpy(labels))
            loss.backward()
            optimizer.step()

        val_loss, recalls = _validation_metrics(model, ds, val_idx)
        history.append(val_loss)
        if config.monitor == "loss":
            score = -val_loss
        else:
            # the worst label drives selection: the easy tail task would
            # otherwise mask stagnation on the harder start task
            score = min(recalls.values())
        if log:
            log(f"epoch {epoch:2d}: val_loss={val_loss:.4f} "
                f"recall@F0.1 start={recalls['start']:.4f} "
                f"tail={recalls['tail']:.4f} ({time.time() - t0:.0f}s)")
        scheduler.step(score)
        if score > best_score + 1e-5:
            best_score, best_epoch = score, epoch
            best_state = copy.deepcopy(model.state_dict())
        elif epoch - best_epoch >= config.patience:
            if log:
                log(f"early stop at epoch {epoch} (best {best_epoch})")
            break

    if best_state is not None:
        model.load_state_dict(best_state)
    val_loss, recalls = _validation_metrics(model, ds, val_idx)
    return TrainResult(model=model, val_loss=val_loss,
                       val_recall_at_f01=recalls, history=history,
                       val_indices=val_idx)
