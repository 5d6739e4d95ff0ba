"""Reader for the labeled window dataset files (see the simulator's
docs/formats.md). This package touches the simulator only through its file
formats, so the layout constants are restated here."""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"GFRADST1"
Y1_SHAPE = (3, 256)
Y2_SHAPE = (21, 128)
N_Y1 = Y1_SHAPE[0] * Y1_SHAPE[1]
N_Y2 = Y2_SHAPE[0] * Y2_SHAPE[1]
N_FIELDS = N_Y1 + N_Y2 + 2 + 1


class WindowDataset:
    """Memory-mapped record access: Y1, Y2, label pair, class id."""

    def __init__(self, path):
        with open(path, "rb") as fh:
            if fh.read(len(MAGIC)) != MAGIC:
                raise ValueError(f"{path}: not a window dataset")
            self.count = struct.unpack("<I", fh.read(4))[0]
        self.records = np.memmap(path, dtype="<f4", mode="r",
                                 offset=len(MAGIC) + 4,
                                 shape=(self.count, N_FIELDS))

    def __len__(self):
        return self.count

    def batch(self, idx):
        """(y1, y2, labels, class_ids) float32 arrays for the given rows."""
        rows = np.asarray(self.records[idx], dtype=np.float32)
        y1 = rows[:, :N_Y1].reshape(-1, *Y1_SHAPE)
        y2 = rows[:, N_Y1:N_Y1 + N_Y2].reshape(-1, *Y2_SHAPE)
        labels = rows[:, N_Y1 + N_Y2:N_Y1 + N_Y2 + 2]
        class_ids = rows[:, -1].astype(np.int16)
        return y1, y2, labels, class_ids

    def labels(self):
        """All label pairs without materializing the features."""
        return np.asarray(self.records[:, N_Y1 + N_Y2:N_Y1 + N_Y2 + 2],
                          dtype=np.float32)


def split_indices(count: int, train_fraction: float, seed: int):
    """Deterministic shuffled train/validation split."""
    order = np.random.default_rng(seed).permutation(count)
    n_train = int(round(train_fraction * count))
    return order[:n_train], order[n_train:]
