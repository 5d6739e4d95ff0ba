"""Trainer for the two-branch boundary-detection CNN.

Reads the simulator's dataset files, trains with the fixed architecture
and hyperparameters, and writes the portable weights file the simulator's
inference path loads.
"""

from .data import WindowDataset
from .evaluate import evaluate, recall_at
from .model import BoundaryCnn, export_weights, import_weights
from .train import TrainConfig, TrainResult, train

__all__ = ["WindowDataset", "BoundaryCnn", "export_weights", "import_weights",
           "TrainConfig", "TrainResult", "train", "evaluate", "recall_at"]
