"""The two-branch multi-label boundary-detection CNN, and import/export of
the portable weights file consumed by the inference side.

Architecture (all shapes fixed):
  branch 1: 8@2x7 conv (valid, stride 1) + ReLU -> flatten (4000)
            -> 130 dense ReLU -> 65 dense ReLU
  branch 2: flatten Y2 (2688) -> 130 dense ReLU -> 65 dense ReLU
  merged:   concat (130) -> 130 dense ReLU -> 65 dense ReLU -> 2 dense
            -> sigmoid (multi-label: start and tail fire independently)

Dropout sits after each dense ReLU during training. The file layout (layer
order, row-major float32, bias after weights) is shared with the inference
reader; see the simulator's docs/formats.md.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

WEIGHTS_MAGIC = "CNNW1"
# (manifest name, module attribute, weight rows, weight cols)
LAYER_TABLE = (
    ("conv", "conv", 8, 14),
    ("fc1a", "fc1a", 130, 4000),
    ("fc1b", "fc1b", 65, 130),
    ("fc2a", "fc2a", 130, 2688),
    ("fc2b", "fc2b", 65, 130),
    ("fcm1", "fcm1", 130, 130),
    ("fcm2", "fcm2", 65, 130),
    ("fcout", "fcout", 2, 65),
)


class BoundaryCnn(nn.Module):
    def __init__(self, dropout: float = 0.2):
        super().__init__()
        self.conv = nn.Conv2d(1, 8, kernel_size=(2, 7))
        self.fc1a = nn.Linear(4000, 130)
        self.fc1b = nn.Linear(130, 65)
        self.fc2a = nn.Linear(2688, 130)
        self.fc2b = nn.Linear(130, 65)
        self.fcm1 = nn.Linear(130, 130)
        self.fcm2 = nn.Linear(130, 65)
        self.fcout = nn.Linear(65, 2)
        self.drop = nn.Dropout(dropout)
        self.relu = nn.ReLU()
        # branch-2 inputs are LLR trajectories saturating at +/-30, so shrink
        # that layer's initial scale to keep both branches comparable at init
        with torch.no_grad():
            self.fc2a.weight.mul_(1.0 / 30.0)
            self.fc2a.bias.zero_()

    def forward(self, y1: torch.Tensor, y2: torch.Tensor) -> torch.Tensor:
        """Logits (B, 2) from (B, 3, 256) and (B, 21, 128) features."""
        b1 = self.relu(self.conv(y1.unsqueeze(1))).flatten(1)
        b1 = self.drop(self.relu(self.fc1a(b1)))
        b1 = self.drop(self.relu(self.fc1b(b1)))
        b2 = self.drop(self.relu(self.fc2a(y2.flatten(1))))
        b2 = self.drop(self.relu(self.fc2b(b2)))
        merged = torch.cat([b1, b2], dim=1)
        merged = self.drop(self.relu(self.fcm1(merged)))
        merged = self.drop(self.relu(self.fcm2(merged)))
        return self.fcout(merged)

    @torch.no_grad()
    def scores(self, y1: np.ndarray, y2: np.ndarray,
               batch: int = 2048) -> np.ndarray:
        """(B, 2) sigmoid scores, evaluated in inference mode."""
        self.eval()
        out = np.empty((y1.shape[0], 2), dtype=np.float64)
        for lo in range(0, y1.shape[0], batch):
            hi = min(lo + batch, y1.shape[0])
            logits = self(torch.from_numpy(np.ascontiguousarray(y1[lo:hi])),
                          torch.from_numpy(np.ascontiguousarray(y2[lo:hi])))
            out[lo:hi] = torch.sigmoid(logits).numpy()
        return out

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def _layer_arrays(model: BoundaryCnn, name: str):
    module = getattr(model, name)
    weight = module.weight.detach().cpu().numpy().astype("<f4")
    bias = module.bias.detach().cpu().numpy().astype("<f4")
    if name == "conv":
        weight = weight.reshape(8, 14)  # (8,1,2,7) kernels, row-major
    return weight, bias


def export_weights(model: BoundaryCnn, path) -> None:
    """Write the manifest header and float32 blocks in fixed layer order."""
    with open(path, "wb") as fh:
        lines = [WEIGHTS_MAGIC]
        lines += [f"{name} {rows} {cols}" for name, _, rows, cols in LAYER_TABLE]
        lines.append("end\n")
        fh.write("\n".join(lines).encode("ascii"))
        for name, attr, rows, cols in LAYER_TABLE:
            weight, bias = _layer_arrays(model, attr)
            assert weight.shape == (rows, cols) and bias.shape == (rows,)
            fh.write(weight.tobytes(order="C"))
            fh.write(bias.tobytes())


def import_weights(path, dropout: float = 0.2) -> BoundaryCnn:
    """Rebuild a model from a portable weights file."""
    model = BoundaryCnn(dropout=dropout)
    with open(path, "rb") as fh:
        if fh.readline().decode("ascii").strip() != WEIGHTS_MAGIC:
            raise ValueError("not a CNN weights file")
        for name, _, rows, cols in LAYER_TABLE:
            if fh.readline().decode("ascii").split() != [name, str(rows), str(cols)]:
                raise ValueError(f"manifest mismatch at {name}")
        if fh.readline().decode("ascii").strip() != "end":
            raise ValueError("manifest missing terminator")
        state = {}
        for name, attr, rows, cols in LAYER_TABLE:
            weight = np.frombuffer(fh.read(4 * rows * cols), dtype="<f4",
                                   count=rows * cols).reshape(rows, cols)
            bias = np.frombuffer(fh.read(4 * rows), dtype="<f4", count=rows)
            if attr == "conv":
                weight = weight.reshape(8, 1, 2, 7)
            state[f"{attr}.weight"] = torch.from_numpy(weight.copy())
            state[f"{attr}.bias"] = torch.from_numpy(bias.copy())
    model.load_state_dict(state)
    return model
