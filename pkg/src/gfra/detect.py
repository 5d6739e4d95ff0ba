"""Boundary-detection primitives.

Two detectors score a length-128 window for the presence of the known
start (label A) and tail (label B) sequences:

* a normalized noncoherent correlation statistic (the classic GLRT for a
  known sequence with unknown complex gain), applied after MRC;
* a two-branch CNN that sees the MRC window (branch 1) and, for tail
  detection, the LDPC decoder's per-iteration LLR trajectory (branch 2).

This module is inference-only; weights are loaded from the portable file
format written by the trainer (see docs/formats.md).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .traffic import START_SYMBOLS, TAIL_SYMBOLS

# output probabilities are kept strictly inside (0, 1)
_P_EPS = 1e-12


# -- correlation detector ----------------------------------------------------

def glrt_statistic(window: np.ndarray, reference: np.ndarray) -> float:
    """Normalized correlation score in [0, 1], invariant to complex scaling.

    score = |sum(window * reference)|^2 / (L * sum(|window|^2))

    An all-zero window scores 0.
    """
    return float(glrt_statistic_batch(np.asarray(window)[None, :], reference)[0])


def glrt_statistic_batch(windows: np.ndarray, reference: np.ndarray) -> np.ndarray:
    windows = np.asarray(windows)
    reference = np.asarray(reference)
    if windows.shape[-1] != reference.shape[0]:
        raise ValueError("window and reference lengths differ")
    L = reference.shape[0]
    num = np.abs(windows @ reference) ** 2
    den = L * np.einsum("...t,...t->...", windows, windows.conj()).real
    return np.divide(num, den, out=np.zeros_like(num, dtype=np.float64),
                     where=den > 0)


# -- feature construction ----------------------------------------------------

def build_y1(window_hat: np.ndarray,
             x_pre: np.ndarray = START_SYMBOLS,
             x_tail: np.ndarray = TAIL_SYMBOLS) -> np.ndarray:
    """3 x 2L feature: known start row, MRC-estimate row, known tail row."""
    return build_y1_batch(np.asarray(window_hat)[None, :], x_pre, x_tail)[0]


def build_y1_batch(windows_hat: np.ndarray,
                   x_pre: np.ndarray = START_SYMBOLS,
                   x_tail: np.ndarray = TAIL_SYMBOLS) -> np.ndarray:
    windows_hat = np.asarray(windows_hat, dtype=np.complex128)
    L = windows_hat.shape[-1]
    if x_pre.shape[0] != L or x_tail.shape[0] != L:
        raise ValueError("window and sequence lengths differ")
    B = windows_hat.shape[0]
    y1 = np.empty((B, 3, 2 * L), dtype=np.float32)
    y1[:, 0, :L], y1[:, 0, L:] = np.real(x_pre), np.imag(x_pre)
    y1[:, 1, :L], y1[:, 1, L:] = windows_hat.real, windows_hat.imag
    y1[:, 2, :L], y1[:, 2, L:] = np.real(x_tail), np.imag(x_tail)
    return y1


def build_y2(mode: str, decode, i_max: int = 20, L_tail: int = 128) -> np.ndarray:
    """(i_max + 1) x L_tail feature for the decoder-information branch.

    tail mode: rows 0..i_max-1 are the decoder's posterior-LLR trajectory
    and the last row is the convergence flag (all-one iff converged).
    start mode: ``decode`` is a correlation scalar replicated over the
    trajectory rows; the flag row is all-zero.
    """
    if mode == "start":
        y2 = np.full((i_max + 1, L_tail), float(decode), dtype=np.float32)
        y2[-1, :] = 0.0
        return y2
    if mode == "tail":
        traj = np.asarray(decode.llr_trajectory, dtype=np.float32)
        if traj.shape != (i_max, L_tail):
            raise ValueError(f"expected {(i_max, L_tail)} trajectory, got {traj.shape}")
        y2 = np.empty((i_max + 1, L_tail), dtype=np.float32)
        y2[:i_max] = traj
        y2[-1, :] = 1.0 if decode.converged else 0.0
        return y2
    raise ValueError(f"unknown mode {mode!r}")


def build_y2_start_batch(correlations: np.ndarray, i_max: int = 20,
                         L_tail: int = 128) -> np.ndarray:
    B = correlations.shape[0]
    y2 = np.zeros((B, i_max + 1, L_tail), dtype=np.float32)
    y2[:, :i_max, :] = np.asarray(correlations, dtype=np.float32)[:, None, None]
    return y2


def build_y2_tail_batch(trajectories: np.ndarray, converged: np.ndarray) -> np.ndarray:
    B, i_max, L = trajectories.shape
    y2 = np.empty((B, i_max + 1, L), dtype=np.float32)
    y2[:, :i_max] = trajectories
    y2[:, -1, :] = converged.astype(np.float32)[:, None]
    return y2


# -- CNN inference ------------------------------------------------------------

@dataclass
class DetectionScores:
    pA: float  # probability that the window holds the start sequence
    pB: float  # probability that the window holds the tail sequence


# (name, weight shape, bias length) in file order; the conv kernel is stored
# flattened row-major as an 8 x 14 matrix
LAYER_SPECS = (
    ("conv", (8, 14), 8),
    ("fc1a", (130, 4000), 130),
    ("fc1b", (65, 130), 65),
    ("fc2a", (130, 2688), 130),
    ("fc2b", (65, 130), 65),
    ("fcm1", (130, 130), 130),
    ("fcm2", (65, 130), 65),
    ("fcout", (2, 65), 2),
)

WEIGHTS_MAGIC = "CNNW1"


@dataclass
class CnnWeights:
    """All learnable parameters, shapes fixed by the architecture."""

    conv: np.ndarray
    conv_bias: np.ndarray
    fc1a: np.ndarray
    fc1a_bias: np.ndarray
    fc1b: np.ndarray
    fc1b_bias: np.ndarray
    fc2a: np.ndarray
    fc2a_bias: np.ndarray
    fc2b: np.ndarray
    fc2b_bias: np.ndarray
    fcm1: np.ndarray
    fcm1_bias: np.ndarray
    fcm2: np.ndarray
    fcm2_bias: np.ndarray
    fcout: np.ndarray
    fcout_bias: np.ndarray

    def __post_init__(self):
        for name, w_shape, b_len in LAYER_SPECS:
            w = np.asarray(getattr(self, name), dtype=np.float32)
            b = np.asarray(getattr(self, name + "_bias"), dtype=np.float32)
            if w.shape != w_shape or b.shape != (b_len,):
                raise ValueError(f"layer {name}: expected {w_shape}/({b_len},), "
                                 f"got {w.shape}/{b.shape}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {name}: non-finite values")
            setattr(self, name, w)
            setattr(self, name + "_bias", b)

    @property
    def conv_kernel(self) -> np.ndarray:
        """Conv weights as (filters, 2, 7)."""
        return self.conv.reshape(8, 2, 7)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "CnnWeights":
        """He-style random initialization (testing and training bootstrap)."""
        values = {}
        for name, w_shape, b_len in LAYER_SPECS:
            fan_in = w_shape[1] if name != "conv" else 14
            values[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in),
                                      size=w_shape).astype(np.float32)
            values[name + "_bias"] = np.zeros(b_len, dtype=np.float32)
        return cls(**values)


def save_weights(path, weights: CnnWeights) -> None:
    """Manifest header then row-major little-endian float32 blocks."""
    with open(path, "wb") as fh:
        header = [WEIGHTS_MAGIC]
        header += [f"{name} {shape[0]} {shape[1]}" for name, shape, _ in LAYER_SPECS]
        header.append("end\n")
        fh.write("\n".join(header).encode("ascii"))
        for name, _, _ in LAYER_SPECS:
            fh.write(getattr(weights, name).astype("<f4").tobytes(order="C"))
            fh.write(getattr(weights, name + "_bias").astype("<f4").tobytes())


def load_weights(path) -> CnnWeights:
    with open(path, "rb") as fh:
        if fh.readline().decode("ascii").strip() != WEIGHTS_MAGIC:
            raise ValueError("not a CNN weights file")
        for name, shape, _ in LAYER_SPECS:
            tokens = fh.readline().decode("ascii").split()
            if tokens != [name, str(shape[0]), str(shape[1])]:
                raise ValueError(f"manifest mismatch at layer {name}: {tokens}")
        if fh.readline().decode("ascii").strip() != "end":
            raise ValueError("manifest missing 'end' terminator")
        values = {}
        for name, shape, b_len in LAYER_SPECS:
            count = shape[0] * shape[1]
            w = np.frombuffer(fh.read(4 * count), dtype="<f4", count=count)
            b = np.frombuffer(fh.read(4 * b_len), dtype="<f4", count=b_len)
            values[name] = w.reshape(shape).copy()
            values[name + "_bias"] = b.copy()
    return CnnWeights(**values)


def _relu(x):
    return np.maximum(x, 0.0, out=x)


def cnn_forward(weights: CnnWeights, y1: np.ndarray, y2: np.ndarray) -> DetectionScores:
    """Score one window; see :func:`cnn_forward_batch`."""
    scores = cnn_forward_batch(weights, y1[None], y2[None])[0]
    return DetectionScores(pA=float(scores[0]), pB=float(scores[1]))


def cnn_forward_batch(weights: CnnWeights, y1: np.ndarray,
                      y2: np.ndarray) -> np.ndarray:
    """Two-branch forward pass over (B, 3, 2L) and (B, i_max+1, L) inputs.

    Branch 1: 8@2x7 conv (valid, stride 1) + ReLU, flatten, 130/65 dense
    with ReLU.  Branch 2: flatten, 130/65 dense with ReLU.  Merged head:
    130/65 dense with ReLU, a 2-unit linear layer, sigmoid.  Returns a
    (B, 2) array of [pA, pB] scores in the open interval (0, 1).
    """
    y1 = np.ascontiguousarray(y1, dtype=np.float32)
    y2 = np.ascontiguousarray(y2, dtype=np.float32)
    if y1.ndim != 3 or y1.shape[1] != 3:
        raise ValueError(f"expected (B, 3, 2L) Y1, got {y1.shape}")
    if y2.ndim != 3 or y2.shape[0] != y1.shape[0]:
        raise ValueError(f"expected matching (B, i_max+1, L) Y2, got {y2.shape}")

    patches = np.lib.stride_tricks.sliding_window_view(y1, (2, 7), axis=(1, 2))
    conv = np.einsum("bxywh,fwh->bfxy", patches, weights.conv_kernel,
                     dtype=np.float32)
    conv += weights.conv_bias[None, :, None, None]
    b1 = _relu(conv).reshape(y1.shape[0], -1)
    if b1.shape[1] != 4000:
        raise ValueError(f"conv stage produced {b1.shape[1]} features, expected 4000")
    b1 = _relu(b1 @ weights.fc1a.T + weights.fc1a_bias)
    b1 = _relu(b1 @ weights.fc1b.T + weights.fc1b_bias)

    b2 = y2.reshape(y2.shape[0], -1)
    if b2.shape[1] != weights.fc2a.shape[1]:
        raise ValueError(f"Y2 flattens to {b2.shape[1]}, expected {weights.fc2a.shape[1]}")
    b2 = _relu(b2 @ weights.fc2a.T + weights.fc2a_bias)
    b2 = _relu(b2 @ weights.fc2b.T + weights.fc2b_bias)

    merged = np.concatenate([b1, b2], axis=1)
    merged = _relu(merged @ weights.fcm1.T + weights.fcm1_bias)
    merged = _relu(merged @ weights.fcm2.T + weights.fcm2_bias)
    logits = (merged @ weights.fcout.T + weights.fcout_bias).astype(np.float64)
    # numerically stable sigmoid, clipped into the open unit interval
    exp_neg_abs = np.exp(-np.abs(logits))
    probs = np.where(logits >= 0, 1.0 / (1.0 + exp_neg_abs),
                     exp_neg_abs / (1.0 + exp_neg_abs))
    return np.clip(probs, _P_EPS, 1.0 - _P_EPS)


def classify(scores: DetectionScores, threshold_A: float,
             threshold_B: float) -> tuple[int, int]:
    """Independent per-label thresholding: labels are not mutually exclusive."""
    if not (0 < threshold_A < 1 and 0 < threshold_B < 1):
        raise ValueError("thresholds must lie in (0, 1)")
    return int(scores.pA >= threshold_A), int(scores.pB >= threshold_B)
