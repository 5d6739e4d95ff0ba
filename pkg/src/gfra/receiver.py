"""Superframe receiver chain: scan, estimate, combine, decode, cancel.

Per candidate start the receiver estimates the channel from the preamble
window, MRC-combines the following 128-symbol blocks, decodes each block
with the fixed-iteration NMS decoder, and asks the tail detector after
every block whether the unit just ended.  Successfully decoded units are
reconstructed and subtracted (SIC), and the scan repeats on the cleaned
buffer until a round produces nothing new.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import detect, ldpc
from .config import SimConfig
from .traffic import START_SYMBOLS, TAIL_SYMBOLS, bits_to_symbols

TAIL_DETECTED = "tail-detected"
MAX_LENGTH_REACHED = "max-length-reached"
FAILURE = "failure"


# -- per-symbol primitives ---------------------------------------------------

def estimate_channel(preamble_window: np.ndarray,
                     x_pre: np.ndarray = START_SYMBOLS) -> np.ndarray:
    """Least-squares channel estimate from an R x L_pre window."""
    window = np.asarray(preamble_window)
    if window.shape[-1] != x_pre.shape[0]:
        raise ValueError("window width must equal the start-sequence length")
    return window @ x_pre.conj() / np.real(x_pre @ x_pre.conj())


def mrc_combine(h_hat: np.ndarray, columns: np.ndarray) -> np.ndarray:
    """Maximal-ratio combining: h^H r / ||h||^2 per symbol time."""
    h_norm2 = np.real(h_hat @ h_hat.conj())
    if h_norm2 == 0:
        raise ValueError("channel estimate must be nonzero")
    return h_hat.conj() @ columns / h_norm2


def llr_map(symbol_estimate, noise_scale: float, h_norm2: float = 1.0):
    """Channel LLRs for the MRC output: 4 * Re(x_hat) * ||h||^2 / (2 sigma_w^2).

    Positive LLR favors bit 0 under the 0 -> +1 symbol map.  The decoder is
    scale-invariant, so only the sign pattern affects hard decisions; the
    scale convention here keeps LLR magnitudes commensurate with SNR.
    """
    if noise_scale <= 0:
        raise ValueError("noise_scale must be > 0")
    return 4.0 * np.real(symbol_estimate) * h_norm2 / (2.0 * noise_scale)


# -- detectors ----------------------------------------------------------------

class GlrtDetector:
    """Correlation detector: score = normalized GLRT against each sequence.

    Detector scores live in the open interval (0, 1) so that threshold
    sweeps have clean endpoints; pristine windows would otherwise score
    exactly 1 through the float32 feature path.
    """

    kind = "glrt"

    def score_records(self, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
        del y2  # decoder information is not used by this detector
        L = y1.shape[2] // 2
        windows = y1[:, 1, :L] + 1j * y1[:, 1, L:]
        out = np.empty((y1.shape[0], 2))
        out[:, 0] = detect.glrt_statistic_batch(windows, START_SYMBOLS)
        out[:, 1] = detect.glrt_statistic_batch(windows, TAIL_SYMBOLS)
        return np.clip(out, 1e-12, 1.0 - 1e-12)


class CnnDetector:
    """Learned detector operating on the Y1/Y2 features."""

    kind = "cnn"

    def __init__(self, weights: detect.CnnWeights):
        self.weights = weights

    def score_records(self, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
        return detect.cnn_forward_batch(self.weights, y1, y2)


@dataclass(frozen=True)
class Thresholds:
    start: float = 0.5
    tail: float = 0.5


# -- receiver outputs ----------------------------------------------------------

@dataclass
class DecodedUnit:
    """One command-unit decoding attempt."""

    tau_hat: int               # estimated start time
    iota_hat: int              # decoded codeword count (0 if tail at block 1)
    bits: np.ndarray           # iota_hat * k info bits (hard decisions)
    h_hat: np.ndarray          # channel estimate used for this unit
    termination: str           # TAIL_DETECTED | MAX_LENGTH_REACHED | FAILURE
    converged: list = field(default_factory=list)  # per pre-tail block
    detection_score: float = 0.0

    @property
    def success(self) -> bool:
        """Eligible for SIC: a real unit (>=1 codeword), tail found, all
        pre-tail blocks converged to codewords."""
        return (self.termination == TAIL_DETECTED and self.iota_hat >= 1
                and all(self.converged))

    def payload_key(self) -> bytes:
        return self.bits.tobytes()


# -- receiver chain -------------------------------------------------------------

class Receiver:
    def __init__(self, cfg: SimConfig, detector=None,
                 thresholds: Thresholds = Thresholds(),
                 code: ldpc.ParityCheckMatrix | None = None,
                 alpha: float = ldpc.DEFAULT_ALPHA, max_rounds: int = 8):
        self.cfg = cfg
        self.detector = detector or GlrtDetector()
        self.thresholds = thresholds
        self.code = code or ldpc.ParityCheckMatrix.default()
        self.alpha = alpha
        self.max_rounds = max_rounds
        # scale is immaterial to the decoder's decisions; keep it positive
        self.noise_scale = cfg.radio.sigma_w2 if cfg.radio.sigma_w2 > 0 else 1.0

    # -- start scan ------------------------------------------------------------

    def _window_scores(self, buffer: np.ndarray):
        """GLRT start score for every window position in one pass.

        With the channel estimated from the window itself, the matched-filter
        numerator is identically L^2, so the score reduces to L / E_mrc where
        E_mrc is the MRC-combined window energy; E_mrc follows from sliding
        antenna cross-correlations computed with prefix sums.
        """
        frame = self.cfg.frame
        L = frame.L_pre
        R, T = buffer.shape
        n_win = T - L + 1
        if n_win < 1:
            raise ValueError("buffer shorter than the start sequence")

        h_hat = np.empty((R, n_win), dtype=np.complex128)
        for a in range(R):
            h_hat[a] = np.correlate(buffer[a], START_SYMBOLS, mode="valid") / L
        h_norm2 = np.einsum("an,an->n", h_hat, h_hat.conj()).real

        # S[a,b,tau] = sum_t r_a[tau+t] conj(r_b[tau+t]) over the window
        cross = np.empty((R, R, n_win), dtype=np.complex128)
        for a in range(R):
            for b in range(a, R):
                prod = buffer[a] * buffer[b].conj()
                prefix = np.concatenate(([0.0], np.cumsum(prod)))
                cross[a, b] = prefix[L:] - prefix[:-L]
                if b != a:
                    cross[b, a] = cross[a, b].conj()

        quad = np.einsum("an,abn,bn->n", h_hat.conj(), cross, h_hat).real
        with np.errstate(divide="ignore", invalid="ignore"):
            energy = np.where(h_norm2 > 0, quad / np.maximum(h_norm2, 1e-300) ** 2, 0.0)
            scores = np.where(energy > 0, L / np.maximum(energy, 1e-300), 0.0)
        return scores, h_hat, h_norm2

    def _mrc_windows(self, buffer, h_hat, h_norm2, positions):
        """MRC-combined length-L_pre windows at the given positions."""
        L = self.cfg.frame.L_pre
        view = np.lib.stride_tricks.sliding_window_view(buffer, L, axis=1)
        win = view[:, positions, :]                     # (R, B, L)
        combined = np.einsum("abl,ab->bl", win, h_hat[:, positions].conj())
        norm = np.where(h_norm2[positions] > 0, h_norm2[positions], 1.0)
        return combined / norm[:, None]

    def scan_starts(self, buffer: np.ndarray, threshold: float | None = None):
        """Candidate start times: local maxima of the start score above the
        threshold, suppressing anything within L_pre/2 of a stronger one.

        Returns (times, scores) sorted by descending score.
        """
        threshold = self.thresholds.start if threshold is None else threshold
        glrt_scores, h_hat, h_norm2 = self._window_scores(buffer)

        if self.detector.kind == "cnn":
            scores = np.zeros_like(glrt_scores)
            idx = np.flatnonzero(glrt_scores > 0)
            frame = self.cfg.frame
            for lo in range(0, idx.size, 2048):
                chunk = idx[lo:lo + 2048]
                windows = self._mrc_windows(buffer, h_hat, h_norm2, chunk)
                y1 = detect.build_y1_batch(windows)
                y2 = detect.build_y2_start_batch(glrt_scores[chunk],
                                                 frame.i_max, frame.L_tail)
                scores[chunk] = self.detector.score_records(y1, y2)[:, 0]
        else:
            scores = glrt_scores

        above = np.flatnonzero(scores >= threshold)
        order = above[np.argsort(scores[above])[::-1]]
        guard = self.cfg.frame.L_pre // 2
        taken: list[int] = []
        for tau in order:
            if all(abs(tau - t) >= guard for t in taken):
                taken.append(int(tau))
        return np.array(taken, dtype=np.int64), scores[taken]

    # -- per-unit processing ------------------------------------------------------

    def decode_unit(self, buffer: np.ndarray, tau_hat: int) -> DecodedUnit:
        frame = self.cfg.frame
        L_pre, L_code = frame.L_pre, frame.L_code
        empty = np.empty(0, dtype=np.uint8)
        if tau_hat < 0 or tau_hat + L_pre + L_code > buffer.shape[1]:
            return DecodedUnit(tau_hat, 0, empty, np.zeros(buffer.shape[0]),
                               FAILURE)

        h_hat = estimate_channel(buffer[:, tau_hat:tau_hat + L_pre])
        h_norm2 = float(np.real(h_hat @ h_hat.conj()))
        if h_norm2 == 0:
            return DecodedUnit(tau_hat, 0, empty, h_hat, FAILURE)

        n_blocks = min(frame.iota_max + 1,
                       (buffer.shape[1] - tau_hat - L_pre) // L_code)
        segment = buffer[:, tau_hat + L_pre:tau_hat + L_pre + n_blocks * L_code]
        estimates = mrc_combine(h_hat, segment).reshape(n_blocks, L_code)
        llrs = llr_map(estimates, self.noise_scale, h_norm2)
        decoded = ldpc.nms_decode_batch(llrs, frame.i_max, self.alpha, self.code)

        if self.detector.kind == "cnn":
            y1 = detect.build_y1_batch(estimates)
            y2 = detect.build_y2_tail_batch(decoded.llr_trajectory,
                                            decoded.converged)
            tail_scores = self.detector.score_records(y1, y2)[:, 1]
        else:
            tail_scores = detect.glrt_statistic_batch(estimates, TAIL_SYMBOLS)

        fired = np.flatnonzero(tail_scores >= self.thresholds.tail)
        if fired.size == 0:
            termination = MAX_LENGTH_REACHED if n_blocks == frame.iota_max + 1 \
                else FAILURE
            return DecodedUnit(tau_hat, 0, empty, h_hat, termination)

        iota_hat = int(fired[0])
        info = [self.code.extract_info(decoded.hard_bits[b])
                for b in range(iota_hat)]
        bits = np.concatenate(info) if info else empty
        return DecodedUnit(tau_hat, iota_hat, bits.astype(np.uint8), h_hat,
                           TAIL_DETECTED,
                           converged=[bool(c) for c in decoded.converged[:iota_hat]])

    def reconstruct(self, unit: DecodedUnit) -> np.ndarray:
        """Re-encoded BPSK waveform [start | codewords | tail] of a unit."""
        k = self.cfg.frame.k
        blocks = [START_SYMBOLS]
        for j in range(unit.iota_hat):
            word = self.code.encode(unit.bits[j * k:(j + 1) * k])
            blocks.append(bits_to_symbols(word))
        blocks.append(TAIL_SYMBOLS)
        return np.concatenate(blocks)

    def sic_subtract(self, buffer: np.ndarray, unit: DecodedUnit) -> np.ndarray:
        """Remove the unit's reconstructed contribution; returns a new buffer."""
        x = self.reconstruct(unit)
        out = buffer.copy()
        out[:, unit.tau_hat:unit.tau_hat + x.size] -= unit.h_hat[:, None] * x[None, :]
        return out

    # -- superframe loop -----------------------------------------------------------

    def run_superframe(self, buffer: np.ndarray,
                       max_rounds: int | None = None,
                       return_attempts: bool = False):
        """Scan / decode / cancel until a round decodes nothing new.

        Returns successfully decoded units with duplicate payloads removed
        (a command unit is recovered when any of its replicas decodes).
        With ``return_attempts`` also returns every decode attempt as a
        (tau_hat, termination) pair for diagnostic scoring.
        """
        max_rounds = self.max_rounds if max_rounds is None else max_rounds
        residual = buffer
        recovered: dict[bytes, DecodedUnit] = {}
        attempts: list[tuple[int, str]] = []
        for _ in range(max_rounds):
            taus, scores = self.scan_starts(residual)
            successes = []
            for tau, score in zip(taus, scores):
                unit = self.decode_unit(residual, int(tau))
                unit.detection_score = float(score)
                attempts.append((unit.tau_hat, unit.termination))
                if unit.success:
                    successes.append(unit)
            if not successes:
                break
            for unit in successes:  # already in descending score order
                residual = self.sic_subtract(residual, unit)
                recovered.setdefault(unit.payload_key(), unit)
        units = list(recovered.values())
        return (units, attempts) if return_attempts else units
