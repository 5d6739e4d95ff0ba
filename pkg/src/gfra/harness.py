"""Experiment orchestration: labeled window sets, ROC sweeps, PLR campaigns.

Window classes (the detector's sample taxonomy):

    0  noise / non-informative fragment     label [0, 0]  start-mode features
    1  start sequence                       label [1, 0]  start-mode features
    2  tail sequence                        label [0, 1]  tail-mode features
    3  codeword block                       label [0, 0]  tail-mode features
    4  start overlapping a tail             label [1, 1]  tail-mode features

Class 0/1 windows are combined with the window's own least-squares channel
estimate (what the start scanner sees); class 2/3/4 windows use the owning
unit's preamble estimate (what the block-wise tail stage sees).
"""

from __future__ import annotations

import multiprocessing
import struct
from dataclasses import dataclass, replace

import numpy as np

from . import channel as ch
from . import detect, ldpc, traffic
from .config import SimConfig, validate
from .receiver import Receiver, Thresholds, estimate_channel, llr_map, mrc_combine

CLASS_LABELS = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (0.0, 1.0),
                3: (0.0, 0.0), 4: (1.0, 1.0)}
N_FIELDS = 3 * 256 + 21 * 128 + 2 + 1  # per-record float32 count
DATASET_MAGIC = b"GFRADST1"


# -- confusion metrics ---------------------------------------------------------

@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)


@dataclass(frozen=True)
class Metrics:
    recall: float | None
    false_alarm: float | None
    accuracy: float | None
    precision: float | None


def confusion_metrics(counts: ConfusionCounts) -> Metrics:
    """Recall, false alarm, accuracy, precision; None when undefined."""
    def ratio(num, den):
        return num / den if den > 0 else None
    return Metrics(
        recall=ratio(counts.tp, counts.tp + counts.fn),
        false_alarm=ratio(counts.fp, counts.fp + counts.tn),
        accuracy=ratio(counts.tp + counts.tn,
                       counts.tp + counts.tn + counts.fp + counts.fn),
        precision=ratio(counts.tp, counts.tp + counts.fp),
    )


# -- labeled window generation ---------------------------------------------------

@dataclass
class WindowSet:
    y1: np.ndarray         # (B, 3, 2*L_pre) float32
    y2: np.ndarray         # (B, i_max+1, L_tail) float32
    labels: np.ndarray     # (B, 2) float32
    class_ids: np.ndarray  # (B,) int16

    @property
    def count(self) -> int:
        return self.class_ids.shape[0]

    @staticmethod
    def concatenate(parts):
        return WindowSet(
            y1=np.concatenate([p.y1 for p in parts]),
            y2=np.concatenate([p.y2 for p in parts]),
            labels=np.concatenate([p.labels for p in parts]),
            class_ids=np.concatenate([p.class_ids for p in parts]),
        )


def dataset_config(cfg: SimConfig, sf_length: int | None = None) -> SimConfig:
    """Optionally override the superframe length used for window harvesting.

    Harvesting always works superframe by superframe at the configured
    T_SF; multi-superframe collection buffers are just concatenations of
    independent superframes, so they need no special handling here.
    """
    if sf_length is None:
        return validate(cfg)
    return validate(replace(cfg.frame, T_SF=sf_length), cfg.radio, cfg.traffic)


def _make_windowset(y1, y2, class_id):
    n = y1.shape[0]
    labels = np.tile(np.array(CLASS_LABELS[class_id], dtype=np.float32), (n, 1))
    return WindowSet(y1=y1, y2=y2, labels=labels,
                     class_ids=np.full(n, class_id, dtype=np.int16))


def _start_mode_windows(buffer, positions, cfg):
    """Self-estimated MRC windows plus their start-correlation scores."""
    frame = cfg.frame
    windows = np.empty((len(positions), frame.L_pre), dtype=np.complex128)
    for i, pos in enumerate(positions):
        win = buffer[:, pos:pos + frame.L_pre]
        h = estimate_channel(win)
        norm = np.real(h @ h.conj())
        windows[i] = h.conj() @ win / norm if norm > 0 else 0.0
    corr = detect.glrt_statistic_batch(windows, traffic.START_SYMBOLS)
    y1 = detect.build_y1_batch(windows)
    y2 = detect.build_y2_start_batch(corr, frame.i_max, frame.L_tail)
    return y1, y2


def _tail_mode_windows(buffer, block_positions, h_hats, cfg, code,
                       chunk: int = 1024):
    """Preamble-estimated MRC blocks decoded for their LLR trajectories."""
    frame = cfg.frame
    noise_scale = cfg.radio.sigma_w2 if cfg.radio.sigma_w2 > 0 else 1.0
    n = len(block_positions)
    y1 = np.empty((n, 3, 2 * frame.L_pre), dtype=np.float32)
    y2 = np.empty((n, frame.i_max + 1, frame.L_tail), dtype=np.float32)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        estimates = np.empty((hi - lo, frame.L_code), dtype=np.complex128)
        norms = np.empty(hi - lo)
        for i in range(lo, hi):
            h = h_hats[i]
            norms[i - lo] = np.real(h @ h.conj())
            estimates[i - lo] = mrc_combine(
                h, buffer[:, block_positions[i]:block_positions[i] + frame.L_code])
        llrs = llr_map(estimates, noise_scale, norms[:, None])
        decoded = ldpc.nms_decode_batch(llrs, frame.i_max, code=code)
        y1[lo:hi] = detect.build_y1_batch(estimates)
        y2[lo:hi] = detect.build_y2_tail_batch(decoded.llr_trajectory,
                                               decoded.converged)
    return y1, y2


def _inject_overlap_pair(buffer, cfg, rng, code):
    """Add two single-replica units so the second one's start sequence sits
    exactly on the first one's tail block.  Returns (unit start, tail-block
    start) of the first unit."""
    frame, radio = cfg.frame, cfg.radio
    iota_a = int(rng.integers(1, frame.iota_max + 1))
    iota_b = int(rng.integers(1, frame.iota_max + 1))
    tail_off = frame.tail_distance(iota_a)
    len_b = frame.unit_length(iota_b)
    pos_a = int(rng.integers(0, buffer.shape[1] - (tail_off + len_b)))

    for iota, pos in zip((iota_a, iota_b), (pos_a, pos_a + tail_off)):
        budget = ch.received_power(ch.draw_distance(radio, rng), radio,
                                   rng.standard_normal())
        budget = ch.fill_budget(budget, radio.K_lin, rng)
        h = ch.draw_channel(budget, radio.R, rng).h
        payload = rng.integers(0, 2, size=iota * frame.k, dtype=np.uint8)
        act = traffic.Activation(tau_u=0, iota_u=iota, payload=payload,
                                 slots=np.array([1]), offsets=np.array([0]),
                                 budget=budget, channels=[])
        x = traffic.waveform(act, cfg, code)
        buffer[:, pos:pos + x.size] += h[:, None] * x[None, :]
    return pos_a, pos_a + tail_off


def generate_window_batches(cfg: SimConfig, counts: dict,
                            rng: np.random.Generator,
                            code: ldpc.ParityCheckMatrix | None = None,
                            overlap_pairs_per_buffer: int = 16):
    """Yield WindowSet chunks until every class quota is met exactly.

    Classes 1..3 are harvested from ordinary traffic superframes, class 0
    from traffic-free buffers, and class 4 from dedicated superframes with
    injected overlap pairs (their organic occurrence is far too rare to
    sample).
    """
    code = code or ldpc.ParityCheckMatrix.default()
    frame = cfg.frame
    need = {c: int(counts.get(c, 0)) for c in range(5)}

    while need[0] > 0:
        # noise-only windows: regions overlapping no replica exist only in
        # traffic-free buffers at realistic loads; disjoint windows keep the
        # samples independent
        quota = min(need[0], 4096)
        noise = ch.apply_awgn(
            np.zeros((cfg.radio.R, quota * frame.L_pre), dtype=complex),
            cfg.radio.sigma_w2 if cfg.radio.sigma_w2 > 0 else 1.0, rng)
        positions = [i * frame.L_pre for i in range(quota)]
        y1, y2 = _start_mode_windows(noise, positions, cfg)
        yield _make_windowset(y1, y2, 0)
        need[0] -= quota

    while any(need[c] > 0 for c in (1, 2, 3)):
        scenario = traffic.generate_scenario(cfg, rng)
        if not scenario.activations:
            continue
        buffer = traffic.synthesize(scenario, rng, code).samples
        starts = scenario.start_truth
        tails = scenario.tail_truth
        owners = scenario.truth_act
        parts = []

        h_pre = {int(s): estimate_channel(buffer[:, s:s + frame.L_pre])
                 for s in starts}

        if need[1] > 0:
            take = starts[:need[1]]
            y1, y2 = _start_mode_windows(buffer, take, cfg)
            parts.append(_make_windowset(y1, y2, 1))
            need[1] -= len(take)

        if need[2] > 0:
            block_pos = tails[:need[2]]
            hs = [h_pre[int(s)] for s in starts[:need[2]]]
            y1, y2 = _tail_mode_windows(buffer, block_pos, hs, cfg, code)
            parts.append(_make_windowset(y1, y2, 2))
            need[2] -= len(block_pos)

        if need[3] > 0:
            block_pos, hs = [], []
            for s, owner in zip(starts, owners):
                iota = scenario.activations[owner].iota_u
                j = int(rng.integers(1, iota + 1))
                block_pos.append(int(s) + frame.L_pre + (j - 1) * frame.L_code)
                hs.append(h_pre[int(s)])
                if len(block_pos) == need[3]:
                    break
            y1, y2 = _tail_mode_windows(buffer, block_pos, hs, cfg, code)
            parts.append(_make_windowset(y1, y2, 3))
            need[3] -= len(block_pos)

        if parts:
            yield WindowSet.concatenate(parts)

    while need[4] > 0:
        scenario = traffic.generate_scenario(cfg, rng)
        buffer = traffic.synthesize(scenario, rng, code).samples
        n_pairs = min(need[4], overlap_pairs_per_buffer)
        placements = [_inject_overlap_pair(buffer, cfg, rng, code)
                      for _ in range(n_pairs)]
        hs = [estimate_channel(buffer[:, p:p + frame.L_pre])
              for p, _ in placements]
        block_pos = [b for _, b in placements]
        y1, y2 = _tail_mode_windows(buffer, block_pos, hs, cfg, code)
        yield _make_windowset(y1, y2, 4)
        need[4] -= n_pairs


def generate_windows(cfg: SimConfig, counts: dict, rng: np.random.Generator,
                     code: ldpc.ParityCheckMatrix | None = None) -> WindowSet:
    """In-memory window set with exactly the requested per-class counts."""
    chunks = list(generate_window_batches(cfg, counts, rng, code))
    return WindowSet.concatenate(chunks)


# -- dataset file ----------------------------------------------------------------

class DatasetWriter:
    """Streams records to the fixed-layout little-endian dataset file."""

    def __init__(self, path):
        self._fh = open(path, "wb")
        self._fh.write(DATASET_MAGIC)
        self._fh.write(struct.pack("<I", 0))
        self._count = 0

    def add(self, windows: WindowSet) -> None:
        n = windows.count
        flat = np.empty((n, N_FIELDS), dtype="<f4")
        flat[:, :768] = windows.y1.reshape(n, -1)
        flat[:, 768:768 + 2688] = windows.y2.reshape(n, -1)
        flat[:, 3456:3458] = windows.labels
        flat[:, 3458] = windows.class_ids
        self._fh.write(flat.tobytes(order="C"))
        self._count += n

    def close(self) -> None:
        self._fh.seek(len(DATASET_MAGIC))
        self._fh.write(struct.pack("<I", self._count))
        self._fh.close()


def export_dataset(path, cfg: SimConfig, counts: dict,
                   rng: np.random.Generator,
                   code: ldpc.ParityCheckMatrix | None = None) -> int:
    """Generate and stream a labeled dataset; returns the record count."""
    writer = DatasetWriter(path)
    try:
        for chunk in generate_window_batches(cfg, counts, rng, code):
            writer.add(chunk)
    finally:
        writer.close()
    return sum(int(v) for v in counts.values())


class Dataset:
    """Memory-mapped view of a dataset file with batched accessors."""

    def __init__(self, path):
        with open(path, "rb") as fh:
            if fh.read(len(DATASET_MAGIC)) != DATASET_MAGIC:
                raise ValueError("not a dataset file")
            self.count = struct.unpack("<I", fh.read(4))[0]
        self.records = np.memmap(path, dtype="<f4", mode="r",
                                 offset=len(DATASET_MAGIC) + 4,
                                 shape=(self.count, N_FIELDS))

    def batch(self, idx) -> WindowSet:
        rows = np.asarray(self.records[idx])
        return WindowSet(
            y1=rows[:, :768].reshape(-1, 3, 256),
            y2=rows[:, 768:3456].reshape(-1, 21, 128),
            labels=rows[:, 3456:3458].copy(),
            class_ids=rows[:, 3458].astype(np.int16),
        )

    def all(self) -> WindowSet:
        return self.batch(slice(None))


# -- ROC campaign -----------------------------------------------------------------

@dataclass(frozen=True)
class RocPoint:
    threshold: float
    false_alarm: float
    recall: float


def score_windows(detector, windows: WindowSet, chunk: int = 4096) -> np.ndarray:
    """(B, 2) detector scores for both labels."""
    out = np.empty((windows.count, 2))
    for lo in range(0, windows.count, chunk):
        hi = min(lo + chunk, windows.count)
        out[lo:hi] = detector.score_records(windows.y1[lo:hi], windows.y2[lo:hi])
    return out


def roc_from_scores(scores: np.ndarray, labels: np.ndarray,
                    thresholds: np.ndarray) -> dict:
    """Per-label (false alarm, recall) sweep, sorted by false alarm."""
    curves = {}
    for col, name in enumerate(("start", "tail")):
        positive = labels[:, col] > 0.5
        n_pos, n_neg = int(positive.sum()), int((~positive).sum())
        points = []
        for t in thresholds:
            fired = scores[:, col] >= t
            tp = int((fired & positive).sum())
            fp = int((fired & ~positive).sum())
            points.append(RocPoint(float(t),
                                   fp / n_neg if n_neg else 0.0,
                                   tp / n_pos if n_pos else 0.0))
        points.sort(key=lambda p: (p.false_alarm, p.recall))
        curves[name] = points
    return curves


def roc_campaign(cfg: SimConfig, detector, lam: float, count_per_class: int,
                 thresholds: np.ndarray, rng: np.random.Generator,
                 sf_length: int | None = None,
                 code: ldpc.ParityCheckMatrix | None = None) -> dict:
    """Balanced test windows (full count for classes 0..3, half for class 4)
    scored over a threshold grid."""
    run_cfg = dataset_config(
        validate(cfg.frame, cfg.radio, replace(cfg.traffic, lam=lam)),
        sf_length)
    counts = {0: count_per_class, 1: count_per_class, 2: count_per_class,
              3: count_per_class, 4: count_per_class // 2}
    windows = generate_windows(run_cfg, counts, rng, code)
    scores = score_windows(detector, windows)
    return roc_from_scores(scores, windows.labels, np.asarray(thresholds))


def recall_at_false_alarm(points, target_f: float) -> float:
    """Largest recall among sweep points with false alarm <= target."""
    feasible = [p.recall for p in points if p.false_alarm <= target_f]
    return max(feasible) if feasible else 0.0


# -- PLR campaign -------------------------------------------------------------------

@dataclass(frozen=True)
class PlrRecord:
    lam: float
    n_tx: int
    n_err: int
    n_miss: int

    @property
    def plr(self) -> float:
        return (self.n_err + self.n_miss) / self.n_tx if self.n_tx else 0.0


MATCH_TOLERANCE = 2  # symbols: decoded tau_hat vs. true replica start


def run_one_superframe(cfg: SimConfig, detector, thresholds: Thresholds,
                       rng: np.random.Generator,
                       code: ldpc.ParityCheckMatrix | None = None,
                       max_rounds: int = 8):
    """Simulate one superframe and score it; returns (n_tx, n_err, n_miss)."""
    scenario = traffic.generate_scenario(cfg, rng)
    buffer = traffic.synthesize(scenario, rng, code)
    rx = Receiver(cfg, detector, thresholds, code=code, max_rounds=max_rounds)
    units, attempts = rx.run_superframe(buffer.samples, return_attempts=True)
    recovered_keys = {u.payload_key() for u in units}
    attempt_taus = np.array([a[0] for a in attempts], dtype=np.int64)

    n_err = n_miss = 0
    for act in scenario.activations:
        if act.payload.tobytes() in recovered_keys:
            continue
        starts = act.replica_starts(cfg.L_max)
        detected = (attempt_taus.size and
                    (np.abs(attempt_taus[:, None] - starts[None, :])
                     <= MATCH_TOLERANCE).any())
        if detected:
            n_err += 1
        else:
            n_miss += 1
    return len(scenario.activations), n_err, n_miss


def _plr_chunk(args):
    (cfg, detector, thresholds, seed, lam_idx, first_trial, n_trials,
     max_rounds) = args
    tx = err = miss = 0
    for trial in range(first_trial, first_trial + n_trials):
        rng = np.random.default_rng(
            np.random.SeedSequence([seed, lam_idx, trial]))
        t, e, m = run_one_superframe(cfg, detector, thresholds, rng,
                                     max_rounds=max_rounds)
        tx += t
        err += e
        miss += m
    return tx, err, miss


def plr_campaign(cfg: SimConfig, detector, thresholds: Thresholds,
                 lam_grid, packets_target: int, seed: int,
                 workers: int = 1, chunk_trials: int = 64,
                 max_rounds: int = 8, progress=None) -> list:
    """PLR per traffic level over independent superframes.

    Trials are seeded by (seed, lambda index, trial index), and chunks are
    consumed in trial order until the packet target is met, so results are
    bit-reproducible for a fixed seed regardless of worker count.
    """
    records = []
    for lam_idx, lam in enumerate(lam_grid):
        run_cfg = validate(cfg.frame, cfg.radio, replace(cfg.traffic, lam=lam))
        totals = np.zeros(3, dtype=np.int64)

        def chunk_args(start):
            return (run_cfg, detector, thresholds, seed, lam_idx, start,
                    chunk_trials, max_rounds)

        if workers > 1:
            with multiprocessing.Pool(workers) as pool:
                pending = pool.imap(
                    _plr_chunk, (chunk_args(i * chunk_trials)
                                 for i in range(10**9)))
                for result in pending:
                    totals += result
                    if progress:
                        progress(lam, *totals)
                    if totals[0] >= packets_target:
                        pool.terminate()
                        break
        else:
            start = 0
            while totals[0] < packets_target:
                totals += _plr_chunk(chunk_args(start))
                start += chunk_trials
                if progress:
                    progress(lam, *totals)
        records.append(PlrRecord(lam, int(totals[0]), int(totals[1]),
                                 int(totals[2])))
    return records
