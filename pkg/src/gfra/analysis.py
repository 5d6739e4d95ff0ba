"""Tail-confusion probability analysis and detector cost accounting.

The worst receiver failure is premature termination: an interfering
replica's tail lands on one of the instants inside a victim replica where
a shorter unit's tail could legitimately sit (the "dangerous set"), the
unit is truncated, and SIC subtracts the wrong support.  This module
computes the probability of that event in closed form under Poisson
activations, exposes brute-force Monte Carlo oracles for every step, and
reproduces the detector's FLOP accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .config import FrameConfig


@dataclass(frozen=True)
class VictimReplica:
    """The replica being decoded when the confusion may happen."""

    tau_v: int   # victim activation time
    iota_v: int  # codewords in the victim's command unit
    slot: int    # slot index of the watched replica, in [1, N_slot]
    offset: int  # in-slot offset of the watched replica

    def start(self, frame: FrameConfig) -> int:
        return self.tau_v + (self.slot - 1) * frame.L_max + self.offset


@dataclass(frozen=True)
class DangerousSet:
    """Instants where an interfering tail mimics a shorter victim's tail."""

    instants: tuple


def dangerous_set(victim: VictimReplica, frame: FrameConfig) -> DangerousSet:
    """One instant per interior codeword boundary of the victim replica."""
    if not 1 <= victim.iota_v <= frame.iota_max:
        raise ValueError("iota_v out of range")
    if not 0 <= victim.offset <= frame.offset_max(victim.iota_v):
        raise ValueError("offset out of range")
    base = victim.start(frame)
    return DangerousSet(tuple(base + frame.tail_distance(j)
                              for j in range(1, victim.iota_v)))


def p_delta(tau_u: int, s: int, iota: int, delta: int,
            frame: FrameConfig) -> float:
    """Probability that a replica in slot s puts its tail exactly at delta.

    Uniform in-slot offset: one admissible offset value out of O_max + 1,
    zero if the required offset falls outside [0, O_max].
    """
    o_star = delta - tau_u - (s - 1) * frame.L_max - frame.tail_distance(iota)
    o_max = frame.offset_max(iota)
    return 1.0 / (o_max + 1) if 0 <= o_star <= o_max else 0.0


def p_dangerous(tau_u: int, s: int, iota: int, dset: DangerousSet,
                frame: FrameConfig) -> float:
    """Per-slot probability of hitting any dangerous instant (point events
    at distinct instants are mutually exclusive, so they sum)."""
    return sum(p_delta(tau_u, s, iota, d, frame) for d in dset.instants)


@dataclass(frozen=True)
class NoHitProbability:
    value: float
    stderr: float  # 0 when computed by exact enumeration
    exact: bool


SUBSET_ENUM_LIMIT = 10**6


def prob_no_hit(tau_u: int, iota: int, dset: DangerousSet, frame: FrameConfig,
                rng: np.random.Generator | None = None,
                mc_subsets: int = 200_000) -> NoHitProbability:
    """Probability that none of the N_rep replicas hits the dangerous set.

    Averages the per-subset product of slot-wise no-hit probabilities over
    all equiprobable N_rep-slot subsets; falls back to subset sampling when
    the enumeration would exceed SUBSET_ENUM_LIMIT.
    """
    miss = np.array([1.0 - p_dangerous(tau_u, s, iota, dset, frame)
                     for s in range(1, frame.N_slot + 1)])
    if math.comb(frame.N_slot, frame.N_rep) <= SUBSET_ENUM_LIMIT:
        products = [miss[list(subset)].prod()
                    for subset in combinations(range(frame.N_slot), frame.N_rep)]
        return NoHitProbability(float(np.mean(products)), 0.0, True)
    if rng is None:
        raise ValueError("subset enumeration too large; provide an rng for sampling")
    idx = np.argsort(rng.random((mc_subsets, frame.N_slot)), axis=1)[:, :frame.N_rep]
    samples = miss[idx].prod(axis=1)
    return NoHitProbability(float(samples.mean()),
                            float(samples.std(ddof=1) / math.sqrt(mc_subsets)),
                            False)


def q_dangerous(tau_u: int, dset: DangerousSet, frame: FrameConfig) -> float:
    """Probability that one activation at tau_u produces at least one replica
    whose tail hits the dangerous set, averaged over the uniform codeword
    count of the interferer."""
    total = 0.0
    for iota in range(1, frame.iota_max + 1):
        total += 1.0 - prob_no_hit(tau_u, iota, dset, frame).value
    return total / frame.iota_max


def _q_dangerous_all(dset: DangerousSet, frame: FrameConfig) -> np.ndarray:
    """q_D over every admissible activation instant, vectorized."""
    taus = np.arange(frame.T_act)
    deltas = np.array(dset.instants, dtype=np.int64)
    if deltas.size == 0:
        return np.zeros(frame.T_act)
    slots = np.arange(1, frame.N_slot + 1)
    iotas = np.arange(1, frame.iota_max + 1)
    d_iota = frame.L_pre + iotas * frame.L_code
    o_max = np.array([frame.offset_max(int(i)) for i in iotas])

    # o_star indexed (tau, slot, iota, delta)
    o_star = (deltas[None, None, None, :] - taus[:, None, None, None]
              - (slots[None, :, None, None] - 1) * frame.L_max
              - d_iota[None, None, :, None])
    admissible = (o_star >= 0) & (o_star <= o_max[None, None, :, None])
    p_d = admissible.sum(axis=3) / (o_max + 1)[None, None, :]   # (tau, slot, iota)

    combos = np.array(list(combinations(range(frame.N_slot), frame.N_rep)))
    miss = 1.0 - p_d                                            # (tau, slot, iota)
    prods = miss[:, combos, :].prod(axis=2)                     # (tau, combo, iota)
    no_hit = prods.mean(axis=1)                                 # (tau, iota)
    return (1.0 - no_hit).mean(axis=1)


def dangerous_activation_rate(victim: VictimReplica, frame: FrameConfig) -> float:
    """Sum of q_D over every admissible activation instant.

    Scaled by lambda this is the Poisson mean of dangerous activations, the
    exponent of the closed-form confusion probability.
    """
    if math.comb(frame.N_slot, frame.N_rep) > SUBSET_ENUM_LIMIT:
        raise NotImplementedError("closed form requires enumerable slot subsets")
    dset = dangerous_set(victim, frame)
    if not dset.instants:
        return 0.0
    return float(_q_dangerous_all(dset, frame).sum())


def tail_confusion_prob(victim: VictimReplica, frame: FrameConfig,
                        lam: float) -> float:
    """Closed form: P(confusion) = 1 - exp(-lambda * sum_tau q_D(tau)).

    The sum runs over every admissible activation instant; q_D vanishes
    wherever no replica of an activation could reach the dangerous set.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return 1.0 - math.exp(-lam * dangerous_activation_rate(victim, frame))


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    trials: int


def mc_tail_confusion(victim: VictimReplica, frame: FrameConfig, lam: float,
                      trials: int, rng: np.random.Generator,
                      chunk: int = 4096) -> McEstimate:
    """Brute-force oracle: simulate the activation process and count trials
    in which any interfering replica tail lands on a dangerous instant."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    dset = dangerous_set(victim, frame)
    deltas = np.array(dset.instants, dtype=np.int64)
    if deltas.size == 0 or lam == 0:
        return McEstimate(0.0, 0.0, trials)

    d_iota = frame.L_pre + np.arange(1, frame.iota_max + 1) * frame.L_code
    o_max = np.array([frame.offset_max(i) for i in range(1, frame.iota_max + 1)])
    hits = 0
    done = 0
    while done < trials:
        block = min(chunk, trials - done)
        counts = rng.poisson(lam, size=(block, frame.T_act))
        trial_idx, tau_idx = np.nonzero(counts)
        reps = counts[trial_idx, tau_idx]
        trial_of_act = np.repeat(trial_idx, reps)
        tau_of_act = np.repeat(tau_idx, reps)
        n_act = tau_of_act.size
        if n_act:
            iota_idx = rng.integers(0, frame.iota_max, size=n_act)
            slot_rank = np.argsort(rng.random((n_act, frame.N_slot)), axis=1)
            slots = slot_rank[:, :frame.N_rep] + 1
            offsets = (rng.random((n_act, frame.N_rep))
                       * (o_max[iota_idx] + 1)[:, None]).astype(np.int64)
            tails = (tau_of_act[:, None] + (slots - 1) * frame.L_max + offsets
                     + d_iota[iota_idx][:, None])
            act_hit = np.isin(tails, deltas).any(axis=1)
            hit_trials = np.unique(trial_of_act[act_hit])
            hits += hit_trials.size
        done += block
    p_hat = hits / trials
    return McEstimate(p_hat, math.sqrt(p_hat * (1.0 - p_hat) / trials), trials)


def mc_prob_no_hit(tau_u: int, iota: int, dset: DangerousSet,
                   frame: FrameConfig, trials: int,
                   rng: np.random.Generator) -> McEstimate:
    """Direct replica-placement oracle for the subset-enumeration formula."""
    deltas = np.array(dset.instants, dtype=np.int64)
    if deltas.size == 0:
        return McEstimate(1.0, 0.0, trials)
    d = frame.tail_distance(iota)
    o_max = frame.offset_max(iota)
    slot_rank = np.argsort(rng.random((trials, frame.N_slot)), axis=1)
    slots = slot_rank[:, :frame.N_rep] + 1
    offsets = rng.integers(0, o_max + 1, size=(trials, frame.N_rep))
    tails = tau_u + (slots - 1) * frame.L_max + offsets + d
    no_hit = ~np.isin(tails, deltas).any(axis=1)
    p_hat = no_hit.mean()
    return McEstimate(float(p_hat),
                      math.sqrt(p_hat * (1.0 - p_hat) / trials), trials)


# -- detector cost accounting ---------------------------------------------------

@dataclass(frozen=True)
class FlopReport:
    rows: tuple       # (layer name, FLOPs) in network order
    total: int

    def __getitem__(self, name: str) -> int:
        for row_name, flops in self.rows:
            if row_name == name:
                return flops
        raise KeyError(name)


def _dense_flops(n_in: int, n_out: int) -> int:
    return 2 * n_in * n_out + n_out


def cnn_flops(L_pre: int = 128, i_max: int = 20, L_tail: int = 128,
              conv_filters: int = 8, conv_kernel: tuple = (2, 7),
              dense_widths: tuple = (130, 65), n_labels: int = 2) -> FlopReport:
    """Per-layer FLOPs of the two-branch detector.

    Counting rules: multiply-accumulate is 2 FLOPs, a dense layer costs
    2*in*out + out, the conv stage adds one FLOP per output for its ReLU,
    and sigmoid plus thresholding cost 4 FLOPs per output label.  (Dense
    rows follow the published accounting, which leaves their ReLU out.)
    """
    kh, kw = conv_kernel
    out_h = 3 - kh + 1
    out_w = 2 * L_pre - kw + 1
    d_cv = out_h * out_w
    conv = 2 * conv_filters * kh * kw * 1 * d_cv + conv_filters * d_cv
    flat1 = conv_filters * d_cv
    flat2 = (i_max + 1) * L_tail
    w1, w2 = dense_widths

    rows = [
        (f"conv_{conv_filters}@{kh}x{kw}", conv),
        (f"fc_{flat1}x{w1}", _dense_flops(flat1, w1)),
        (f"fc_{w1}x{w2}", _dense_flops(w1, w2)),
        (f"fc_{flat2}x{w1}", _dense_flops(flat2, w1)),
        (f"fc_{w1}x{w2}_b2", _dense_flops(w1, w2)),
        (f"fc_{2 * w2}x{w1}", _dense_flops(2 * w2, w1)),
        (f"fc_{w1}x{w2}_m", _dense_flops(w1, w2)),
        (f"fc_{w2}x{n_labels}", _dense_flops(w2, n_labels)),
        ("sigmoid", 4 * n_labels),
    ]
    return FlopReport(rows=tuple(rows), total=sum(f for _, f in rows))
