"""Poisson activation traffic, replica placement, and buffer synthesis.

Each activation transmits one command unit ``[start | iota codewords | tail]``
as N_rep identical replicas in distinct slots of its virtual frame.  Bits map
to BPSK symbols as ``b -> 1 - 2b`` (0 -> +1); the known start/tail sequences
are fixed network-wide and unpack MSB-first from their hex form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from . import ldpc
from .config import SimConfig

START_HEX = "1C71B91BA9BA8457B4BC5054BFD05540"
TAIL_HEX = "AA6CCB0CC243AC5F39DC7AF4640B5D95"


def hex_to_bits(hex_string: str) -> np.ndarray:
    """MSB-first bit unpacking of a hex string."""
    data = bytes.fromhex(hex_string)
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_symbols(bits: np.ndarray) -> np.ndarray:
    """BPSK map: bit 0 -> +1, bit 1 -> -1."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


START_BITS = hex_to_bits(START_HEX)
TAIL_BITS = hex_to_bits(TAIL_HEX)
START_SYMBOLS = bits_to_symbols(START_BITS)
TAIL_SYMBOLS = bits_to_symbols(TAIL_BITS)


@dataclass
class Activation:
    """One device activation and everything needed to place its replicas."""

    tau_u: int                 # activation instant in [0, T_act - 1]
    iota_u: int                # codewords in the command unit
    payload: np.ndarray        # (iota_u * k,) information bits
    slots: np.ndarray          # (N_rep,) distinct slot indices in [1, N_slot]
    offsets: np.ndarray        # (N_rep,) in-slot offsets in [0, O_max(iota)]
    budget: ch.LinkBudget      # shared large-scale state
    channels: list             # N_rep independent ChannelRealization

    def replica_starts(self, L_max: int) -> np.ndarray:
        return self.tau_u + (self.slots - 1) * L_max + self.offsets

    def tail_starts(self, frame) -> np.ndarray:
        return self.replica_starts(frame.L_max) + frame.tail_distance(self.iota_u)

    def unit_length(self, frame) -> int:
        return frame.unit_length(self.iota_u)


@dataclass
class Scenario:
    """One superframe worth of activations plus boundary ground truth."""

    activations: list
    cfg: SimConfig
    start_truth: np.ndarray = field(default=None)  # (N_rep * A,) replica starts
    tail_truth: np.ndarray = field(default=None)   # (N_rep * A,) tail starts
    truth_act: np.ndarray = field(default=None)    # activation index per entry

    def __post_init__(self):
        if self.start_truth is None:
            frame = self.cfg.frame
            starts, tails, owners = [], [], []
            for idx, act in enumerate(self.activations):
                starts.append(act.replica_starts(frame.L_max))
                tails.append(act.tail_starts(frame))
                owners.append(np.full(len(act.slots), idx))
            if self.activations:
                self.start_truth = np.concatenate(starts)
                self.tail_truth = np.concatenate(tails)
                self.truth_act = np.concatenate(owners)
            else:
                self.start_truth = np.empty(0, dtype=np.int64)
                self.tail_truth = np.empty(0, dtype=np.int64)
                self.truth_act = np.empty(0, dtype=np.int64)


@dataclass
class ReceivedBuffer:
    """R x T_SF complex samples observed by the receiving controller."""

    samples: np.ndarray


def draw_activation(tau: int, cfg: SimConfig, rng: np.random.Generator) -> Activation:
    """All per-activation randomness in a fixed draw order (replayable)."""
    frame, radio = cfg.frame, cfg.radio
    iota = int(rng.integers(1, frame.iota_max + 1))
    slots = np.sort(rng.choice(frame.N_slot, size=frame.N_rep, replace=False)) + 1
    offsets = rng.integers(0, frame.offset_max(iota) + 1, size=frame.N_rep)
    payload = rng.integers(0, 2, size=iota * frame.k, dtype=np.uint8)
    d_i = ch.draw_distance(radio, rng)
    budget = ch.received_power(d_i, radio, rng.standard_normal())
    budget = ch.fill_budget(budget, radio.K_lin, rng)
    channels = [ch.draw_channel(budget, radio.R, rng) for _ in range(frame.N_rep)]
    return Activation(tau_u=tau, iota_u=iota, payload=payload, slots=slots,
                      offsets=offsets, budget=budget, channels=channels)


def generate_scenario(cfg: SimConfig, rng: np.random.Generator) -> Scenario:
    """Poisson(lambda) activations at every admissible instant."""
    counts = rng.poisson(cfg.traffic.lam, size=cfg.T_act)
    activations = []
    for tau in np.flatnonzero(counts):
        for _ in range(counts[tau]):
            activations.append(draw_activation(int(tau), cfg, rng))
    return Scenario(activations=activations, cfg=cfg)


def waveform(activation: Activation, cfg: SimConfig,
             code: ldpc.ParityCheckMatrix | None = None) -> np.ndarray:
    """BPSK symbols of the full command unit (identical for every replica)."""
    code = code or ldpc.ParityCheckMatrix.default()
    k = cfg.frame.k
    if activation.payload.size != activation.iota_u * k:
        raise ValueError("payload length must be iota_u * k")
    blocks = [START_SYMBOLS]
    for j in range(activation.iota_u):
        word = code.encode(activation.payload[j * k:(j + 1) * k])
        blocks.append(bits_to_symbols(word))
    blocks.append(TAIL_SYMBOLS)
    return np.concatenate(blocks)


def synthesize(scenario: Scenario, rng: np.random.Generator,
               code: ldpc.ParityCheckMatrix | None = None) -> ReceivedBuffer:
    """Superpose all replicas at their placements and add AWGN."""
    cfg = scenario.cfg
    samples = np.zeros((cfg.radio.R, cfg.frame.T_SF), dtype=np.complex128)
    code = code or ldpc.ParityCheckMatrix.default()
    for act in scenario.activations:
        x = waveform(act, cfg, code)
        for start, real in zip(act.replica_starts(cfg.L_max), act.channels):
            samples[:, start:start + x.size] += real.h[:, None] * x[None, :]
    return ReceivedBuffer(samples=ch.apply_awgn(samples, cfg.radio.sigma_w2, rng))


def make_single_unit_scenario(cfg: SimConfig, rng: np.random.Generator,
                              tau: int | None = None,
                              iota: int | None = None) -> Scenario:
    """One isolated activation; placement randomness as in normal traffic."""
    act = draw_activation(int(rng.integers(0, cfg.T_act)) if tau is None else tau,
                          cfg, rng)
    if iota is not None:
        frame = cfg.frame
        act.iota_u = iota
        act.payload = rng.integers(0, 2, size=iota * frame.k, dtype=np.uint8)
        act.offsets = rng.integers(0, frame.offset_max(iota) + 1,
                                   size=frame.N_rep)
    return Scenario(activations=[act], cfg=cfg)


# -- scenario persistence (flat arrays, see docs/formats.md) ----------------

def save_scenario(path, scenario: Scenario) -> None:
    acts = scenario.activations
    n_rep = scenario.cfg.frame.N_rep
    payloads = (np.concatenate([a.payload for a in acts])
                if acts else np.empty(0, dtype=np.uint8))
    np.savez(
        path,
        tau_u=np.array([a.tau_u for a in acts], dtype=np.int64),
        iota_u=np.array([a.iota_u for a in acts], dtype=np.int64),
        payload=payloads,
        slots=np.array([a.slots for a in acts], dtype=np.int64).reshape(-1, n_rep),
        offsets=np.array([a.offsets for a in acts], dtype=np.int64).reshape(-1, n_rep),
        d_i=np.array([a.budget.d_i for a in acts]),
        gamma_i=np.array([a.budget.gamma_i for a in acts]),
        P_i=np.array([a.budget.P_i for a in acts]),
        K_i=np.array([a.budget.K_i for a in acts]),
        mu_i=np.array([a.budget.mu_i for a in acts], dtype=np.complex128),
        sigma_i2=np.array([a.budget.sigma_i2 for a in acts]),
        h=np.array([[c.h for c in a.channels] for a in acts],
                   dtype=np.complex128).reshape(len(acts), n_rep, -1),
    )


def load_scenario(path, cfg: SimConfig) -> Scenario:
    data = np.load(path)
    acts = []
    k = cfg.frame.k
    offset = 0
    for i in range(data["tau_u"].size):
        iota = int(data["iota_u"][i])
        budget = ch.LinkBudget(
            d_i=float(data["d_i"][i]), gamma_i=float(data["gamma_i"][i]),
            P_i=float(data["P_i"][i]), K_i=float(data["K_i"][i]),
            mu_i=complex(data["mu_i"][i]), sigma_i2=float(data["sigma_i2"][i]))
        channels = [ch.ChannelRealization(h=data["h"][i, r].copy())
                    for r in range(cfg.frame.N_rep)]
        acts.append(Activation(
            tau_u=int(data["tau_u"][i]), iota_u=iota,
            payload=data["payload"][offset:offset + iota * k].copy(),
            slots=data["slots"][i].copy(), offsets=data["offsets"][i].copy(),
            budget=budget, channels=channels))
        offset += iota * k
    return Scenario(activations=acts, cfg=cfg)
