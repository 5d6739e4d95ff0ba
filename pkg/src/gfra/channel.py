"""Rician block-fading channel with path loss, shadowing, and AWGN.

Convention: the scatter variance ``sigma_i2`` is per real dimension, so a
fading coefficient is ``mu + N(0, sigma_i2) + 1j*N(0, sigma_i2)`` and the
two defining identities hold exactly:

    P_i = 2 * sigma_i2 * (K_i + 1)        (total average received power)
    K_i = |mu_i|**2 / (2 * sigma_i2)      (LoS-to-scatter power ratio)

AWGN uses the circularly-symmetric convention: total variance ``sigma_w2``
per complex sample, split evenly between real and imaginary parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import RadioConfig

D_MIN = 0.1  # distance floor, m: keeps the path-loss law finite near zero


@dataclass(frozen=True)
class LinkBudget:
    """Large-scale link state shared by all replicas of one activation."""

    d_i: float        # transmitter-receiver distance, m
    gamma_i: float    # shadowing gain, linear
    P_i: float        # average received power, W
    K_i: float = 0.0  # Rician factor, linear
    mu_i: complex = 0.0       # LoS component (common random phase)
    sigma_i2: float = 0.0     # scatter variance per real dimension


@dataclass(frozen=True)
class ChannelRealization:
    """One block-static fading vector, one coefficient per receive antenna."""

    h: np.ndarray


def received_power(d_i: float, radio: RadioConfig, shadow_draw: float) -> LinkBudget:
    """Average received power from the distance-dependent path-loss law.

    ``shadow_draw`` is a standard-normal variate; the log-normal shadowing
    gain is 10^(sigma_dB * z / 10).
    """
    if d_i <= 0:
        raise ValueError("distance must be > 0")
    P_0 = radio.P_t * (radio.lambda_c / (4.0 * math.pi * radio.d_ref)) ** 2
    gamma_i = 10.0 ** (radio.sigma_dB * shadow_draw / 10.0)
    P_i = P_0 * gamma_i * (radio.d_ref / d_i) ** radio.beta
    return LinkBudget(d_i=d_i, gamma_i=gamma_i, P_i=P_i)


def rician_params(P_i: float, K_i: float, rng: np.random.Generator) -> tuple[complex, float]:
    """Split average power into an LoS component and scatter variance.

    The LoS phase is drawn uniform on [0, 2*pi) once per activation and is
    shared by all of its replicas.
    """
    if P_i <= 0:
        raise ValueError("P_i must be > 0")
    if K_i < 0:
        raise ValueError("K_i must be >= 0")
    sigma_i2 = P_i / (2.0 * (K_i + 1.0))
    magnitude = math.sqrt(2.0 * K_i * sigma_i2)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    return magnitude * complex(math.cos(phase), math.sin(phase)), sigma_i2


def fill_budget(budget: LinkBudget, K_i: float, rng: np.random.Generator) -> LinkBudget:
    """Attach Rician parameters to a budget produced by received_power."""
    mu_i, sigma_i2 = rician_params(budget.P_i, K_i, rng)
    return replace(budget, K_i=K_i, mu_i=mu_i, sigma_i2=sigma_i2)


def draw_channel(budget: LinkBudget, R: int, rng: np.random.Generator) -> ChannelRealization:
    """One independent fading vector: LoS plus per-antenna scatter."""
    scale = math.sqrt(budget.sigma_i2) if budget.sigma_i2 > 0 else 0.0
    g = scale * (rng.standard_normal(R) + 1j * rng.standard_normal(R))
    return ChannelRealization(h=budget.mu_i + g)


def draw_distance(radio: RadioConfig, rng: np.random.Generator) -> float:
    """Inter-controller distance for uniformly placed nodes, floored at D_MIN."""
    return rng.uniform(D_MIN, radio.d_max)


def apply_awgn(clean: np.ndarray, sigma_w2: float, rng: np.random.Generator) -> np.ndarray:
    """Add circularly symmetric complex noise, variance sigma_w2 per sample."""
    if sigma_w2 < 0:
        raise ValueError("sigma_w2 must be >= 0")
    if sigma_w2 == 0:
        return clean.copy()
    scale = math.sqrt(sigma_w2 / 2.0)
    noise = scale * (rng.standard_normal(clean.shape)
                     + 1j * rng.standard_normal(clean.shape))
    return clean + noise
