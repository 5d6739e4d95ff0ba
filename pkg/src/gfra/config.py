"""Scenario parameters, derived frame quantities, and validation.

All timing is expressed in symbol intervals. A command unit is
``[start | iota codewords | tail]`` and every active device repeats it in
N_rep distinct slots of its virtual frame, so the frame geometry below is
the single source of truth for every other module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


class InvalidConfig(ValueError):
    """Raised when a configuration record violates an invariant."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class FrameConfig:
    """Frame geometry and coding parameters."""

    L_pre: int = 128    # start-sequence length, symbols
    L_code: int = 128   # codeword length, symbols
    L_tail: int = 128   # tail-sequence length, symbols
    k: int = 64         # information bits per codeword
    iota_max: int = 5   # max codewords per command unit
    N_slot: int = 10    # slots per virtual frame
    N_rep: int = 2      # replicas per activation
    T_SF: int = 10_000  # superframe length, symbols
    i_max: int = 20     # decoder iterations (fixed, no early stopping)

    @property
    def L_max(self) -> int:
        """Slot budget: longest possible command unit."""
        return self.L_pre + self.iota_max * self.L_code + self.L_tail

    @property
    def T_VF(self) -> int:
        """Virtual-frame span."""
        return self.N_slot * self.L_max

    @property
    def T_act(self) -> int:
        """Number of admissible activation instants: a device activating at
        the last one still fits its whole virtual frame in the superframe."""
        return self.T_SF - self.N_slot * self.L_max + 1

    def unit_length(self, iota: int) -> int:
        """Command-unit length for a payload of ``iota`` codewords."""
        return self.L_pre + iota * self.L_code + self.L_tail

    def tail_distance(self, iota: int) -> int:
        """Symbols from the start of a replica to the start of its tail."""
        return self.L_pre + iota * self.L_code

    def offset_max(self, iota: int) -> int:
        """Largest admissible in-slot offset for an ``iota``-codeword unit."""
        return self.L_max - self.unit_length(iota)


@dataclass(frozen=True)
class RadioConfig:
    """RF, channel-statistics, and deployment-geometry parameters."""

    R: int = 4               # receive antennas
    P_t: float = 0.075       # transmit power, W
    lambda_c: float = 0.125  # carrier wavelength, m
    d_ref: float = 1.0       # path-loss reference distance, m
    beta: float = 2.1        # path-loss exponent
    sigma_dB: float = 9.0    # log-normal shadowing std dev, dB
    K_dB: float = 4.0        # Rician K-factor, dB
    sigma_w2: float = 1e-15  # noise variance per antenna, W (-120 dBm)
    L_x: float = 6.0         # deployment volume, m
    L_y: float = 6.0
    L_z: float = 2.0

    @property
    def d_max(self) -> float:
        """Space diagonal of the deployment volume."""
        return math.sqrt(self.L_x**2 + self.L_y**2 + self.L_z**2)

    @property
    def K_lin(self) -> float:
        """Rician K-factor on a linear scale."""
        return 10.0 ** (self.K_dB / 10.0)


@dataclass(frozen=True)
class TrafficConfig:
    """Aggregate activation process."""

    lam: float = 1e-3  # mean activations per symbol interval ("lambda")
    seed: int = 0


@dataclass(frozen=True)
class SimConfig:
    """Validated bundle of the three records plus stored derived quantities."""

    frame: FrameConfig
    radio: RadioConfig
    traffic: TrafficConfig
    L_max: int = 0
    T_VF: int = 0
    T_act: int = 0
    d_max: float = 0.0


def validate(frame, radio=None, traffic=None) -> SimConfig:
    """Check every invariant and return a bundle with derived quantities.

    Accepts either the three records or an existing :class:`SimConfig`
    (revalidation of a validated bundle returns an equal bundle).

    Raises:
        InvalidConfig: naming the offending field.
    """
    if isinstance(frame, SimConfig):
        return validate(frame.frame, frame.radio, frame.traffic)

    for name in ("L_pre", "L_code", "L_tail", "k", "iota_max", "N_slot", "T_SF"):
        if getattr(frame, name) < 1:
            raise InvalidConfig(name, "must be >= 1")
    if frame.k > frame.L_code:
        raise InvalidConfig("k", "information length exceeds codeword length")
    if not 1 <= frame.N_rep <= frame.N_slot:
        raise InvalidConfig("N_rep", f"must be in [1, N_slot={frame.N_slot}]")
    if frame.i_max < 1:
        raise InvalidConfig("i_max", "must be >= 1")
    if frame.T_act < 1:
        raise InvalidConfig(
            "T_SF",
            f"superframe too short: T_act = {frame.T_act} < 1 "
            f"(need T_SF >= N_slot*L_max = {frame.N_slot * frame.L_max})",
        )

    if radio.R < 1:
        raise InvalidConfig("R", "must be >= 1")
    for name in ("P_t", "lambda_c", "d_ref", "sigma_w2", "L_x", "L_y", "L_z"):
        # sigma_w2 = 0 is allowed for noiseless studies
        low = 0.0 if name == "sigma_w2" else None
        value = getattr(radio, name)
        if low is None and value <= 0:
            raise InvalidConfig(name, "must be > 0")
        if low is not None and value < low:
            raise InvalidConfig(name, "must be >= 0")

    if traffic.lam < 0:
        raise InvalidConfig("lambda", "must be >= 0")

    return SimConfig(
        frame=frame,
        radio=radio,
        traffic=traffic,
        L_max=frame.L_max,
        T_VF=frame.T_VF,
        T_act=frame.T_act,
        d_max=radio.d_max,
    )


def default_config(lam: float = 1e-3, seed: int = 0) -> SimConfig:
    """Validated bundle for the reference indoor setup (all defaults)."""
    return validate(FrameConfig(), RadioConfig(), TrafficConfig(lam=lam, seed=seed))


# Config files are flat UTF-8 "key = value" lines with '#' comments.  Keys
# match the field names above; dB-valued keys carry a _dB suffix and powers
# are in watts unless the key carries a _dBm suffix.  "lambda" maps to
# TrafficConfig.lam (reserved word in Python).

_FRAME_KEYS = {"L_pre", "L_code", "L_tail", "k", "iota_max", "N_slot",
               "N_rep", "T_SF", "i_max"}
_RADIO_KEYS = {"R", "P_t", "lambda_c", "d_ref", "beta", "sigma_dB", "K_dB",
               "sigma_w2", "L_x", "L_y", "L_z"}
_INT_KEYS = _FRAME_KEYS | {"R", "seed"}


def _dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** (value_dbm / 10.0) * 1e-3


def load_config(path) -> SimConfig:
    """Parse a key-value config file; unset keys keep their defaults."""
    frame, radio, traffic = FrameConfig(), RadioConfig(), TrafficConfig()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfig(f"line {lineno}", f"expected 'key = value': {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key.endswith("_dBm"):
                key, value = key[:-4], str(_dbm_to_watts(float(value)))
            if key == "lambda":
                traffic = replace(traffic, lam=float(value))
            elif key == "seed":
                traffic = replace(traffic, seed=int(value))
            elif key in _FRAME_KEYS:
                frame = replace(frame, **{key: int(value)})
            elif key in _RADIO_KEYS:
                cast = int if key in _INT_KEYS else float
                radio = replace(radio, **{key: cast(value)})
            else:
                raise InvalidConfig(key, "unknown config key")
    return validate(frame, radio, traffic)
